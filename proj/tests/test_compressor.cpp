#include <doctest.h>

#include <random>

#include <gasgrid/compressor.hpp>
#include <gasgrid/errors.hpp>

#include "field_oracle.hpp"
#include "support.hpp"

using namespace gasgrid;
using namespace fixtures;

namespace {

CharacteristicField three_configurations() {
  CharacteristicField f;
  f.id = "synthetic";
  f.polygons.push_back({{{50, 2e4}, {150, 2e4}, {130, 6e4}, {60, 6e4}}});
  f.polygons.push_back({{{100, 4e4}, {250, 4e4}, {220, 9e4}, {120, 9e4}}});
  f.polygons.push_back({{{280, 1e4}, {350, 1e4}, {340, 5e4}, {290, 5e4}}});
  return f;
}

}  // namespace

TEST_CASE("rectangle is its own semiconvex hull") {
  auto sc = build_semiconvex(box_field("r", 1.0, 2.0, 10.0, 20.0), 2);
  REQUIRE(sc.levels == std::vector<double>{10.0, 20.0});
  CHECK(sc.q_lo == std::vector<double>{1.0, 1.0});
  CHECK(sc.q_hi == std::vector<double>{2.0, 2.0});
  CHECK(sc.absorbed_hole_levels == 0);
  CHECK(contains(sc, 1.5, 15.0) == doctest::Approx(0.5));
  CHECK(contains(sc, 1.5, 8.0) == doctest::Approx(-2.0));
  auto c = constraint_values(sc, 2.0, 12.0);
  CHECK(c.values[3] == 0.0);
  for (double v : constraint_values(sc, 1.5, 15.0).values) CHECK(v > 0.0);
}

TEST_CASE("holes between configurations are absorbed") {
  CharacteristicField f;
  f.id = "gap";
  f.polygons.push_back({{{0, 0}, {1, 0}, {1, 10}, {0, 10}}});
  f.polygons.push_back({{{3, 0}, {4, 0}, {4, 10}, {3, 10}}});
  auto sc = build_semiconvex(f, 5);
  for (std::size_t k = 0; k < sc.levels.size(); ++k) {
    CHECK(sc.q_lo[k] == 0.0);
    CHECK(sc.q_hi[k] == 4.0);
  }
  CHECK(sc.absorbed_hole_levels == 5);
  CHECK(contains(sc, 2.0, 5.0) > 0.0);
}

TEST_CASE("empty and degenerate fields") {
  CharacteristicField f;
  f.id = "none";
  CHECK_THROWS_AS(build_semiconvex(f, 8), Error);
  f.polygons.push_back({{{0, 1}, {1, 1}, {2, 1}}});
  try {
    build_semiconvex(f, 8);
    FAIL("flat field accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::empty_field);
  }
}

TEST_CASE("slices are intervals: convex combinations stay feasible") {
  auto sc = build_semiconvex(three_configurations(), 32);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uq(0.0, 400.0), uh(0.0, 1e5), ul(0.0, 1.0);
  int tested = 0;
  while (tested < 2000) {
    const double h = uh(rng), q1 = uq(rng), q2 = uq(rng);
    if (contains(sc, q1, h) < 0.0 || contains(sc, q2, h) < 0.0) continue;
    const double l = ul(rng);
    CHECK(contains(sc, l * q1 + (1.0 - l) * q2, h) >= 0.0);
    ++tested;
  }
}

TEST_CASE("level bounds coincide with exact slice extrema") {
  const auto f = three_configurations();
  auto sc = build_semiconvex(f, 32);
  CHECK(sc.absorbed_hole_levels > 0);
  for (std::size_t k = 0; k < sc.levels.size(); ++k) {
    const auto r = raster_slice(f, sc.levels[k], 0.0, 400.0, 40000);
    REQUIRE(r.any);
    CHECK(std::abs(r.lo - sc.q_lo[k]) <= 0.01 + 1e-9);
    CHECK(std::abs(r.hi - sc.q_hi[k]) <= 0.01 + 1e-9);
  }
}

TEST_CASE("constraint gradients match finite differences") {
  auto sc = build_semiconvex(three_configurations(), 32);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uq(60.0, 300.0), uh(1.2e4, 8.8e4);
  int checked = 0;
  for (int i = 0; i < 200; ++i) {
    const double q = uq(rng), h = uh(rng);
    const double eps_h = 1e-3, eps_q = 1e-6;
    // stay away from level kinks
    const double spacing = sc.levels[1] - sc.levels[0];
    const double frac = (h - sc.levels[0]) / spacing - std::floor((h - sc.levels[0]) / spacing);
    if (frac < 0.01 || frac > 0.99) continue;
    const auto c = constraint_values(sc, q, h);
    const auto cq = constraint_values(sc, q + eps_q, h), cqm = constraint_values(sc, q - eps_q, h);
    const auto ch = constraint_values(sc, q, h + eps_h), chm = constraint_values(sc, q, h - eps_h);
    for (int k = 0; k < 4; ++k) {
      const double dq = (cq.values[k] - cqm.values[k]) / (2 * eps_q);
      const double dh = (ch.values[k] - chm.values[k]) / (2 * eps_h);
      CHECK(std::abs(dq - c.gradients[k][0]) <= 1e-8 * std::max(1.0, std::abs(dq)));
      CHECK(std::abs(dh - c.gradients[k][1]) <= 1e-8 * std::max(1.0, std::abs(dh)));
    }
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("compression power") {
  CHECK(power(1.0, 0.0, 3.0, 0.8) == 0.0);
  CHECK(power(1.0, 2.0, 3.0, 1.0) == 6.0);
  CHECK(power(0.7, 2.0, 3.0, 0.4) == doctest::Approx(2.0 * power(0.7, 2.0, 3.0, 0.8)));
  CHECK(volumetric_flow(10.0, 40.0, 0.8) == doctest::Approx(0.2));
}

TEST_CASE("head to pressure ratio") {
  GasProperties gas;
  gas.eos = {EquationOfState::Kind::affine, 0.95, 2e-9};
  const double p = 50e5, h = 4e4;
  const auto r = compressor_ratio(h, p, gas);
  CHECK(r.ratio > 1.0);
  CHECK(compressor_head(r.ratio, p, gas) == doctest::Approx(h).epsilon(1e-12));
  CHECK(compressor_ratio(0.0, p, gas).ratio == 1.0);
  const double e = 1.0;
  CHECK(r.d_dh == doctest::Approx((compressor_ratio(h + e, p, gas).ratio -
                                   compressor_ratio(h - e, p, gas).ratio) / (2 * e)).epsilon(1e-7));
  const double ep = 10.0;
  CHECK(r.d_dpin == doctest::Approx((compressor_ratio(h, p + ep, gas).ratio -
                                     compressor_ratio(h, p - ep, gas).ratio) / (2 * ep)).epsilon(1e-6));
}
