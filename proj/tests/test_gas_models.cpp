#include <doctest.h>

#include <cmath>

#include <gasgrid/errors.hpp>
#include <gasgrid/gas_models.hpp>

#include "support.hpp"

using namespace gasgrid;

TEST_CASE("flux hierarchy") {
  PipeParameters par;
  par.area = 0.5;
  par.rho0 = 0.8;
  par.c = 340.0;
  auto f2 = flux(ModelLevel::M2, {50e5, 0.0}, par);
  auto f3 = flux(ModelLevel::M3, {50e5, 0.0}, par);
  CHECK(f2[0] == 0.0);
  CHECK(f2[1] == doctest::Approx(0.5 / 0.8 * 50e5));
  CHECK(f2 == f3);

  const double p = 50e5, q = 100.0;
  const double k = 0.8 * 340.0 * 340.0 / 0.5;
  auto m3 = flux(ModelLevel::M3, {p, q}, par);
  CHECK(m3[0] == doctest::Approx(k * q).epsilon(1e-14));
  CHECK(m3[1] == doctest::Approx(0.5 / 0.8 * p + k * q * q / p).epsilon(1e-14));
  CHECK_THROWS_AS(flux(ModelLevel::M3, {0.0, q}, par), Error);
  CHECK_THROWS_AS(flux(ModelLevel::M1, {p, q}, par), Error);
}

TEST_CASE("friction source") {
  PipeParameters par;
  par.lambda = 0.011;
  par.diameter = 0.8;
  par.area = 0.5027;
  par.c = 340.0;
  par.rho0 = 0.785;
  CHECK(source({60e5, 0.0}, par)[1] == 0.0);
  CHECK(source({60e5, -50.0}, par)[1] == -source({60e5, 50.0}, par)[1]);
  const double expected = -0.011 * 0.785 * 340.0 * 340.0 * 50.0 * 50.0 / (2.0 * 0.8 * 0.5027 * 60e5);
  CHECK(source({60e5, 50.0}, par)[1] == doctest::Approx(expected).epsilon(1e-14));
  CHECK(source({60e5, 60.0}, par)[1] < source({60e5, 50.0}, par)[1]);
  CHECK_THROWS_AS(source({-1.0, 1.0}, par), Error);
}

TEST_CASE("algebraic pipe law") {
  PipeParameters par;
  par.length = 1e4;
  par.lambda = 0.011;
  par.diameter = 0.8;
  par.area = 0.5027;
  par.c = 340.0;
  par.rho0 = 0.785;
  CHECK(m1_pout(60e5, 0.0, par) == 60e5);
  CHECK(m1_pout(60e5, -100.0, par) > 60e5);
  const double k = 0.011 * 0.785 * 0.785 * 340.0 * 340.0 * 1e4 / (0.8 * 0.5027 * 0.5027);
  CHECK(m1_pout(60e5, 100.0, par) == doctest::Approx(std::sqrt(3.6e13 - k * 1e4)).epsilon(1e-14));
  try {
    m1_pout(1e5, 1e4, par);
    FAIL("expected radicand error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::radicand_nonpositive);
  }
}

TEST_CASE("compressibility") {
  EquationOfState ideal;
  CHECK(compressibility(70e5, ideal) == 1.0);
  EquationOfState affine{EquationOfState::Kind::affine, 0.95, 0.0};
  CHECK(compressibility(10e5, affine) == 0.95);
  CHECK(compressibility(90e5, affine) == 0.95);
  affine.alpha = 2e-9;
  CHECK(compressibility(50e5, affine) == doctest::Approx(0.94).epsilon(1e-14));
  affine.alpha = 1e-6;
  CHECK_THROWS_AS(compressibility(50e5, affine), Error);
}

TEST_CASE("Nikuradse law and density") {
  const double lam = nikuradse_lambda(0.8, 1.2e-5);
  CHECK(lam == doctest::Approx(1.0 / std::pow(2.0 * std::log10(0.8 / 1.2e-5) + 1.138, 2)));
  CHECK(lam > 0.005);
  CHECK(lam < 0.02);
  GasProperties gas;
  CHECK(gas_density(60e5, gas) == doctest::Approx(60e5 / (340.0 * 340.0)));
}
