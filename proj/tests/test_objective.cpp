#include <doctest.h>

#include <random>

#include <gasgrid/errors.hpp>
#include <gasgrid/objective.hpp>

#include "support.hpp"

using namespace gasgrid;
using namespace fixtures;

namespace {

struct Run {
  Network net;
  Trajectory traj;
};

Run ramp_run(double dt, double horizon = 7200.0) {
  Network net = five_node(TimeSeries({0, 1800, 5400}, {-120, -120, -160}));
  ControlVector c = head_controls(net, horizon, 1800, 3e4);
  auto a = ModelAssignment::uniform(net, horizon, 3600, dt, ModelLevel::M3, 5e3);
  auto lay = std::make_shared<const SystemLayout>(net, a.blocks[0].pipes);
  auto init = steady_state(net, lay, c);
  Trajectory tr = simulate(net, a, c, init, {}, true);
  return {std::move(net), std::move(tr)};
}

FunctionalSpec mixed_spec() {
  FunctionalSpec s;
  s.node_terms.push_back({"T", Integrand::pressure_tracking, 2.0, TimeSeries::constant(40e5)});
  s.node_terms.push_back({"T", Integrand::flow_tracking, 0.3, TimeSeries::constant(-100.0)});
  s.pipe_terms.push_back({"P2", Integrand::pressure_tracking, 1e-3, TimeSeries::constant(45e5)});
  s.pipe_terms.push_back({"P1", Integrand::flow_tracking, 1e-4, TimeSeries::constant(90.0)});
  s.arc_terms.push_back({"C", Integrand::compressor_energy, 1e-6, {}});
  return s;
}

}  // namespace

TEST_CASE("quadrature exactness") {
  Run r = ramp_run(900.0);
  SUBCASE("perfect tracking") {
    FunctionalSpec s;
    s.node_terms.push_back({"S", Integrand::pressure_tracking, 1.0, TimeSeries::constant(50e5)});
    CHECK(evaluate(r.net, r.traj, s).total == doctest::Approx(0.0).scale(1.0));
  }
  SUBCASE("constant integrand") {
    FunctionalSpec s;
    s.node_terms.push_back({"A", Integrand::constant, 1.0, {}});
    CHECK(evaluate(r.net, r.traj, s).total == doctest::Approx(7200.0).epsilon(1e-14));
  }
  SUBCASE("missing target") {
    FunctionalSpec s;
    s.node_terms.push_back({"A", Integrand::pressure_tracking, 1.0, {}});
    try {
      evaluate(r.net, r.traj, s);
      FAIL("missing target accepted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::missing_target);
    }
  }
}

TEST_CASE("trapezoid error is second order for a quadratic in time") {
  // pressure ramps linearly at the source, tracked against a constant
  auto integral = [](double dt) {
    NetworkSpec s;
    s.nodes = {pressure_node("S", TimeSeries({0, 7200}, {50e5, 58e5})),
               flow_node("T", TimeSeries::constant(-20.0))};
    s.arcs = {pipe("P", "S", "T", 1e4)};
    Network net = build_network(s);
    auto a = ModelAssignment::uniform(net, 7200, 7200, dt, ModelLevel::M1, 1e4);
    auto lay = std::make_shared<const SystemLayout>(net, a.blocks[0].pipes);
    Trajectory tr = simulate(net, a, {}, steady_state(net, lay, {}), {}, true);
    FunctionalSpec f;
    f.node_terms.push_back({"S", Integrand::pressure_tracking, 1.0, TimeSeries::constant(49e5)});
    return evaluate(net, tr, f).total;
  };
  // exact: int_0^T (1 + 8 t/T)^2 dt in bar^2 s
  const double exact = 7200.0 * (std::pow(9.0, 3) - 1.0) / 24.0;
  double prev = 0.0;
  for (double dt : {1800.0, 900.0, 450.0}) {
    const double err = std::abs(integral(dt) - exact);
    if (prev > 0.0) CHECK(std::log2(prev / err) == doctest::Approx(2.0).epsilon(0.02));
    prev = err;
  }
}

TEST_CASE("linearity and block additivity") {
  Run r = ramp_run(900.0);
  const FunctionalSpec s = mixed_spec();
  const auto v = evaluate(r.net, r.traj, s);
  double sum = 0.0;
  for (double b : v.block_partials) sum += b;
  CHECK(rel_err(sum, v.total) < 1e-12);
  double parts = 0.0;
  for (auto* set : {&v.pipe_terms, &v.node_terms, &v.arc_terms}) {
    for (double x : *set) parts += x;
  }
  CHECK(rel_err(parts, v.total) < 1e-12);
  for (std::size_t b = 0; b < v.block_partials.size(); ++b) {
    CHECK(rel_err(evaluate_block(r.net, r.traj, s, b), v.block_partials[b]) < 1e-12);
  }
  FunctionalSpec other;
  other.node_terms.push_back({"J", Integrand::pressure_tracking, 1.0, TimeSeries::constant(42e5)});
  const double combined = evaluate(r.net, r.traj, s.scaled(2.5).concat(other.scaled(-0.5))).total;
  CHECK(rel_err(combined, 2.5 * v.total - 0.5 * evaluate(r.net, r.traj, other).total) < 1e-12);
}

TEST_CASE("state gradient") {
  Run r = ramp_run(900.0);
  SUBCASE("zero weights") {
    const auto g = state_gradient(r.net, r.traj, mixed_spec().scaled(0.0));
    for (const auto& v : g) CHECK(v.lpNorm<Eigen::Infinity>() == 0.0);
  }
  SUBCASE("locality") {
    FunctionalSpec s;
    s.node_terms.push_back({"J", Integrand::pressure_tracking, 1.0, TimeSeries::constant(40e5)});
    const auto g = state_gradient(r.net, r.traj, s);
    const std::size_t idx = r.traj.layout_of(3).node_p(r.net.node_index("J"));
    for (Eigen::Index i = 0; i < g[3].size(); ++i) {
      if (static_cast<std::size_t>(i) != idx) CHECK(g[3][i] == 0.0);
    }
    CHECK(g[3][static_cast<Eigen::Index>(idx)] != 0.0);
  }
  SUBCASE("directional derivative matches central differences") {
    const FunctionalSpec s = mixed_spec();
    const auto g = state_gradient(r.net, r.traj, s);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    std::vector<Eigen::VectorXd> dir(r.traj.size());
    double analytic = 0.0;
    for (std::size_t n = 0; n < r.traj.size(); ++n) {
      dir[n] = Eigen::VectorXd::NullaryExpr(r.traj.steps[n].x.size(), [&]() { return nd(rng); });
      analytic += g[n].dot(dir[n]);
    }
    auto shifted = [&](double h) {
      Trajectory t = r.traj;
      for (std::size_t n = 0; n < t.size(); ++n) t.steps[n].x += h * dir[n];
      return evaluate(r.net, t, s).total;
    };
    const double h = 1e-4;
    const double fd = (shifted(h) - shifted(-h)) / (2 * h);
    CHECK(rel_err(analytic, fd) <= 1e-6);
  }
}

TEST_CASE("halving dt converges at first order") {
  FunctionalSpec s;
  s.node_terms.push_back({"T", Integrand::pressure_tracking, 1.0, TimeSeries::constant(40e5)});
  std::vector<double> m;
  for (double dt : {1800.0, 900.0, 450.0, 225.0}) {
    Run r = ramp_run(dt);
    m.push_back(evaluate(r.net, r.traj, s).total);
  }
  for (std::size_t k = 2; k < m.size(); ++k) {
    const double order = std::log2(std::abs(m[k - 2] - m[k - 1]) / std::abs(m[k - 1] - m[k]));
    CHECK(order >= 0.9);
  }
}
