#include <doctest.h>

#include <gasgrid/adaptivity.hpp>

#include "support.hpp"

using namespace gasgrid;
using namespace fixtures;

namespace {

struct Run {
  double value;
  Trajectory traj;
};

Run run_pipe(const Network& net, ModelLevel level, std::size_t cells, double dt,
             const FunctionalSpec& spec, double horizon = 7200.0) {
  auto a = ModelAssignment::uniform(net, horizon, horizon, dt, level, 1e9);
  for (auto& b : a.blocks) b.pipes[0].n_cells = cells;
  auto lay = std::make_shared<const SystemLayout>(net, a.blocks[0].pipes);
  Trajectory tr = simulate(net, a, {}, steady_state(net, lay, {}), {}, true);
  return {evaluate(net, tr, spec).total, std::move(tr)};
}

Network fast_pipe() {
  return single_pipe(20e3, 10e5, TimeSeries({0, 1800, 3600, 7200}, {-3, -3, -6, -6}), 0.3);
}

FunctionalSpec outlet_tracking(double target) {
  FunctionalSpec s;
  s.node_terms.push_back({"T", Integrand::pressure_tracking, 1.0, TimeSeries::constant(target)});
  return s;
}

ErrorEstimate estimate(const Network& net, const Trajectory& tr, const FunctionalSpec& s) {
  return estimate_errors(net, tr, s, solve_block_adjoint(net, tr, s, 0), 0);
}

ErrorEstimate zero_estimate(const Network& net) {
  ErrorEstimate e;
  e.eta_model.assign(net.arc_count(), 0.0);
  e.eta_dx.assign(net.arc_count(), 0.0);
  e.eta_dt.assign(net.arc_count(), 0.0);
  e.coarsen_model.assign(net.arc_count(), 0.0);
  return e;
}

AdaptLimits limits_for(const Network& net, const BlockAssignment& b) {
  AdaptLimits l;
  l.dt_max = b.dt;
  l.dt_min = b.dt / 16.0;
  l.base_cells.resize(net.arc_count());
  for (std::size_t a = 0; a < net.arc_count(); ++a) l.base_cells[a] = b.pipes[a].n_cells;
  return l;
}

}  // namespace

TEST_CASE("model estimator conventions") {
  const Network net = fast_pipe();
  const FunctionalSpec s = outlet_tracking(5e5);
  SUBCASE("pipe at M3 has no upgrade") {
    Run r = run_pipe(net, ModelLevel::M3, 8, 300, s);
    CHECK(estimate(net, r.traj, s).eta_model[0] == 0.0);
  }
  SUBCASE("steady flow on an algebraic pipe") {
    const Network steady = single_pipe(20e3, 10e5, TimeSeries::constant(-4.0), 0.3);
    Run r = run_pipe(steady, ModelLevel::M1, 8, 600, s);
    const double scale = std::abs(r.value);
    CHECK(std::abs(estimate(steady, r.traj, s).eta_model[0]) <= 1e-10 * scale);
  }
}

TEST_CASE("effectivity against the true functional change") {
  const Network net = fast_pipe();
  const FunctionalSpec s = outlet_tracking(5e5);
  Run m2 = run_pipe(net, ModelLevel::M2, 8, 300, s);
  const ErrorEstimate e = estimate(net, m2.traj, s);
  SUBCASE("M2 to M3") {
    const double gap = run_pipe(net, ModelLevel::M3, 8, 300, s).value - m2.value;
    REQUIRE(gap != 0.0);
    const double eff = e.sum_model() / gap;
    CAPTURE(eff);
    CHECK(eff >= 0.2);
    CHECK(eff <= 5.0);
  }
  SUBCASE("M1 to M2") {
    Run m1 = run_pipe(net, ModelLevel::M1, 8, 300, s);
    const double eff = estimate(net, m1.traj, s).sum_model() / (m2.value - m1.value);
    CAPTURE(eff);
    CHECK(eff >= 0.2);
    CHECK(eff <= 5.0);
  }
  SUBCASE("halved cells") {
    const double eff = e.sum_dx() / (run_pipe(net, ModelLevel::M2, 16, 300, s).value - m2.value);
    CAPTURE(eff);
    CHECK(eff >= 0.5);
    CHECK(eff <= 2.0);
  }
  SUBCASE("halved step") {
    const double eff = e.dt_total() / (run_pipe(net, ModelLevel::M2, 8, 150, s).value - m2.value);
    CAPTURE(eff);
    CHECK(eff >= 0.2);
    CHECK(eff <= 5.0);
  }
}

TEST_CASE("estimate is bit-identical across repeated evaluation") {
  const Network net = fast_pipe();
  const FunctionalSpec s = outlet_tracking(5e5);
  Run r = run_pipe(net, ModelLevel::M2, 8, 300, s);
  const ErrorEstimate a = estimate(net, r.traj, s);
  const ErrorEstimate b = estimate(net, r.traj, s);
  CHECK(a.eta_model == b.eta_model);
  CHECK(a.eta_dx == b.eta_dx);
  CHECK(a.eta_dt == b.eta_dt);
  CHECK(a.eta_dt_nodes == b.eta_dt_nodes);
}

TEST_CASE("adapt decisions") {
  const Network net = five_node(TimeSeries::constant(-120.0));
  auto a = ModelAssignment::uniform(net, 7200, 7200, 1800, ModelLevel::M1, 1e4);
  const BlockAssignment cur = a.blocks[0];
  const AdaptLimits lim = limits_for(net, cur);
  const AdaptOptions opts;
  const std::size_t p1 = net.arc_index("P1"), p2 = net.arc_index("P2"), p3 = net.arc_index("P3");

  SUBCASE("zero estimates") {
    const ErrorEstimate e = zero_estimate(net);
    CHECK(adapt(net, e, 1.0, cur, lim, opts, false) == cur);
    // already at the coarsest level and step
    CHECK(adapt(net, e, 1.0, cur, lim, opts, true) == cur);
  }
  SUBCASE("dominant pipe is upgraded alone") {
    ErrorEstimate e = zero_estimate(net);
    e.eta_model[p2] = 10.0;
    e.eta_model[p1] = 0.01;
    const BlockAssignment next = adapt(net, e, 1.0, cur, lim, opts, false);
    CHECK(next.pipes[p2].level == ModelLevel::M2);
    CHECK(next.pipes[p1].level == ModelLevel::M1);
    CHECK(next.dt == cur.dt);
  }
  SUBCASE("offenders are taken by size then arc id") {
    ErrorEstimate e = zero_estimate(net);
    e.eta_model[p3] = 0.5;
    e.eta_model[p1] = 0.5;
    // budget share 1/3: removing one of the two is not enough, both go
    BlockAssignment next = adapt(net, e, 0.9, cur, lim, opts, false);
    CHECK(next.pipes[p1].level == ModelLevel::M2);
    CHECK(next.pipes[p3].level == ModelLevel::M2);
    // a share of 0.6 needs only one: the lower arc id wins the tie
    e.eta_dt_nodes = 1.0;
    next = adapt(net, e, 1.8, cur, lim, opts, false);
    CHECK(next.pipes[p1].level == ModelLevel::M2);
    CHECK(next.pipes[p3].level == ModelLevel::M1);
  }
  SUBCASE("time estimate halves the step once") {
    ErrorEstimate e = zero_estimate(net);
    e.eta_dt_nodes = -5.0;
    const BlockAssignment next = adapt(net, e, 1.0, cur, lim, opts, false);
    CHECK(next.dt == cur.dt / 2);
    CHECK(next.pipes == cur.pipes);
  }
  SUBCASE("within thresholds nothing moves") {
    BlockAssignment fine = cur;
    fine.dt /= 4;
    for (auto& p : fine.pipes) {
      p.level = ModelLevel::M2;
      p.n_cells *= 2;
    }
    ErrorEstimate e = zero_estimate(net);
    e.eta_model[p1] = 0.2;
    e.eta_dx[p2] = -0.2;
    e.eta_dt[p3] = 0.2;
    e.coarsen_model[p1] = 0.2;
    CHECK(adapt(net, e, 1.0, fine, lim, opts, false) == fine);
    CHECK(adapt(net, e, 1.0, fine, lim, opts, true) == fine);
  }
  SUBCASE("negligible estimates coarsen") {
    BlockAssignment fine = cur;
    fine.dt /= 4;
    for (auto& p : fine.pipes) {
      p.level = ModelLevel::M3;
      p.n_cells *= 2;
    }
    const ErrorEstimate e = zero_estimate(net);
    const BlockAssignment next = adapt(net, e, 1.0, fine, lim, opts, true);
    CHECK(next.dt == fine.dt * 2);
    CHECK(next.pipes[p1].level == ModelLevel::M2);
    CHECK(next.pipes[p1].n_cells == fine.pipes[p1].n_cells / 2);
  }
  SUBCASE("refinement respects the limits") {
    BlockAssignment fine = cur;
    fine.dt = lim.dt_min;
    for (std::size_t k = 0; k < fine.pipes.size(); ++k) {
      fine.pipes[k].level = ModelLevel::M3;
      fine.pipes[k].n_cells = lim.base_cells[k] << lim.max_dx_halvings;
    }
    ErrorEstimate e = zero_estimate(net);
    e.eta_dx[p1] = 100.0;
    e.eta_dt_nodes = 100.0;
    CHECK(adapt(net, e, 1.0, fine, lim, opts, false) == fine);
  }
}

TEST_CASE("adaptive simulation on the five node network") {
  const Network net = five_node(TimeSeries({0, 3600, 7200, 14400}, {-120, -120, -170, -150}));
  const ControlVector c = head_controls(net, 14400, 1800, 3e4);
  FunctionalSpec s;
  s.node_terms.push_back({"T", Integrand::pressure_tracking, 1.0, TimeSeries::constant(40e5)});
  AdaptiveOptions opts;
  opts.horizon = 14400;
  opts.block_length = 3600;
  auto lay = std::make_shared<const SystemLayout>(
      net, ModelAssignment::uniform(net, 14400, 3600, 3600, ModelLevel::M1, 1e4).blocks[0].pipes);
  const DiscreteState init = steady_state(net, lay, c);

  SUBCASE("huge tolerance keeps the coarsest setting") {
    opts.tol = 1e3;
    auto [traj, rep] = adaptive_simulate(net, c, s, init, opts);
    CHECK(rep.model_usage[0] == doctest::Approx(100.0));
    CHECK(rep.dt_max == 3600.0);
    CHECK(rep.dt_min == 3600.0);
    for (const auto& b : rep.blocks) CHECK(b.attempts == 0);
    CHECK(!rep.budget_unreachable);
  }
  SUBCASE("tight tolerance refines and is reproducible") {
    opts.tol = 1e-5;
    auto [t1, r1] = adaptive_simulate(net, c, s, init, opts);
    auto [t2, r2] = adaptive_simulate(net, c, s, init, opts);
    CHECK(t1.assignment == t2.assignment);
    CHECK(r1.functional == r2.functional);
    CHECK(r1.model_usage[0] < 100.0);
    CHECK(r1.dt_min < 3600.0);
    double sum = 0.0;
    for (const auto& b : r1.blocks) sum += b.functional;
    CHECK(rel_err(sum, r1.functional) < 1e-12);
  }
}

TEST_CASE("usage and reference assignment") {
  const Network net = five_node(TimeSeries::constant(-120.0));
  ModelAssignment a = ModelAssignment::uniform(net, 7200, 3600, 900, ModelLevel::M1, 1e4);
  a.blocks[1].pipes[net.arc_index("P1")].level = ModelLevel::M3;
  const auto u = model_usage(net, a);
  CHECK(u[0] == doctest::Approx(87.5));
  CHECK(u[2] == doctest::Approx(12.5));
  AdaptiveOptions opts;
  const ModelAssignment ref = reference_assignment(net, opts, 7200, 1, 2);
  CHECK(ref.blocks[0].dt == opts.dt0 / 16);
  CHECK(ref.blocks[0].pipes[net.arc_index("P2")].n_cells == 4 * 8);
  CHECK(ref.blocks[0].pipes[net.arc_index("P2")].level == ModelLevel::M3);
}
