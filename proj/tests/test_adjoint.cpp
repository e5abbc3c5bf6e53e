#include <doctest.h>

#include <Eigen/SparseLU>

#include <gasgrid/adjoint.hpp>

#include "support.hpp"

using namespace gasgrid;
using namespace fixtures;

namespace {

struct Run {
  Network net;
  Trajectory traj;
};

Run five_node_run(ModelLevel level, bool steady_initial) {
  Network net = five_node(TimeSeries({0, 1800, 5400, 7200}, {-120, -120, -170, -150}));
  ControlVector c;
  c.add({ControlKind::compressor_head, net.arc_index("C"),
         TimeSeries({0, 1800, 3600, 5400, 7200}, {3e4, 3.2e4, 3.5e4, 3.3e4, 3e4}), 0, 1.5e5, 1e4});
  auto a = ModelAssignment::uniform(net, 7200, 3600, 600, level, 5e3);
  a.blocks[1].pipes[net.arc_index("P2")] = {ModelLevel::M1, 8};
  auto lay = std::make_shared<const SystemLayout>(net, a.blocks[0].pipes);
  auto init = steady_state(net, lay, c);
  Trajectory tr = simulate(net, a, c, init, {}, steady_initial);
  return {std::move(net), std::move(tr)};
}

FunctionalSpec tracking_and_energy() {
  FunctionalSpec s;
  s.node_terms.push_back({"T", Integrand::pressure_tracking, 1.0, TimeSeries::constant(40e5)});
  s.pipe_terms.push_back({"P3", Integrand::flow_tracking, 1e-4, TimeSeries::constant(60.0)});
  s.arc_terms.push_back({"C", Integrand::compressor_energy, 1e-7, {}});
  return s;
}

}  // namespace

TEST_CASE("zero functional gives zero multipliers") {
  Run r = five_node_run(ModelLevel::M3, true);
  FunctionalSpec s = tracking_and_energy().scaled(0.0);
  auto adj = solve_discrete_adjoint(r.net, r.traj, s);
  for (const auto& m : adj.mu) {
    if (m.size()) CHECK(m.lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("single step adjoint solves the transposed system") {
  Run r = five_node_run(ModelLevel::M2, false);
  std::vector<Eigen::VectorXd> seeds(r.traj.size());
  for (std::size_t n = 0; n < r.traj.size(); ++n) seeds[n] = Eigen::VectorXd::Zero(r.traj.steps[n].x.size());
  seeds[2].setLinSpaced(seeds[2].size(), -1.0, 1.0);
  auto adj = solve_discrete_adjoint(r.net, r.traj, seeds, 2, 2);
  const auto in = r.traj.input(r.net, 2);
  auto ev = assemble_system(in, r.traj.old_state(2), r.traj.steps[2].x, true);
  Eigen::VectorXd back = ev.jacobian.transpose() * adj.mu[2];
  CHECK((back - seeds[2]).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("adjoint gradients match central differences on the frozen discretization") {
  for (bool steady : {true, false}) {
    CAPTURE(steady);
    Run r = five_node_run(ModelLevel::M3, steady);
    const auto check = gradient_check(r.net, r.traj, tracking_and_energy());
    for (std::size_t k = 0; k < check.labels.size(); ++k) {
      CAPTURE(check.labels[k]);
      CAPTURE(check.adjoint[k]);
      CAPTURE(check.finite_difference[k]);
      CHECK(check.rel_error[k] <= 1e-5);
    }
  }
}

TEST_CASE("control independent integrand has zero control gradient") {
  Run r = five_node_run(ModelLevel::M2, true);
  FunctionalSpec c;
  c.node_terms.push_back({"A", Integrand::constant, 1.0, {}});
  CHECK(functional_control_gradient(r.net, r.traj, c).lpNorm<Eigen::Infinity>() == 0.0);
}
