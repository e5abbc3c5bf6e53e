#include "gasgrid/adjoint.hpp"

#include <string>

#include <Eigen/SparseLU>

#include "gasgrid/errors.hpp"
#include "gasgrid/parallel.hpp"

namespace gasgrid {

namespace {

std::size_t first_step_of(const Trajectory& traj, std::size_t block) {
  for (std::size_t n = 1; n < traj.size(); ++n) {
    if (traj.steps[n].block == block) return n;
  }
  throw Error(ErrorCode::invalid_argument, "block " + std::to_string(block) + " has no steps");
}

std::size_t last_step_of(const Trajectory& traj, std::size_t block) {
  for (std::size_t n = traj.size(); n-- > 1;) {
    if (traj.steps[n].block == block) return n;
  }
  throw Error(ErrorCode::invalid_argument, "block " + std::to_string(block) + " has no steps");
}

// Backward sweep for several right-hand sides at once.
std::vector<Eigen::MatrixXd> sweep(const Network& network, const Trajectory& traj,
                                   const std::vector<Eigen::MatrixXd>& seeds, std::size_t first,
                                   std::size_t last) {
  if (seeds.size() != traj.size()) {
    throw Error(ErrorCode::dimension_mismatch, "adjoint seeds need one entry per step");
  }
  if (last >= traj.size() || first > last) {
    throw Error(ErrorCode::invalid_argument, "adjoint step range out of bounds");
  }
  Eigen::Index cols = 0;
  for (std::size_t n = first; n <= last; ++n) cols = std::max(cols, seeds[n].cols());
  std::vector<Eigen::MatrixXd> mu(traj.size());
  Eigen::MatrixXd carry;  // (dR_{n+1}/dx_n)^T mu_{n+1}
  for (std::size_t n = last + 1; n-- > first;) {
    const auto size = static_cast<Eigen::Index>(traj.layout_of(n).size());
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(size, cols);
    if (seeds[n].size() > 0) {
      if (seeds[n].rows() != size) {
        throw Error(ErrorCode::dimension_mismatch, "adjoint seed size differs from the layout");
      }
      rhs.leftCols(seeds[n].cols()) = seeds[n];
    }
    if (carry.size() > 0) rhs -= carry;
    if (n == 0 && !traj.steady_initial) {
      mu[0] = Eigen::MatrixXd::Zero(size, cols);
      break;
    }
    const StepInput in = traj.input(network, n);
    const SystemEvaluation ev =
        n == 0 ? assemble_system(in, traj.steps[0].x, traj.steps[0].x, true)
               : assemble_system(in, traj.old_state(n), traj.steps[n].x, true);
    Eigen::SparseMatrix<double> jt = ev.jacobian.transpose();
    jt.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(jt);
    if (lu.info() != Eigen::Success) {
      throw Error(ErrorCode::singular_jacobian_transpose,
                  "step " + std::to_string(n) + " at t = " + std::to_string(traj.steps[n].t));
    }
    mu[n] = lu.solve(rhs);
    if (n == 0 || n == first) break;
    if (in.steady()) {
      carry.resize(0, 0);
      continue;
    }
    const Eigen::SparseMatrix<double> b = old_state_jacobian(in);
    Eigen::MatrixXd c = b.transpose() * mu[n];
    if (traj.transferred(n)) {
      const auto& tm = traj.transfers[traj.steps[n].block];
      carry = tm.transpose() * c;
    } else {
      carry = std::move(c);
    }
  }
  return mu;
}

}  // namespace

AdjointTrajectory solve_discrete_adjoint(const Network& network, const Trajectory& traj,
                                         const std::vector<Eigen::VectorXd>& seeds,
                                         std::size_t first, std::size_t last) {
  std::vector<Eigen::MatrixXd> s(seeds.size());
  for (std::size_t n = 0; n < seeds.size(); ++n) s[n] = seeds[n];
  auto m = sweep(network, traj, s, first, last);
  AdjointTrajectory out;
  out.first = first;
  out.last = last;
  out.mu.resize(traj.size());
  for (std::size_t n = 0; n < traj.size(); ++n) {
    if (m[n].size() > 0) out.mu[n] = m[n].col(0);
  }
  if (first == 0 && !traj.steady_initial) out.first = 1;
  return out;
}

AdjointTrajectory solve_discrete_adjoint(const Network& network, const Trajectory& traj,
                                         const FunctionalSpec& spec) {
  return solve_discrete_adjoint(network, traj, state_gradient(network, traj, spec), 0,
                                traj.size() - 1);
}

AdjointTrajectory solve_block_adjoint(const Network& network, const Trajectory& traj,
                                      const FunctionalSpec& spec, std::size_t block) {
  const std::size_t first = block == 0 && traj.steady_initial ? 0 : first_step_of(traj, block);
  return solve_discrete_adjoint(network, traj, state_gradient(network, traj, spec, block), first,
                                last_step_of(traj, block));
}

std::vector<Eigen::MatrixXd> solve_discrete_adjoint_batch(const Network& network,
                                                          const Trajectory& traj,
                                                          const std::vector<Eigen::MatrixXd>& seeds) {
  return sweep(network, traj, seeds, 0, traj.size() - 1);
}

Eigen::MatrixXd adjoint_control_term_batch(const Network& network, const Trajectory& traj,
                                           const std::vector<Eigen::MatrixXd>& mu) {
  Eigen::Index cols = 0;
  for (const auto& m : mu) cols = std::max(cols, m.cols());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(traj.controls.size()), cols);
  for (std::size_t n = 0; n < traj.size() && n < mu.size(); ++n) {
    if (mu[n].size() == 0) continue;
    const StepInput in = traj.input(network, n);
    for (const auto& s : traj.controls.series()) {
      const auto col = control_sensitivity(in, traj.steps[n].x, s.arc);
      if (col.empty()) continue;
      Eigen::RowVectorXd dot = Eigen::RowVectorXd::Zero(mu[n].cols());
      for (const auto& [row, v] : col) dot += v * mu[n].row(static_cast<Eigen::Index>(row));
      for (const auto& w : traj.controls.weights(s.arc, in.t)) {
        g.row(static_cast<Eigen::Index>(w.flat)).head(dot.size()) -= w.w * dot;
      }
    }
  }
  return g;
}

Eigen::VectorXd adjoint_control_term(const Network& network, const Trajectory& traj,
                                     const AdjointTrajectory& adj) {
  std::vector<Eigen::MatrixXd> mu(adj.mu.size());
  for (std::size_t n = 0; n < adj.mu.size(); ++n) {
    if (adj.mu[n].size() > 0) mu[n] = adj.mu[n];
  }
  Eigen::MatrixXd g = adjoint_control_term_batch(network, traj, mu);
  if (g.cols() == 0) return Eigen::VectorXd::Zero(g.rows());
  return g.col(0);
}

std::vector<BoundaryParameter> boundary_parameters(const Network& network) {
  std::vector<BoundaryParameter> out;
  for (std::size_t v = 0; v < network.node_count(); ++v) {
    const auto& b = network.node(v).boundary;
    if (!b) continue;
    for (std::size_t k = 0; k < b->profile.size(); ++k) out.push_back({v, k});
  }
  return out;
}

Eigen::VectorXd adjoint_boundary_term(const Network& network, const Trajectory& traj,
                                      const AdjointTrajectory& adj,
                                      const std::vector<BoundaryParameter>& params) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.size()));
  for (std::size_t n = 0; n < traj.size() && n < adj.mu.size(); ++n) {
    if (adj.mu[n].size() == 0) continue;
    const StepInput in = traj.input(network, n);
    for (std::size_t k = 0; k < params.size(); ++k) {
      const auto& prof = network.node(params[k].node).boundary->profile;
      std::size_t i0, i1;
      double w0, w1;
      prof.weights(in.t, i0, w0, i1, w1);
      double w = 0.0;
      if (i0 == params[k].breakpoint) w += w0;
      if (i1 == params[k].breakpoint && i1 != i0) w += w1;
      if (w == 0.0) continue;
      for (const auto& [row, v] : boundary_sensitivity(in, params[k].node)) {
        g[static_cast<Eigen::Index>(k)] -= w * v * adj.mu[n][static_cast<Eigen::Index>(row)];
      }
    }
  }
  return g;
}

Eigen::VectorXd functional_control_gradient(const Network& network, const Trajectory& traj,
                                            const FunctionalSpec& spec) {
  const AdjointTrajectory adj = solve_discrete_adjoint(network, traj, spec);
  return control_direct_gradient(network, traj, spec) + adjoint_control_term(network, traj, adj);
}

Eigen::VectorXd functional_boundary_gradient(const Network& network, const Trajectory& traj,
                                             const FunctionalSpec& spec,
                                             const std::vector<BoundaryParameter>& params) {
  const AdjointTrajectory adj = solve_discrete_adjoint(network, traj, spec);
  return adjoint_boundary_term(network, traj, adj, params);
}

}  // namespace gasgrid

namespace gasgrid {

namespace {

double resimulated_value(const Network& network, const Trajectory& base, const ControlVector& c,
                         const FunctionalSpec& spec) {
  SimulateOptions opts;
  opts.frozen = &base;
  const Trajectory tr = simulate(network, base.assignment, c, base.initial, opts, base.steady_initial);
  return evaluate(network, tr, spec).total;
}

Network with_breakpoint(const Network& network, const BoundaryParameter& p, double delta) {
  const Node& node = network.node(p.node);
  NodeCondition cond = *node.boundary;
  cond.profile.mutable_values()[p.breakpoint] += delta;
  return network.with_boundaries({{node.id, cond}});
}

}  // namespace

GradientCheck gradient_check(const Network& network, const Trajectory& traj,
                             const FunctionalSpec& spec, bool boundaries, double step_factor) {
  GradientCheck out;
  const Eigen::VectorXd g_controls = functional_control_gradient(network, traj, spec);
  const std::vector<BoundaryParameter> params =
      boundaries ? boundary_parameters(network) : std::vector<BoundaryParameter>{};
  const Eigen::VectorXd g_bound = boundaries
                                      ? functional_boundary_gradient(network, traj, spec, params)
                                      : Eigen::VectorXd();
  const std::size_t nc = traj.controls.size();
  const std::size_t n = nc + params.size();
  out.adjoint.resize(n);
  out.finite_difference.resize(n);
  out.labels.resize(n);
  const auto flat = traj.controls.flat();
  const auto scales = traj.controls.scales();
  for (std::size_t k = 0; k < nc; ++k) {
    const auto e = traj.controls.entry(k);
    out.labels[k] = "control:" + network.arc(traj.controls.series()[e.series].arc).id + "[" +
                    std::to_string(e.node) + "]";
    out.adjoint[k] = g_controls[static_cast<Eigen::Index>(k)];
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    out.labels[nc + k] = "boundary:" + network.node(params[k].node).id + "[" +
                         std::to_string(params[k].breakpoint) + "]";
    out.adjoint[nc + k] = g_bound[static_cast<Eigen::Index>(k)];
  }
  parallel_for(n, [&](std::size_t k) {
    if (k < nc) {
      const double h = step_factor * scales[k];
      ControlVector cp = traj.controls, cm = traj.controls;
      auto vp = flat, vm = flat;
      vp[k] += h;
      vm[k] -= h;
      cp.set_flat(vp);
      cm.set_flat(vm);
      out.finite_difference[k] = (resimulated_value(network, traj, cp, spec) -
                                  resimulated_value(network, traj, cm, spec)) / (2.0 * h);
    } else {
      const auto& p = params[k - nc];
      const auto& cond = *network.node(p.node).boundary;
      const double value = cond.profile.values()[p.breakpoint];
      const double scale = cond.kind == NodeCondition::Kind::prescribed_pressure
                               ? std::max(std::abs(value), 1e5)
                               : std::max(std::abs(value), 1.0);
      const double h = step_factor * scale;
      const Network np = with_breakpoint(network, p, h);
      const Network nm = with_breakpoint(network, p, -h);
      out.finite_difference[k] = (resimulated_value(np, traj, traj.controls, spec) -
                                  resimulated_value(nm, traj, traj.controls, spec)) / (2.0 * h);
    }
  });
  double biggest = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    biggest = std::max({biggest, std::abs(out.adjoint[k]), std::abs(out.finite_difference[k])});
  }
  out.rel_error.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double denom = std::max({std::abs(out.adjoint[k]), std::abs(out.finite_difference[k]),
                                   1e-6 * biggest, 1e-300});
    out.rel_error[k] = std::abs(out.adjoint[k] - out.finite_difference[k]) / denom;
    out.max_rel_error = std::max(out.max_rel_error, out.rel_error[k]);
  }
  return out;
}

}  // namespace gasgrid
