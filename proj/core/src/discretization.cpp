#include "gasgrid/discretization.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include <Eigen/SparseLU>

#include "gasgrid/errors.hpp"

namespace gasgrid {

namespace {

constexpr double kP = kPressureScale;

struct NewtonOutcome {
  bool ok = false;
  int iterations = 0;
  double residual = std::numeric_limits<double>::infinity();
  std::string why;
};

bool try_assemble(const StepInput& in, const Eigen::VectorXd& x_old, const Eigen::VectorXd& x,
                  SystemEvaluation& ev, std::string* why) {
  try {
    ev = assemble_system(in, x_old, x, true);
  } catch (const Error& e) {
    if (why) *why = e.what();
    return false;
  }
  return ev.residual.allFinite();
}

NewtonOutcome newton(const StepInput& in, const Eigen::VectorXd& x_old, Eigen::VectorXd& x,
                     const NewtonOptions& opts) {
  NewtonOutcome out;
  SystemEvaluation ev;
  if (!try_assemble(in, x_old, x, ev, &out.why)) {
    if (out.why.empty()) out.why = "non-finite residual at the initial guess";
    return out;
  }
  double f = ev.residual.squaredNorm();
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  for (int it = 0;; ++it) {
    out.residual = ev.residual.lpNorm<Eigen::Infinity>();
    out.iterations = it;
    if (out.residual <= opts.tol) {
      out.ok = true;
      return out;
    }
    if (it >= opts.max_iter) {
      out.why = "no convergence in " + std::to_string(opts.max_iter) + " iterations (residual " +
                std::to_string(out.residual) + ")";
      return out;
    }
    ev.jacobian.makeCompressed();
    lu.compute(ev.jacobian);
    if (lu.info() != Eigen::Success) {
      out.why = "singular Newton matrix";
      return out;
    }
    const Eigen::VectorXd dx = lu.solve(-ev.residual);
    if (!dx.allFinite()) {
      out.why = "non-finite Newton step";
      return out;
    }
    double alpha = 1.0;
    bool accepted = false;
    SystemEvaluation trial;
    Eigen::VectorXd xt;
    for (int bt = 0; bt <= opts.max_backtracks; ++bt, alpha *= 0.5) {
      xt = x + alpha * dx;
      if (!try_assemble(in, x_old, xt, trial, nullptr)) continue;
      const double ft = trial.residual.squaredNorm();
      if (ft <= (1.0 - 2.0 * opts.armijo * alpha) * f) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      out.why = "line search failed at residual " + std::to_string(out.residual);
      return out;
    }
    x = std::move(xt);
    ev = std::move(trial);
    f = ev.residual.squaredNorm();
  }
}

double boundary_value(const Node& n, double t) { return n.boundary->profile(t); }

}  // namespace

DiscreteState solve_time_step(const Network& network, std::shared_ptr<const SystemLayout> layout,
                              const DiscreteState& state_old, const ControlVector& controls,
                              double dt, const NewtonOptions& opts, NewtonReport* report) {
  if (!(dt > 0.0)) throw Error(ErrorCode::invalid_argument, "time step needs dt > 0");
  if (state_old.x.size() != static_cast<Eigen::Index>(layout->size())) {
    throw Error(ErrorCode::dimension_mismatch, "old state does not match the step layout");
  }
  StepInput in{network, *layout, controls, state_old.t + dt, dt};
  Eigen::VectorXd x = state_old.x;
  const NewtonOutcome r = newton(in, state_old.x, x, opts);
  if (report) *report = {r.iterations, r.residual};
  if (!r.ok) {
    throw Error(ErrorCode::newton_diverged,
                "step to t = " + std::to_string(in.t) + " s (dt = " + std::to_string(dt) +
                    " s): " + r.why);
  }
  return {in.t, std::move(layout), std::move(x)};
}

Eigen::VectorXd initial_guess(const Network& network, const SystemLayout& layout, double t0) {
  const std::size_t nv = network.node_count();
  const std::size_t na = network.arc_count();
  // node supplies; pressure nodes share whatever the flow nodes leave over
  std::vector<double> supply(nv, 0.0);
  std::vector<std::size_t> pressure_nodes;
  double imbalance = 0.0;
  for (std::size_t v = 0; v < nv; ++v) {
    const Node& n = network.node(v);
    if (!n.boundary) continue;
    if (n.boundary->kind == NodeCondition::Kind::prescribed_flow) {
      supply[v] = boundary_value(n, t0);
      imbalance += supply[v];
    } else {
      pressure_nodes.push_back(v);
    }
  }
  for (std::size_t v : pressure_nodes) supply[v] = -imbalance / static_cast<double>(pressure_nodes.size());

  // spanning tree by BFS from node 0; flows from subtree supplies
  std::vector<long> parent_arc(nv, -1);
  std::vector<bool> seen(nv, false);
  std::vector<std::size_t> order;
  std::deque<std::size_t> queue{pressure_nodes.empty() ? 0 : pressure_nodes.front()};
  seen[queue.front()] = true;
  while (!queue.empty()) {
    const std::size_t v = queue.front();
    queue.pop_front();
    order.push_back(v);
    auto visit = [&](std::size_t a, std::size_t w) {
      if (!seen[w]) {
        seen[w] = true;
        parent_arc[w] = static_cast<long>(a);
        queue.push_back(w);
      }
    };
    for (std::size_t a : network.out_arcs(v)) visit(a, network.arc(a).head_index);
    for (std::size_t a : network.in_arcs(v)) visit(a, network.arc(a).tail_index);
  }
  std::vector<double> arc_flow(na, 0.0);
  std::vector<double> subtree = supply;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const std::size_t v = *it;
    if (parent_arc[v] < 0) continue;
    const Arc& arc = network.arc(static_cast<std::size_t>(parent_arc[v]));
    // gas leaves v towards its parent
    const bool v_is_tail = arc.tail_index == v;
    arc_flow[static_cast<std::size_t>(parent_arc[v])] = v_is_tail ? subtree[v] : -subtree[v];
    const std::size_t parent = v_is_tail ? arc.head_index : arc.tail_index;
    subtree[parent] += subtree[v];
  }

  // pressures propagated outwards from the prescribed ones
  std::vector<double> p(nv, std::numeric_limits<double>::quiet_NaN());
  std::deque<std::size_t> pq;
  double mean = 0.0;
  for (std::size_t v : pressure_nodes) {
    p[v] = boundary_value(network.node(v), t0);
    mean += p[v];
    pq.push_back(v);
  }
  mean = pressure_nodes.empty() ? 50e5 : mean / static_cast<double>(pressure_nodes.size());
  if (pq.empty()) {
    p[0] = mean;
    pq.push_back(0);
  }
  ControlVector none;
  auto across = [&](std::size_t a, double p_from, bool forward) {
    const Arc& arc = network.arc(a);
    const double q = arc_flow[a];
    if (arc.is_pipe()) {
      const double k = m1_friction_coefficient(arc.pipe()) * std::abs(q) * q;
      const double rad = forward ? p_from * p_from - k : p_from * p_from + k;
      return rad > 0.25 * p_from * p_from ? std::sqrt(rad) : p_from;
    }
    return p_from;
  };
  while (!pq.empty()) {
    const std::size_t v = pq.front();
    pq.pop_front();
    for (std::size_t a : network.out_arcs(v)) {
      const std::size_t w = network.arc(a).head_index;
      if (std::isnan(p[w])) {
        p[w] = across(a, p[v], true);
        pq.push_back(w);
      }
    }
    for (std::size_t a : network.in_arcs(v)) {
      const std::size_t w = network.arc(a).tail_index;
      if (std::isnan(p[w])) {
        p[w] = across(a, p[v], false);
        pq.push_back(w);
      }
    }
  }
  for (double& pv : p) {
    if (std::isnan(pv)) pv = mean;
  }

  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.size()));
  auto set = [&](std::size_t i, double v) { x[static_cast<Eigen::Index>(i)] = v; };
  for (std::size_t a = 0; a < na; ++a) {
    const Arc& arc = network.arc(a);
    const auto& blk = layout.arc(a);
    const double pt = p[arc.tail_index] / kP, ph = p[arc.head_index] / kP;
    if (blk.pde) {
      for (std::size_t i = 0; i <= blk.n_cells; ++i) {
        const double s = static_cast<double>(i) / static_cast<double>(blk.n_cells);
        set(blk.offset + 2 * i, (1.0 - s) * pt + s * ph);
        set(blk.offset + 2 * i + 1, arc_flow[a]);
      }
    } else {
      set(blk.offset, pt);
      set(blk.offset + 1, arc_flow[a]);
      set(blk.offset + 2, ph);
      set(blk.offset + 3, arc_flow[a]);
    }
  }
  for (std::size_t v = 0; v < nv; ++v) {
    set(layout.node_p(v), p[v] / kP);
    set(layout.node_q(v), supply[v]);
  }
  return x;
}

DiscreteState steady_state(const Network& network, std::shared_ptr<const SystemLayout> layout,
                           const ControlVector& controls, double t0, const NewtonOptions& opts,
                           const std::optional<Eigen::VectorXd>& guess) {
  const Eigen::VectorXd x0 = guess ? *guess : initial_guess(network, *layout, t0);
  if (x0.size() != static_cast<Eigen::Index>(layout->size())) {
    throw Error(ErrorCode::dimension_mismatch, "steady-state guess does not match the layout");
  }
  StepInput steady{network, *layout, controls, t0, 0.0};
  Eigen::VectorXd x = x0;
  NewtonOutcome r = newton(steady, x0, x, opts);
  if (r.ok) return {t0, layout, std::move(x)};
  std::string first_failure = r.why;

  // pseudo-time marching with the data frozen at t0
  Eigen::VectorXd x_old = x0;
  double dt = 60.0;
  int failures = 0;
  for (int k = 0; k < 400 && dt > 1e-3; ++k) {
    StepInput step{network, *layout, controls, t0, dt};
    Eigen::VectorXd xs = x_old;
    if (!newton(step, x_old, xs, opts).ok) {
      dt *= 0.25;
      ++failures;
      continue;
    }
    const double change = (xs - x_old).lpNorm<Eigen::Infinity>();
    x_old = xs;
    dt = std::min(dt * 2.0, 1e8);
    if (dt >= 3600.0 || change < 1e-6) {
      Eigen::VectorXd xf = x_old;
      r = newton(steady, x_old, xf, opts);
      if (r.ok) return {t0, layout, std::move(xf)};
    }
  }
  throw Error(ErrorCode::newton_diverged, "steady state not found: " + first_failure +
                                              "; pseudo-time marching failed (" +
                                              std::to_string(failures) + " rejected steps)");
}

DiscreteState Trajectory::state(std::size_t n) const {
  return {steps.at(n).t, layouts.at(steps.at(n).block), steps.at(n).x};
}

bool Trajectory::transferred(std::size_t n) const {
  if (n == 0) return false;
  const std::size_t b = steps.at(n).block;
  return steps.at(n - 1).block != b && transfers.at(b).rows() > 0;
}

Eigen::VectorXd Trajectory::old_state(std::size_t n) const {
  if (n == 0) return steps.at(0).x;
  if (transferred(n)) return transfers[steps[n].block] * steps[n - 1].x;
  return steps[n - 1].x;
}

StepInput Trajectory::input(const Network& network, std::size_t n) const {
  return {network, layout_of(n), controls, steps.at(n).t, steps.at(n).dt};
}

void Trajectory::truncate_before_block(std::size_t block) {
  std::size_t keep = 1;
  while (keep < steps.size() && steps[keep].block < block) ++keep;
  steps.resize(std::min(keep, steps.size()));
}

namespace {

void init_first_step(const Network& network, Trajectory& traj, const NewtonOptions& newton_opts) {
  const BlockAssignment& b0 = traj.assignment.blocks.front();
  auto layout = std::make_shared<const SystemLayout>(network, b0.pipes);
  traj.layouts[0] = layout;
  const DiscreteState& init = traj.initial;
  Eigen::VectorXd x;
  if (init.layout->same_shape(*layout)) {
    x = init.x;
  } else {
    x = layout_transfer(network, *init.layout, *layout) * init.x;
  }
  if (traj.steady_initial) {
    x = steady_state(network, layout, traj.controls, b0.t0, newton_opts, x).x;
  }
  traj.steps.assign(1, TrajectoryStep{b0.t0, 0.0, 0, std::move(x), 0});
}

void step_to(const Network& network, Trajectory& traj, std::size_t block,
             const std::shared_ptr<const SystemLayout>& layout, const Eigen::VectorXd& x_prev,
             double t, double dt, const NewtonOptions& opts, int depth) {
  NewtonReport rep;
  try {
    DiscreteState s =
        solve_time_step(network, layout, DiscreteState{t, layout, x_prev}, traj.controls, dt, opts,
                        &rep);
    traj.steps.push_back({t + dt, dt, block, std::move(s.x), rep.iterations});
  } catch (const Error& e) {
    if (e.code() != ErrorCode::newton_diverged || depth >= opts.retry_max) throw;
    step_to(network, traj, block, layout, x_prev, t, 0.5 * dt, opts, depth + 1);
    const Eigen::VectorXd mid = traj.steps.back().x;
    step_to(network, traj, block, layout, mid, t + 0.5 * dt, 0.5 * dt, opts, depth + 1);
  }
}

}  // namespace

Trajectory start_trajectory(const Network& network, const ModelAssignment& assignment,
                            const ControlVector& controls, const DiscreteState& initial,
                            bool steady_initial, const NewtonOptions& newton_opts) {
  assignment.validate(network);
  if (!initial.layout) throw Error(ErrorCode::invalid_argument, "initial state has no layout");
  Trajectory traj;
  traj.assignment = assignment;
  traj.controls = controls;
  traj.steady_initial = steady_initial;
  traj.initial = initial;
  traj.layouts.assign(assignment.blocks.size(), nullptr);
  traj.transfers.assign(assignment.blocks.size(), Eigen::SparseMatrix<double>());
  init_first_step(network, traj, newton_opts);
  return traj;
}

void advance_block(const Network& network, Trajectory& traj, std::size_t block,
                   const SimulateOptions& opts) {
  const BlockAssignment& ba = traj.assignment.blocks.at(block);
  traj.truncate_before_block(block);
  if (block == 0) {
    if (!traj.layouts[0] || traj.layouts[0]->pipes() != ba.pipes) {
      init_first_step(network, traj, opts.newton);
    }
  } else {
    const auto& prev = traj.layouts.at(block - 1);
    if (!prev || traj.steps.back().block != block - 1) {
      throw Error(ErrorCode::invalid_argument,
                  "block " + std::to_string(block) + " advanced before its predecessor");
    }
    if (prev->pipes() == ba.pipes) {
      traj.layouts[block] = prev;
      traj.transfers[block] = Eigen::SparseMatrix<double>();
    } else {
      auto layout = std::make_shared<const SystemLayout>(network, ba.pipes);
      traj.transfers[block] = layout->same_shape(*prev) ? Eigen::SparseMatrix<double>()
                                                        : layout_transfer(network, *prev, *layout);
      traj.layouts[block] = layout;
    }
  }
  const auto& layout = traj.layouts[block];
  Eigen::VectorXd x = traj.steps.back().x;
  if (block > 0 && traj.transfers[block].rows() > 0) x = traj.transfers[block] * x;
  double t = traj.steps.back().t;

  if (opts.frozen) {
    NewtonOptions no_retry = opts.newton;
    no_retry.retry_max = 0;
    for (std::size_t n = 1; n < opts.frozen->steps.size(); ++n) {
      const TrajectoryStep& fs = opts.frozen->steps[n];
      if (fs.block != block) continue;
      step_to(network, traj, block, layout, x, t, fs.dt, no_retry, 0);
      x = traj.steps.back().x;
      t = traj.steps.back().t;
    }
    return;
  }
  const std::size_t n_steps = ba.steps();
  for (std::size_t k = 0; k < n_steps; ++k) {
    const double t_next = ba.t0 + static_cast<double>(k + 1) * ba.dt;
    step_to(network, traj, block, layout, x, t, t_next - t, opts.newton, 0);
    x = traj.steps.back().x;
    t = traj.steps.back().t;
  }
}

Trajectory simulate(const Network& network, const ModelAssignment& assignment,
                    const ControlVector& controls, const DiscreteState& initial,
                    const SimulateOptions& opts, bool steady_initial) {
  Trajectory traj = start_trajectory(network, assignment, controls, initial, steady_initial,
                                     opts.newton);
  for (std::size_t b = 0; b < assignment.blocks.size(); ++b) advance_block(network, traj, b, opts);
  return traj;
}

double linepack(const Network& network, const DiscreteState& state) {
  double mass = 0.0;
  for (std::size_t a = 0; a < network.arc_count(); ++a) {
    const auto& blk = state.layout->arc(a);
    if (!blk.pde) continue;
    const PipeParameters& par = network.arc(a).pipe();
    const double dx = par.length / static_cast<double>(blk.n_cells);
    const auto prof = state.profile(a);
    for (std::size_t i = 0; i < blk.n_cells; ++i) {
      mass += 0.5 * (prof[i].p + prof[i + 1].p) * par.area * dx / (par.c * par.c);
    }
  }
  return mass;
}

}  // namespace gasgrid
