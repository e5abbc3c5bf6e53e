#include "gasgrid/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gasgrid/adjoint.hpp"
#include "gasgrid/errors.hpp"

namespace gasgrid {

namespace {

constexpr double kP = kPressureScale;
constexpr std::size_t kAdjointChunk = 32;

// One scalar constraint term: a weighted sum of unknowns at given steps plus a
// direct dependence on the value of an arc's control.
struct Seed {
  std::size_t step;
  std::size_t index;
  double w;
};

struct Row {
  ConstraintInfo info;
  double value = 0.0;
  std::vector<Seed> seeds;
  std::size_t control_arc = 0;
  double control_weight = 0.0;  // d value / d control value at the step's time
};

bool in_window(const NodeBound& b, double t) { return t >= b.t0 - 1e-9 && t <= b.t1 + 1e-9; }

std::size_t first_sampled(const Trajectory& traj) { return traj.steady_initial ? 0 : 1; }

// Linear interpolation of a trajectory at time t between accepted steps.
struct Bracket {
  std::size_t n0, n1;
  double w0, w1;
};

Bracket bracket(const Trajectory& traj, double t) {
  if (traj.steps.empty()) throw Error(ErrorCode::invalid_argument, "empty trajectory");
  if (t <= traj.steps.front().t) return {0, 0, 1.0, 0.0};
  for (std::size_t n = 1; n < traj.size(); ++n) {
    const double t0 = traj.steps[n - 1].t, t1 = traj.steps[n].t;
    if (t <= t1) {
      const double w1 = (t - t0) / (t1 - t0);
      return {n - 1, n, 1.0 - w1, w1};
    }
  }
  const std::size_t last = traj.size() - 1;
  return {last, last, 1.0, 0.0};
}

double node_value(const Trajectory& traj, std::size_t n, std::size_t v, bool pressure) {
  const SystemLayout& lay = traj.layout_of(n);
  const auto i = static_cast<Eigen::Index>(pressure ? lay.node_p(v) : lay.node_q(v));
  return traj.steps[n].x[i];
}

std::size_t node_index(const Trajectory& traj, std::size_t n, std::size_t v, bool pressure) {
  const SystemLayout& lay = traj.layout_of(n);
  return pressure ? lay.node_p(v) : lay.node_q(v);
}

}  // namespace

const char* to_string(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::pressure_lower: return "pressure_lower";
    case ConstraintKind::pressure_upper: return "pressure_upper";
    case ConstraintKind::flow_lower: return "flow_lower";
    case ConstraintKind::flow_upper: return "flow_upper";
    case ConstraintKind::field: return "field";
    case ConstraintKind::terminal: return "terminal";
  }
  return "unknown";
}

void ConstraintSet::validate(const Network& network) const {
  auto check_bounds = [&](const std::vector<NodeBound>& bounds, const char* what) {
    for (const auto& b : bounds) {
      if (!network.find_node(b.node)) {
        throw Error(ErrorCode::invalid_argument,
                    std::string(what) + " bound references unknown node '" + b.node + "'");
      }
      if (!b.lower && !b.upper) {
        throw Error(ErrorCode::invalid_argument,
                    std::string(what) + " bound at '" + b.node + "' has neither side");
      }
      if (!(b.t1 >= b.t0)) {
        throw Error(ErrorCode::invalid_argument,
                    std::string(what) + " bound at '" + b.node + "' has an empty window");
      }
    }
  };
  check_bounds(pressure, "pressure");
  check_bounds(flow, "flow");
  for (const auto& id : compressors) {
    const auto a = network.find_arc(id);
    if (!a || !network.arc(*a).is_compressor()) {
      throw Error(ErrorCode::invalid_argument, "'" + id + "' is not a compressor station");
    }
    const auto& fid = network.arc(*a).compressor().field_id;
    if (!network.fields().count(fid)) {
      throw Error(ErrorCode::invalid_argument,
                  "compressor '" + id + "' references unknown field '" + fid + "'");
    }
  }
  if (field_levels < 2) throw Error(ErrorCode::invalid_argument, "field_levels must be >= 2");
  if (terminal && !(terminal->window > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "terminal window must be positive");
  }
}

double ConstraintValues::max_violation() const {
  double v = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) v = std::max(v, -values[i]);
  return v;
}

ConstraintEvaluator::ConstraintEvaluator(const Network& network, ConstraintSet set)
    : network_(network), set_(std::move(set)) {
  set_.validate(network_);
  for (const auto& id : set_.compressors) {
    const std::size_t a = network_.arc_index(id);
    const auto& f = network_.fields().at(network_.arc(a).compressor().field_id);
    fields_.emplace(a, build_semiconvex(f, set_.field_levels));
  }
}

const SemiconvexField& ConstraintEvaluator::field(std::size_t arc) const {
  const auto it = fields_.find(arc);
  if (it == fields_.end()) {
    throw Error(ErrorCode::invalid_argument, "arc " + std::to_string(arc) + " has no field constraint");
  }
  return it->second;
}

namespace {

std::vector<Row> build_rows(const Network& network, const ConstraintSet& set,
                            const std::map<std::size_t, SemiconvexField>& fields,
                            const Trajectory& traj) {
  std::vector<Row> rows;
  const GasProperties& gas = network.gas();
  for (std::size_t n = first_sampled(traj); n < traj.size(); ++n) {
    const double t = traj.steps[n].t;
    auto bound_rows = [&](const std::vector<NodeBound>& bounds, bool pressure) {
      const double unit = pressure ? kP : 1.0;
      const auto lo_kind = pressure ? ConstraintKind::pressure_lower : ConstraintKind::flow_lower;
      const auto hi_kind = pressure ? ConstraintKind::pressure_upper : ConstraintKind::flow_upper;
      for (const auto& b : bounds) {
        if (!in_window(b, t)) continue;
        const std::size_t v = network.node_index(b.node);
        const std::size_t i = node_index(traj, n, v, pressure);
        const double u = node_value(traj, n, v, pressure);
        if (b.lower) {
          Row r;
          r.info = {lo_kind, n, v, 0};
          r.value = u - (*b.lower)(t) / unit;
          r.seeds.push_back({n, i, 1.0});
          rows.push_back(std::move(r));
        }
        if (b.upper) {
          Row r;
          r.info = {hi_kind, n, v, 0};
          r.value = (*b.upper)(t) / unit - u;
          r.seeds.push_back({n, i, -1.0});
          rows.push_back(std::move(r));
        }
      }
    };
    bound_rows(set.pressure, true);
    bound_rows(set.flow, false);

    for (const auto& [a, field] : fields) {
      const Arc& arc = network.arc(a);
      if (!arc.compressor().on(t)) continue;
      const SystemLayout& lay = traj.layout_of(n);
      const Eigen::VectorXd& x = traj.steps[n].x;
      const double q = x[static_cast<Eigen::Index>(lay.tail_q(a))];
      const double p = x[static_cast<Eigen::Index>(lay.tail_p(a))] * kP;
      const auto h = traj.controls.value(a, t);
      if (!h) throw Error(ErrorCode::invalid_argument, "compressor '" + arc.id + "' has no control");
      const double rho = gas_density(p, gas);
      const double vol = volumetric_flow(q, rho, gas.rho0);
      // Q = rho0 q / rho(p), rho = p z0 / (c^2 z(p))
      const double z = compressibility(p, gas.eos);
      const double dz = compressibility_derivative(p, gas.eos);
      const double drho_dp = gas.eos.z0 / (gas.c * gas.c) * (z - p * dz) / (z * z);
      const double dq_dq = gas.rho0 / rho;
      const double dq_dp = -vol / rho * drho_dp * kP;  // per bar
      const FieldConstraints fc = constraint_values(field, vol, *h);
      for (std::size_t k = 0; k < 4; ++k) {
        const double unit = k < 2 ? kHeadScale : 1.0;
        Row r;
        r.info = {ConstraintKind::field, n, a, k};
        r.value = fc.values[k] / unit;
        const double dQ = fc.gradients[k][0] / unit;
        if (dQ != 0.0) {
          r.seeds.push_back({n, lay.tail_q(a), dQ * dq_dq});
          r.seeds.push_back({n, lay.tail_p(a), dQ * dq_dp});
        }
        r.control_arc = a;
        r.control_weight = fc.gradients[k][1] / unit;
        rows.push_back(std::move(r));
      }
    }
  }

  if (set.terminal && set.terminal->tol > 0.0 && traj.size() > 1) {
    const std::size_t last = traj.size() - 1;
    const Bracket br = bracket(traj, traj.steps[last].t - set.terminal->window);
    for (std::size_t v = 0; v < network.node_count(); ++v) {
      for (int pq = 0; pq < 2; ++pq) {
        const bool pressure = pq == 0;
        const double d = node_value(traj, last, v, pressure) -
                         br.w0 * node_value(traj, br.n0, v, pressure) -
                         br.w1 * node_value(traj, br.n1, v, pressure);
        for (int side = 0; side < 2; ++side) {
          const double s = side == 0 ? -1.0 : 1.0;  // tol - d, tol + d
          Row r;
          r.info = {ConstraintKind::terminal, last, v, static_cast<std::size_t>(2 * pq + side)};
          r.value = set.terminal->tol + s * d;
          r.seeds.push_back({last, node_index(traj, last, v, pressure), s});
          r.seeds.push_back({br.n0, node_index(traj, br.n0, v, pressure), -s * br.w0});
          if (br.w1 != 0.0) {
            r.seeds.push_back({br.n1, node_index(traj, br.n1, v, pressure), -s * br.w1});
          }
          rows.push_back(std::move(r));
        }
      }
    }
  }
  return rows;
}

ConstraintValues pack(const std::vector<Row>& rows, std::size_t n_controls, bool with_jacobian) {
  ConstraintValues out;
  out.values.resize(static_cast<Eigen::Index>(rows.size()));
  out.info.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.values[static_cast<Eigen::Index>(i)] = rows[i].value;
    out.info.push_back(rows[i].info);
  }
  out.has_row.assign(rows.size(), false);
  if (with_jacobian) {
    out.jacobian = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                         static_cast<Eigen::Index>(n_controls));
  }
  return out;
}

}  // namespace

ConstraintValues ConstraintEvaluator::values(const Trajectory& traj) const {
  return pack(build_rows(network_, set_, fields_, traj), traj.controls.size(), false);
}

ConstraintValues ConstraintEvaluator::evaluate(const Trajectory& traj, double band) const {
  const std::vector<Row> rows = build_rows(network_, set_, fields_, traj);
  ConstraintValues out = pack(rows, traj.controls.size(), true);
  std::vector<std::size_t> wanted;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].value <= band) wanted.push_back(i);
  }
  for (std::size_t c0 = 0; c0 < wanted.size(); c0 += kAdjointChunk) {
    const std::size_t cols = std::min(kAdjointChunk, wanted.size() - c0);
    std::vector<Eigen::MatrixXd> seeds(traj.size());
    bool any_state = false;
    for (std::size_t j = 0; j < cols; ++j) {
      for (const auto& s : rows[wanted[c0 + j]].seeds) {
        auto& m = seeds[s.step];
        if (m.size() == 0) {
          m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(traj.layout_of(s.step).size()),
                                    static_cast<Eigen::Index>(cols));
        }
        m(static_cast<Eigen::Index>(s.index), static_cast<Eigen::Index>(j)) += s.w;
        any_state = true;
      }
    }
    Eigen::MatrixXd g;
    if (any_state) {
      for (std::size_t n = 0; n < traj.size(); ++n) {
        if (seeds[n].size() == 0) {
          seeds[n] = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(traj.layout_of(n).size()),
                                           static_cast<Eigen::Index>(cols));
        }
      }
      const auto mu = solve_discrete_adjoint_batch(network_, traj, seeds);
      g = adjoint_control_term_batch(network_, traj, mu);
    }
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t i = wanted[c0 + j];
      auto row = out.jacobian.row(static_cast<Eigen::Index>(i));
      if (g.size() > 0) row += g.col(static_cast<Eigen::Index>(j)).transpose();
      const Row& r = rows[i];
      if (r.control_weight != 0.0) {
        const double t = traj.steps[r.info.step].t;
        for (const auto& w : traj.controls.weights(r.control_arc, t)) {
          row[static_cast<Eigen::Index>(w.flat)] += r.control_weight * w.w;
        }
      }
      out.has_row[i] = true;
    }
  }
  return out;
}

ConstraintValues constraint_evaluation(const Network& network, const Trajectory& traj,
                                       const ConstraintSet& cons, double band) {
  return ConstraintEvaluator(network, cons).evaluate(traj, band);
}

Eigen::VectorXd control_gradient(const Network& network, const ControlVector& controls,
                                 const FunctionalSpec& spec, const DiscreteState& initial,
                                 const AdaptiveOptions& opts) {
  const auto [traj, report] = adaptive_simulate(network, controls, spec, initial, opts);
  (void)report;
  return functional_control_gradient(network, traj, spec);
}

double terminal_stationarity(const Trajectory& traj, double window) {
  if (traj.size() < 2) return 0.0;
  const std::size_t last = traj.size() - 1;
  const Bracket br = bracket(traj, traj.steps[last].t - window);
  double out = 0.0;
  const std::size_t nodes = traj.layout_of(last).node_count();
  for (std::size_t v = 0; v < nodes; ++v) {
    for (bool pressure : {true, false}) {
      const double d = node_value(traj, last, v, pressure) -
                       br.w0 * node_value(traj, br.n0, v, pressure) -
                       br.w1 * node_value(traj, br.n1, v, pressure);
      out = std::max(out, std::abs(d));
    }
  }
  return out;
}

namespace {

constexpr double kFailedConstraint = -1e10;

// Frozen-discretization NLP over the scaled control entries listed in `free`.
class NominationProblem {
 public:
  NominationProblem(const Network& network, const Trajectory& base, const ConstraintEvaluator& cons,
                    const FunctionalSpec& spec, std::vector<std::size_t> free)
      : network_(network), base_(base), cons_(cons), spec_(spec), free_(std::move(free)) {
    const auto s = base.controls.scales();
    scale_.resize(static_cast<Eigen::Index>(free_.size()));
    for (std::size_t k = 0; k < free_.size(); ++k) scale_[static_cast<Eigen::Index>(k)] = s[free_[k]];
    m_ = static_cast<std::size_t>(cons.values(base).values.size());
  }

  std::size_t m() const { return m_; }

  Eigen::VectorXd to_x(const ControlVector& c) const {
    const auto f = c.flat();
    Eigen::VectorXd x(static_cast<Eigen::Index>(free_.size()));
    for (std::size_t k = 0; k < free_.size(); ++k) {
      x[static_cast<Eigen::Index>(k)] = f[free_[k]] / scale_[static_cast<Eigen::Index>(k)];
    }
    return x;
  }

  ControlVector controls_at(const Eigen::VectorXd& x) const {
    ControlVector c = base_.controls;
    auto f = c.flat();
    for (std::size_t k = 0; k < free_.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(k);
      f[free_[k]] = x[i] * scale_[i];
    }
    c.set_flat(f);
    return c;
  }

  std::pair<Eigen::VectorXd, Eigen::VectorXd> bounds() const {
    const auto lo = base_.controls.lower_bounds();
    const auto hi = base_.controls.upper_bounds();
    Eigen::VectorXd l(static_cast<Eigen::Index>(free_.size())), u(l.size());
    for (std::size_t k = 0; k < free_.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(k);
      l[i] = lo[free_[k]] / scale_[i];
      u[i] = hi[free_[k]] / scale_[i];
    }
    return {l, u};
  }

  double objective(const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    if (!simulate_at(x)) return std::numeric_limits<double>::infinity();
    if (grad) {
      const Eigen::VectorXd g = functional_control_gradient(network_, *traj_, spec_);
      grad->resize(x.size());
      for (std::size_t k = 0; k < free_.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        (*grad)[i] = g[static_cast<Eigen::Index>(free_[k])] * scale_[i];
      }
    }
    return f_;
  }

  void constraints(const Eigen::VectorXd& x, double band, Eigen::VectorXd& c,
                   Eigen::MatrixXd* jac, std::vector<bool>* has_row) {
    c.resize(static_cast<Eigen::Index>(m_));
    if (!simulate_at(x)) {
      c.setConstant(kFailedConstraint);
      if (jac) jac->setZero(static_cast<Eigen::Index>(m_), x.size());
      if (has_row) has_row->assign(m_, false);
      return;
    }
    if (!jac) {
      c = cons_.values(*traj_).values;
      check_size(c);
      return;
    }
    const ConstraintValues cv = cons_.evaluate(*traj_, band);
    check_size(cv.values);
    c = cv.values;
    jac->setZero(static_cast<Eigen::Index>(m_), x.size());
    for (std::size_t k = 0; k < free_.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(k);
      jac->col(i) = cv.jacobian.col(static_cast<Eigen::Index>(free_[k])) * scale_[i];
    }
    if (has_row) *has_row = cv.has_row;
  }

  /// Re-simulation at x on the frozen step times; false if the run failed.
  bool simulate_at(const Eigen::VectorXd& x) {
    if (cached_ && x.size() == x_.size() && x == x_) return ok_;
    x_ = x;
    cached_ = true;
    ok_ = false;
    traj_.reset();
    try {
      SimulateOptions so;
      so.frozen = &base_;
      traj_ = simulate(network_, base_.assignment, controls_at(x), base_.initial, so,
                       base_.steady_initial);
      f_ = evaluate(network_, *traj_, spec_).total;
      ok_ = std::isfinite(f_);
    } catch (const Error& e) {
      switch (e.code()) {
        case ErrorCode::newton_diverged:
        case ErrorCode::nonpositive_pressure:
        case ErrorCode::radicand_nonpositive:
          break;
        default:
          throw;
      }
    }
    return ok_;
  }

  const Trajectory& trajectory() const { return *traj_; }

 private:
  void check_size(const Eigen::VectorXd& c) const {
    if (static_cast<std::size_t>(c.size()) != m_) {
      throw Error(ErrorCode::dimension_mismatch, "constraint count changed between evaluations");
    }
  }

  const Network& network_;
  const Trajectory& base_;
  const ConstraintEvaluator& cons_;
  const FunctionalSpec& spec_;
  std::vector<std::size_t> free_;
  Eigen::VectorXd scale_;
  std::size_t m_ = 0;
  bool cached_ = false;
  bool ok_ = false;
  Eigen::VectorXd x_;
  double f_ = 0.0;
  std::optional<Trajectory> traj_;
};

NLPResult solve_problem(NominationProblem& prob, const ControlVector& start, const SqpOptions& opts) {
  NlpProblem p;
  p.n = static_cast<std::size_t>(prob.to_x(start).size());
  p.m = prob.m();
  p.objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) { return prob.objective(x, g); };
  p.constraints = [&](const Eigen::VectorXd& x, double band, Eigen::VectorXd& c,
                      Eigen::MatrixXd* jac, std::vector<bool>* has_row) {
    prob.constraints(x, band, c, jac, has_row);
  };
  std::tie(p.lower, p.upper) = prob.bounds();
  return sqp_solve(p, prob.to_x(start), opts);
}

// Sub-assignment of the blocks with index in [b0, b1).
ModelAssignment slice(const ModelAssignment& a, std::size_t b0, std::size_t b1) {
  ModelAssignment out;
  out.blocks.assign(a.blocks.begin() + static_cast<std::ptrdiff_t>(b0),
                    a.blocks.begin() + static_cast<std::ptrdiff_t>(b1));
  return out;
}

}  // namespace

NominationResult validate_nomination(const Network& network, const DiscreteState& state_a,
                                     const ControlVector& controls, const ConstraintSet& cons,
                                     const FunctionalSpec& spec, double horizon,
                                     const NominationOptions& opts) {
  if (!(horizon > 0.0)) throw Error(ErrorCode::invalid_argument, "horizon must be positive");
  if (opts.horizon_split == 0) throw Error(ErrorCode::invalid_argument, "horizon_split must be >= 1");
  spec.validate(network, horizon);
  ControlVector start =
      opts.control_interval > 0.0 ? controls.resampled(horizon, opts.control_interval) : controls;
  start.validate(network, horizon);
  const ConstraintEvaluator evaluator(network, cons);

  ModelAssignment assignment;
  if (opts.assignment) {
    assignment = *opts.assignment;
  } else {
    AdaptiveOptions ao = opts.adaptive;
    ao.horizon = horizon;
    ao.steady_initial = false;
    assignment = adaptive_simulate(network, start, spec, state_a, ao).first.assignment;
  }
  assignment.validate(network);
  if (std::abs(assignment.horizon() - horizon) > 1e-6 * horizon) {
    throw Error(ErrorCode::invalid_argument, "assignment does not cover the horizon");
  }

  NominationResult out;
  out.assignment = assignment;
  const std::size_t nb = assignment.blocks.size();
  const std::size_t parts = std::min(opts.horizon_split, nb);
  DiscreteState entry = state_a;
  ControlVector current = start;
  std::vector<double> node_times;
  for (std::size_t k = 0; k < start.size(); ++k) {
    const auto e = start.entry(k);
    node_times.push_back(start.series()[e.series].series.times()[e.node]);
  }

  NLPResult combined;
  for (std::size_t part = 0; part < parts; ++part) {
    const std::size_t b0 = part * nb / parts, b1 = (part + 1) * nb / parts;
    const double t0 = assignment.blocks[b0].t0, t1 = assignment.blocks[b1 - 1].t1;
    const ModelAssignment sub = parts == 1 ? assignment : slice(assignment, b0, b1);
    std::vector<std::size_t> free;
    for (std::size_t k = 0; k < node_times.size(); ++k) {
      const double t = node_times[k];
      const bool mine = part + 1 == parts ? t > t0 - 1e-9 : t > t0 - 1e-9 && t <= t1 + 1e-9;
      if (mine && (part == 0 || t > t0 + 1e-9)) free.push_back(k);
    }
    ConstraintSet part_set = cons;
    if (part + 1 != parts) part_set.terminal.reset();
    const ConstraintEvaluator part_eval(network, part_set);
    DiscreteState initial = entry;
    initial.t = t0;
    const Trajectory base = simulate(network, sub, current, initial, {}, false);
    NominationProblem prob(network, base, part_eval, spec, free);
    NLPResult r = solve_problem(prob, current, opts.sqp);
    current = prob.controls_at(r.x);
    if (!prob.simulate_at(r.x)) {
      throw Error(ErrorCode::newton_diverged, "re-simulation at the returned controls failed");
    }
    entry = prob.trajectory().state(prob.trajectory().size() - 1);
    combined.iterations += r.iterations;
    combined.history.insert(combined.history.end(), r.history.begin(), r.history.end());
    combined.kkt = std::max(combined.kkt, r.kkt);
    combined.status = r.status;
    combined.message = r.message;
    if (r.status != SqpStatus::converged) {
      combined.multipliers = r.multipliers;
      break;
    }
    combined.multipliers = r.multipliers;
  }

  // independent re-simulation of the whole horizon at the returned controls
  const Trajectory full_base = simulate(network, assignment, start, state_a, {}, false);
  SimulateOptions so;
  so.frozen = &full_base;
  out.trajectory = simulate(network, assignment, current, state_a, so, false);
  out.controls = current;
  const auto flat = current.flat();
  const auto scales = current.scales();
  combined.x.resize(static_cast<Eigen::Index>(flat.size()));
  for (std::size_t k = 0; k < flat.size(); ++k) {
    combined.x[static_cast<Eigen::Index>(k)] = flat[k] / scales[k];
  }
  combined.objective = evaluate(network, out.trajectory, spec).total;
  combined.max_violation = evaluator.values(out.trajectory).max_violation();
  out.nlp = std::move(combined);
  out.feasible =
      out.nlp.status == SqpStatus::converged && out.nlp.max_violation <= opts.sqp.feas_tol;
  out.terminal_stationarity =
      terminal_stationarity(out.trajectory, cons.terminal ? cons.terminal->window : 1800.0);
  return out;
}

}  // namespace gasgrid
