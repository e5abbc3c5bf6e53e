#include "gasgrid/objective.hpp"

#include <string>

#include "gasgrid/errors.hpp"

namespace gasgrid {

namespace {

constexpr double kP = kPressureScale;

double target_at(const FunctionalTerm& term, double t) {
  if (term.target.empty()) {
    throw Error(ErrorCode::missing_target, "term on '" + term.id + "' has no target");
  }
  return term.target(t);
}

bool tracking(Integrand k) { return k == Integrand::pressure_tracking || k == Integrand::flow_tracking; }

// Value and derivatives of one pipe term: d/d unknown is accumulated into grad
// with factor `scale` when grad is given.
double pipe_term(const Network& net, const SystemLayout& lay, const Eigen::VectorXd& x,
                 const FunctionalTerm& term, double t, Eigen::VectorXd* grad, double scale) {
  const std::size_t a = net.arc_index(term.id);
  const Arc& arc = net.arc(a);
  const auto& blk = lay.arc(a);
  const double length = arc.pipe().length;
  if (term.kind == Integrand::constant) return term.weight * length;
  const std::size_t n = blk.pde ? blk.n_cells : std::max<std::size_t>(1, lay.pipes()[a].n_cells);
  const double dx = length / static_cast<double>(n);
  const std::size_t comp = term.kind == Integrand::pressure_tracking ? 0 : 1;
  const double target =
      term.kind == Integrand::pressure_tracking ? target_at(term, t) / kP : target_at(term, t);
  double value = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    // cell endpoint unknowns and their weights in the midpoint value
    std::size_t i0, i1;
    double w0, w1;
    if (blk.pde) {
      i0 = blk.offset + 2 * i + comp;
      i1 = blk.offset + 2 * (i + 1) + comp;
      w0 = w1 = 0.5;
    } else {
      i0 = blk.offset + comp;
      i1 = blk.offset + 2 + comp;
      w1 = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
      w0 = 1.0 - w1;
    }
    const double mid = w0 * x[static_cast<Eigen::Index>(i0)] + w1 * x[static_cast<Eigen::Index>(i1)];
    const double e = mid - target;
    value += term.weight * dx * e * e;
    if (grad) {
      const double d = scale * term.weight * dx * 2.0 * e;
      (*grad)[static_cast<Eigen::Index>(i0)] += d * w0;
      (*grad)[static_cast<Eigen::Index>(i1)] += d * w1;
    }
  }
  return value;
}

double node_term(const Network& net, const SystemLayout& lay, const Eigen::VectorXd& x,
                 const FunctionalTerm& term, double t, Eigen::VectorXd* grad, double scale) {
  const std::size_t v = net.node_index(term.id);
  if (term.kind == Integrand::constant) return term.weight;
  std::size_t idx;
  double target;
  if (term.kind == Integrand::pressure_tracking) {
    idx = lay.node_p(v);
    target = target_at(term, t) / kP;
  } else if (term.kind == Integrand::flow_tracking) {
    idx = lay.node_q(v);
    target = target_at(term, t);
  } else {
    throw Error(ErrorCode::invalid_argument, "energy term on node '" + term.id + "'");
  }
  const double e = x[static_cast<Eigen::Index>(idx)] - target;
  if (grad) (*grad)[static_cast<Eigen::Index>(idx)] += scale * term.weight * 2.0 * e;
  return term.weight * e * e;
}

double arc_term(const Network& net, const SystemLayout& lay, const ControlVector& controls,
                const Eigen::VectorXd& x, const FunctionalTerm& term, double t,
                Eigen::VectorXd* grad, double scale) {
  const std::size_t a = net.arc_index(term.id);
  const Arc& arc = net.arc(a);
  switch (term.kind) {
    case Integrand::constant:
      return term.weight;
    case Integrand::pressure_tracking:
    case Integrand::flow_tracking: {
      const bool p = term.kind == Integrand::pressure_tracking;
      const std::size_t idx = p ? lay.head_p(a) : lay.tail_q(a);
      const double target = p ? target_at(term, t) / kP : target_at(term, t);
      const double e = x[static_cast<Eigen::Index>(idx)] - target;
      if (grad) (*grad)[static_cast<Eigen::Index>(idx)] += scale * term.weight * 2.0 * e;
      return term.weight * e * e;
    }
    case Integrand::compressor_energy: {
      const CompressorArc& cs = arc.compressor();
      if (!cs.on(t)) return 0.0;
      const double h = controls.value(a, t).value_or(0.0);
      const double c = term.weight * net.gas().rho0 * h / cs.eta_ad;
      const std::size_t idx = lay.tail_q(a);
      if (grad) (*grad)[static_cast<Eigen::Index>(idx)] += scale * c;
      return c * x[static_cast<Eigen::Index>(idx)];
    }
  }
  return 0.0;
}

double rate_at(const Network& net, const SystemLayout& lay, const ControlVector& controls,
               const Eigen::VectorXd& x, double t, const FunctionalSpec& spec, Eigen::VectorXd* grad,
               double scale, std::vector<double>* per_term) {
  double total = 0.0;
  std::size_t k = 0;
  auto record = [&](double v) {
    total += v;
    if (per_term) (*per_term)[k] += scale * v;
    ++k;
  };
  for (const auto& term : spec.pipe_terms) record(pipe_term(net, lay, x, term, t, grad, scale));
  for (const auto& term : spec.node_terms) record(node_term(net, lay, x, term, t, grad, scale));
  for (const auto& term : spec.arc_terms) {
    record(arc_term(net, lay, controls, x, term, t, grad, scale));
  }
  return total;
}

double rate(const Network& net, const Trajectory& traj, std::size_t n, const FunctionalSpec& spec,
            Eigen::VectorXd* grad, double scale, std::vector<double>* per_term) {
  return rate_at(net, traj.layout_of(n), traj.controls, traj.steps[n].x, traj.steps[n].t, spec,
                 grad, scale, per_term);
}

// Trapezoid weight of every step within one block's intervals (all blocks
// when block is empty).
std::vector<double> weights_for(const Trajectory& traj, std::optional<std::size_t> block) {
  std::vector<double> w(traj.size(), 0.0);
  for (std::size_t n = 1; n < traj.size(); ++n) {
    if (block && traj.steps[n].block != *block) continue;
    const double h = traj.steps[n].t - traj.steps[n - 1].t;
    w[n - 1] += 0.5 * h;
    w[n] += 0.5 * h;
  }
  return w;
}

}  // namespace

const char* to_string(Integrand kind) {
  switch (kind) {
    case Integrand::constant: return "constant";
    case Integrand::pressure_tracking: return "pressure_tracking";
    case Integrand::flow_tracking: return "flow_tracking";
    case Integrand::compressor_energy: return "compressor_energy";
  }
  return "?";
}

FunctionalSpec FunctionalSpec::scaled(double factor) const {
  FunctionalSpec out = *this;
  for (auto* terms : {&out.pipe_terms, &out.node_terms, &out.arc_terms}) {
    for (auto& t : *terms) t.weight *= factor;
  }
  return out;
}

FunctionalSpec FunctionalSpec::concat(const FunctionalSpec& other) const {
  FunctionalSpec out = *this;
  out.pipe_terms.insert(out.pipe_terms.end(), other.pipe_terms.begin(), other.pipe_terms.end());
  out.node_terms.insert(out.node_terms.end(), other.node_terms.begin(), other.node_terms.end());
  out.arc_terms.insert(out.arc_terms.end(), other.arc_terms.begin(), other.arc_terms.end());
  return out;
}

void FunctionalSpec::validate(const Network& network, double horizon) const {
  auto check_target = [&](const FunctionalTerm& t) {
    if (!tracking(t.kind)) return;
    if (t.target.empty()) {
      throw Error(ErrorCode::missing_target, "tracking term on '" + t.id + "' has no target");
    }
    if (!t.target.covers(0.0, horizon)) {
      throw Error(ErrorCode::missing_target, "target of '" + t.id + "' does not cover [0, T]");
    }
  };
  for (const auto& t : pipe_terms) {
    auto a = network.find_arc(t.id);
    if (!a || !network.arc(*a).is_pipe()) {
      throw Error(ErrorCode::invalid_argument, "pipe term references '" + t.id + "', not a pipe");
    }
    if (t.kind == Integrand::compressor_energy) {
      throw Error(ErrorCode::invalid_argument, "energy term on pipe '" + t.id + "'");
    }
    check_target(t);
  }
  for (const auto& t : node_terms) {
    if (!network.find_node(t.id)) {
      throw Error(ErrorCode::invalid_argument, "node term references unknown node '" + t.id + "'");
    }
    if (t.kind == Integrand::compressor_energy) {
      throw Error(ErrorCode::invalid_argument, "energy term on node '" + t.id + "'");
    }
    check_target(t);
  }
  for (const auto& t : arc_terms) {
    auto a = network.find_arc(t.id);
    if (!a) throw Error(ErrorCode::invalid_argument, "arc term references unknown arc '" + t.id + "'");
    if (t.kind == Integrand::compressor_energy && !network.arc(*a).is_compressor()) {
      throw Error(ErrorCode::invalid_argument, "energy term on non-compressor '" + t.id + "'");
    }
    check_target(t);
  }
}

std::vector<double> trapezoid_weights(const Trajectory& traj) { return weights_for(traj, std::nullopt); }

double functional_rate_at(const Network& network, const SystemLayout& layout,
                          const ControlVector& controls, const Eigen::VectorXd& x, double t,
                          const FunctionalSpec& spec, std::vector<double>* per_term) {
  if (per_term) per_term->assign(spec.pipe_terms.size() + spec.node_terms.size() + spec.arc_terms.size(), 0.0);
  return rate_at(network, layout, controls, x, t, spec, nullptr, 1.0, per_term);
}

double functional_rate(const Network& network, const Trajectory& traj, std::size_t step,
                       const FunctionalSpec& spec) {
  return rate(network, traj, step, spec, nullptr, 1.0, nullptr);
}

FunctionalValue evaluate(const Network& network, const Trajectory& traj,
                         const FunctionalSpec& spec) {
  FunctionalValue out;
  const std::size_t n_terms = spec.pipe_terms.size() + spec.node_terms.size() + spec.arc_terms.size();
  std::vector<double> per(n_terms, 0.0);
  std::vector<double> rates(traj.size());
  const auto w = trapezoid_weights(traj);
  for (std::size_t n = 0; n < traj.size(); ++n) {
    std::vector<double> here(n_terms, 0.0);
    rates[n] = rate(network, traj, n, spec, nullptr, 1.0, &here);
    for (std::size_t k = 0; k < n_terms; ++k) per[k] += w[n] * here[k];
  }
  const std::size_t nb = traj.assignment.blocks.size();
  out.block_partials.assign(nb, 0.0);
  for (std::size_t n = 1; n < traj.size(); ++n) {
    const double h = traj.steps[n].t - traj.steps[n - 1].t;
    out.block_partials[traj.steps[n].block] += 0.5 * h * (rates[n - 1] + rates[n]);
  }
  std::size_t k = 0;
  for (std::size_t i = 0; i < spec.pipe_terms.size(); ++i) out.pipe_terms.push_back(per[k++]);
  for (std::size_t i = 0; i < spec.node_terms.size(); ++i) out.node_terms.push_back(per[k++]);
  for (std::size_t i = 0; i < spec.arc_terms.size(); ++i) out.arc_terms.push_back(per[k++]);
  for (double v : per) out.total += v;
  return out;
}

double evaluate_block(const Network& network, const Trajectory& traj, const FunctionalSpec& spec,
                      std::size_t block) {
  const auto w = weights_for(traj, block);
  double total = 0.0;
  for (std::size_t n = 0; n < traj.size(); ++n) {
    if (w[n] != 0.0) total += w[n] * functional_rate(network, traj, n, spec);
  }
  return total;
}

std::vector<Eigen::VectorXd> state_gradient(const Network& network, const Trajectory& traj,
                                            const FunctionalSpec& spec,
                                            std::optional<std::size_t> block) {
  const auto w = weights_for(traj, block);
  std::vector<Eigen::VectorXd> out(traj.size());
  for (std::size_t n = 0; n < traj.size(); ++n) {
    out[n] = Eigen::VectorXd::Zero(traj.steps[n].x.size());
    if (w[n] != 0.0) rate(network, traj, n, spec, &out[n], w[n], nullptr);
  }
  return out;
}

Eigen::VectorXd control_direct_gradient(const Network& network, const Trajectory& traj,
                                        const FunctionalSpec& spec) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(traj.controls.size()));
  const auto w = trapezoid_weights(traj);
  for (const auto& term : spec.arc_terms) {
    if (term.kind != Integrand::compressor_energy) continue;
    const std::size_t a = network.arc_index(term.id);
    const CompressorArc& cs = network.arc(a).compressor();
    for (std::size_t n = 0; n < traj.size(); ++n) {
      const double t = traj.steps[n].t;
      if (w[n] == 0.0 || !cs.on(t)) continue;
      const double q = traj.steps[n].x[static_cast<Eigen::Index>(traj.layout_of(n).tail_q(a))];
      const double c = w[n] * term.weight * network.gas().rho0 * q / cs.eta_ad;
      for (const auto& wt : traj.controls.weights(a, t)) g[static_cast<Eigen::Index>(wt.flat)] += c * wt.w;
    }
  }
  return g;
}

}  // namespace gasgrid
