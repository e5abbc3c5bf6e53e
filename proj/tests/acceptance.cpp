// Acceptance suite: one line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <gasgrid/adaptivity.hpp>
#include <gasgrid/adjoint.hpp>
#include <gasgrid/compressor.hpp>
#include <gasgrid/gas_models.hpp>
#include <gasgrid/io.hpp>
#include <gasgrid/optimizer.hpp>
#include <gasgrid/sqp.hpp>

#include "field_oracle.hpp"
#include "support.hpp"

using namespace gasgrid;
using namespace fixtures;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const std::string kData = GASGRID_DATA_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ----------------------------------------------------------------- 1

// Isothermal friction-dominated pipe: p_out^2 = p_in^2 - lambda rho0^2 c^2 |q| q L / (D A^2).
double closed_form_pout(double p_in, double q, const PipeParameters& p) {
  const double k = p.lambda * p.rho0 * p.rho0 * p.c * p.c / (p.diameter * p.area * p.area);
  return std::sqrt(p_in * p_in - k * std::abs(q) * q * p.length);
}

Outcome m1_oracle() {
  const double L = 5e4, p_in = 60e5, q = 150.0;
  const Network net = single_pipe(L, p_in, TimeSeries::constant(-q));
  const double exact = closed_form_pout(p_in, q, pipe_par(L));
  // the default Newton tolerance would floor the error near 1e-8
  NewtonOptions newton;
  newton.tol = 1e-13;
  auto error_at = [&](ModelLevel level, std::size_t cells) {
    auto lay = std::make_shared<const SystemLayout>(net, uniform_pipes(net, level, cells));
    const auto s = steady_state(net, lay, ControlVector{}, 0.0, newton);
    return std::abs(s.head_state(0).p - exact) / exact;
  };
  std::vector<double> errs;
  for (std::size_t n = 16; n <= 256; n *= 2) errs.push_back(error_at(ModelLevel::M2, n));
  double order = 1e300;
  for (std::size_t k = 1; k < errs.size(); ++k) order = std::min(order, std::log2(errs[k - 1] / errs[k]));
  const double m3 = error_at(ModelLevel::M3, 256);
  Outcome o;
  o.pass = order >= 1.8 && errs.back() <= 1e-3 && m3 <= 1e-3;
  o.detail = fmt("M2 min order %.3f, M2 error at L/256 %.2e, M3 error at L/256 %.2e", order,
                 errs.back(), m3);
  return o;
}

// ----------------------------------------------------------------- 2

NetworkSpec five_node_spec() {
  NetworkSpec s;
  s.nodes = {pressure_node("S", TimeSeries({0, 3600, 7200}, {50e5, 51e5, 50.5e5})),
             interior("A"), interior("B"), interior("J"),
             flow_node("T", TimeSeries({0, 1800, 5400, 7200}, {-120, -120, -170, -150}))};
  s.arcs = {pipe("P1", "S", "A", 30e3), compressor("C", "A", "B", "F"), pipe("P2", "B", "J", 40e3),
            pipe("P3", "J", "T", 20e3, 0.6), pipe("P4", "J", "T", 25e3, 0.5)};
  s.fields["F"] = box_field("F", 0.0, 400.0, 0.0, 1.5e5);
  return s;
}

Outcome adjoint_exactness() {
  const Network net = build_network(five_node_spec());
  ControlVector c;
  c.add({ControlKind::compressor_head, net.arc_index("C"),
         TimeSeries({0, 1800, 3600, 5400, 7200}, {3e4, 3.2e4, 3.5e4, 3.3e4, 3e4}), 0, 1.5e5, 1e4});
  auto a = ModelAssignment::uniform(net, 7200, 3600, 600, ModelLevel::M3, 5e3);
  a.blocks[1].pipes[net.arc_index("P2")] = {ModelLevel::M1, 8};
  a.blocks[1].pipes[net.arc_index("P4")] = {ModelLevel::M2, 3};
  auto lay = std::make_shared<const SystemLayout>(net, a.blocks[0].pipes);
  const DiscreteState init = steady_state(net, lay, c);
  const Trajectory tr = simulate(net, a, c, init, {}, true);

  FunctionalSpec spec;
  spec.node_terms.push_back({"T", Integrand::pressure_tracking, 1.0, TimeSeries::constant(40e5)});
  spec.pipe_terms.push_back({"P3", Integrand::flow_tracking, 1e-4, TimeSeries::constant(60.0)});
  spec.arc_terms.push_back({"C", Integrand::compressor_energy, 1e-7, {}});

  auto value = [&](const Network& n, const ControlVector& cv) {
    SimulateOptions so;
    so.frozen = &tr;
    return evaluate(n, simulate(n, tr.assignment, cv, tr.initial, so, true), spec).total;
  };
  // Richardson-extrapolated central differences
  auto derivative = [&](double h, const std::function<double(double)>& f) {
    const double d1 = (f(h) - f(-h)) / (2 * h);
    const double d2 = (f(h / 2) - f(-h / 2)) / h;
    return (4 * d2 - d1) / 3;
  };

  std::vector<double> adj, fd;
  const VectorXd gc = functional_control_gradient(net, tr, spec);
  const auto flat = c.flat();
  const auto scales = c.scales();
  for (std::size_t k = 0; k < flat.size(); ++k) {
    adj.push_back(gc[static_cast<Eigen::Index>(k)]);
    fd.push_back(derivative(1e-3 * scales[k], [&](double d) {
      auto f = flat;
      f[k] += d;
      ControlVector cv = c;
      cv.set_flat(f);
      return value(net, cv);
    }));
  }
  const auto params = boundary_parameters(net);
  const VectorXd gb = functional_boundary_gradient(net, tr, spec, params);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Node& node = net.node(params[k].node);
    const bool pressure = node.boundary->kind == NodeCondition::Kind::prescribed_pressure;
    adj.push_back(gb[static_cast<Eigen::Index>(k)]);
    fd.push_back(derivative(pressure ? 100.0 : 1e-2, [&](double d) {
      NodeCondition cond = *node.boundary;
      cond.profile.mutable_values()[params[k].breakpoint] += d;
      return value(net.with_boundaries({{node.id, cond}}), c);
    }));
  }
  double biggest = 0.0, worst = 0.0;
  for (std::size_t k = 0; k < adj.size(); ++k) biggest = std::max({biggest, std::abs(adj[k]), std::abs(fd[k])});
  for (std::size_t k = 0; k < adj.size(); ++k) worst = std::max(worst, rel_err(adj[k], fd[k], 1e-6 * biggest));
  Outcome o;
  o.pass = worst <= 1e-5 && adj.size() == flat.size() + params.size() && !params.empty();
  o.detail = fmt("%zu controls + %zu boundary breakpoints, max rel. error %.2e", flat.size(),
                 params.size(), worst);
  return o;
}

// ----------------------------------------------------------------- 3

struct Loaded {
  NetworkSpec spec;
  ScenarioSpec scenario;
  PreparedRun run;
};

Loaded load(const std::string& network, const std::string& scenario) {
  Loaded l;
  l.spec = parse_network(kData + "/" + network);
  l.scenario = parse_scenario(kData + "/" + scenario, l.spec);
  l.run = prepare_run(l.spec, l.scenario, l.scenario.adaptivity.dx_max);
  return l;
}

double worst_mass_residual(const Network& net, const Trajectory& tr) {
  double worst = 0.0;
  for (std::size_t n = 0; n < tr.size(); ++n) {
    const DiscreteState s = tr.state(n);
    for (std::size_t v = 0; v < net.node_count(); ++v) {
      double sum = s.node_flow(v), scale = std::abs(s.node_flow(v));
      for (std::size_t a : net.in_arcs(v)) {
        sum += s.head_state(a).q;
        scale = std::max(scale, std::abs(s.head_state(a).q));
      }
      for (std::size_t a : net.out_arcs(v)) {
        sum -= s.tail_state(a).q;
        scale = std::max(scale, std::abs(s.tail_state(a).q));
      }
      worst = std::max(worst, std::abs(sum) / std::max(scale, 1.0));
    }
  }
  return worst;
}

Outcome conservation() {
  const Loaded t = load("tutorial.json", "tutorial_scenario.json");
  AdaptiveOptions opts = t.scenario.adaptivity;
  opts.tol = 1e-3;
  const auto [tr, rep] = adaptive_simulate(t.run.network, t.run.controls, t.scenario.functional,
                                           t.run.initial, opts);
  const double mass = worst_mass_residual(t.run.network, tr);

  // frictionless M2 pipe, 12 h of withdrawal and refill
  const double L = 4e4, H = 12 * 3600.0;
  const Network net = single_pipe(
      L, 60e5, TimeSeries({0, 3600, 7200, 14400, 28800, H}, {0, -80, -20, 40, 0, 0}), 0.8, 0.0);
  const auto a = ModelAssignment::uniform(net, H, 7200, 300, ModelLevel::M2, 2e3);
  auto lay = std::make_shared<const SystemLayout>(net, a.blocks[0].pipes);
  const Trajectory lp = simulate(net, a, ControlVector{}, steady_state(net, lay, ControlVector{}));
  const PipeParameters& par = net.arc(0).pipe();
  // stored standard volume: A / (rho0 c^2) * integral of p
  auto stored = [&](const DiscreteState& s) {
    const auto prof = s.profile(0);
    const double dx = L / static_cast<double>(prof.size() - 1);
    double sum = 0.0;
    for (std::size_t i = 1; i < prof.size(); ++i) sum += 0.5 * dx * (prof[i - 1].p + prof[i].p);
    return par.area / (par.rho0 * par.c * par.c) * sum;
  };
  double flux = 0.0;
  for (std::size_t n = 1; n < lp.size(); ++n) {
    const DiscreteState s = lp.state(n);
    flux += lp.steps[n].dt * (s.tail_state(0).q - s.head_state(0).q);
  }
  const double v0 = stored(lp.state(0));
  const double drift = std::abs(stored(lp.state(lp.size() - 1)) - v0 - flux) / v0;
  const double lp_mass = worst_mass_residual(net, lp);
  Outcome o;
  o.pass = mass <= 1e-8 && lp_mass <= 1e-8 && drift <= 1e-6 && lp.horizon() >= H;
  o.detail = fmt("tutorial mass residual %.2e over %zu steps, linepack drift %.2e over %.0f h",
                 std::max(mass, lp_mass), tr.size(), drift, lp.horizon() / 3600);
  return o;
}

// ----------------------------------------------------------------- 4, 5

struct TrendRun {
  double tol, functional, cpu;
  std::array<double, 3> usage;
};

struct Trend {
  std::vector<TrendRun> runs;
  double reference = 0.0;
};

const Trend& tutorial_trend() {
  static const Trend trend = [] {
    Trend t;
    const Loaded l = load("tutorial.json", "tutorial_scenario.json");
    AdaptiveOptions opts = l.scenario.adaptivity;
    std::size_t dx_level = 0, dt_level = 0;
    for (double tol : {1e-1, 1e-2, 1e-3, 1e-4}) {
      opts.tol = tol;
      const auto [tr, rep] = adaptive_simulate(l.run.network, l.run.controls, l.scenario.functional,
                                               l.run.initial, opts);
      dx_level = std::max(dx_level, rep.max_dx_level);
      dt_level = std::max(dt_level, rep.max_dt_level);
      t.runs.push_back({tol, rep.functional, rep.cpu_seconds, rep.model_usage});
    }
    const auto ref = reference_assignment(l.run.network, opts, l.scenario.horizon, dx_level, dt_level);
    const Trajectory rt = simulate(l.run.network, ref, l.run.controls, l.run.initial, {}, true);
    t.reference = evaluate(l.run.network, rt, l.scenario.functional).total;
    return t;
  }();
  return trend;
}

Outcome error_trend() {
  const Trend& t = tutorial_trend();
  Outcome o{true, ""};
  std::string errs, cpus;
  for (std::size_t k = 0; k < t.runs.size(); ++k) {
    const double e = std::abs(t.runs[k].functional - t.reference) / std::abs(t.reference);
    errs += fmt("%s%.1e", k ? " " : "", e);
    cpus += fmt("%s%.3f", k ? " " : "", t.runs[k].cpu);
    if (k == 0) continue;
    const double e0 = std::abs(t.runs[k - 1].functional - t.reference) / std::abs(t.reference);
    if (e > 1.2 * e0) o.pass = false;
    if (t.runs[k].cpu < 0.8 * t.runs[k - 1].cpu - 5e-3) o.pass = false;
  }
  o.detail = "errors [" + errs + "], cpu s [" + cpus + "]";
  return o;
}

Outcome usage_trend() {
  const Trend& t = tutorial_trend();
  Outcome o{true, ""};
  std::string m1, m3;
  for (std::size_t k = 0; k < t.runs.size(); ++k) {
    m1 += fmt("%s%.1f", k ? " " : "", t.runs[k].usage[0]);
    m3 += fmt("%s%.1f", k ? " " : "", t.runs[k].usage[2]);
    if (k == 0) continue;
    if (t.runs[k].usage[0] > t.runs[k - 1].usage[0] + 1e-9) o.pass = false;
    if (t.runs[k].usage[2] < t.runs[k - 1].usage[2] - 1e-9) o.pass = false;
  }
  o.detail = "M1 % [" + m1 + "], M3 % [" + m3 + "]";
  return o;
}

// ----------------------------------------------------------------- 6

Outcome semiconvexity() {
  CharacteristicField f;
  f.id = "acceptance";
  f.polygons.push_back({{{50, 2e4}, {150, 2e4}, {130, 6e4}, {60, 6e4}}});
  f.polygons.push_back({{{100, 4e4}, {250, 4e4}, {220, 9e4}, {120, 9e4}}});
  f.polygons.push_back({{{280, 1e4}, {350, 1e4}, {340, 5e4}, {290, 5e4}}});
  f.polygons.push_back({{{20, 7e4}, {60, 6.5e4}, {70, 1e5}, {30, 1.1e5}, {10, 9e4}}});
  const SemiconvexField sc = build_semiconvex(f, 48);

  std::mt19937_64 rng(20261014);
  std::uniform_real_distribution<double> uq(0.0, 400.0), uh(0.0, 1.2e5), ul(0.0, 1.0);
  int samples = 0, combo_fail = 0;
  while (samples < 10000) {
    const double h = uh(rng), q1 = uq(rng), q2 = uq(rng);
    if (contains(sc, q1, h) < 0.0 || contains(sc, q2, h) < 0.0) continue;
    const double l = ul(rng);
    if (contains(sc, l * q1 + (1.0 - l) * q2, h) < 0.0) ++combo_fail;
    ++samples;
  }

  // raster comparison away from absorbed holes and a one-slice band
  const double spacing = sc.levels[1] - sc.levels[0];
  const std::size_t nq = 400, nh = 240;
  std::size_t compared = 0, disagree = 0;
  for (std::size_t j = 0; j < nh; ++j) {
    const double h = (j + 0.5) * 1.2e5 / nh;
    const auto here = raster_slice(f, h, 0.0, 400.0, 40000);
    const auto below = raster_slice(f, std::max(h - spacing, 0.0), 0.0, 400.0, 40000);
    const auto above = raster_slice(f, h + spacing, 0.0, 400.0, 40000);
    if (!here.any || !below.any || !above.any) {
      // near the top or bottom of the field only the outside is checked
      if (!here.any && !below.any && !above.any) {
        for (std::size_t i = 0; i < nq; ++i) {
          ++compared;
          if (contains(sc, (i + 0.5) * 400.0 / nq, h) >= 0.0) ++disagree;
        }
      }
      continue;
    }
    const double lo_band = std::max({std::abs(here.lo - below.lo), std::abs(here.lo - above.lo)}) + 0.05;
    const double hi_band = std::max({std::abs(here.hi - below.hi), std::abs(here.hi - above.hi)}) + 0.05;
    for (std::size_t i = 0; i < nq; ++i) {
      const double q = (i + 0.5) * 400.0 / nq;
      if (std::abs(q - here.lo) <= lo_band || std::abs(q - here.hi) <= hi_band) continue;
      const bool union_in = in_union(f, q, h);
      const bool hole = !union_in && q > here.lo && q < here.hi;
      if (hole) continue;
      ++compared;
      if ((contains(sc, q, h) >= 0.0) != union_in) ++disagree;
    }
  }
  Outcome o;
  o.pass = combo_fail == 0 && disagree == 0 && compared > 10000;
  o.detail = fmt("%d convex combinations, %d infeasible; raster %zu points, %zu disagree, %zu hole levels",
                 samples, combo_fail, compared, disagree, sc.absorbed_hole_levels);
  return o;
}

// ----------------------------------------------------------------- 7

struct PostHoc {
  double pressure = 0.0, field = 0.0, tracking = 0.0;
};

PostHoc recheck(const Loaded& l, const NominationResult& r) {
  const Network& net = l.run.network;
  SimulateOptions so;
  so.frozen = &r.trajectory;
  const Trajectory tr = simulate(net, r.assignment, r.controls, l.run.initial, so,
                                 r.trajectory.steady_initial);
  PostHoc out;
  for (std::size_t n = 0; n < tr.size(); ++n) {
    const double t = tr.steps[n].t;
    const DiscreteState s = tr.state(n);
    for (const auto& b : l.scenario.constraints.pressure) {
      if (t < b.t0 || t > b.t1) continue;
      const double p = s.node_pressure(net.node_index(b.node));
      if (b.lower) out.pressure = std::max(out.pressure, ((*b.lower)(t) - p) / 1e5);
      if (b.upper) out.pressure = std::max(out.pressure, (p - (*b.upper)(t)) / 1e5);
    }
    for (const auto& id : l.scenario.constraints.compressors) {
      const std::size_t a = net.arc_index(id);
      if (!net.arc(a).compressor().on(t)) continue;
      const SemiconvexField sf = build_semiconvex(net.fields().at(net.arc(a).compressor().field_id),
                                                  l.scenario.constraints.field_levels);
      const GasState in = s.tail_state(a);
      const double rho = gas_density(in.p, net.gas());
      const double q_vol = net.gas().rho0 * in.q / rho;
      const double h = *tr.controls.value(a, t);
      out.field = std::max({out.field, (sf.h_min() - h) / kHeadScale, (h - sf.h_max()) / kHeadScale});
      const auto sl = sf.slice(h);
      out.field = std::max({out.field, sl.lo - q_vol, q_vol - sl.hi});
    }
  }
  // time RMS of the relative flow deviation over the accepted steps
  for (const auto& term : l.scenario.functional.node_terms) {
    const std::size_t v = net.node_index(term.id);
    double peak = 0.0, sum = 0.0;
    for (double x : term.target.values()) peak = std::max(peak, std::abs(x));
    for (std::size_t n = 1; n < tr.size(); ++n) {
      const double d = (tr.state(n).node_flow(v) - term.target(tr.steps[n].t)) / peak;
      sum += tr.steps[n].dt * d * d;
    }
    out.tracking = std::max(out.tracking, std::sqrt(sum / tr.horizon()));
  }
  return out;
}

Outcome nomination() {
  const Loaded l = load("three_compressor.json", "nomination.json");
  NominationOptions o;
  o.sqp = l.scenario.optimizer;
  o.adaptive = l.scenario.adaptivity;
  o.control_interval = l.scenario.control_interval;
  const NominationResult r = validate_nomination(l.run.network, l.run.initial, l.run.controls,
                                                 l.scenario.constraints, l.scenario.functional,
                                                 l.scenario.horizon, o);
  const PostHoc ph = recheck(l, r);

  const Loaded bad = load("three_compressor.json", "nomination_infeasible.json");
  o.sqp = bad.scenario.optimizer;
  const NominationResult rb = validate_nomination(bad.run.network, bad.run.initial,
                                                  bad.run.controls, bad.scenario.constraints,
                                                  bad.scenario.functional, bad.scenario.horizon, o);
  Outcome out;
  out.pass = r.nlp.status == SqpStatus::converged && o.sqp.epsx == 5e-4 && ph.pressure <= 1e-6 &&
             ph.field <= 1e-6 && ph.tracking <= 0.01 && rb.nlp.status == SqpStatus::infeasible;
  out.detail = fmt("%s in %d iterations; re-simulated violation pressure %.1e bar, field %.1e; "
                   "tracking RMS %.2f %%; variant %s (violation %.2f)",
                   to_string(r.nlp.status), r.nlp.iterations, ph.pressure, ph.field,
                   100 * ph.tracking, to_string(rb.nlp.status), rb.nlp.max_violation);
  return out;
}

// ----------------------------------------------------------------- 8

NlpProblem quadratic(MatrixXd Q, VectorXd b, MatrixXd A, VectorXd a) {
  NlpProblem p;
  p.n = static_cast<std::size_t>(b.size());
  p.m = static_cast<std::size_t>(A.rows());
  p.objective = [Q, b](const VectorXd& x, VectorXd* g) {
    if (g) *g = Q * x + b;
    return 0.5 * x.dot(Q * x) + b.dot(x);
  };
  p.constraints = [A, a](const VectorXd& x, double band, VectorXd& c, MatrixXd* jac,
                         std::vector<bool>* has) {
    c = A * x + a;
    if (!jac) return;
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      if (c[i] > band) continue;
      jac->row(i) = A.row(i);
      (*has)[static_cast<std::size_t>(i)] = true;
    }
  };
  return p;
}

Outcome sqp_fixtures() {
  SqpOptions tight;
  tight.epsx = tight.opt_tol = tight.feas_tol = 1e-12;
  struct Fixture {
    std::string name;
    NlpProblem p;
    VectorXd x0, exact;
  };
  std::vector<Fixture> fx;
  {
    MatrixXd A(1, 2);
    A << 1, 1;
    fx.push_back({"half plane", quadratic(2 * MatrixXd::Identity(2, 2), VectorXd::Zero(2), A,
                                          VectorXd::Constant(1, -1)),
                  (VectorXd(2) << 3, -1).finished(), (VectorXd(2) << 0.5, 0.5).finished()});
  }
  {
    MatrixXd A(3, 2);
    A << 1, -2, -1, -2, -1, 2;
    NlpProblem p = quadratic(2 * MatrixXd::Identity(2, 2), (VectorXd(2) << -2, -5).finished(), A,
                             (VectorXd(3) << 2, 6, 2).finished());
    p.lower = VectorXd::Zero(2);
    fx.push_back({"three half planes", p, (VectorXd(2) << 2, 0).finished(),
                  (VectorXd(2) << 1.4, 1.7).finished()});
  }
  {
    MatrixXd Q(2, 2);
    Q << 2, 0, 0, 4;
    MatrixXd A(1, 2);
    A << 1, 1;
    fx.push_back({"weighted projection", quadratic(Q, VectorXd::Zero(2), A, VectorXd::Constant(1, -3)),
                  VectorXd::Zero(2), (VectorXd(2) << 2, 1).finished()});
  }
  {
    NlpProblem p = quadratic(2 * MatrixXd::Identity(2, 2), (VectorXd(2) << -6, 2).finished(),
                             MatrixXd(0, 2), VectorXd());
    p.lower = VectorXd::Zero(2);
    p.upper = VectorXd::Constant(2, 2.0);
    fx.push_back({"box", p, VectorXd::Ones(2), (VectorXd(2) << 2, 0).finished()});
  }
  double worst = 0.0;
  bool merit_ok = true, converged = true;
  for (const auto& f : fx) {
    const NLPResult r = sqp_solve(f.p, f.x0, tight);
    converged = converged && r.status == SqpStatus::converged;
    worst = std::max(worst, (r.x - f.exact).lpNorm<Eigen::Infinity>());
    for (std::size_t k = 0; k < r.history.size(); ++k) {
      if (r.history[k].merit_after > r.history[k].merit_before) merit_ok = false;
      if (k > 0 && r.history[k].penalty == r.history[k - 1].penalty &&
          r.history[k].merit_before > r.history[k - 1].merit_after + 1e-12) {
        merit_ok = false;
      }
    }
  }
  Outcome o;
  o.pass = converged && worst <= 1e-8 && merit_ok;
  o.detail = fmt("%zu fixtures, max error %.1e, merit %s", fx.size(), worst,
                 merit_ok ? "non-increasing" : "increased");
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_s;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {"M1 oracle and spatial order", 5, m1_oracle},
      {"adjoint against finite differences", 30, adjoint_exactness},
      {"mass and linepack conservation", 10, conservation},
      {"functional error and CPU trend over TOL", 120, error_trend},
      {"model usage trend over TOL", 120, usage_trend},
      {"semiconvex field", 5, semiconvexity},
      {"nomination validation", 300, nomination},
      {"SQP fixtures", 1, sqp_fixtures},
  };
  int failed = 0, k = 0;
  for (const auto& c : criteria) {
    ++k;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = s <= c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("[%s] %d %s: %s (%.2f s%s)\n", pass ? "PASS" : "FAIL", k, c.name, o.detail.c_str(),
                s, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
