#include "gasgrid/adaptivity.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <functional>
#include <limits>
#include <numeric>
#include <string>

#include "gasgrid/errors.hpp"
#include "gasgrid/parallel.hpp"

namespace gasgrid {

namespace {

using Index = Eigen::Index;

Index ix(std::size_t i) { return static_cast<Index>(i); }

double sum_abs(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

double signed_sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

ModelLevel next_level(ModelLevel l) { return l == ModelLevel::M1 ? ModelLevel::M2 : ModelLevel::M3; }
ModelLevel prev_level(ModelLevel l) { return l == ModelLevel::M3 ? ModelLevel::M2 : ModelLevel::M1; }

std::vector<PipeDiscretization> with_levels(const SystemLayout& lay, bool up) {
  auto pipes = lay.pipes();
  for (std::size_t a = 0; a < pipes.size(); ++a) {
    if (!lay.arc(a).pde) continue;
    if (up && pipes[a].level == ModelLevel::M2) pipes[a].level = ModelLevel::M3;
    if (!up && pipes[a].level == ModelLevel::M3) pipes[a].level = ModelLevel::M2;
  }
  return pipes;
}

// Every pipe with twice its cells; algebraic pipes only change their quadrature.
std::vector<PipeDiscretization> doubled(const Network& net, const SystemLayout& lay) {
  auto pipes = lay.pipes();
  for (std::size_t a = 0; a < pipes.size(); ++a) {
    if (net.arc(a).is_pipe()) pipes[a].n_cells = 2 * std::max<std::size_t>(1, pipes[a].n_cells);
  }
  return pipes;
}

// Midpoint of cell i from grid values v(0..n): cubic inside, quadratic at the
// ends, linear on a single cell.
double midpoint(const std::function<double(std::size_t)>& v, std::size_t i, std::size_t n) {
  if (n == 1) return 0.5 * (v(0) + v(1));
  if (i >= 1 && i + 2 <= n) return (-v(i - 1) + 9.0 * v(i) + 9.0 * v(i + 1) - v(i + 2)) / 16.0;
  if (i == 0) return 0.375 * v(0) + 0.75 * v(1) - 0.125 * v(2);
  return -0.125 * v(i - 1) + 0.75 * v(i) + 0.375 * v(i + 1);
}

Eigen::VectorXd prolong(const Network& net, const SystemLayout& coarse, const SystemLayout& fine,
                        const Eigen::VectorXd& x) {
  Eigen::VectorXd y(ix(fine.size()));
  for (std::size_t a = 0; a < net.arc_count(); ++a) {
    const auto& cb = coarse.arc(a);
    const auto& fb = fine.arc(a);
    if (!cb.pde) {
      y.segment(ix(fb.offset), ix(fb.size)) = x.segment(ix(cb.offset), ix(cb.size));
      continue;
    }
    const std::size_t n = cb.n_cells;
    for (std::size_t k = 0; k < 2; ++k) {
      auto v = [&](std::size_t i) { return x[ix(cb.offset + 2 * i + k)]; };
      for (std::size_t i = 0; i <= n; ++i) y[ix(fb.offset + 4 * i + k)] = v(i);
      for (std::size_t i = 0; i < n; ++i) y[ix(fb.offset + 4 * i + 2 + k)] = midpoint(v, i, n);
    }
  }
  for (std::size_t v = 0; v < net.node_count(); ++v) {
    y.segment(ix(fine.node_offset(v)), 2) = x.segment(ix(coarse.node_offset(v)), 2);
  }
  return y;
}

// Trapezoid weights of the intervals of one block.
std::vector<double> block_weights(const Trajectory& traj, std::size_t block) {
  std::vector<double> w(traj.size(), 0.0);
  for (std::size_t n = 1; n < traj.size(); ++n) {
    if (traj.steps[n].block != block) continue;
    const double h = traj.steps[n].t - traj.steps[n - 1].t;
    w[n - 1] += 0.5 * h;
    w[n] += 0.5 * h;
  }
  return w;
}

// Arc owning each functional term (npos for node terms).
std::vector<std::size_t> term_arcs(const Network& net, const FunctionalSpec& spec) {
  std::vector<std::size_t> out;
  for (const auto& t : spec.pipe_terms) out.push_back(net.arc_index(t.id));
  for (std::size_t k = 0; k < spec.node_terms.size(); ++k) out.push_back(std::size_t(-1));
  for (const auto& t : spec.arc_terms) out.push_back(net.arc_index(t.id));
  return out;
}

struct StepEta {
  std::vector<double> model, dx, dt, down;
  double dt_nodes = 0.0;
};

double weighted(const Eigen::VectorXd& mu, const Eigen::VectorXd& d, std::size_t off,
                std::size_t len) {
  return mu.segment(ix(off), ix(len)).dot(d.segment(ix(off), ix(len)));
}

StepEta step_estimate(const Network& net, const Trajectory& traj, const FunctionalSpec& spec,
                      const std::vector<std::size_t>& owners, const Eigen::VectorXd& mu,
                      std::size_t n, double weight) {
  const std::size_t na = net.arc_count();
  StepEta e{std::vector<double>(na, 0.0), std::vector<double>(na, 0.0),
            std::vector<double>(na, 0.0), std::vector<double>(na, 0.0), 0.0};
  const auto& lay_ptr = traj.layouts.at(traj.steps[n].block);
  const SystemLayout& lay = *lay_ptr;
  const StepInput in = traj.input(net, n);
  const double t = in.t;
  const double dt = in.dt;
  const Eigen::VectorXd& x = traj.steps[n].x;
  const Eigen::VectorXd x_old = n > 0 ? traj.old_state(n) : Eigen::VectorXd();
  const Eigen::VectorXd rc = assemble_system(in, x_old, x, false).residual;

  bool any_m2 = false, any_m3 = false;
  for (std::size_t a = 0; a < na; ++a) {
    const auto& blk = lay.arc(a);
    if (!blk.pde) continue;
    any_m2 |= blk.level == ModelLevel::M2;
    any_m3 |= blk.level == ModelLevel::M3;
  }

  // model: next level residual on the current state
  if (any_m2) {
    const SystemLayout up(net, with_levels(lay, true));
    const Eigen::VectorXd d =
        assemble_system(StepInput{net, up, traj.controls, t, dt}, x_old, x, false).residual - rc;
    for (std::size_t a = 0; a < na; ++a) {
      const auto& blk = lay.arc(a);
      if (blk.pde && blk.level == ModelLevel::M2) e.model[a] = -weighted(mu, d, blk.offset, blk.size);
    }
  }
  if (any_m3) {
    const SystemLayout down(net, with_levels(lay, false));
    const Eigen::VectorXd d =
        assemble_system(StepInput{net, down, traj.controls, t, dt}, x_old, x, false).residual - rc;
    for (std::size_t a = 0; a < na; ++a) {
      const auto& blk = lay.arc(a);
      if (blk.pde && blk.level == ModelLevel::M3) {
        e.down[a] = std::abs(weighted(mu, d, blk.offset, blk.size));
      }
    }
  }
  if (!in.steady()) {
    for (std::size_t a = 0; a < na; ++a) {
      const Arc& arc = net.arc(a);
      if (!arc.is_pipe()) continue;
      const auto& blk = lay.arc(a);
      const PipeParameters& par = arc.pipe();
      const std::size_t o = blk.offset;
      if (blk.level == ModelLevel::M1) {
        // M2 storage and inertia terms of the whole pipe on the linear profile
        const BoxCell whole = box_cell(ModelLevel::M2, par, par.length, dt, {1, 0, 1, 0}, {1, 0, 1, 0});
        const double dp = x[ix(o)] - x_old[ix(o)] + x[ix(o + 2)] - x_old[ix(o + 2)];
        const double dq = x[ix(o + 1)] - x_old[ix(o + 1)] + x[ix(o + 3)] - x_old[ix(o + 3)];
        const double d_mass = whole.old_p_coeff * dp;
        const double d_mom = (x[ix(o)] + x[ix(o + 2)]) * whole.old_q_coeff * dq;
        e.model[a] = -(mu[ix(o)] * d_mass + mu[ix(o + 1)] * d_mom);
      } else if (blk.level == ModelLevel::M2) {
        const double dx = par.length / static_cast<double>(blk.n_cells);
        const BoxCell cell = box_cell(ModelLevel::M2, par, dx, dt, {1, 0, 1, 0}, {1, 0, 1, 0});
        double s = 0.0;
        for (std::size_t i = 0; i < blk.n_cells; ++i) {
          const std::size_t c0 = o + 2 * i;
          const double dp = x[ix(c0)] - x_old[ix(c0)] + x[ix(c0 + 2)] - x_old[ix(c0 + 2)];
          const double dq = x[ix(c0 + 1)] - x_old[ix(c0 + 1)] + x[ix(c0 + 3)] - x_old[ix(c0 + 3)];
          s += mu[ix(c0)] * cell.old_p_coeff * dp + mu[ix(c0 + 1)] * cell.old_q_coeff * dq;
        }
        e.down[a] = std::abs(s);
      }
    }
  }

  // space: residual of the doubled grid on the interpolated state, summed
  // back onto the coarse cells
  {
    const SystemLayout fine(net, doubled(net, lay));
    const Eigen::VectorXd xf = prolong(net, lay, fine, x);
    const Eigen::VectorXd xof = in.steady() ? Eigen::VectorXd() : prolong(net, lay, fine, x_old);
    const Eigen::VectorXd rf =
        assemble_system(StepInput{net, fine, traj.controls, t, dt}, xof, xf, false).residual;
    for (std::size_t a = 0; a < na; ++a) {
      const auto& cb = lay.arc(a);
      if (!cb.pde) continue;
      const auto& fb = fine.arc(a);
      double s = 0.0;
      for (std::size_t i = 0; i < cb.n_cells; ++i) {
        for (std::size_t k = 0; k < 2; ++k) {
          const double d = rf[ix(fb.offset + 4 * i + k)] + rf[ix(fb.offset + 4 * i + 2 + k)] -
                           rc[ix(cb.offset + 2 * i + k)];
          s += mu[ix(cb.offset + 2 * i + k)] * d;
        }
      }
      e.dx[a] = -s;
    }
    if (!spec.pipe_terms.empty() && weight != 0.0) {
      std::vector<double> pc, pf;
      functional_rate_at(net, lay, traj.controls, x, t, spec, &pc);
      functional_rate_at(net, fine, traj.controls, xf, t, spec, &pf);
      for (std::size_t k = 0; k < spec.pipe_terms.size(); ++k) {
        e.dx[owners[k]] += weight * (pf[k] - pc[k]);
      }
    }
  }

  // time: two half steps through the interpolated midpoint state
  if (!in.steady()) {
    const double th = t - 0.5 * dt;
    Eigen::VectorXd xh;
    if (n >= 2 && !traj.transferred(n) && !traj.transferred(n - 1)) {
      const double ta = traj.steps[n - 2].t, tb = traj.steps[n - 1].t;
      const double la = (th - tb) * (th - t) / ((ta - tb) * (ta - t));
      const double lb = (th - ta) * (th - t) / ((tb - ta) * (tb - t));
      const double lc = (th - ta) * (th - tb) / ((t - ta) * (t - tb));
      xh = la * traj.old_state(n - 1) + lb * x_old + lc * x;
    } else {
      xh = 0.5 * (x_old + x);
    }
    const Eigen::VectorXd r1 =
        assemble_system(StepInput{net, lay, traj.controls, th, 0.5 * dt}, x_old, xh, false).residual;
    const Eigen::VectorXd r2 =
        assemble_system(StepInput{net, lay, traj.controls, t, 0.5 * dt}, xh, x, false).residual;
    const Eigen::VectorXd d = 0.5 * (r1 + r2) - rc;
    for (std::size_t a = 0; a < na; ++a) e.dt[a] = -weighted(mu, d, lay.arc(a).offset, lay.arc(a).size);
    for (std::size_t v = 0; v < net.node_count(); ++v) e.dt_nodes -= weighted(mu, d, lay.node_offset(v), 2);

    if (!spec.empty()) {
      std::vector<double> po, ph, pn;
      functional_rate_at(net, traj.layout_of(n - 1), traj.controls, traj.steps[n - 1].x,
                         traj.steps[n - 1].t, spec, &po);
      functional_rate_at(net, lay, traj.controls, xh, th, spec, &ph);
      functional_rate_at(net, lay, traj.controls, x, t, spec, &pn);
      const double h = t - traj.steps[n - 1].t;
      for (std::size_t k = 0; k < owners.size(); ++k) {
        const double dq = 0.5 * h * (ph[k] - 0.5 * (po[k] + pn[k]));
        if (owners[k] == std::size_t(-1)) {
          e.dt_nodes += dq;
        } else {
          e.dt[owners[k]] += dq;
        }
      }
    }
  }
  return e;
}

struct Candidate {
  std::size_t arc;
  double value;
};

// Largest first, ties by arc id.
void sort_desc(std::vector<Candidate>& c) {
  std::sort(c.begin(), c.end(), [](const Candidate& a, const Candidate& b) {
    return a.value != b.value ? a.value > b.value : a.arc < b.arc;
  });
}

void sort_asc(std::vector<Candidate>& c) {
  std::sort(c.begin(), c.end(), [](const Candidate& a, const Candidate& b) {
    return a.value != b.value ? a.value < b.value : a.arc < b.arc;
  });
}

std::size_t max_cells(const AdaptLimits& lim, std::size_t a) {
  const std::size_t base = a < lim.base_cells.size() ? std::max<std::size_t>(1, lim.base_cells[a]) : 1;
  return base << lim.max_dx_halvings;
}

std::size_t min_cells(const AdaptLimits& lim, std::size_t a) {
  return a < lim.base_cells.size() ? std::max<std::size_t>(1, lim.base_cells[a]) : 1;
}

bool divides(double len, double dt) {
  const double k = len / dt;
  return std::abs(k - std::round(k)) < 1e-9 * std::max(1.0, k);
}

// Refinement of one kind down to `target`; returns whether anything changed.
bool refine_kind(int kind, const Network& net, const ErrorEstimate& eta, double target,
                 BlockAssignment& b, const AdaptLimits& lim) {
  if (kind == 2) {
    double s = std::abs(eta.dt_total());
    if (s <= target) return false;
    const double dt = 0.5 * b.dt;
    if (dt < lim.dt_min * (1.0 - 1e-12)) return false;
    b.dt = dt;
    return true;
  }
  const auto& values = kind == 0 ? eta.eta_model : eta.eta_dx;
  std::vector<Candidate> c;
  for (std::size_t a = 0; a < net.arc_count(); ++a) {
    if (!net.arc(a).is_pipe()) continue;
    const auto& p = b.pipes[a];
    const bool can = kind == 0 ? p.level != ModelLevel::M3
                               : (p.level != ModelLevel::M1 && p.n_cells < max_cells(lim, a));
    if (can && values[a] != 0.0) c.push_back({a, std::abs(values[a])});
  }
  sort_desc(c);
  double s = sum_abs(values);
  bool changed = false;
  for (const auto& cand : c) {
    if (s <= target) break;
    auto& p = b.pipes[cand.arc];
    if (kind == 0) {
      p.level = next_level(p.level);
      s -= cand.value;
    } else {
      p.n_cells *= 2;
      s -= 0.75 * cand.value;
    }
    changed = true;
  }
  return changed;
}

bool coarsen_kind(int kind, const Network& net, const ErrorEstimate& eta, double target,
                  BlockAssignment& b, const AdaptLimits& lim) {
  if (kind == 2) {
    const double s = std::abs(eta.dt_total());
    const double dt = 2.0 * b.dt;
    if (s + 2.0 * s > target || dt > lim.dt_max * (1.0 + 1e-12) || !divides(b.t1 - b.t0, dt)) {
      return false;
    }
    b.dt = dt;
    return true;
  }
  std::vector<Candidate> c;
  for (std::size_t a = 0; a < net.arc_count(); ++a) {
    if (!net.arc(a).is_pipe()) continue;
    const auto& p = b.pipes[a];
    if (kind == 0 && p.level != ModelLevel::M1) {
      c.push_back({a, a < eta.coarsen_model.size() ? eta.coarsen_model[a] : 0.0});
    }
    if (kind == 1 && p.level != ModelLevel::M1 && p.n_cells > min_cells(lim, a) &&
        p.n_cells % 2 == 0) {
      c.push_back({a, 4.0 * std::abs(eta.eta_dx[a])});
    }
  }
  sort_asc(c);
  double s = sum_abs(kind == 0 ? eta.eta_model : eta.eta_dx);
  bool changed = false;
  for (const auto& cand : c) {
    if (s + cand.value > target) break;
    s += cand.value;
    auto& p = b.pipes[cand.arc];
    if (kind == 0) {
      p.level = prev_level(p.level);
    } else {
      p.n_cells /= 2;
    }
    changed = true;
  }
  return changed;
}

double cpu_now() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

void fill_block_stats(const Network& net, const BlockAssignment& b, BlockReport& r) {
  r.t0 = b.t0;
  r.t1 = b.t1;
  r.dt = b.dt;
  r.dx_min = std::numeric_limits<double>::infinity();
  r.dx_max = 0.0;
  std::size_t pipes = 0;
  r.model_share = {0.0, 0.0, 0.0};
  for (std::size_t a = 0; a < net.arc_count(); ++a) {
    if (!net.arc(a).is_pipe()) continue;
    ++pipes;
    const double dx = net.arc(a).pipe().length / static_cast<double>(b.pipes[a].n_cells);
    r.dx_min = std::min(r.dx_min, dx);
    r.dx_max = std::max(r.dx_max, dx);
    r.model_share[static_cast<int>(b.pipes[a].level) - 1] += 1.0;
  }
  if (pipes == 0) r.dx_min = 0.0;
  for (double& s : r.model_share) s = pipes ? s / static_cast<double>(pipes) : 0.0;
}

}  // namespace

double ErrorEstimate::sum_model() const { return signed_sum(eta_model); }
double ErrorEstimate::sum_dx() const { return signed_sum(eta_dx); }
double ErrorEstimate::dt_total() const { return signed_sum(eta_dt) + eta_dt_nodes; }

ErrorEstimate estimate_errors(const Network& network, const Trajectory& traj,
                              const FunctionalSpec& spec, const AdjointTrajectory& adj,
                              std::size_t block) {
  const std::size_t na = network.arc_count();
  ErrorEstimate out;
  out.eta_model.assign(na, 0.0);
  out.eta_dx.assign(na, 0.0);
  out.eta_dt.assign(na, 0.0);
  out.coarsen_model.assign(na, 0.0);
  if (traj.size() == 0) return out;

  std::vector<std::size_t> steps;
  for (std::size_t n = adj.first; n <= adj.last && n < traj.size(); ++n) {
    if (traj.steps[n].block != block) continue;
    if (adj.mu[n].size() != traj.steps[n].x.size()) {
      throw Error(ErrorCode::dimension_mismatch,
                  "no multipliers for step " + std::to_string(n) + " of block " +
                      std::to_string(block));
    }
    steps.push_back(n);
  }
  const auto owners = term_arcs(network, spec);
  const auto w = block_weights(traj, block);
  std::vector<StepEta> per(steps.size());
  parallel_for(steps.size(), [&](std::size_t k) {
    const std::size_t n = steps[k];
    per[k] = step_estimate(network, traj, spec, owners, adj.mu[n], n, w[n]);
  });
  // fixed summation order keeps the result independent of the thread count
  for (const auto& e : per) {
    for (std::size_t a = 0; a < na; ++a) {
      out.eta_model[a] += e.model[a];
      out.eta_dx[a] += e.dx[a];
      out.eta_dt[a] += e.dt[a];
      out.coarsen_model[a] += e.down[a];
    }
    out.eta_dt_nodes += e.dt_nodes;
  }
  return out;
}

BlockAssignment adapt(const Network& network, const ErrorEstimate& eta, double budget,
                      const BlockAssignment& current, const AdaptLimits& limits,
                      const AdaptOptions& opts, bool coarsen) {
  BlockAssignment b = current;
  const std::array<double, 3> share{opts.share_model, opts.share_dx, opts.share_dt};
  const std::array<double, 3> sums{sum_abs(eta.eta_model), sum_abs(eta.eta_dx),
                                   std::abs(eta.dt_total())};
  if (coarsen) {
    for (int k = 0; k < 3; ++k) {
      const double floor = opts.theta_coarsen * share[k] * budget;
      if (sums[k] < floor) coarsen_kind(k, network, eta, floor, b, limits);
    }
    return b;
  }
  if (sums[0] + sums[1] + sums[2] <= budget) return b;
  bool changed = false;
  for (int k = 0; k < 3; ++k) {
    if (sums[k] > share[k] * budget) {
      changed |= refine_kind(k, network, eta, share[k] * budget, b, limits);
    }
  }
  if (!changed) {
    // every kind over its share is exhausted: the remaining kinds absorb it
    const double total = sums[0] + sums[1] + sums[2];
    for (int k = 0; k < 3; ++k) {
      const double target = std::max(0.0, sums[k] - (total - budget));
      if (refine_kind(k, network, eta, target, b, limits)) break;
    }
  }
  return b;
}

std::array<double, 3> model_usage(const Network& network, const ModelAssignment& a) {
  std::array<double, 3> w{0.0, 0.0, 0.0};
  double total = 0.0;
  for (const auto& b : a.blocks) {
    const double len = b.t1 - b.t0;
    for (std::size_t k = 0; k < network.arc_count(); ++k) {
      if (!network.arc(k).is_pipe()) continue;
      w[static_cast<int>(b.pipes[k].level) - 1] += len;
      total += len;
    }
  }
  for (double& x : w) x = total > 0.0 ? 100.0 * x / total : 0.0;
  return w;
}

ModelAssignment reference_assignment(const Network& network, const AdaptiveOptions& opts,
                                     double horizon, std::size_t dx_level, std::size_t dt_level,
                                     std::size_t extra_halvings) {
  const double dt = opts.dt0 / std::ldexp(1.0, static_cast<int>(dt_level + extra_halvings));
  ModelAssignment a =
      ModelAssignment::uniform(network, horizon, opts.block_length, dt, ModelLevel::M3, opts.dx_max);
  const std::size_t factor = std::size_t(1) << (dx_level + extra_halvings);
  for (auto& b : a.blocks) {
    for (std::size_t k = 0; k < network.arc_count(); ++k) {
      if (network.arc(k).is_pipe()) b.pipes[k].n_cells *= factor;
    }
  }
  return a;
}

std::pair<Trajectory, AdaptiveReport> adaptive_simulate(const Network& network,
                                                        const ControlVector& controls,
                                                        const FunctionalSpec& spec,
                                                        const DiscreteState& initial,
                                                        const AdaptiveOptions& opts) {
  if (!(opts.tol > 0.0)) throw Error(ErrorCode::invalid_argument, "tolerance must be positive");
  if (!(opts.horizon > 0.0)) throw Error(ErrorCode::invalid_argument, "horizon must be positive");
  spec.validate(network, opts.horizon);
  const auto wall0 = std::chrono::steady_clock::now();
  const double cpu0 = cpu_now();

  ModelAssignment assignment = ModelAssignment::uniform(network, opts.horizon, opts.block_length,
                                                        opts.dt0, opts.initial_level, opts.dx_max);
  AdaptLimits limits;
  limits.dt_max = assignment.blocks.front().dt;
  limits.dt_min = limits.dt_max / std::ldexp(1.0, static_cast<int>(opts.max_dt_halvings));
  limits.max_dx_halvings = opts.max_dx_halvings;
  limits.base_cells.assign(network.arc_count(), 1);
  for (std::size_t a = 0; a < network.arc_count(); ++a) {
    if (network.arc(a).is_pipe()) limits.base_cells[a] = assignment.blocks.front().pipes[a].n_cells;
  }

  Trajectory traj = start_trajectory(network, assignment, controls, initial, opts.steady_initial,
                                     opts.newton);
  AdaptiveReport report;
  report.tol = opts.tol;
  double scale = opts.functional_scale;

  for (std::size_t b = 0; b < traj.assignment.blocks.size(); ++b) {
    BlockReport br;
    br.block = b;
    ErrorEstimate eta;
    double budget = 0.0;
    double partial = 0.0;
    for (;;) {
      BlockAssignment& cur = traj.assignment.blocks[b];
      try {
        advance_block(network, traj, b, SimulateOptions{opts.newton, nullptr});
      } catch (const Error& e) {
        if (e.code() != ErrorCode::newton_diverged && e.code() != ErrorCode::nonpositive_pressure &&
            e.code() != ErrorCode::radicand_nonpositive) {
          throw;
        }
        // escalate every pipe and the step before giving up
        BlockAssignment next = cur;
        for (std::size_t a = 0; a < network.arc_count(); ++a) {
          if (network.arc(a).is_pipe()) next.pipes[a].level = next_level(next.pipes[a].level);
        }
        if (0.5 * next.dt >= limits.dt_min * (1.0 - 1e-12)) next.dt *= 0.5;
        if (next == cur || br.attempts >= opts.adapt.redo_max) throw;
        cur = next;
        ++br.attempts;
        continue;
      }
      const double len = cur.t1 - cur.t0;
      partial = evaluate_block(network, traj, spec, b);
      if (!(scale > 0.0)) {
        scale = std::abs(partial) * opts.horizon / len;
        if (!(scale > 0.0)) scale = 1.0;
      }
      budget = opts.tol * scale * len / opts.horizon;
      const AdjointTrajectory adj = solve_block_adjoint(network, traj, spec, b);
      eta = estimate_errors(network, traj, spec, adj, b);
      const double s = sum_abs(eta.eta_model) + sum_abs(eta.eta_dx) + std::abs(eta.dt_total());
      if (s <= budget) break;
      if (br.attempts >= opts.adapt.redo_max) {
        br.budget_met = false;
        break;
      }
      BlockAssignment next = adapt(network, eta, budget, cur, limits, opts.adapt, false);
      if (next == cur) {
        br.budget_met = false;
        break;
      }
      cur = next;
      ++br.attempts;
    }
    const BlockAssignment& done = traj.assignment.blocks[b];
    fill_block_stats(network, done, br);
    br.eta_model = eta.sum_model();
    br.eta_dx = eta.sum_dx();
    br.eta_dt = eta.dt_total();
    br.budget = budget;
    br.functional = partial;
    report.budget_unreachable |= !br.budget_met;
    report.blocks.push_back(br);
    if (b + 1 < traj.assignment.blocks.size()) {
      BlockAssignment next = br.budget_met
                                 ? adapt(network, eta, budget, done, limits, opts.adapt, true)
                                 : done;
      BlockAssignment& nb = traj.assignment.blocks[b + 1];
      const double len = nb.t1 - nb.t0;
      nb.pipes = next.pipes;
      nb.dt = divides(len, next.dt) ? next.dt : len / std::ceil(len / next.dt - 1e-9);
    }
  }

  report.functional = evaluate(network, traj, spec).total;
  report.dt_max = 0.0;
  report.dt_min = std::numeric_limits<double>::infinity();
  report.dx_max = 0.0;
  report.dx_min = std::numeric_limits<double>::infinity();
  for (std::size_t n = 1; n < traj.size(); ++n) {
    report.dt_max = std::max(report.dt_max, traj.steps[n].dt);
    report.dt_min = std::min(report.dt_min, traj.steps[n].dt);
  }
  for (const auto& br : report.blocks) {
    report.dx_max = std::max(report.dx_max, br.dx_max);
    report.dx_min = std::min(report.dx_min, br.dx_min);
  }
  if (traj.size() < 2) report.dt_min = 0.0;
  if (report.blocks.empty()) report.dx_min = 0.0;
  for (const auto& blk : traj.assignment.blocks) {
    report.max_dt_level = std::max<std::size_t>(
        report.max_dt_level,
        static_cast<std::size_t>(std::llround(std::log2(limits.dt_max / blk.dt))));
    for (std::size_t a = 0; a < network.arc_count(); ++a) {
      if (!network.arc(a).is_pipe()) continue;
      const double r = static_cast<double>(blk.pipes[a].n_cells) /
                       static_cast<double>(limits.base_cells[a]);
      report.max_dx_level = std::max<std::size_t>(
          report.max_dx_level, static_cast<std::size_t>(std::llround(std::log2(r))));
    }
  }
  for (std::size_t n = 1; n < traj.size(); ++n) {
    const double lvl = std::log2(limits.dt_max / traj.steps[n].dt);
    report.max_dt_level =
        std::max<std::size_t>(report.max_dt_level, static_cast<std::size_t>(std::ceil(lvl - 1e-9)));
  }
  report.model_usage = model_usage(network, traj.assignment);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  report.cpu_seconds = cpu_now() - cpu0;
  return {std::move(traj), std::move(report)};
}

}  // namespace gasgrid
