#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "gasgrid/adjoint.hpp"
#include "gasgrid/assignment.hpp"
#include "gasgrid/discretization.hpp"
#include "gasgrid/objective.hpp"

namespace gasgrid {

/// Adjoint-weighted estimates of the functional change from refining one
/// block, in functional units. Entries are indexed by arc; non-pipe arcs carry
/// zeros in eta_model and eta_dx. A value approximates M(refined) - M(current).
struct ErrorEstimate {
  std::vector<double> eta_model;  // next model level
  std::vector<double> eta_dx;     // halved cells
  std::vector<double> eta_dt;     // halved step, rows of each arc
  double eta_dt_nodes = 0.0;      // halved step, node rows and time quadrature
  /// Magnitude of the change expected from one level down (M2 and M3 pipes).
  std::vector<double> coarsen_model;

  double sum_model() const;
  double sum_dx() const;
  double dt_total() const;
  double total() const { return sum_model() + sum_dx() + dt_total(); }
};

/// `adj` must hold multipliers of the steps of `block` for the functional
/// `spec` (see solve_block_adjoint).
ErrorEstimate estimate_errors(const Network& network, const Trajectory& traj,
                              const FunctionalSpec& spec, const AdjointTrajectory& adj,
                              std::size_t block);

struct AdaptLimits {
  double dt_max = 3600.0;
  double dt_min = 3600.0 / 16.0;
  std::vector<std::size_t> base_cells;  // per arc, coarsest allowed
  std::size_t max_dx_halvings = 3;
};

struct AdaptOptions {
  double theta_coarsen = 0.1;
  int redo_max = 3;
  double share_model = 1.0 / 3.0;
  double share_dx = 1.0 / 3.0;
  double share_dt = 1.0 / 3.0;
};

/// One adaptation decision for a block. Refines (`coarsen == false`) the
/// largest contributors of each estimator kind exceeding its share of the
/// budget, or coarsens the smallest ones when the kind is far below it.
/// Ties are broken by arc id so the result is reproducible.
BlockAssignment adapt(const Network& network, const ErrorEstimate& eta, double budget,
                      const BlockAssignment& current, const AdaptLimits& limits,
                      const AdaptOptions& opts, bool coarsen);

struct AdaptiveOptions {
  double horizon = 0.0;
  double tol = 5e-3;
  double block_length = 7200.0;
  double dt0 = 3600.0;
  double dx_max = 10000.0;
  std::size_t max_dt_halvings = 4;
  std::size_t max_dx_halvings = 3;
  ModelLevel initial_level = ModelLevel::M1;
  /// Step 0 is the steady state of the data at t = 0 (re-solved when block 0
  /// changes); otherwise `initial` is used as given.
  bool steady_initial = true;
  /// Functional magnitude the relative tolerance refers to; <= 0 takes it
  /// from the first block.
  double functional_scale = 0.0;
  AdaptOptions adapt;
  NewtonOptions newton;
};

struct BlockReport {
  std::size_t block = 0;
  double t0 = 0.0, t1 = 0.0;
  int attempts = 0;
  double dt = 0.0;
  double dx_min = 0.0, dx_max = 0.0;
  std::array<double, 3> model_share{};  // fraction of pipes at M1, M2, M3
  double eta_model = 0.0, eta_dx = 0.0, eta_dt = 0.0;
  double budget = 0.0;
  double functional = 0.0;
  bool budget_met = true;
};

struct AdaptiveReport {
  double tol = 0.0;
  double functional = 0.0;
  double dt_max = 0.0, dt_min = 0.0;
  double dx_max = 0.0, dx_min = 0.0;
  std::array<double, 3> model_usage{};  // percent of pipe-time at M1, M2, M3
  double wall_seconds = 0.0;
  double cpu_seconds = 0.0;
  bool budget_unreachable = false;
  std::size_t max_dx_level = 0;  // deepest dx halving used
  std::size_t max_dt_level = 0;  // deepest dt halving used
  std::vector<BlockReport> blocks;
};

/// Block-wise simulate / adjoint / estimate / adapt loop meeting the relative
/// tolerance opts.tol on the functional `spec`.
std::pair<Trajectory, AdaptiveReport> adaptive_simulate(const Network& network,
                                                        const ControlVector& controls,
                                                        const FunctionalSpec& spec,
                                                        const DiscreteState& initial,
                                                        const AdaptiveOptions& opts);

/// Percent of pipe-time spent at each model level.
std::array<double, 3> model_usage(const Network& network, const ModelAssignment& a);

/// Uniform all-M3 assignment `extra_halvings` levels finer in dx and dt than
/// the given halving depths.
ModelAssignment reference_assignment(const Network& network, const AdaptiveOptions& opts,
                                     double horizon, std::size_t dx_level, std::size_t dt_level,
                                     std::size_t extra_halvings = 2);

}  // namespace gasgrid
