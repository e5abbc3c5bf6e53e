#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "gasgrid/assignment.hpp"
#include "gasgrid/controls.hpp"
#include "gasgrid/gas_models.hpp"
#include "gasgrid/layout.hpp"
#include "gasgrid/network.hpp"

namespace gasgrid {

/// Implicit box scheme on one cell [x_L, x_R]:
///   (u_L + u_R - u_L_old - u_R_old) / (2 dt) + (f(u_R) - f(u_L)) / dx
///     - (g(u_L) + g(u_R)) / 2
/// with f the M2 or M3 flux and g the friction source (SI units).
std::array<double, 2> box_residual(ModelLevel level, std::array<GasState, 2> u_old,
                                   std::array<GasState, 2> u_new, const PipeParameters& par,
                                   double dx, double dt);

/// The same stencil without the time derivative.
std::array<double, 2> box_residual_steady(ModelLevel level, std::array<GasState, 2> u,
                                          const PipeParameters& par, double dx);

/// Scaled box-cell residual on bar / m^3/s unknowns with analytic partials
/// with respect to (p_L, q_L, p_R, q_R). Row 0 is in m^3/s, row 1 in bar.
/// dt <= 0 selects the steady form.
struct BoxCell {
  std::array<double, 2> r{};
  std::array<std::array<double, 4>, 2> d{};
  double old_p_coeff = 0.0;  // d r0 / d p_old at either end
  double old_q_coeff = 0.0;  // d r1 / d q_old at either end
};
BoxCell box_cell(ModelLevel level, const PipeParameters& par, double dx, double dt,
                 std::array<double, 4> u_new, std::array<double, 4> u_old);

/// Inputs of one implicit step (or of the steady system when dt <= 0).
struct StepInput {
  const Network& network;
  const SystemLayout& layout;
  const ControlVector& controls;
  double t = 0.0;
  double dt = 0.0;
  bool steady() const { return dt <= 0.0; }
};

struct SystemEvaluation {
  Eigen::VectorXd residual;
  Eigen::SparseMatrix<double> jacobian;  // d residual / d x (empty unless requested)
};

/// Stacks every pipe, arc and node equation of the network. `x_old` must be
/// in the same layout as `x` (ignored for the steady system).
SystemEvaluation assemble_system(const StepInput& in, const Eigen::VectorXd& x_old,
                                 const Eigen::VectorXd& x, bool with_jacobian = true);

/// d residual / d x_old. Only box-cell rows depend on the previous level and
/// the dependence is linear, so this needs no state.
Eigen::SparseMatrix<double> old_state_jacobian(const StepInput& in);

/// Sparse column d residual / d(control value of `arc` at in.t).
std::vector<std::pair<std::size_t, double>> control_sensitivity(const StepInput& in,
                                                                const Eigen::VectorXd& x,
                                                                std::size_t arc);

/// Sparse column d residual / d(boundary profile value of `node` at in.t).
std::vector<std::pair<std::size_t, double>> boundary_sensitivity(const StepInput& in,
                                                                 std::size_t node);

struct NewtonOptions {
  double tol = 1e-8;  // max-norm of the scaled residual
  int max_iter = 50;
  int retry_max = 4;  // dt halvings when a step diverges
  double armijo = 1e-4;
  int max_backtracks = 30;
};

struct NewtonReport {
  int iterations = 0;
  double residual = 0.0;
};

DiscreteState solve_time_step(const Network& network, std::shared_ptr<const SystemLayout> layout,
                              const DiscreteState& state_old, const ControlVector& controls,
                              double dt, const NewtonOptions& opts = {},
                              NewtonReport* report = nullptr);

/// Stationary solution for the boundary data and controls at t0. Uses the
/// given guess or a flat guess; falls back to pseudo-time marching.
DiscreteState steady_state(const Network& network, std::shared_ptr<const SystemLayout> layout,
                           const ControlVector& controls, double t0 = 0.0,
                           const NewtonOptions& opts = {},
                           const std::optional<Eigen::VectorXd>& guess = std::nullopt);

/// Flat guess: uniform pressure at the mean boundary pressure, flows routed
/// along a spanning tree from the prescribed nominations.
Eigen::VectorXd initial_guess(const Network& network, const SystemLayout& layout, double t0);

struct TrajectoryStep {
  double t = 0.0;
  double dt = 0.0;
  std::size_t block = 0;
  Eigen::VectorXd x;
  int newton_iterations = 0;
};

/// Accepted time levels of a run together with everything needed to replay
/// or differentiate it.
struct Trajectory {
  ModelAssignment assignment;
  ControlVector controls;
  std::vector<std::shared_ptr<const SystemLayout>> layouts;  // one per block
  /// transfers[b] maps the last state before block b into layouts[b]; empty
  /// when the shapes agree.
  std::vector<Eigen::SparseMatrix<double>> transfers;
  std::vector<TrajectoryStep> steps;
  /// Step 0 is the steady state of the data at t = 0 rather than fixed data.
  bool steady_initial = false;
  /// State the run was started from, before any transfer.
  DiscreteState initial;

  std::size_t size() const { return steps.size(); }
  const SystemLayout& layout_of(std::size_t n) const { return *layouts.at(steps.at(n).block); }
  DiscreteState state(std::size_t n) const;
  /// x_{n-1} carried into the layout of step n.
  Eigen::VectorXd old_state(std::size_t n) const;
  /// True when step n is the first step of a block whose layout differs.
  bool transferred(std::size_t n) const;
  StepInput input(const Network& network, std::size_t n) const;
  double horizon() const { return steps.empty() ? 0.0 : steps.back().t; }
  /// Drops every step after the last step before `block`.
  void truncate_before_block(std::size_t block);
};

struct SimulateOptions {
  NewtonOptions newton;
  /// Replay the step times of this trajectory instead of the assignment's dt
  /// (no dt halving; used to freeze the discretization).
  const Trajectory* frozen = nullptr;
};

/// Starts a trajectory from `initial` (transferred into the block 0 layout).
/// With steady_initial, step 0 is re-solved as the steady state of the
/// block 0 layout using `initial` as guess.
Trajectory start_trajectory(const Network& network, const ModelAssignment& assignment,
                            const ControlVector& controls, const DiscreteState& initial,
                            bool steady_initial, const NewtonOptions& newton = {});

/// Integrates one block with its assignment and appends the accepted steps.
void advance_block(const Network& network, Trajectory& traj, std::size_t block,
                   const SimulateOptions& opts = {});

Trajectory simulate(const Network& network, const ModelAssignment& assignment,
                    const ControlVector& controls, const DiscreteState& initial,
                    const SimulateOptions& opts = {}, bool steady_initial = false);

/// Gas mass stored in the pipes of a state (kg), from p A dx / c^2 on the
/// cell trapezoids of PDE pipes.
double linepack(const Network& network, const DiscreteState& state);

}  // namespace gasgrid
