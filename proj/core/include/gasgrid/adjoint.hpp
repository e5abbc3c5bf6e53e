#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gasgrid/discretization.hpp"
#include "gasgrid/network.hpp"
#include "gasgrid/objective.hpp"

namespace gasgrid {

/// Multipliers of every discrete residual equation of every accepted step.
/// With R_n(x_n, x_{n-1}) = 0 and a functional M, the sweep solves
///   J_n^T mu_n = dM/dx_n - (dR_{n+1}/dx_n)^T mu_{n+1}
/// backwards in time, so dM/dtheta = partial M/partial theta
///   - sum_n mu_n^T dR_n/dtheta.
struct AdjointTrajectory {
  std::vector<Eigen::VectorXd> mu;  // per step; zero-sized outside the swept range
  std::size_t first = 0;
  std::size_t last = 0;
};

/// Backward sweep over steps [first, last] with per-step seeds. Steps before
/// `first` are treated as fixed data.
AdjointTrajectory solve_discrete_adjoint(const Network& network, const Trajectory& traj,
                                         const std::vector<Eigen::VectorXd>& seeds,
                                         std::size_t first, std::size_t last);

/// Adjoint of a functional over the whole trajectory.
AdjointTrajectory solve_discrete_adjoint(const Network& network, const Trajectory& traj,
                                         const FunctionalSpec& spec);

/// Adjoint of the functional partial of one block (first step of the block
/// up to its last step; the state entering the block is fixed).
AdjointTrajectory solve_block_adjoint(const Network& network, const Trajectory& traj,
                                      const FunctionalSpec& spec, std::size_t block);

/// Many adjoints in one sweep: seeds[n] has one column per output.
std::vector<Eigen::MatrixXd> solve_discrete_adjoint_batch(const Network& network,
                                                          const Trajectory& traj,
                                                          const std::vector<Eigen::MatrixXd>& seeds);

/// -sum_n mu_n^T dR_n/dcontrols for the flat control vector (SI units).
Eigen::VectorXd adjoint_control_term(const Network& network, const Trajectory& traj,
                                     const AdjointTrajectory& adj);
Eigen::MatrixXd adjoint_control_term_batch(const Network& network, const Trajectory& traj,
                                           const std::vector<Eigen::MatrixXd>& mu);

/// One breakpoint value of a node's boundary profile.
struct BoundaryParameter {
  std::size_t node = 0;
  std::size_t breakpoint = 0;
};

std::vector<BoundaryParameter> boundary_parameters(const Network& network);

/// -sum_n mu_n^T dR_n/d(breakpoint value) for each parameter.
Eigen::VectorXd adjoint_boundary_term(const Network& network, const Trajectory& traj,
                                      const AdjointTrajectory& adj,
                                      const std::vector<BoundaryParameter>& params);

/// Full gradient dM/dcontrols of the frozen discretization.
Eigen::VectorXd functional_control_gradient(const Network& network, const Trajectory& traj,
                                            const FunctionalSpec& spec);

/// Full gradient dM/d(boundary breakpoints) of the frozen discretization.
Eigen::VectorXd functional_boundary_gradient(const Network& network, const Trajectory& traj,
                                             const FunctionalSpec& spec,
                                             const std::vector<BoundaryParameter>& params);

struct GradientCheck {
  std::vector<std::string> labels;
  std::vector<double> adjoint;
  std::vector<double> finite_difference;
  std::vector<double> rel_error;
  double max_rel_error = 0.0;
};

/// Compares the adjoint gradient of `spec` with respect to every control entry
/// and (optionally) every boundary breakpoint against central differences of
/// re-simulations on the frozen discretization of `traj`. The step is
/// step_factor times the parameter's scale. Entries are compared relative to
/// max(|adjoint|, |fd|, 1e-6 * max entry).
GradientCheck gradient_check(const Network& network, const Trajectory& traj,
                             const FunctionalSpec& spec, bool boundaries = true,
                             double step_factor = 1e-4);

}  // namespace gasgrid
