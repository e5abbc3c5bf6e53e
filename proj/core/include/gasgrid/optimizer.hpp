#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gasgrid/adaptivity.hpp"
#include "gasgrid/compressor.hpp"
#include "gasgrid/controls.hpp"
#include "gasgrid/discretization.hpp"
#include "gasgrid/objective.hpp"
#include "gasgrid/sqp.hpp"

namespace gasgrid {

/// Lower and/or upper bound of a node quantity on [t0, t1]. Pressures in Pa,
/// flows in m^3/s (node sign convention).
struct NodeBound {
  std::string node;
  std::optional<TimeSeries> lower;
  std::optional<TimeSeries> upper;
  double t0 = 0.0;
  double t1 = 1e300;
};

struct TerminalStationarity {
  double window = 1800.0;  // delta in ||u(T) - u(T - delta)||
  double tol = 0.0;        // > 0 adds ||.||_inf <= tol as constraints
};

struct ConstraintSet {
  std::vector<NodeBound> pressure;
  std::vector<NodeBound> flow;
  /// Compressor arcs whose (Q, H_ad) must stay in the semiconvex field while on.
  std::vector<std::string> compressors;
  std::optional<TerminalStationarity> terminal;
  std::size_t field_levels = 32;

  bool empty() const {
    return pressure.empty() && flow.empty() && compressors.empty() &&
           !(terminal && terminal->tol > 0.0);
  }
  void validate(const Network& network) const;
};

enum class ConstraintKind { pressure_lower, pressure_upper, flow_lower, flow_upper, field, terminal };

const char* to_string(ConstraintKind kind);

struct ConstraintInfo {
  ConstraintKind kind = ConstraintKind::pressure_lower;
  std::size_t step = 0;
  std::size_t target = 0;     // node or arc index
  std::size_t component = 0;  // field component or terminal unknown
};

/// Pointwise constraints sampled at accepted steps, scaled: pressures in bar,
/// flows in m^3/s, head components in 1e4 m^2/s^2.
struct ConstraintValues {
  Eigen::VectorXd values;
  std::vector<ConstraintInfo> info;
  Eigen::MatrixXd jacobian;  // d values / d flat controls (SI control units)
  std::vector<bool> has_row;

  double max_violation() const;
};

inline constexpr double kHeadScale = 1e4;

class ConstraintEvaluator {
 public:
  ConstraintEvaluator(const Network& network, ConstraintSet set);

  const ConstraintSet& set() const { return set_; }
  const SemiconvexField& field(std::size_t arc) const;

  /// Values only; the layout of the vector depends on the trajectory steps.
  ConstraintValues values(const Trajectory& traj) const;

  /// Values plus Jacobian rows (one batched adjoint sweep) for every
  /// constraint with value <= band.
  ConstraintValues evaluate(const Trajectory& traj, double band) const;

 private:
  const Network& network_;
  ConstraintSet set_;
  std::map<std::size_t, SemiconvexField> fields_;
};

ConstraintValues constraint_evaluation(const Network& network, const Trajectory& traj,
                                       const ConstraintSet& cons, double band);

/// dM/dcontrols for the discretization produced by an adaptive run at the
/// given controls; the discretization is then frozen for the gradient.
Eigen::VectorXd control_gradient(const Network& network, const ControlVector& controls,
                                 const FunctionalSpec& spec, const DiscreteState& initial,
                                 const AdaptiveOptions& opts);

struct NominationOptions {
  SqpOptions sqp;
  AdaptiveOptions adaptive;        // preparatory run fixing the discretization
  double control_interval = 1800.0;
  std::size_t horizon_split = 1;   // > 1: sequential sub-horizon solves
  /// Use this assignment instead of a preparatory adaptive run.
  std::optional<ModelAssignment> assignment;
};

struct NominationResult {
  NLPResult nlp;
  Trajectory trajectory;
  ControlVector controls;
  bool feasible = false;
  double terminal_stationarity = 0.0;
  ModelAssignment assignment;
};

/// Is the nomination encoded in `network`'s boundary data and the tracking
/// targets of `spec` reachable from `state_a` under `cons`?
NominationResult validate_nomination(const Network& network, const DiscreteState& state_a,
                                     const ControlVector& controls, const ConstraintSet& cons,
                                     const FunctionalSpec& spec, double horizon,
                                     const NominationOptions& opts);

/// max_v ||u_v(T) - u_v(T - window)||_inf over node pressures (bar) and flows.
double terminal_stationarity(const Trajectory& traj, double window);

}  // namespace gasgrid
