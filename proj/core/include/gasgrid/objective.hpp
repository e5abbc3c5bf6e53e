#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gasgrid/discretization.hpp"
#include "gasgrid/network.hpp"
#include "gasgrid/time_series.hpp"

namespace gasgrid {

/// Integrands of the output functional. Pressures enter in bar, flows in
/// m^3/s, compressor power in W; time is integrated in seconds.
enum class Integrand {
  constant,           // weight
  pressure_tracking,  // weight * (p - target)^2
  flow_tracking,      // weight * (q - target)^2
  compressor_energy,  // weight * P, arcs only
};

const char* to_string(Integrand kind);

struct FunctionalTerm {
  std::string id;  // node, arc or pipe id
  Integrand kind = Integrand::constant;
  double weight = 1.0;
  TimeSeries target;  // Pa or m^3/s; unused for constant and energy
};

/// M(u) = int_Q N(u) + sum_v int N_v(u) dt + sum_i int N_i(u_i) dt.
struct FunctionalSpec {
  std::vector<FunctionalTerm> pipe_terms;
  std::vector<FunctionalTerm> node_terms;
  std::vector<FunctionalTerm> arc_terms;

  FunctionalSpec scaled(double factor) const;
  FunctionalSpec concat(const FunctionalSpec& other) const;
  bool empty() const { return pipe_terms.empty() && node_terms.empty() && arc_terms.empty(); }
  /// Throws on unknown ids, wrong term placement or uncovered targets.
  void validate(const Network& network, double horizon) const;
};

struct FunctionalValue {
  double total = 0.0;
  std::vector<double> pipe_terms;
  std::vector<double> node_terms;
  std::vector<double> arc_terms;
  std::vector<double> block_partials;
};

/// Trapezoidal weights of the accepted steps in time.
std::vector<double> trapezoid_weights(const Trajectory& traj);

/// Instantaneous integrand value at one step (spatial integrals included).
double functional_rate(const Network& network, const Trajectory& traj, std::size_t step,
                       const FunctionalSpec& spec);

/// Integrand value of an arbitrary state. per_term receives the value of every
/// term in the order pipe, node, arc terms.
double functional_rate_at(const Network& network, const SystemLayout& layout,
                          const ControlVector& controls, const Eigen::VectorXd& x, double t,
                          const FunctionalSpec& spec, std::vector<double>* per_term = nullptr);

FunctionalValue evaluate(const Network& network, const Trajectory& traj,
                         const FunctionalSpec& spec);

/// Functional restricted to one time block (same quadrature).
double evaluate_block(const Network& network, const Trajectory& traj, const FunctionalSpec& spec,
                      std::size_t block);

/// Exact derivative of the discrete functional with respect to the unknowns
/// of every step (in that step's layout, scaled units). When `block` is
/// given, only that block's partial is differentiated.
std::vector<Eigen::VectorXd> state_gradient(const Network& network, const Trajectory& traj,
                                            const FunctionalSpec& spec,
                                            std::optional<std::size_t> block = std::nullopt);

/// Direct derivative of the functional with respect to the flat control
/// vector (compressor energy depends on H_ad explicitly).
Eigen::VectorXd control_direct_gradient(const Network& network, const Trajectory& traj,
                                        const FunctionalSpec& spec);

}  // namespace gasgrid
