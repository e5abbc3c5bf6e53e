#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gasgrid {

struct SqpOptions {
  double epsx = 5e-4;      // step norm (scaled variables) at which to stop
  double opt_tol = 1e-6;   // KKT stationarity
  double feas_tol = 1e-6;  // max constraint violation
  int max_iter = 200;
  double act_band = 1e-3;  // rows at or below this always get gradients
  /// Constraints with value at or below max(grad_band, act_band) get gradient
  /// rows and enter the QP; rows far above it are taken as satisfied.
  double grad_band = 1.0;
  int max_qp_iter = 100;   // plus 10 per QP row
  int max_line_search = 30;
  double armijo = 1e-4;
  double penalty_margin = 1.0;
  bool verbose = false;
};

enum class SqpStatus { converged, max_iter, infeasible, line_search_failed, qp_singular };

const char* to_string(SqpStatus status);

/// min f(x) s.t. c(x) >= 0, lower <= x <= upper.
struct NlpProblem {
  std::size_t n = 0;
  std::size_t m = 0;
  /// f(x); fills the gradient when `grad` is not null.
  std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)> objective;
  /// c(x) into `c` (size m); when `jac` is given, fills rows for constraints
  /// with c_i <= band and sets has_row[i] (other rows are left zero).
  std::function<void(const Eigen::VectorXd& x, double band, Eigen::VectorXd& c,
                     Eigen::MatrixXd* jac, std::vector<bool>* has_row)>
      constraints;
  Eigen::VectorXd lower;  // empty for unbounded
  Eigen::VectorXd upper;
};

struct SqpIterate {
  int k = 0;
  double f = 0.0;
  double merit_before = 0.0;
  double merit_after = 0.0;
  double penalty = 0.0;
  double step_norm = 0.0;
  double kkt = 0.0;
  double violation = 0.0;
  double alpha = 0.0;
  std::size_t working_set = 0;
};

struct NLPResult {
  Eigen::VectorXd x;
  double objective = 0.0;
  double max_violation = 0.0;
  double kkt = 0.0;
  int iterations = 0;
  SqpStatus status = SqpStatus::max_iter;
  Eigen::VectorXd multipliers;  // constraint multipliers (>= 0), size m
  std::vector<SqpIterate> history;
  std::string message;
};

/// Active-set SQP: each iteration solves the inequality QP of the linearized
/// constraints (dual active-set method) with a damped BFGS Hessian, then runs
/// a line search on the L1 merit function. Infeasible linearizations switch
/// to a Gauss-Newton restoration step on the violated rows.
NLPResult sqp_solve(const NlpProblem& problem, const Eigen::VectorXd& x0,
                    const SqpOptions& opts = {});

}  // namespace gasgrid
