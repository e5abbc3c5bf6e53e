#include <doctest.h>

#include <gasgrid/sqp.hpp>

using namespace gasgrid;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// f = 1/2 x'Qx + b'x, constraints A x + a >= 0.
NlpProblem quadratic(MatrixXd Q, VectorXd b, MatrixXd A = MatrixXd(0, 2), VectorXd a = VectorXd()) {
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
      if (c[i] <= band) {
        jac->row(i) = A.row(i);
        (*has)[static_cast<std::size_t>(i)] = true;
      }
    }
  };
  return p;
}

SqpOptions tight() {
  SqpOptions o;
  o.epsx = 1e-12;
  o.opt_tol = 1e-12;
  o.feas_tol = 1e-12;
  return o;
}

void check_merit(const NLPResult& r) {
  for (std::size_t k = 0; k < r.history.size(); ++k) {
    CHECK(r.history[k].merit_after <= r.history[k].merit_before);
    if (k > 0 && r.history[k].penalty == r.history[k - 1].penalty) {
      CHECK(r.history[k].merit_before <= r.history[k - 1].merit_after + 1e-12 * std::abs(r.history[k - 1].merit_after));
    }
  }
}

MatrixXd M2(double a, double b, double c, double d) {
  MatrixXd m(2, 2);
  m << a, b, c, d;
  return m;
}

VectorXd V2(double a, double b) { return (VectorXd(2) << a, b).finished(); }

}  // namespace

TEST_CASE("unconstrained convex quadratic") {
  const NlpProblem p = quadratic(M2(4, 1, 1, 3), V2(-1, -2));
  const NLPResult r = sqp_solve(p, V2(5, -7), tight());
  const VectorXd exact = M2(4, 1, 1, 3).ldlt().solve(V2(1, 2));
  CHECK(r.status == SqpStatus::converged);
  CHECK((r.x - exact).lpNorm<Eigen::Infinity>() <= 1e-8);
  CHECK(r.iterations <= 3);
  check_merit(r);
}

TEST_CASE("hand solved inequality QPs") {
  SUBCASE("closest point on a half plane") {
    MatrixXd A(1, 2);
    A << 1, 1;
    const NlpProblem p = quadratic(2 * MatrixXd::Identity(2, 2), V2(0, 0), A, VectorXd::Constant(1, -1));
    for (const VectorXd& x0 : {V2(0, 0), V2(3, -1), V2(-4, 10)}) {
      const NLPResult r = sqp_solve(p, x0, tight());
      CHECK(r.status == SqpStatus::converged);
      CHECK((r.x - V2(0.5, 0.5)).lpNorm<Eigen::Infinity>() <= 1e-8);
      CHECK(r.multipliers[0] == doctest::Approx(1.0).epsilon(1e-8));
      check_merit(r);
    }
  }
  SUBCASE("weighted projection") {
    MatrixXd A(1, 2);
    A << 1, 1;
    const NlpProblem p = quadratic(M2(2, 0, 0, 4), V2(0, 0), A, VectorXd::Constant(1, -3));
    const NLPResult r = sqp_solve(p, V2(0, 0), tight());
    CHECK((r.x - V2(2, 1)).lpNorm<Eigen::Infinity>() <= 1e-8);
    CHECK(r.multipliers[0] == doctest::Approx(4.0).epsilon(1e-8));
    check_merit(r);
  }
  SUBCASE("three half planes and the positive quadrant") {
    // min (x1-1)^2 + (x2-2.5)^2, optimum on x1 - 2 x2 + 2 = 0 at (1.4, 1.7)
    MatrixXd A(3, 2);
    A << 1, -2, -1, -2, -1, 2;
    NlpProblem p = quadratic(2 * MatrixXd::Identity(2, 2), V2(-2, -5), A, (VectorXd(3) << 2, 6, 2).finished());
    p.lower = V2(0, 0);
    const NLPResult r = sqp_solve(p, V2(2, 0), tight());
    CHECK(r.status == SqpStatus::converged);
    CHECK((r.x - V2(1.4, 1.7)).lpNorm<Eigen::Infinity>() <= 1e-8);
    CHECK(r.multipliers[0] == doctest::Approx(0.8).epsilon(1e-8));
    CHECK(r.multipliers[1] == doctest::Approx(0.0).scale(1.0));
    check_merit(r);
  }
  SUBCASE("box only") {
    NlpProblem p = quadratic(2 * MatrixXd::Identity(2, 2), V2(-6, 2));
    p.lower = V2(0, 0);
    p.upper = V2(2, 2);
    const NLPResult r = sqp_solve(p, V2(1, 1), tight());
    CHECK(r.status == SqpStatus::converged);
    CHECK((r.x - V2(2, 0)).lpNorm<Eigen::Infinity>() <= 1e-8);
    check_merit(r);
  }
  SUBCASE("duplicated constraint") {
    MatrixXd A(2, 2);
    A << 1, 1, 2, 2;
    const NlpProblem p = quadratic(2 * MatrixXd::Identity(2, 2), V2(0, 0), A, V2(-1, -2));
    const NLPResult r = sqp_solve(p, V2(0, 0), tight());
    CHECK(r.status == SqpStatus::converged);
    CHECK((r.x - V2(0.5, 0.5)).lpNorm<Eigen::Infinity>() <= 1e-8);
    check_merit(r);
  }
}

TEST_CASE("nonlinear constraint") {
  // min x1 + x2 on the disc of radius sqrt(2): (-1, -1), multiplier 1/2
  NlpProblem p;
  p.n = 2;
  p.m = 1;
  p.objective = [](const VectorXd& x, VectorXd* g) {
    if (g) *g = V2(1, 1);
    return x.sum();
  };
  p.constraints = [](const VectorXd& x, double, VectorXd& c, MatrixXd* jac, std::vector<bool>* has) {
    c[0] = 2.0 - x.squaredNorm();
    if (jac) {
      jac->row(0) = -2.0 * x.transpose();
      (*has)[0] = true;
    }
  };
  const NLPResult r = sqp_solve(p, V2(0.5, 0.1), tight());
  CHECK(r.status == SqpStatus::converged);
  CHECK((r.x - V2(-1, -1)).lpNorm<Eigen::Infinity>() <= 1e-8);
  CHECK(r.multipliers[0] == doctest::Approx(0.5).epsilon(1e-6));
  check_merit(r);
}

TEST_CASE("infeasible problems are reported") {
  SUBCASE("contradicting constraints") {
    MatrixXd A(2, 1);
    A << 1, -1;
    NlpProblem p = quadratic(MatrixXd::Identity(1, 1), VectorXd::Zero(1), A, (VectorXd(2) << -1, 0).finished());
    const NLPResult r = sqp_solve(p, VectorXd::Constant(1, 0.5));
    CHECK(r.status == SqpStatus::infeasible);
    CHECK(r.max_violation > 0.4);
  }
  SUBCASE("constraint outside the box") {
    MatrixXd A(1, 1);
    A << 1;
    NlpProblem p = quadratic(MatrixXd::Identity(1, 1), VectorXd::Zero(1), A, VectorXd::Constant(1, -1));
    p.lower = VectorXd::Constant(1, -1);
    p.upper = VectorXd::Constant(1, 0);
    const NLPResult r = sqp_solve(p, VectorXd::Constant(1, -0.5));
    CHECK(r.status == SqpStatus::infeasible);
    CHECK(r.x[0] == doctest::Approx(0.0));
  }
  SUBCASE("empty box") {
    NlpProblem p = quadratic(MatrixXd::Identity(1, 1), VectorXd::Zero(1));
    p.lower = VectorXd::Constant(1, 1);
    p.upper = VectorXd::Constant(1, 0);
    CHECK(sqp_solve(p, VectorXd::Zero(1)).status == SqpStatus::infeasible);
  }
}

TEST_CASE("argmin does not depend on the objective scale") {
  MatrixXd A(3, 2);
  A << 1, -2, -1, -2, -1, 2;
  const VectorXd a = (VectorXd(3) << 2, 6, 2).finished();
  NlpProblem p = quadratic(2 * MatrixXd::Identity(2, 2), V2(-2, -5), A, a);
  NlpProblem q = quadratic(2000 * MatrixXd::Identity(2, 2), V2(-2000, -5000), A, a);
  SqpOptions o;
  const NLPResult rp = sqp_solve(p, V2(2, 0), o);
  const NLPResult rq = sqp_solve(q, V2(2, 0), o);
  CHECK(rp.status == SqpStatus::converged);
  CHECK(rq.status == SqpStatus::converged);
  CHECK((rp.x - rq.x).lpNorm<Eigen::Infinity>() <= o.epsx);
}
