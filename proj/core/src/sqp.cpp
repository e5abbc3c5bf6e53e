#include "gasgrid/sqp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <Eigen/LU>
#include <Eigen/QR>

namespace gasgrid {

const char* to_string(SqpStatus status) {
  switch (status) {
    case SqpStatus::converged: return "converged";
    case SqpStatus::max_iter: return "max_iter";
    case SqpStatus::infeasible: return "infeasible";
    case SqpStatus::line_search_failed: return "line_search_failed";
    case SqpStatus::qp_singular: return "qp_singular";
  }
  return "unknown";
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Index = Eigen::Index;

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Eval {
  double f = 0.0;
  VectorXd g;
  VectorXd c;
  MatrixXd jac;
  std::vector<bool> has_row;
};

double violation(const VectorXd& c) {
  double v = 0.0;
  for (Index i = 0; i < c.size(); ++i) v += std::max(0.0, -c[i]);
  return v;
}

double max_violation(const VectorXd& c) {
  double v = 0.0;
  for (Index i = 0; i < c.size(); ++i) v = std::max(v, -c[i]);
  return v;
}

// Variable fixed at a bound inside the subproblem: -1 lower, +1 upper, 0 free.
using Fixing = std::vector<int>;

// Givens rotation (c, s) zeroing b in (a, b); returns the new a.
double givens(double a, double b, double& c, double& s) {
  const double h = std::hypot(a, b);
  if (h == 0.0) {
    c = 1.0;
    s = 0.0;
    return 0.0;
  }
  c = a / h;
  s = b / h;
  return h;
}

// Dual active-set method of Goldfarb and Idnani for
//   min g'd + 1/2 d'Bd  s.t.  a_i'd + b_i >= 0  (rows of A),
// B positive definite. Linearly dependent constraints are handled by
// exchanging working-set members in the dual step.
class DualQp {
 public:
  DualQp(const MatrixXd& B, const VectorXd& g) : n_(g.size()), g_(g) {
    Eigen::LLT<MatrixXd> llt(B);
    MatrixXd Bd = B;
    double shift = 0.0;
    while (llt.info() != Eigen::Success) {
      shift = shift == 0.0 ? 1e-10 * std::max(1.0, B.diagonal().cwiseAbs().maxCoeff()) : 10.0 * shift;
      Bd = B + shift * MatrixXd::Identity(n_, n_);
      llt.compute(Bd);
    }
    // J = L^{-T}, so J J' = B^{-1}
    J_ = llt.matrixU().solve(MatrixXd::Identity(n_, n_));
    R_ = MatrixXd::Zero(n_, n_);
    x_ = -J_ * (J_.transpose() * g_);
  }

  // Returns false when the constraints are inconsistent.
  bool solve(const MatrixXd& A, const VectorXd& b, int max_iter) {
    const Index m = A.rows();
    std::vector<bool> in_active(static_cast<std::size_t>(m), false);
    for (int it = 0; it < max_iter; ++it) {
      // most violated constraint
      Index p = -1;
      double worst = 0.0;
      for (Index i = 0; i < m; ++i) {
        if (in_active[static_cast<std::size_t>(i)]) continue;
        const double si = A.row(i).dot(x_) + b[i];
        const double tol = 1e-10 * std::max(1.0, std::abs(b[i]));
        if (si < -tol && si < worst) {
          worst = si;
          p = i;
        }
      }
      if (p < 0) return true;
      const VectorXd np = A.row(p).transpose();
      double sp = worst;
      double up = 0.0;
      for (;;) {
        if (++it > max_iter) return false;
        const Index q = static_cast<Index>(active_.size());
        VectorXd d = J_.transpose() * np;
        const VectorXd z = J_.rightCols(n_ - q) * d.tail(n_ - q);
        VectorXd r = VectorXd::Zero(q);
        if (q > 0) r = R_.topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(d.head(q));
        double t1 = kInf;
        Index l = -1;
        for (Index k = 0; k < q; ++k) {
          if (r[k] > 0.0 && u_[k] / r[k] < t1) {
            t1 = u_[k] / r[k];
            l = k;
          }
        }
        const double zn = z.dot(np);
        const double t2 = z.squaredNorm() > 1e-24 * np.squaredNorm() && zn > 0.0 ? -sp / zn : kInf;
        const double t = std::min(t1, t2);
        if (!std::isfinite(t)) return false;
        if (!std::isfinite(t2)) {
          // dependent constraint: dual step only
          u_.head(q) -= t * r;
          up += t;
          in_active[static_cast<std::size_t>(active_[static_cast<std::size_t>(l)])] = false;
          drop(l);
          continue;
        }
        x_ += t * z;
        u_.head(q) -= t * r;
        up += t;
        if (t == t2) {
          add(d, p, up);
          in_active[static_cast<std::size_t>(p)] = true;
          break;
        }
        in_active[static_cast<std::size_t>(active_[static_cast<std::size_t>(l)])] = false;
        drop(l);
        sp = A.row(p).dot(x_) + b[p];
      }
    }
    return false;
  }

  const VectorXd& x() const { return x_; }
  const std::vector<Index>& active() const { return active_; }
  double multiplier(std::size_t k) const { return u_[static_cast<Index>(k)]; }

 private:
  void add(VectorXd& d, Index p, double up) {
    const Index q = static_cast<Index>(active_.size());
    for (Index j = n_ - 1; j > q; --j) {
      double c, s;
      d[j - 1] = givens(d[j - 1], d[j], c, s);
      d[j] = 0.0;
      for (Index k = 0; k < n_; ++k) {
        const double a = J_(k, j - 1), bb = J_(k, j);
        J_(k, j - 1) = c * a + s * bb;
        J_(k, j) = -s * a + c * bb;
      }
    }
    R_.col(q).head(q + 1) = d.head(q + 1);
    active_.push_back(p);
    VectorXd u(q + 1);
    u.head(q) = u_.head(q);
    u[q] = up;
    u_ = u;
  }

  void drop(Index l) {
    const Index q = static_cast<Index>(active_.size());
    active_.erase(active_.begin() + l);
    for (Index k = l; k + 1 < q; ++k) {
      u_[k] = u_[k + 1];
      R_.col(k) = R_.col(k + 1);
    }
    R_.col(q - 1).setZero();
    u_.conservativeResize(q - 1);
    // restore the upper triangle of R with rotations on rows (j, j+1)
    for (Index j = l; j + 1 < q; ++j) {
      double c, s;
      R_(j, j) = givens(R_(j, j), R_(j + 1, j), c, s);
      R_(j + 1, j) = 0.0;
      for (Index k = j + 1; k + 1 < q; ++k) {
        const double a = R_(j, k), bb = R_(j + 1, k);
        R_(j, k) = c * a + s * bb;
        R_(j + 1, k) = -s * a + c * bb;
      }
      for (Index k = 0; k < n_; ++k) {
        const double a = J_(k, j), bb = J_(k, j + 1);
        J_(k, j) = c * a + s * bb;
        J_(k, j + 1) = -s * a + c * bb;
      }
    }
  }

  Index n_;
  VectorXd g_;
  MatrixXd J_, R_;
  VectorXd x_;
  VectorXd u_;
  std::vector<Index> active_;
};

struct QpResult {
  VectorXd d;
  std::vector<Index> work;  // active constraint rows
  VectorXd lambda;          // their multipliers
  bool consistent = true;
};

// Inequality QP on the linearized problem. Rows without a gradient (c above
// the band) are taken as satisfied; finite bounds become rows as well.
QpResult solve_qp(const MatrixXd& B, const Eval& e, const VectorXd& x, const VectorXd& lo,
                  const VectorXd& hi, int max_iter) {
  const Index n = x.size();
  std::vector<Index> rows;
  for (Index i = 0; i < e.c.size(); ++i) {
    if (e.has_row[static_cast<std::size_t>(i)]) rows.push_back(i);
  }
  std::vector<std::pair<Index, int>> bounds;
  for (Index j = 0; j < n; ++j) {
    if (std::isfinite(lo[j])) bounds.push_back({j, -1});
    if (std::isfinite(hi[j])) bounds.push_back({j, 1});
  }
  const Index nr = static_cast<Index>(rows.size());
  MatrixXd A = MatrixXd::Zero(nr + static_cast<Index>(bounds.size()), n);
  VectorXd b(A.rows());
  for (Index r = 0; r < nr; ++r) {
    A.row(r) = e.jac.row(rows[static_cast<std::size_t>(r)]);
    b[r] = e.c[rows[static_cast<std::size_t>(r)]];
  }
  for (std::size_t k = 0; k < bounds.size(); ++k) {
    const auto [j, side] = bounds[k];
    const Index r = nr + static_cast<Index>(k);
    A(r, j) = side < 0 ? 1.0 : -1.0;
    b[r] = side < 0 ? x[j] - lo[j] : hi[j] - x[j];
  }
  DualQp qp(B, e.g);
  QpResult out;
  out.consistent = qp.solve(A, b, max_iter);
  out.d = qp.x();
  std::vector<double> lambda;
  for (std::size_t k = 0; k < qp.active().size(); ++k) {
    const Index r = qp.active()[k];
    if (r >= nr) continue;
    out.work.push_back(rows[static_cast<std::size_t>(r)]);
    lambda.push_back(qp.multiplier(k));
  }
  out.lambda = Eigen::Map<VectorXd>(lambda.data(), static_cast<Index>(lambda.size()));
  return out;
}

// Bound-constrained Gauss-Newton step on the violated constraints.
VectorXd restoration_step(const Eval& e, const VectorXd& x, const VectorXd& lo, const VectorXd& hi,
                          int max_iter) {
  const Index n = x.size();
  std::vector<Index> rows;
  for (Index i = 0; i < e.c.size(); ++i) {
    if (e.has_row[static_cast<std::size_t>(i)] && e.c[i] < 0.0) rows.push_back(i);
  }
  MatrixXd Av(static_cast<Index>(rows.size()), n);
  VectorXd cv(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    Av.row(static_cast<Index>(r)) = e.jac.row(rows[r]);
    cv[static_cast<Index>(r)] = e.c[rows[r]];
  }
  const MatrixXd N = Av.transpose() * Av;
  const double eps = 1e-10 * std::max(1.0, N.diagonal().maxCoeff());
  const MatrixXd H = N + eps * MatrixXd::Identity(n, n);
  const VectorXd g = Av.transpose() * cv;
  Fixing fix(static_cast<std::size_t>(n), 0);
  VectorXd d = VectorXd::Zero(n);
  for (int it = 0; it < max_iter; ++it) {
    std::vector<Index> free;
    for (Index j = 0; j < n; ++j) {
      const int f = fix[static_cast<std::size_t>(j)];
      if (f == 0) {
        free.push_back(j);
      } else {
        d[j] = f < 0 ? lo[j] - x[j] : hi[j] - x[j];
      }
    }
    const Index nf = static_cast<Index>(free.size());
    MatrixXd Hf(nf, nf);
    VectorXd rf(nf);
    const VectorXd hd_fixed = [&] {
      VectorXd dd = d;
      for (Index j : free) dd[j] = 0.0;
      return VectorXd(H * dd);
    }();
    for (Index a = 0; a < nf; ++a) {
      for (Index b = 0; b < nf; ++b) Hf(a, b) = H(free[a], free[b]);
      rf[a] = -g[free[a]] - hd_fixed[free[a]];
    }
    const VectorXd df = nf ? VectorXd(Hf.ldlt().solve(rf)) : VectorXd();
    for (Index a = 0; a < nf; ++a) d[free[a]] = df[a];
    const VectorXd grad = H * d + g;
    bool changed = false;
    // release bounds whose gradient points inside
    for (Index j = 0; j < n && !changed; ++j) {
      const int f = fix[static_cast<std::size_t>(j)];
      if ((f < 0 && grad[j] < 0.0) || (f > 0 && grad[j] > 0.0)) {
        fix[static_cast<std::size_t>(j)] = 0;
        changed = true;
      }
    }
    if (changed) continue;
    for (Index j = 0; j < n; ++j) {
      if (fix[static_cast<std::size_t>(j)] != 0) continue;
      if (lo.size() && x[j] + d[j] < lo[j]) {
        fix[static_cast<std::size_t>(j)] = -1;
        changed = true;
      } else if (hi.size() && x[j] + d[j] > hi[j]) {
        fix[static_cast<std::size_t>(j)] = 1;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return d;
}

void project(VectorXd& x, const VectorXd& lo, const VectorXd& hi) {
  if (lo.size()) x = x.cwiseMax(lo);
  if (hi.size()) x = x.cwiseMin(hi);
}

}  // namespace

NLPResult sqp_solve(const NlpProblem& p, const Eigen::VectorXd& x0, const SqpOptions& opts) {
  const Index n = static_cast<Index>(p.n);
  NLPResult res;
  if (x0.size() != n || (p.lower.size() && p.lower.size() != n) ||
      (p.upper.size() && p.upper.size() != n)) {
    res.x = x0;
    res.status = SqpStatus::qp_singular;
    res.message = "dimension mismatch";
    return res;
  }
  const VectorXd lo = p.lower.size() ? p.lower : VectorXd::Constant(n, -kInf);
  const VectorXd hi = p.upper.size() ? p.upper : VectorXd::Constant(n, kInf);
  for (Index j = 0; j < n; ++j) {
    if (lo[j] > hi[j]) {
      res.x = x0;
      res.status = SqpStatus::infeasible;
      res.message = "empty box for variable " + std::to_string(j);
      return res;
    }
  }
  const double band = std::max(opts.grad_band, opts.act_band);
  auto evaluate = [&](const VectorXd& x, bool derivs) {
    Eval e;
    e.c = VectorXd::Zero(static_cast<Index>(p.m));
    if (derivs) {
      e.g = VectorXd::Zero(n);
      e.f = p.objective(x, &e.g);
      e.jac = MatrixXd::Zero(static_cast<Index>(p.m), n);
      e.has_row.assign(p.m, false);
      if (p.m) p.constraints(x, band, e.c, &e.jac, &e.has_row);
    } else {
      e.f = p.objective(x, nullptr);
      if (p.m) p.constraints(x, band, e.c, nullptr, nullptr);
    }
    return e;
  };

  VectorXd x = x0;
  project(x, lo, hi);
  Eval e = evaluate(x, true);
  const double gscale = e.g.lpNorm<Eigen::Infinity>() > 0.0
                            ? e.g.lpNorm<Eigen::Infinity>()
                            : (std::abs(e.f) > 0.0 ? std::abs(e.f) : 1.0);
  MatrixXd B = gscale * MatrixXd::Identity(n, n);
  double rho = 0.0;
  VectorXd lambda_full = VectorXd::Zero(static_cast<Index>(p.m));
  bool restoring = false;
  bool updated = false;

  for (int k = 0; k < opts.max_iter; ++k) {
    const int qp_iter = opts.max_qp_iter + 10 * static_cast<int>(e.c.size() + 2 * static_cast<std::size_t>(n));
    QpResult qp = solve_qp(B, e, x, lo, hi, qp_iter);
    const double viol = violation(e.c);
    const double maxv = max_violation(e.c);

    SqpIterate rec;
    rec.k = k;
    rec.f = e.f;
    rec.violation = maxv;
    rec.working_set = qp.work.size();

    VectorXd d;
    double merit0, D;
    auto merit = [&](const Eval& ev) { return ev.f + rho * violation(ev.c); };
    if (qp.consistent) {
      restoring = false;
      d = qp.d;
      lambda_full.setZero();
      double lmax = 0.0;
      for (std::size_t r = 0; r < qp.work.size(); ++r) {
        const double l = std::max(0.0, qp.lambda[static_cast<Index>(r)]);
        lambda_full[qp.work[r]] = l;
        lmax = std::max(lmax, l);
      }
      // stationarity on free variables and complementarity on the working set
      double kkt = 0.0;
      const VectorXd r = e.g - e.jac.transpose() * lambda_full;
      for (Index j = 0; j < n; ++j) {
        const bool lower_ok = x[j] <= lo[j] && r[j] >= 0.0;
        const bool upper_ok = x[j] >= hi[j] && r[j] <= 0.0;
        if (!lower_ok && !upper_ok) kkt = std::max(kkt, std::abs(r[j]));
      }
      for (Index i = 0; i < lambda_full.size(); ++i) {
        kkt = std::max(kkt, std::abs(lambda_full[i] * e.c[i]));
      }
      rec.kkt = kkt / gscale;
      res.kkt = rec.kkt;
      if (rec.kkt <= opts.opt_tol && maxv <= opts.feas_tol) {
        rec.penalty = rho;
        rec.merit_before = rec.merit_after = merit(e);
        res.history.push_back(rec);
        res.status = SqpStatus::converged;
        res.message = "KKT conditions satisfied";
        break;
      }
      if (rho < lmax) rho = (1.0 + opts.penalty_margin) * lmax;
      merit0 = merit(e);
      D = e.g.dot(d) - rho * viol;
    } else {
      restoring = true;
      d = restoration_step(e, x, lo, hi, opts.max_qp_iter);
      merit0 = viol;
      double lin = 0.0;
      for (Index i = 0; i < e.c.size(); ++i) {
        const double ci = e.has_row[static_cast<std::size_t>(i)] ? e.c[i] + e.jac.row(i).dot(d) : e.c[i];
        lin += std::max(0.0, -ci);
      }
      D = lin - viol;
      rec.kkt = res.kkt;
      if (!(D < -1e-12 * std::max(1.0, viol))) {
        rec.merit_before = rec.merit_after = merit0;
        res.history.push_back(rec);
        res.status = SqpStatus::infeasible;
        res.message = "linearized constraints inconsistent and violation stationary";
        break;
      }
    }
    rec.penalty = rho;
    rec.merit_before = merit0;

    if (!(D < 0.0)) {
      // no descent left in the merit: the step is negligible
      rec.merit_after = merit0;
      rec.step_norm = d.lpNorm<Eigen::Infinity>();
      res.history.push_back(rec);
      if (maxv <= opts.feas_tol) {
        res.status = SqpStatus::converged;
        res.message = "no merit descent; feasible";
      } else {
        res.status = SqpStatus::infeasible;
        res.message = "no merit descent; constraints violated";
      }
      break;
    }

    // line search with quadratic interpolation
    auto merit_of = [&](const Eval& ev) { return restoring ? violation(ev.c) : merit(ev); };
    double alpha = 1.0;
    VectorXd xt = x + d;
    project(xt, lo, hi);
    Eval et = evaluate(xt, false);
    double mt = merit_of(et);
    bool accepted = false;
    int ls = 0;
    auto interp = [&](double a, double m) {
      const double denom = 2.0 * (m - merit0 - D * a);
      return denom > 0.0 ? -D * a * a / denom : kInf;
    };
    if (std::isfinite(mt) && mt <= merit0 + opts.armijo * alpha * D) {
      accepted = true;
      const double aq = interp(1.0, mt);
      if ((aq > 0.05 && aq < 0.95) || (aq > 1.05 && aq <= 10.0)) {
        VectorXd xq = x + aq * d;
        project(xq, lo, hi);
        Eval eq = evaluate(xq, false);
        const double mq = merit_of(eq);
        if (std::isfinite(mq) && mq < mt) {
          alpha = aq;
          xt = std::move(xq);
          et = std::move(eq);
          mt = mq;
        }
      }
    } else {
      for (ls = 0; ls < opts.max_line_search; ++ls) {
        const double aq = std::isfinite(mt) ? interp(alpha, mt) : 0.1 * alpha;
        alpha = std::clamp(aq, 0.1 * alpha, 0.5 * alpha);
        xt = x + alpha * d;
        project(xt, lo, hi);
        et = evaluate(xt, false);
        mt = merit_of(et);
        if (std::isfinite(mt) && mt <= merit0 + opts.armijo * alpha * D) {
          accepted = true;
          break;
        }
      }
    }
    rec.alpha = alpha;
    const VectorXd s = xt - x;
    rec.step_norm = s.lpNorm<Eigen::Infinity>();
    if (!accepted) {
      rec.merit_after = merit0;
      res.history.push_back(rec);
      if (rec.step_norm * (1.0 / std::max(alpha, 1e-300)) <= opts.epsx && maxv <= opts.feas_tol) {
        res.status = SqpStatus::converged;
        res.message = "step below epsx";
      } else if (restoring) {
        res.status = SqpStatus::infeasible;
        res.message = "restoration could not reduce the violation";
      } else {
        res.status = SqpStatus::line_search_failed;
        res.message = "no sufficient merit decrease";
      }
      break;
    }
    rec.merit_after = mt;
    Eval en = evaluate(xt, true);
    if (!restoring) {
      // damped BFGS on the Lagrangian gradient
      const VectorXd y = (en.g - en.jac.transpose() * lambda_full) - (e.g - e.jac.transpose() * lambda_full);
      if (!updated && s.dot(y) > 0.0) {
        B = (y.squaredNorm() / s.dot(y)) * MatrixXd::Identity(n, n);
        updated = true;
      }
      const VectorXd bs = B * s;
      const double sbs = s.dot(bs);
      const double sy = s.dot(y);
      if (sbs > 0.0) {
        const double theta = sy >= 0.2 * sbs ? 1.0 : 0.8 * sbs / (sbs - sy);
        const VectorXd r = theta * y + (1.0 - theta) * bs;
        const double sr = s.dot(r);
        if (sr > 0.0) B += r * r.transpose() / sr - bs * bs.transpose() / sbs;
      }
    }
    x = xt;
    e = std::move(en);
    res.history.push_back(rec);
    if (opts.verbose) {
      std::fprintf(stderr, "sqp %3d f=%.10g viol=%.3e kkt=%.3e step=%.3e alpha=%.3g |W|=%zu\n", k,
                   e.f, max_violation(e.c), rec.kkt, rec.step_norm, alpha, rec.working_set);
    }
    if (!restoring && rec.step_norm <= opts.epsx && max_violation(e.c) <= opts.feas_tol) {
      res.status = SqpStatus::converged;
      res.message = "step below epsx";
      res.iterations = k + 1;
      break;
    }
    res.iterations = k + 1;
  }
  if (res.history.size() >= static_cast<std::size_t>(opts.max_iter) &&
      res.status == SqpStatus::max_iter) {
    res.message = "iteration limit";
  }
  res.iterations = static_cast<int>(res.history.size());
  res.x = x;
  res.objective = e.f;
  res.max_violation = max_violation(e.c);
  res.multipliers = lambda_full;
  return res;
}

}  // namespace gasgrid
