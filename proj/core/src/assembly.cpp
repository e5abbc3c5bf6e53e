#include <cmath>
#include <string>

#include "gasgrid/discretization.hpp"
#include "gasgrid/errors.hpp"

namespace gasgrid {

namespace {

constexpr double kP = kPressureScale;

std::array<double, 2> add(std::array<double, 2> a, std::array<double, 2> b, double s = 1.0) {
  return {a[0] + s * b[0], a[1] + s * b[1]};
}

struct Triplets {
  std::vector<Eigen::Triplet<double>> t;
  bool on = false;
  void operator()(std::size_t r, std::size_t c, double v) {
    if (on && v != 0.0) t.emplace_back(static_cast<int>(r), static_cast<int>(c), v);
  }
};

double control_or_throw(const StepInput& in, std::size_t arc) {
  auto u = in.controls.value(arc, in.t);
  if (!u) {
    throw Error(ErrorCode::invalid_argument,
                "arc '" + in.network.arc(arc).id + "' needs a control value");
  }
  return *u;
}

}  // namespace

std::array<double, 2> box_residual(ModelLevel level, std::array<GasState, 2> u_old,
                                   std::array<GasState, 2> u_new, const PipeParameters& par,
                                   double dx, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::invalid_argument, "box residual needs dt > 0");
  auto r = box_residual_steady(level, u_new, par, dx);
  const double s = 0.5 / dt;
  r[0] += s * (u_new[0].p + u_new[1].p - u_old[0].p - u_old[1].p);
  r[1] += s * (u_new[0].q + u_new[1].q - u_old[0].q - u_old[1].q);
  return r;
}

std::array<double, 2> box_residual_steady(ModelLevel level, std::array<GasState, 2> u,
                                          const PipeParameters& par, double dx) {
  if (!(dx > 0.0)) throw Error(ErrorCode::invalid_argument, "box residual needs dx > 0");
  const auto fl = flux(level, u[0], par);
  const auto fr = flux(level, u[1], par);
  auto r = add(fr, fl, -1.0);
  r = {r[0] / dx, r[1] / dx};
  const auto g = add(source(u[0], par), source(u[1], par));
  return add(r, g, -0.5);
}

BoxCell box_cell(ModelLevel level, const PipeParameters& par, double dx, double dt,
                 std::array<double, 4> u, std::array<double, 4> u_old) {
  const double pl = u[0], ql = u[1], pr = u[2], qr = u[3];
  if (!(pl > 0.0) || !(pr > 0.0)) {
    throw Error(ErrorCode::nonpositive_pressure, "box cell with pressure " +
                                                     std::to_string(std::min(pl, pr) * kP) + " Pa");
  }
  const double rc2 = par.rho0 * par.rho0 * par.c * par.c / (par.area * par.area * kP * kP);
  const double a1 = dt > 0.0 ? dx * par.area * kP / (2.0 * par.rho0 * par.c * par.c * dt) : 0.0;
  const double a2 = dt > 0.0 ? dx * par.rho0 / (2.0 * par.area * kP * dt) : 0.0;
  const double b = level == ModelLevel::M3 ? rc2 : 0.0;
  const double f = dx * par.lambda * rc2 / (4.0 * par.diameter);

  BoxCell c;
  c.old_p_coeff = -a1;
  c.old_q_coeff = -a2;
  c.r[0] = a1 * (pl + pr - u_old[0] - u_old[2]) + (qr - ql);
  c.d[0] = {a1, -1.0, a1, 1.0};
  c.r[1] = a2 * (ql + qr - u_old[1] - u_old[3]) + (pr - pl) + b * (qr * qr / pr - ql * ql / pl) +
           f * (std::abs(ql) * ql / pl + std::abs(qr) * qr / pr);
  c.d[1] = {-1.0 + b * ql * ql / (pl * pl) - f * std::abs(ql) * ql / (pl * pl),
            a2 - 2.0 * b * ql / pl + 2.0 * f * std::abs(ql) / pl,
            1.0 - b * qr * qr / (pr * pr) - f * std::abs(qr) * qr / (pr * pr),
            a2 + 2.0 * b * qr / pr + 2.0 * f * std::abs(qr) / pr};
  return c;
}

SystemEvaluation assemble_system(const StepInput& in, const Eigen::VectorXd& x_old,
                                 const Eigen::VectorXd& x, bool with_jacobian) {
  const Network& net = in.network;
  const SystemLayout& lay = in.layout;
  const auto n = static_cast<Eigen::Index>(lay.size());
  if (x.size() != n || (!in.steady() && x_old.size() != n)) {
    throw Error(ErrorCode::dimension_mismatch,
                "state of size " + std::to_string(x.size()) + " for a system of size " +
                    std::to_string(n));
  }
  SystemEvaluation ev;
  ev.residual = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd& r = ev.residual;
  Triplets jac;
  jac.on = with_jacobian;
  if (with_jacobian) jac.t.reserve(static_cast<std::size_t>(n) * 6);
  auto X = [&](std::size_t i) { return x[static_cast<Eigen::Index>(i)]; };
  auto R = [&](std::size_t i) -> double& { return r[static_cast<Eigen::Index>(i)]; };

  for (std::size_t a = 0; a < net.arc_count(); ++a) {
    const Arc& arc = net.arc(a);
    const auto& blk = lay.arc(a);
    const std::size_t o = blk.offset;
    const std::size_t tail = lay.node_p(arc.tail_index);
    const std::size_t head = lay.node_p(arc.head_index);
    if (blk.pde) {
      const PipeParameters& par = arc.pipe();
      const double dx = par.length / static_cast<double>(blk.n_cells);
      for (std::size_t i = 0; i < blk.n_cells; ++i) {
        const std::size_t c0 = o + 2 * i;
        std::array<double, 4> u{X(c0), X(c0 + 1), X(c0 + 2), X(c0 + 3)};
        std::array<double, 4> uo{};
        if (!in.steady()) {
          for (std::size_t k = 0; k < 4; ++k) uo[k] = x_old[static_cast<Eigen::Index>(c0 + k)];
        }
        const BoxCell cell = box_cell(blk.level, par, dx, in.dt, u, uo);
        for (std::size_t row = 0; row < 2; ++row) {
          R(c0 + row) = cell.r[row];
          for (std::size_t k = 0; k < 4; ++k) jac(c0 + row, c0 + k, cell.d[row][k]);
        }
      }
      const std::size_t rt = o + 2 * blk.n_cells;
      R(rt) = X(o) - X(tail);
      jac(rt, o, 1.0);
      jac(rt, tail, -1.0);
      R(rt + 1) = X(lay.head_p(a)) - X(head);
      jac(rt + 1, lay.head_p(a), 1.0);
      jac(rt + 1, head, -1.0);
      continue;
    }

    const std::size_t ip = o, iq = o + 1, op = o + 2, oq = o + 3;
    const double pin = X(ip), qin = X(iq), pout = X(op), qout = X(oq);
    // coupling rows
    R(o + 2) = pin - X(tail);
    jac(o + 2, ip, 1.0);
    jac(o + 2, tail, -1.0);
    R(o + 3) = pout - X(head);
    jac(o + 3, op, 1.0);
    jac(o + 3, head, -1.0);

    auto flow_pass = [&](std::size_t row) {
      R(row) = qin - qout;
      jac(row, iq, 1.0);
      jac(row, oq, -1.0);
    };
    auto pressure_pass = [&](std::size_t row) {
      R(row) = pin - pout;
      jac(row, ip, 1.0);
      jac(row, op, -1.0);
    };
    auto closed = [&]() {
      R(o) = qin;
      jac(o, iq, 1.0);
      R(o + 1) = qout;
      jac(o + 1, oq, 1.0);
    };

    if (arc.is_pipe()) {
      const double k = m1_friction_coefficient(arc.pipe()) / (kP * kP);
      flow_pass(o);
      R(o + 1) = pin * pin - pout * pout - k * std::abs(qin) * qin;
      jac(o + 1, ip, 2.0 * pin);
      jac(o + 1, op, -2.0 * pout);
      jac(o + 1, iq, -2.0 * k * std::abs(qin));
    } else if (arc.is_compressor()) {
      const CompressorArc& cs = arc.compressor();
      if (cs.on(in.t)) {
        if (!(pin > 0.0)) {
          throw Error(ErrorCode::nonpositive_pressure, "compressor '" + arc.id + "' inlet");
        }
        const double h = control_or_throw(in, a);
        const HeadRatio hr = compressor_ratio(h, pin * kP, net.gas());
        flow_pass(o);
        R(o + 1) = pout - pin * hr.ratio;
        jac(o + 1, op, 1.0);
        jac(o + 1, ip, -hr.ratio - pin * hr.d_dpin * kP);
      } else if (cs.bypass) {
        flow_pass(o);
        pressure_pass(o + 1);
      } else {
        closed();
      }
    } else if (arc.is_control_valve()) {
      const double u = control_or_throw(in, a);
      R(o) = pin - pout - u / kP;
      jac(o, ip, 1.0);
      jac(o, op, -1.0);
      flow_pass(o + 1);
    } else {
      bool open = true;
      if (const auto* v = std::get_if<ValveArc>(&arc.variant)) open = v->open(in.t);
      if (open) {
        flow_pass(o);
        pressure_pass(o + 1);
      } else {
        closed();
      }
    }
  }

  for (std::size_t v = 0; v < net.node_count(); ++v) {
    const std::size_t rp = lay.node_p(v), rq = lay.node_q(v);
    double mass = -X(rq);
    jac(rp, rq, -1.0);
    for (std::size_t a : net.out_arcs(v)) {
      mass += X(lay.tail_q(a));
      jac(rp, lay.tail_q(a), 1.0);
    }
    for (std::size_t a : net.in_arcs(v)) {
      mass -= X(lay.head_q(a));
      jac(rp, lay.head_q(a), -1.0);
    }
    R(rp) = mass;
    const Node& node = net.node(v);
    if (!node.boundary) {
      R(rq) = X(rq);
      jac(rq, rq, 1.0);
    } else if (node.boundary->kind == NodeCondition::Kind::prescribed_pressure) {
      R(rq) = X(rp) - node.boundary->profile(in.t) / kP;
      jac(rq, rp, 1.0);
    } else {
      R(rq) = X(rq) - node.boundary->profile(in.t);
      jac(rq, rq, 1.0);
    }
  }

  if (with_jacobian) {
    ev.jacobian.resize(n, n);
    ev.jacobian.setFromTriplets(jac.t.begin(), jac.t.end());
  }
  return ev;
}

Eigen::SparseMatrix<double> old_state_jacobian(const StepInput& in) {
  const SystemLayout& lay = in.layout;
  const auto n = static_cast<Eigen::Index>(lay.size());
  Eigen::SparseMatrix<double> m(n, n);
  if (in.steady()) return m;
  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t a = 0; a < in.network.arc_count(); ++a) {
    const auto& blk = lay.arc(a);
    if (!blk.pde) continue;
    const PipeParameters& par = in.network.arc(a).pipe();
    const double dx = par.length / static_cast<double>(blk.n_cells);
    const double a1 = dx * par.area * kP / (2.0 * par.rho0 * par.c * par.c * in.dt);
    const double a2 = dx * par.rho0 / (2.0 * par.area * kP * in.dt);
    for (std::size_t i = 0; i < blk.n_cells; ++i) {
      const int c0 = static_cast<int>(blk.offset + 2 * i);
      t.emplace_back(c0, c0, -a1);
      t.emplace_back(c0, c0 + 2, -a1);
      t.emplace_back(c0 + 1, c0 + 1, -a2);
      t.emplace_back(c0 + 1, c0 + 3, -a2);
    }
  }
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

std::vector<std::pair<std::size_t, double>> control_sensitivity(const StepInput& in,
                                                                const Eigen::VectorXd& x,
                                                                std::size_t arc) {
  const Arc& a = in.network.arc(arc);
  const auto& blk = in.layout.arc(arc);
  if (a.is_compressor()) {
    if (!a.compressor().on(in.t)) return {};
    const double pin = x[static_cast<Eigen::Index>(blk.offset)];
    const double h = control_or_throw(in, arc);
    const HeadRatio hr = compressor_ratio(h, pin * kP, in.network.gas());
    return {{blk.offset + 1, -pin * hr.d_dh}};
  }
  if (a.is_control_valve()) return {{blk.offset, -1.0 / kP}};
  return {};
}

std::vector<std::pair<std::size_t, double>> boundary_sensitivity(const StepInput& in,
                                                                 std::size_t node) {
  const Node& n = in.network.node(node);
  if (!n.boundary) return {};
  const std::size_t row = in.layout.node_q(node);
  if (n.boundary->kind == NodeCondition::Kind::prescribed_pressure) return {{row, -1.0 / kP}};
  return {{row, -1.0}};
}

}  // namespace gasgrid
