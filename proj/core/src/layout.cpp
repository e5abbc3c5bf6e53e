#include "gasgrid/layout.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gasgrid/assignment.hpp"
#include "gasgrid/errors.hpp"

namespace gasgrid {

PipeGrid::PipeGrid(double length, std::size_t cells) : n_cells(cells) {
  if (cells == 0) throw Error(ErrorCode::invalid_argument, "pipe grid needs at least one cell");
  dx = length / static_cast<double>(cells);
}

std::vector<double> PipeGrid::positions() const {
  std::vector<double> x(n_cells + 1);
  for (std::size_t i = 0; i <= n_cells; ++i) x[i] = dx * static_cast<double>(i);
  return x;
}

SystemLayout::SystemLayout(const Network& network, std::vector<PipeDiscretization> pipes)
    : pipes_(std::move(pipes)) {
  if (pipes_.size() != network.arc_count()) {
    throw Error(ErrorCode::dimension_mismatch,
                "layout needs one discretization entry per arc (" +
                    std::to_string(network.arc_count()) + "), got " + std::to_string(pipes_.size()));
  }
  arcs_.resize(network.arc_count());
  std::size_t k = 0;
  for (std::size_t a = 0; a < network.arc_count(); ++a) {
    ArcBlock& b = arcs_[a];
    b.offset = k;
    if (network.arc(a).is_pipe()) {
      b.level = pipes_[a].level;
      b.n_cells = pipes_[a].n_cells;
      if (b.n_cells == 0) throw Error(ErrorCode::invalid_argument, "pipe with zero cells");
      b.pde = b.level != ModelLevel::M1;
    } else {
      b.level = ModelLevel::M1;
      b.n_cells = 0;
      b.pde = false;
    }
    b.size = b.pde ? 2 * (b.n_cells + 1) : 4;
    k += b.size;
  }
  node_offset_.resize(network.node_count());
  for (std::size_t v = 0; v < network.node_count(); ++v) {
    node_offset_[v] = k;
    k += 2;
  }
  size_ = k;
}

bool SystemLayout::same_shape(const SystemLayout& other) const {
  if (size_ != other.size_ || arcs_.size() != other.arcs_.size()) return false;
  for (std::size_t a = 0; a < arcs_.size(); ++a) {
    if (arcs_[a].pde != other.arcs_[a].pde) return false;
    if (arcs_[a].pde && arcs_[a].n_cells != other.arcs_[a].n_cells) return false;
  }
  return true;
}

Eigen::SparseMatrix<double> layout_transfer(const Network& network, const SystemLayout& from,
                                            const SystemLayout& to) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(to.size() * 2);
  for (std::size_t a = 0; a < network.arc_count(); ++a) {
    const auto& f = from.arc(a);
    const auto& g = to.arc(a);
    if (!g.pde) {
      const std::size_t src[4] = {from.tail_p(a), from.tail_q(a), from.head_p(a), from.head_q(a)};
      for (std::size_t k = 0; k < 4; ++k) t.emplace_back(g.offset + k, src[k], 1.0);
      continue;
    }
    const std::size_t n_from = f.pde ? f.n_cells : 1;
    for (std::size_t i = 0; i <= g.n_cells; ++i) {
      const double s = static_cast<double>(i) / static_cast<double>(g.n_cells) *
                       static_cast<double>(n_from);
      std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(std::floor(s)), n_from - 1);
      const double w = s - static_cast<double>(j);
      // grid point j of the source block (algebraic blocks have points 0 and 1)
      auto point = [&](std::size_t jj) { return f.pde ? f.offset + 2 * jj : f.offset + 2 * jj; };
      for (std::size_t c = 0; c < 2; ++c) {
        if (1.0 - w != 0.0) t.emplace_back(g.offset + 2 * i + c, point(j) + c, 1.0 - w);
        if (w != 0.0) t.emplace_back(g.offset + 2 * i + c, point(j + 1) + c, w);
      }
    }
  }
  for (std::size_t v = 0; v < network.node_count(); ++v) {
    t.emplace_back(to.node_p(v), from.node_p(v), 1.0);
    t.emplace_back(to.node_q(v), from.node_q(v), 1.0);
  }
  Eigen::SparseMatrix<double> m(static_cast<Eigen::Index>(to.size()),
                                static_cast<Eigen::Index>(from.size()));
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

double DiscreteState::node_pressure(std::size_t v) const {
  return x[static_cast<Eigen::Index>(layout->node_p(v))] * kPressureScale;
}

double DiscreteState::node_flow(std::size_t v) const {
  return x[static_cast<Eigen::Index>(layout->node_q(v))];
}

GasState DiscreteState::tail_state(std::size_t arc) const {
  return {x[static_cast<Eigen::Index>(layout->tail_p(arc))] * kPressureScale,
          x[static_cast<Eigen::Index>(layout->tail_q(arc))]};
}

GasState DiscreteState::head_state(std::size_t arc) const {
  return {x[static_cast<Eigen::Index>(layout->head_p(arc))] * kPressureScale,
          x[static_cast<Eigen::Index>(layout->head_q(arc))]};
}

std::vector<GasState> DiscreteState::profile(std::size_t arc) const {
  const auto& b = layout->arc(arc);
  if (!b.pde) return {tail_state(arc), head_state(arc)};
  std::vector<GasState> out(b.n_cells + 1);
  for (std::size_t i = 0; i <= b.n_cells; ++i) {
    out[i] = {x[static_cast<Eigen::Index>(b.offset + 2 * i)] * kPressureScale,
              x[static_cast<Eigen::Index>(b.offset + 2 * i + 1)]};
  }
  return out;
}

std::size_t BlockAssignment::steps() const {
  if (!(dt > 0.0)) return 0;
  return static_cast<std::size_t>(std::llround((t1 - t0) / dt));
}

ModelAssignment ModelAssignment::uniform(const Network& network, double horizon,
                                         double block_length, double dt, ModelLevel level,
                                         double dx_max) {
  if (!(horizon > 0.0) || !(block_length > 0.0) || !(dt > 0.0) || !(dx_max > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "uniform assignment needs positive parameters");
  }
  std::vector<PipeDiscretization> pipes(network.arc_count());
  for (std::size_t a = 0; a < network.arc_count(); ++a) {
    if (!network.arc(a).is_pipe()) continue;
    pipes[a].level = level;
    pipes[a].n_cells = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(network.arc(a).pipe().length / dx_max - 1e-9)));
  }
  ModelAssignment out;
  double t0 = 0.0;
  while (t0 < horizon - 1e-9 * horizon) {
    BlockAssignment b;
    b.t0 = t0;
    b.t1 = std::min(horizon, t0 + block_length);
    if (horizon - b.t1 < 1e-9 * horizon) b.t1 = horizon;
    const double len = b.t1 - b.t0;
    b.dt = len / std::ceil(len / dt - 1e-9);
    b.pipes = pipes;
    out.blocks.push_back(b);
    t0 = b.t1;
  }
  return out;
}

std::size_t ModelAssignment::block_of(double t) const {
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    if (t < blocks[k].t1) return k;
  }
  return blocks.empty() ? 0 : blocks.size() - 1;
}

void ModelAssignment::validate(const Network& network) const {
  if (blocks.empty()) throw Error(ErrorCode::invalid_argument, "assignment has no blocks");
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const auto& b = blocks[k];
    if (k > 0 && std::abs(b.t0 - blocks[k - 1].t1) > 1e-9 * std::max(1.0, b.t0)) {
      throw Error(ErrorCode::invalid_argument, "assignment blocks are not contiguous");
    }
    if (!(b.t1 > b.t0) || !(b.dt > 0.0)) {
      throw Error(ErrorCode::invalid_argument, "assignment block with empty range or step");
    }
    const double ratio = (b.t1 - b.t0) / b.dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-6) {
      throw Error(ErrorCode::invalid_argument,
                  "block " + std::to_string(k) + " length is not a multiple of its dt");
    }
    if (b.pipes.size() != network.arc_count()) {
      throw Error(ErrorCode::dimension_mismatch, "block discretization size differs from arc count");
    }
    for (std::size_t a = 0; a < network.arc_count(); ++a) {
      if (network.arc(a).is_pipe() && b.pipes[a].n_cells == 0) {
        throw Error(ErrorCode::invalid_argument, "pipe with zero cells in assignment");
      }
    }
  }
}

TimeGrid TimeGrid::from(const ModelAssignment& a) {
  TimeGrid g;
  if (a.blocks.empty()) return g;
  g.bounds.push_back(a.blocks.front().t0);
  for (const auto& b : a.blocks) {
    g.bounds.push_back(b.t1);
    g.dt.push_back(b.dt);
  }
  return g;
}

}  // namespace gasgrid
