#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "gasgrid/gas_models.hpp"
#include "gasgrid/network.hpp"

namespace gasgrid {

/// Model level and cell count of one pipe.
struct PipeDiscretization {
  ModelLevel level = ModelLevel::M1;
  std::size_t n_cells = 1;
  friend bool operator==(const PipeDiscretization&, const PipeDiscretization&) = default;
};

/// Uniform grid x_0 = 0 < ... < x_n = L along one pipe.
struct PipeGrid {
  std::size_t n_cells = 1;
  double dx = 0.0;
  PipeGrid(double length, std::size_t cells);
  std::vector<double> positions() const;
};

/// Position of every unknown of the network system. Rows use the same block
/// structure as columns, so each arc and node owns a square diagonal block:
///  - PDE pipe (M2/M3): (p_i, q_i) for i = 0..n; rows are the n cell pairs
///    followed by the tail and head pressure couplings.
///  - algebraic arc (M1 pipe, valves, compressors): (p_in, q_in, p_out, q_out);
///    rows are two arc equations followed by the two couplings.
///  - node: (p_v, q_v); rows are mass balance and the node condition.
/// Pressures are in bar, flows in m^3/s.
class SystemLayout {
 public:
  struct ArcBlock {
    std::size_t offset = 0;
    std::size_t size = 0;
    bool pde = false;
    ModelLevel level = ModelLevel::M1;
    std::size_t n_cells = 0;
  };

  SystemLayout(const Network& network, std::vector<PipeDiscretization> pipes);

  std::size_t size() const { return size_; }
  std::size_t arc_count() const { return arcs_.size(); }
  std::size_t node_count() const { return node_offset_.size(); }
  const ArcBlock& arc(std::size_t a) const { return arcs_.at(a); }
  std::size_t node_offset(std::size_t v) const { return node_offset_.at(v); }
  const std::vector<PipeDiscretization>& pipes() const { return pipes_; }

  std::size_t tail_p(std::size_t a) const { return arcs_[a].offset; }
  std::size_t tail_q(std::size_t a) const { return arcs_[a].offset + 1; }
  std::size_t head_p(std::size_t a) const {
    return arcs_[a].pde ? arcs_[a].offset + 2 * arcs_[a].n_cells : arcs_[a].offset + 2;
  }
  std::size_t head_q(std::size_t a) const { return head_p(a) + 1; }
  std::size_t node_p(std::size_t v) const { return node_offset_[v]; }
  std::size_t node_q(std::size_t v) const { return node_offset_[v] + 1; }

  /// Same unknown vector shape (levels may differ between M2 and M3).
  bool same_shape(const SystemLayout& other) const;

 private:
  std::vector<PipeDiscretization> pipes_;
  std::vector<ArcBlock> arcs_;
  std::vector<std::size_t> node_offset_;
  std::size_t size_ = 0;
};

/// Linear map carrying a state from one layout to another: pipe profiles are
/// interpolated linearly in space, everything else is copied.
Eigen::SparseMatrix<double> layout_transfer(const Network& network, const SystemLayout& from,
                                            const SystemLayout& to);

/// Snapshot of all unknowns at time t.
struct DiscreteState {
  double t = 0.0;
  std::shared_ptr<const SystemLayout> layout;
  Eigen::VectorXd x;

  double node_pressure(std::size_t v) const;  // Pa
  double node_flow(std::size_t v) const;      // m^3/s
  GasState tail_state(std::size_t arc) const;
  GasState head_state(std::size_t arc) const;
  /// Grid point states of a PDE pipe, or the two end states of an algebraic arc.
  std::vector<GasState> profile(std::size_t arc) const;
};

}  // namespace gasgrid
