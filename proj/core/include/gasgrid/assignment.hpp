#pragma once

#include <cstddef>
#include <vector>

#include "gasgrid/layout.hpp"

namespace gasgrid {

/// Discretization choices of one time block [t0, t1]: one dt shared by the
/// whole network and a model level and cell count per pipe (indexed by arc;
/// entries of non-pipe arcs are ignored).
struct BlockAssignment {
  double t0 = 0.0;
  double t1 = 0.0;
  double dt = 0.0;
  std::vector<PipeDiscretization> pipes;

  std::size_t steps() const;
  friend bool operator==(const BlockAssignment&, const BlockAssignment&) = default;
};

struct ModelAssignment {
  std::vector<BlockAssignment> blocks;

  /// Same level everywhere, dt fixed, n_cells = ceil(L / dx_max) per pipe.
  static ModelAssignment uniform(const Network& network, double horizon, double block_length,
                                 double dt, ModelLevel level, double dx_max);

  double horizon() const { return blocks.empty() ? 0.0 : blocks.back().t1; }
  std::size_t block_of(double t) const;
  void validate(const Network& network) const;

  friend bool operator==(const ModelAssignment&, const ModelAssignment&) = default;
};

/// Time blocks with their step sizes, as stored in a ModelAssignment.
struct TimeGrid {
  std::vector<double> bounds;
  std::vector<double> dt;
  static TimeGrid from(const ModelAssignment& a);
};

}  // namespace gasgrid
