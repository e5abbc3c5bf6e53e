#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "gasgrid/time_series.hpp"

namespace gasgrid {

class Network;

enum class ControlKind { compressor_head, valve_drop };

/// One time-dependent control of one arc, piecewise linear on its nodes.
struct ControlSeries {
  ControlKind kind = ControlKind::compressor_head;
  std::size_t arc = 0;
  TimeSeries series;  // m^2/s^2 for heads, Pa for pressure drops
  double lower = -1e300;
  double upper = 1e300;
  double scale = 1.0;  // typical magnitude, used to nondimensionalize for the NLP
};

/// All controls of a run: H_ad per compressor station and pressure drop per
/// control valve. Flattening enumerates series in order, nodes within each.
class ControlVector {
 public:
  ControlVector() = default;

  void add(ControlSeries s);

  /// Control value of an arc at time t; nullopt if the arc has no control.
  std::optional<double> value(std::size_t arc, double t) const;
  const ControlSeries* find(std::size_t arc) const;

  const std::vector<ControlSeries>& series() const { return series_; }
  std::vector<ControlSeries>& mutable_series() { return series_; }

  std::size_t size() const;

  struct Entry {
    std::size_t series;
    std::size_t node;
  };
  /// Index map of the flat vector.
  Entry entry(std::size_t flat) const;
  std::size_t flat_index(std::size_t series, std::size_t node) const;

  std::vector<double> flat() const;
  void set_flat(const std::vector<double>& values);

  std::vector<double> lower_bounds() const;
  std::vector<double> upper_bounds() const;
  std::vector<double> scales() const;

  /// Nonzero interpolation weights of flat entries for the control of `arc`
  /// at time t.
  struct Weight {
    std::size_t flat;
    double w;
  };
  std::vector<Weight> weights(std::size_t arc, double t) const;

  /// Checks that every active compressor and every control valve of the
  /// network owns a series covering [0, horizon].
  void validate(const Network& network, double horizon) const;

  /// Controls with nodes every `interval` seconds on [0, horizon], sampled
  /// from the current series.
  ControlVector resampled(double horizon, double interval) const;

 private:
  std::vector<ControlSeries> series_;
  std::vector<std::size_t> offsets_;
};

}  // namespace gasgrid
