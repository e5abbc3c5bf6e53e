#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace gasgrid {

/// Piecewise-linear function of time given by breakpoints. Outside the
/// breakpoint range the end values are held constant.
class TimeSeries {
 public:
  TimeSeries() = default;
  TimeSeries(std::vector<double> times, std::vector<double> values);

  static TimeSeries constant(double value);

  double operator()(double t) const;

  /// Interpolation weights: value(t) = sum_k w_k * values[k]. At most two
  /// entries are nonzero; they are written to (i0, w0) and (i1, w1).
  void weights(double t, std::size_t& i0, double& w0, std::size_t& i1, double& w1) const;

  /// True if every t in [t0, t1] lies within the breakpoint range. A single
  /// breakpoint series is treated as constant and covers everything.
  bool covers(double t0, double t1) const;

  bool empty() const { return times_.empty(); }
  std::size_t size() const { return times_.size(); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& mutable_values() { return values_; }

  friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

 private:
  std::vector<double> times_;
  std::vector<double> values_;
};

/// Piecewise-constant boolean schedule: the state of the last breakpoint at or
/// before t applies (the first state applies before the first breakpoint).
class Schedule {
 public:
  Schedule() = default;
  explicit Schedule(bool always) : times_{0.0}, states_{always} {}
  Schedule(std::vector<double> times, std::vector<bool> states);

  bool operator()(double t) const;

  const std::vector<double>& times() const { return times_; }
  const std::vector<bool>& states() const { return states_; }

  friend bool operator==(const Schedule&, const Schedule&) = default;

 private:
  std::vector<double> times_{0.0};
  std::vector<bool> states_{true};
};

}  // namespace gasgrid
