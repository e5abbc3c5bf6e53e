#include "gasgrid/time_series.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gasgrid/errors.hpp"

namespace gasgrid {

TimeSeries::TimeSeries(std::vector<double> times, std::vector<double> values)
    : times_(std::move(times)), values_(std::move(values)) {
  if (times_.size() != values_.size()) {
    throw Error(ErrorCode::dimension_mismatch, "time series with " + std::to_string(times_.size()) +
                                                   " times and " + std::to_string(values_.size()) +
                                                   " values");
  }
  if (times_.empty()) throw Error(ErrorCode::invalid_argument, "empty time series");
  for (std::size_t i = 1; i < times_.size(); ++i) {
    if (!(times_[i] > times_[i - 1])) {
      throw Error(ErrorCode::invalid_argument, "time series breakpoints must increase strictly");
    }
  }
}

TimeSeries TimeSeries::constant(double value) { return TimeSeries({0.0}, {value}); }

void TimeSeries::weights(double t, std::size_t& i0, double& w0, std::size_t& i1,
                         double& w1) const {
  if (times_.empty()) throw Error(ErrorCode::invalid_argument, "evaluating an empty time series");
  if (times_.size() == 1 || t <= times_.front()) {
    i0 = i1 = 0;
    w0 = 1.0;
    w1 = 0.0;
    return;
  }
  if (t >= times_.back()) {
    i0 = i1 = times_.size() - 1;
    w0 = 1.0;
    w1 = 0.0;
    return;
  }
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  i1 = static_cast<std::size_t>(it - times_.begin());
  i0 = i1 - 1;
  w1 = (t - times_[i0]) / (times_[i1] - times_[i0]);
  w0 = 1.0 - w1;
}

double TimeSeries::operator()(double t) const {
  std::size_t i0, i1;
  double w0, w1;
  weights(t, i0, w0, i1, w1);
  return w0 * values_[i0] + w1 * values_[i1];
}

bool TimeSeries::covers(double t0, double t1) const {
  if (times_.empty()) return false;
  if (times_.size() == 1) return true;
  const double slack = 1e-9 * std::max(1.0, std::abs(t1));
  return times_.front() <= t0 + slack && times_.back() >= t1 - slack;
}

Schedule::Schedule(std::vector<double> times, std::vector<bool> states)
    : times_(std::move(times)), states_(std::move(states)) {
  if (times_.size() != states_.size() || times_.empty()) {
    throw Error(ErrorCode::invalid_argument, "schedule needs matching nonempty times and states");
  }
  for (std::size_t i = 1; i < times_.size(); ++i) {
    if (!(times_[i] > times_[i - 1])) {
      throw Error(ErrorCode::invalid_argument, "schedule breakpoints must increase strictly");
    }
  }
}

bool Schedule::operator()(double t) const {
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return states_.front();
  return states_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

}  // namespace gasgrid
