#include "gasgrid/controls.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gasgrid/errors.hpp"
#include "gasgrid/network.hpp"

namespace gasgrid {

void ControlVector::add(ControlSeries s) {
  if (find(s.arc)) {
    throw Error(ErrorCode::duplicate_id, "arc " + std::to_string(s.arc) + " already has a control");
  }
  if (s.series.empty()) throw Error(ErrorCode::invalid_argument, "control series is empty");
  if (!(s.scale > 0.0)) throw Error(ErrorCode::invalid_argument, "control scale must be positive");
  offsets_.push_back(size());
  series_.push_back(std::move(s));
}

const ControlSeries* ControlVector::find(std::size_t arc) const {
  for (const auto& s : series_) {
    if (s.arc == arc) return &s;
  }
  return nullptr;
}

std::optional<double> ControlVector::value(std::size_t arc, double t) const {
  const ControlSeries* s = find(arc);
  if (!s) return std::nullopt;
  return s->series(t);
}

std::size_t ControlVector::size() const {
  return series_.empty() ? 0 : offsets_.back() + series_.back().series.size();
}

ControlVector::Entry ControlVector::entry(std::size_t flat) const {
  if (flat >= size()) throw Error(ErrorCode::invalid_argument, "control index out of range");
  auto it = std::upper_bound(offsets_.begin(), offsets_.end(), flat);
  const std::size_t s = static_cast<std::size_t>(it - offsets_.begin()) - 1;
  return {s, flat - offsets_[s]};
}

std::size_t ControlVector::flat_index(std::size_t series, std::size_t node) const {
  return offsets_.at(series) + node;
}

std::vector<double> ControlVector::flat() const {
  std::vector<double> out;
  out.reserve(size());
  for (const auto& s : series_) out.insert(out.end(), s.series.values().begin(), s.series.values().end());
  return out;
}

void ControlVector::set_flat(const std::vector<double>& values) {
  if (values.size() != size()) {
    throw Error(ErrorCode::dimension_mismatch, "control vector of size " + std::to_string(size()) +
                                                   " set from " + std::to_string(values.size()));
  }
  std::size_t k = 0;
  for (auto& s : series_) {
    for (double& v : s.series.mutable_values()) v = values[k++];
  }
}

std::vector<double> ControlVector::lower_bounds() const {
  std::vector<double> out;
  for (const auto& s : series_) out.insert(out.end(), s.series.size(), s.lower);
  return out;
}

std::vector<double> ControlVector::upper_bounds() const {
  std::vector<double> out;
  for (const auto& s : series_) out.insert(out.end(), s.series.size(), s.upper);
  return out;
}

std::vector<double> ControlVector::scales() const {
  std::vector<double> out;
  for (const auto& s : series_) out.insert(out.end(), s.series.size(), s.scale);
  return out;
}

std::vector<ControlVector::Weight> ControlVector::weights(std::size_t arc, double t) const {
  for (std::size_t k = 0; k < series_.size(); ++k) {
    if (series_[k].arc != arc) continue;
    std::size_t i0, i1;
    double w0, w1;
    series_[k].series.weights(t, i0, w0, i1, w1);
    std::vector<Weight> out{{offsets_[k] + i0, w0}};
    if (w1 != 0.0 && i1 != i0) out.push_back({offsets_[k] + i1, w1});
    return out;
  }
  return {};
}

void ControlVector::validate(const Network& network, double horizon) const {
  for (const auto& s : series_) {
    if (s.arc >= network.arc_count()) {
      throw Error(ErrorCode::invalid_argument, "control for arc index out of range");
    }
    const Arc& arc = network.arc(s.arc);
    const bool ok_kind = (s.kind == ControlKind::compressor_head && arc.is_compressor()) ||
                         (s.kind == ControlKind::valve_drop && arc.is_control_valve());
    if (!ok_kind) {
      throw Error(ErrorCode::invalid_argument, "control kind does not match arc '" + arc.id + "'");
    }
    if (!s.series.covers(0.0, horizon)) {
      throw Error(ErrorCode::invalid_argument,
                  "control of arc '" + arc.id + "' does not cover the horizon");
    }
  }
  for (std::size_t a = 0; a < network.arc_count(); ++a) {
    const Arc& arc = network.arc(a);
    if ((arc.is_compressor() || arc.is_control_valve()) && !find(a)) {
      throw Error(ErrorCode::invalid_argument, "arc '" + arc.id + "' has no control series");
    }
  }
}

ControlVector ControlVector::resampled(double horizon, double interval) const {
  if (!(interval > 0.0) || !(horizon > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "resampling needs positive horizon and interval");
  }
  const auto n = static_cast<std::size_t>(std::ceil(horizon / interval - 1e-9));
  std::vector<double> times;
  for (std::size_t i = 0; i <= n; ++i) times.push_back(std::min(horizon, interval * static_cast<double>(i)));
  if (times.size() >= 2 && times[times.size() - 1] <= times[times.size() - 2]) times.pop_back();
  ControlVector out;
  for (const auto& s : series_) {
    ControlSeries r = s;
    std::vector<double> values;
    for (double t : times) values.push_back(s.series(t));
    r.series = TimeSeries(times, values);
    out.add(std::move(r));
  }
  return out;
}

}  // namespace gasgrid
