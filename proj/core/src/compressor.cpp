#include "gasgrid/compressor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "gasgrid/errors.hpp"

namespace gasgrid {

namespace {

// Q-extent of one polygon on the line H = h, or false if it misses.
bool polygon_slice(const FieldPolygon& poly, double h, double& lo, double& hi) {
  lo = std::numeric_limits<double>::infinity();
  hi = -lo;
  const auto& v = poly.vertices;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const FieldPoint& a = v[i];
    const FieldPoint& b = v[(i + 1) % v.size()];
    const double h_lo = std::min(a[1], b[1]);
    const double h_hi = std::max(a[1], b[1]);
    if (h < h_lo || h > h_hi) continue;
    if (a[1] == b[1]) {
      lo = std::min({lo, a[0], b[0]});
      hi = std::max({hi, a[0], b[0]});
      continue;
    }
    const double s = (h - a[1]) / (b[1] - a[1]);
    const double q = a[0] + s * (b[0] - a[0]);
    lo = std::min(lo, q);
    hi = std::max(hi, q);
  }
  return lo <= hi;
}

}  // namespace

SemiconvexField::Slice SemiconvexField::slice(double h) const {
  const std::size_t n = levels.size();
  if (n == 1) return {q_lo[0], q_hi[0], 0.0, 0.0};
  h = std::clamp(h, levels.front(), levels.back());
  std::size_t k = static_cast<std::size_t>(
      std::upper_bound(levels.begin(), levels.end(), h) - levels.begin());
  k = std::clamp<std::size_t>(k, 1, n - 1);
  const double dh = levels[k] - levels[k - 1];
  const double s = (h - levels[k - 1]) / dh;
  Slice out;
  out.dlo_dh = (q_lo[k] - q_lo[k - 1]) / dh;
  out.dhi_dh = (q_hi[k] - q_hi[k - 1]) / dh;
  out.lo = q_lo[k - 1] + s * (q_lo[k] - q_lo[k - 1]);
  out.hi = q_hi[k - 1] + s * (q_hi[k] - q_hi[k - 1]);
  return out;
}

SemiconvexField build_semiconvex(const CharacteristicField& field, std::size_t levels) {
  if (levels < 2) throw Error(ErrorCode::invalid_argument, "semiconvex field needs >= 2 levels");
  double h_min = std::numeric_limits<double>::infinity();
  double h_max = -h_min;
  for (const auto& poly : field.polygons) {
    if (poly.vertices.size() < 3) {
      throw Error(ErrorCode::invalid_argument,
                  "field '" + field.id + "' has a polygon with fewer than 3 vertices");
    }
    for (const auto& v : poly.vertices) {
      h_min = std::min(h_min, v[1]);
      h_max = std::max(h_max, v[1]);
    }
  }
  if (field.polygons.empty() || !(h_max > h_min)) {
    throw Error(ErrorCode::empty_field, "field '" + field.id + "' spans no head range");
  }

  SemiconvexField out;
  for (std::size_t k = 0; k < levels; ++k) {
    const double h = k + 1 == levels
                         ? h_max
                         : h_min + (h_max - h_min) * static_cast<double>(k) /
                                       static_cast<double>(levels - 1);
    std::vector<std::pair<double, double>> pieces;
    for (const auto& poly : field.polygons) {
      double lo, hi;
      if (polygon_slice(poly, h, lo, hi)) pieces.emplace_back(lo, hi);
    }
    if (pieces.empty()) continue;
    std::sort(pieces.begin(), pieces.end());
    double reach = pieces.front().second;
    bool hole = false;
    for (std::size_t i = 1; i < pieces.size(); ++i) {
      if (pieces[i].first > reach) hole = true;
      reach = std::max(reach, pieces[i].second);
    }
    if (hole) ++out.absorbed_hole_levels;
    out.levels.push_back(h);
    out.q_lo.push_back(pieces.front().first);
    out.q_hi.push_back(reach);
  }
  if (out.levels.empty()) {
    throw Error(ErrorCode::empty_field, "no level of field '" + field.id + "' meets a polygon");
  }
  for (std::size_t k = 1; k < out.levels.size(); ++k) {
    const double dh = out.levels[k] - out.levels[k - 1];
    out.max_slope = std::max({out.max_slope, std::abs(out.q_lo[k] - out.q_lo[k - 1]) / dh,
                              std::abs(out.q_hi[k] - out.q_hi[k - 1]) / dh});
  }
  return out;
}

FieldConstraints constraint_values(const SemiconvexField& field, double q, double h) {
  const auto s = field.slice(h);
  FieldConstraints c;
  c.values = {h - field.h_min(), field.h_max() - h, q - s.lo, s.hi - q};
  c.gradients = {{{0.0, 1.0}, {0.0, -1.0}, {1.0, -s.dlo_dh}, {-1.0, s.dhi_dh}}};
  return c;
}

double contains(const SemiconvexField& field, double q, double h) {
  const auto c = constraint_values(field, q, h);
  return *std::min_element(c.values.begin(), c.values.end());
}

double power(double rho_in, double q_volumetric, double h_ad, double eta_ad) {
  if (!(eta_ad > 0.0) || eta_ad > 1.0) {
    throw Error(ErrorCode::invalid_argument, "compressor efficiency outside (0, 1]");
  }
  return rho_in * q_volumetric * h_ad / eta_ad;
}

double volumetric_flow(double q_standard, double rho_in, double rho0) {
  return q_standard * rho0 / rho_in;
}

HeadRatio compressor_ratio(double h_ad, double p_in, const GasProperties& gas) {
  const double k = gas.kappa;
  const double z = compressibility(p_in, gas.eos);
  const double zrt = gas.c * gas.c * z / gas.eos.z0;
  const double base = 1.0 + h_ad * (k - 1.0) / (k * zrt);
  if (!(base > 0.0)) {
    throw Error(ErrorCode::invalid_argument,
                "head " + std::to_string(h_ad) + " m^2/s^2 gives no positive pressure ratio");
  }
  HeadRatio r;
  r.ratio = std::pow(base, k / (k - 1.0));
  const double dbase = std::pow(base, 1.0 / (k - 1.0));
  r.d_dh = dbase / zrt;
  const double dzrt_dp = gas.c * gas.c * compressibility_derivative(p_in, gas.eos) / gas.eos.z0;
  r.d_dpin = -dbase * h_ad / (zrt * zrt) * dzrt_dp;
  return r;
}

double compressor_head(double ratio, double p_in, const GasProperties& gas) {
  if (!(ratio > 0.0)) throw Error(ErrorCode::invalid_argument, "pressure ratio must be positive");
  const double k = gas.kappa;
  const double zrt = gas.c * gas.c * compressibility(p_in, gas.eos) / gas.eos.z0;
  return zrt * k / (k - 1.0) * (std::pow(ratio, (k - 1.0) / k) - 1.0);
}

}  // namespace gasgrid
