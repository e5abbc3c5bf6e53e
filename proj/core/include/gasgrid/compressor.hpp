#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "gasgrid/gas_models.hpp"

namespace gasgrid {

/// (Q, H_ad): volumetric flow in m^3/s and adiabatic head in m^2/s^2.
using FieldPoint = std::array<double, 2>;

struct FieldPolygon {
  std::vector<FieldPoint> vertices;
  friend bool operator==(const FieldPolygon&, const FieldPolygon&) = default;
};

/// Outer polyhedral approximation of a station's operating range, given as a
/// polygon per configuration. The union is generally not semiconvex.
struct CharacteristicField {
  std::string id;
  std::vector<FieldPolygon> polygons;
  friend bool operator==(const CharacteristicField&, const CharacteristicField&) = default;
};

/// Feasible set whose every H_ad slice is a single Q interval. Bounds are
/// tabulated on increasing head levels and interpolated linearly in between.
struct SemiconvexField {
  std::vector<double> levels;
  std::vector<double> q_lo;
  std::vector<double> q_hi;
  /// Levels where the polygon union had a gap that the interval absorbed.
  std::size_t absorbed_hole_levels = 0;
  /// Largest |dQ/dH| of the interpolated bounds.
  double max_slope = 0.0;

  double h_min() const { return levels.front(); }
  double h_max() const { return levels.back(); }

  struct Slice {
    double lo, hi;
    double dlo_dh, dhi_dh;
  };
  /// Interval at head h (clamped into [h_min, h_max]) and bound slopes.
  Slice slice(double h) const;
};

SemiconvexField build_semiconvex(const CharacteristicField& field, std::size_t levels = 32);

/// Signed margin, nonnegative exactly on the feasible set.
double contains(const SemiconvexField& field, double q, double h);

struct FieldConstraints {
  /// h - h_min, h_max - h, Q - Q_lo(h), Q_hi(h) - Q.
  std::array<double, 4> values;
  /// d value / d(Q, h) for each component.
  std::array<std::array<double, 2>, 4> gradients;
};

FieldConstraints constraint_values(const SemiconvexField& field, double q, double h);

/// Compression power P = rho_in Q H_ad / eta_ad in W.
double power(double rho_in, double q_volumetric, double h_ad, double eta_ad);

/// Volumetric inlet flow from standard flow: rho_in Q = rho0 q.
double volumetric_flow(double q_standard, double rho_in, double rho0);

/// Pressure ratio p_out / p_in produced by head h_ad for inlet pressure
/// p_in, from H = zRT kappa/(kappa-1) (ratio^((kappa-1)/kappa) - 1).
struct HeadRatio {
  double ratio;
  double d_dh;    // d ratio / d h_ad
  double d_dpin;  // d ratio / d p_in (through z(p_in)), 1/Pa
};
HeadRatio compressor_ratio(double h_ad, double p_in, const GasProperties& gas);

/// Inverse of compressor_ratio for a given pressure ratio.
double compressor_head(double ratio, double p_in, const GasProperties& gas);

}  // namespace gasgrid
