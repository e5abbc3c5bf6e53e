#pragma once

#include <array>

namespace gasgrid {

/// Pressure unknowns are carried in bar inside the nonlinear systems.
inline constexpr double kPressureScale = 1e5;

enum class ModelLevel { M1 = 1, M2 = 2, M3 = 3 };

const char* to_string(ModelLevel level);

struct PipeParameters {
  double length = 0.0;    // m
  double diameter = 0.0;  // m
  double area = 0.0;      // m^2
  double lambda = 0.011;  // friction coefficient
  double c = 340.0;       // speed of sound, m/s
  double rho0 = 0.785;    // density at standard conditions, kg/m^3
};

/// Pressure in Pa and flow rate in m^3/s at standard conditions.
struct GasState {
  double p = 0.0;
  double q = 0.0;
};

/// Real-gas compressibility z(p). The constant R*T is never needed on its
/// own: the speed of sound c carries it (c^2 = z0 * R * T).
struct EquationOfState {
  enum class Kind { ideal, affine };
  Kind kind = Kind::ideal;
  double z0 = 1.0;
  double alpha = 0.0;  // 1/Pa, only for affine
};

struct GasProperties {
  double c = 340.0;
  double rho0 = 0.785;
  double kappa = 1.29;  // isentropic exponent used by the compressor head map
  EquationOfState eos;
};

/// Physical flux of the pipe PDE. M3 includes the convective term q^2/p,
/// M2 drops it. M1 has no flux form; requesting it is an error.
std::array<double, 2> flux(ModelLevel level, GasState u, const PipeParameters& par);

/// Friction source (0, -lambda rho0 c^2 |q| q / (2 d A p)).
std::array<double, 2> source(GasState u, const PipeParameters& par);

/// Closed-form stationary outlet pressure of the algebraic pipe model.
/// Throws radicand_nonpositive when the load cannot be carried stationary.
double m1_pout(double p_in, double q, const PipeParameters& par);

/// Coefficient K of p_in^2 - p_out^2 = K |q| q, in Pa^2 s^2 / m^6.
double m1_friction_coefficient(const PipeParameters& par);

double compressibility(double p, const EquationOfState& eos);
double compressibility_derivative(double p, const EquationOfState& eos);

/// Density from the state equation, rho = p z0 / (c^2 z(p)).
double gas_density(double p, const GasProperties& gas);

/// Nikuradse friction law for a fully rough pipe.
double nikuradse_lambda(double diameter, double roughness);

/// Sound speed folded with the compressibility at a reference pressure.
double effective_sound_speed(double c, const EquationOfState& eos, double p_ref);

}  // namespace gasgrid
