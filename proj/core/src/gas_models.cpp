#include "gasgrid/gas_models.hpp"

#include <cmath>
#include <string>

#include "gasgrid/errors.hpp"

namespace gasgrid {

const char* to_string(ModelLevel level) {
  switch (level) {
    case ModelLevel::M1: return "M1";
    case ModelLevel::M2: return "M2";
    case ModelLevel::M3: return "M3";
  }
  return "?";
}

namespace {

void require_positive_pressure(double p, const char* where) {
  if (!(p > 0.0)) {
    throw Error(ErrorCode::nonpositive_pressure,
                std::string(where) + ": pressure " + std::to_string(p) + " Pa");
  }
}

}  // namespace

std::array<double, 2> flux(ModelLevel level, GasState u, const PipeParameters& par) {
  const double k = par.rho0 * par.c * par.c / par.area;
  switch (level) {
    case ModelLevel::M2:
      return {k * u.q, par.area / par.rho0 * u.p};
    case ModelLevel::M3:
      require_positive_pressure(u.p, "M3 flux");
      return {k * u.q, par.area / par.rho0 * u.p + k * u.q * u.q / u.p};
    case ModelLevel::M1:
      break;
  }
  throw Error(ErrorCode::invalid_argument, "the algebraic model has no flux");
}

std::array<double, 2> source(GasState u, const PipeParameters& par) {
  require_positive_pressure(u.p, "friction source");
  return {0.0, -par.lambda * par.rho0 * par.c * par.c * std::abs(u.q) * u.q /
                   (2.0 * par.diameter * par.area * u.p)};
}

double m1_friction_coefficient(const PipeParameters& par) {
  return par.lambda * par.rho0 * par.rho0 * par.c * par.c * par.length /
         (par.diameter * par.area * par.area);
}

double m1_pout(double p_in, double q, const PipeParameters& par) {
  const double radicand = p_in * p_in - m1_friction_coefficient(par) * std::abs(q) * q;
  if (!(radicand > 0.0)) {
    throw Error(ErrorCode::radicand_nonpositive,
                "stationary law cannot carry q = " + std::to_string(q) + " m^3/s from p_in = " +
                    std::to_string(p_in) + " Pa");
  }
  return std::sqrt(radicand);
}

double compressibility(double p, const EquationOfState& eos) {
  const double z = eos.kind == EquationOfState::Kind::ideal ? eos.z0 : eos.z0 - eos.alpha * p;
  if (!(z > 0.0) || z > 1.0) {
    throw Error(ErrorCode::compressibility_out_of_range,
                "z(" + std::to_string(p) + " Pa) = " + std::to_string(z));
  }
  return z;
}

double compressibility_derivative(double, const EquationOfState& eos) {
  return eos.kind == EquationOfState::Kind::ideal ? 0.0 : -eos.alpha;
}

double gas_density(double p, const GasProperties& gas) {
  return p * gas.eos.z0 / (gas.c * gas.c * compressibility(p, gas.eos));
}

double nikuradse_lambda(double diameter, double roughness) {
  if (!(diameter > 0.0) || !(roughness > 0.0) || roughness >= diameter) {
    throw Error(ErrorCode::invalid_argument, "Nikuradse law needs 0 < roughness < diameter");
  }
  const double s = 2.0 * std::log10(diameter / roughness) + 1.138;
  return 1.0 / (s * s);
}

double effective_sound_speed(double c, const EquationOfState& eos, double p_ref) {
  return c * std::sqrt(compressibility(p_ref, eos) / eos.z0);
}

}  // namespace gasgrid
