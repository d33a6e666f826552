#include "pps/units.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pps {

void TrapGeometry::validate() const {
  if (!(omega > 0.0) || !(omega_perp > omega))
    throw std::invalid_argument("trap geometry needs 0 < omega < omega_perp");
}

double g1d_mean_field(double a_3d, const TrapGeometry& geometry) {
  geometry.validate();
  const double ap = geometry.alpha_perp();
  return 2.0 * a_3d / (ap * ap);
}

double g1d_from_scattering(double a_3d, const TrapGeometry& geometry) {
  const double denom = 1.0 - zeta_half * a_3d / (std::numbers::sqrt2 * geometry.alpha_perp());
  if (std::abs(denom) < 1e-6)
    throw ConfinementResonanceError("scattering length at the confinement-induced resonance");
  return g1d_mean_field(a_3d, geometry) / denom;
}

double scattering_from_g1d(double g_tilde, const TrapGeometry& geometry) {
  geometry.validate();
  if (!std::isfinite(g_tilde)) throw std::domain_error("scattering_from_g1d: coupling not finite");
  const double denom = std::numbers::sqrt2 * zeta_half * g_tilde + 8.0 * geometry.eta();
  if (denom == 0.0) throw ConfinementResonanceError("scattering_from_g1d: vanishing denominator");
  return geometry.alpha_perp() * 2.0 * g_tilde / denom;
}

std::string to_string(ScatteringRoute r) { return r == ScatteringRoute::confinement ? "confinement" : "mean-field"; }

double scattering_from_coupling(double g, const TrapGeometry& geometry, ScatteringRoute route) {
  if (route == ScatteringRoute::mean_field) {
    geometry.validate();
    const double ap = geometry.alpha_perp();
    return 0.5 * g * ap * ap;
  }
  return scattering_from_g1d(2.0 * g, geometry);
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::marginal: return "marginal";
    case Verdict::fail: return "fail";
  }
  return "?";
}

Verdict classify_ratio(double value, const ValidityOptions& options) {
  if (value < options.threshold) return Verdict::pass;
  if (value <= options.warning) return Verdict::marginal;
  return Verdict::fail;
}

bool ValidityReport::ok() const {
  return density.verdict == Verdict::pass && thermal.verdict == Verdict::pass && impurity.verdict == Verdict::pass;
}

ValidityReport validate_1d_regime(double g_bb, int n_bath, int n_imp, double temperature, const TrapGeometry& geometry,
                                  ScatteringRoute route, const ValidityOptions& options) {
  if (!(g_bb > 0.0) || n_bath < 1 || n_imp < 0 || temperature < 0.0)
    throw std::invalid_argument("validate_1d_regime: inputs must be positive");
  ValidityReport r;
  r.a_bb = scattering_from_coupling(g_bb, geometry, route);
  const double ap = geometry.alpha_perp();
  r.density_parameter = n_bath * r.a_bb * ap;
  r.thermal_bound = std::pow(3.0, 4.0 / 3.0) / 16.0 * std::pow(ap * ap * n_bath * n_bath / r.a_bb, 2.0 / 3.0);
  r.temperature = temperature;
  r.density = {"N_B a_BB alpha_perp / alpha^2", r.density_parameter, classify_ratio(r.density_parameter, options)};
  const double t_ratio = temperature / r.thermal_bound;
  r.thermal = {"k_B T / thermal bound", t_ratio, classify_ratio(t_ratio, options)};
  const double i_ratio = std::max(n_imp, 1) * geometry.omega / geometry.omega_perp;
  r.impurity = {"N omega / omega_perp", i_ratio, classify_ratio(i_ratio, options)};
  return r;
}

}  // namespace pps
