#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace pps {

// |zeta(1/2)|
inline constexpr double zeta_half = 1.4603545088095868;

namespace si {
inline constexpr double hbar = 1.054571817e-34;
inline constexpr double k_b = 1.380649e-23;
inline constexpr double amu = 1.66053906660e-27;
inline constexpr double rb87_mass = 86.909180527 * amu;
}  // namespace si

// Lengths in units of the axial alpha = sqrt(hbar / m omega), 1D couplings in hbar omega alpha.
struct TrapGeometry {
  double omega = 1.0;
  double omega_perp = 1.0;

  double eta() const { return std::sqrt(omega_perp / omega); }
  double alpha_perp() const { return 1.0 / eta(); }
  void validate() const;
};

// SI scales for one species in one trap.
struct PhysicalScale {
  double mass = si::rb87_mass;  // kg
  double omega = 1.0;           // rad/s

  double length() const { return std::sqrt(si::hbar / (mass * omega)); }
  double energy() const { return si::hbar * omega; }
  double coupling() const { return energy() * length(); }
  double temperature() const { return energy() / si::k_b; }
};

class ConfinementResonanceError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// g = 2 a / alpha_perp^2 / (1 - |zeta(1/2)| a / (sqrt(2) alpha_perp)), a in units of alpha.
double g1d_from_scattering(double a_3d, const TrapGeometry& geometry);
double g1d_mean_field(double a_3d, const TrapGeometry& geometry);

// a = alpha_perp 2 g~ / (sqrt(2) |zeta(1/2)| g~ + 8 eta), g~ twice the Hamiltonian coupling.
double scattering_from_g1d(double g_tilde, const TrapGeometry& geometry);

enum class ScatteringRoute { confinement, mean_field };
std::string to_string(ScatteringRoute r);

// Hamiltonian-convention coupling (the one in config files) to a 3D scattering length.
double scattering_from_coupling(double g, const TrapGeometry& geometry,
                                ScatteringRoute route = ScatteringRoute::confinement);

enum class Verdict { pass, marginal, fail };
std::string to_string(Verdict v);

struct ValidityOptions {
  double threshold = 0.1;
  double warning = 0.3;
};

struct ValidityCondition {
  std::string name;
  double value = 0.0;  // the quantity that must be << 1
  Verdict verdict = Verdict::pass;
};

struct ValidityReport {
  double a_bb = 0.0;             // alpha units
  double density_parameter = 0.0;  // N_B a_BB alpha_perp / alpha^2
  double thermal_bound = 0.0;      // hbar omega
  double temperature = 0.0;        // k_B T / hbar omega
  ValidityCondition density;
  ValidityCondition thermal;       // k_B T / bound
  ValidityCondition impurity;      // N omega / omega_perp
  bool ok() const;
};

Verdict classify_ratio(double value, const ValidityOptions& options = {});

// g_bb in Hamiltonian convention; temperature as k_B T / hbar omega; n_imp counts the impurities.
ValidityReport validate_1d_regime(double g_bb, int n_bath, int n_imp, double temperature, const TrapGeometry& geometry,
                                  ScatteringRoute route = ScatteringRoute::confinement,
                                  const ValidityOptions& options = {});

}  // namespace pps
