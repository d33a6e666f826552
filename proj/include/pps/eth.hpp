#pragma once

#include <string>

#include "pps/observables.hpp"

namespace pps {

struct EthTruncation {
  int max_states = 200;
  double max_energy = 100.0;
};

// Single impurity in the trap plus the time-averaged bath potential g_BI rho_B(x).
struct EffectiveHamiltonian {
  GridPtr grid;
  double mass = 1.0;
  Vec potential;
  Vec energies;         // kept levels, ascending
  Mat vectors;          // unit columns; phi_i(x) = vectors(x, i) / sqrt(dx)
  Vec discarded;        // levels beyond the truncation
  bool degenerate = false;  // some adjacent kept pair closer than 1e-9

  int size() const { return static_cast<int>(energies.size()); }
  Vec orbital(int i) const { return vectors.col(i) / std::sqrt(grid->dx); }
};

EffectiveHamiltonian effective_hamiltonian(GridPtr grid, const Vec& rho_bar_bath, const SystemParams& params,
                                           const EthTruncation& truncation = {});

// boltzmann: N_I e^{-e_i/T} / Z(1), used for one particle and for two bosons.
// fermi_pair: canonical two-fermion occupations.
// bose_pair: canonical two-boson occupations, only as a cross-check.
enum class Ensemble { boltzmann, fermi_pair, bose_pair };
std::string to_string(Ensemble e);
Ensemble ensemble_from_string(const std::string& s);

struct OccupationDistribution {
  Ensemble ensemble = Ensemble::boltzmann;
  int n_imp = 1;
  double temperature = 0.0;
  Vec n;
  double log_z1 = 0.0;
  double log_z2 = 0.0;  // pair ensembles only
  double discarded = 0.0;  // Boltzmann weight fraction carried by the discarded tail
};

OccupationDistribution boltzmann_occupations(const Vec& energies, double temperature, int n_imp = 1);
OccupationDistribution fermi_two_particle_occupations(const Vec& energies, double temperature);
OccupationDistribution bose_two_particle_occupations(const Vec& energies, double temperature);

OccupationDistribution occupations(const EffectiveHamiltonian& h, Ensemble ensemble, int n_imp, double temperature);

OneBodyDensityMatrix gibbs_density_matrix(const EffectiveHamiltonian& h, const OccupationDistribution& occ);

// sum_i n_i e_i
double thermal_energy(const EffectiveHamiltonian& h, Ensemble ensemble, int n_imp, double temperature);

struct TemperatureFit {
  double temperature = 0.0;
  double residual = 0.0;  // || dx (rho - rho_Gibbs) ||_F
  bool at_boundary = false;
  std::string warning;
};

struct FitOptions {
  double t_min = 0.05;
  double t_max = 100.0;
  int scan_points = 60;
  double tolerance = 1e-3;
};

TemperatureFit fit_temperature(const OneBodyDensityMatrix& rho_bar, const EffectiveHamiltonian& h, Ensemble ensemble,
                               int n_imp, const FitOptions& options = {});

// Solves sum_i n_i(T) e_i = energy by bisection. Throws std::domain_error below the zero-point energy
// or above what the truncated spectrum can hold.
double temperature_from_energy(double energy, const EffectiveHamiltonian& h, Ensemble ensemble, int n_imp,
                               double tolerance = 1e-6);

}  // namespace pps
