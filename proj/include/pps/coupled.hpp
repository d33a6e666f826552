#pragma once

#include <functional>
#include <string>

#include "pps/gp.hpp"
#include "pps/grid.hpp"
#include "pps/params.hpp"

namespace pps {

enum class PulseLabel { pump, dark, probe };

std::string to_string(PulseLabel l);

// Rectangular rf pulse; rabi = 0 for dark segments.
struct PulseSpec {
  PulseLabel label = PulseLabel::dark;
  double rabi = 0.0;
  double detuning = 0.0;
  double duration = 0.0;

  static PulseSpec dark(double duration) { return {PulseLabel::dark, 0.0, 0.0, duration}; }
  void validate() const;
};

// Spin Hamiltonian (rabi/2) sigma_x - (detuning/2) sigma_z per impurity, basis (up, down).
// For two impurities the collective operator on (uu, ud, du, dd).
Mat build_rf_hamiltonian(const PulseSpec& pulse, int n_imp);

// Spinor impurity on its own grid. One particle: (up, down). Two particles:
// amplitudes f_{s1 s2}(x1, x2) for uu, ud, dd; f_du(x1,x2) = sign * f_ud(x2,x1)
// with sign +1 for bosons and -1 for fermions.
struct ImpurityState {
  GridPtr grid;
  int particles = 1;
  Statistics statistics = Statistics::boson;
  CVec up, down;
  CMat uu, ud, dd;

  double exchange_sign() const { return statistics == Statistics::boson ? 1.0 : -1.0; }
  double norm() const;
  double population_up() const;
  double population_down() const;
  Vec density_up() const;
  Vec density_down() const;
  // max over uu, dd of |F - sign F^T|, relative to the total amplitude norm
  double symmetry_residual() const;
};

// Lowest trap orbitals of mass m_I on `grid`, columns normalized with the dx weight.
Mat trap_orbitals(const Grid& grid, double mass, double omega, int count);

// Non-interacting impurity ground state (phi0, or phi0 phi0 / Slater(phi0, phi1)) in one spin state.
ImpurityState impurity_ground_state(const SystemParams& params, GridPtr grid, bool spin_up);

struct CoupledState {
  BathField bath;
  ImpurityState imp;
  double time = 0.0;
};

struct PropagationOptions {
  double dt = 0.005;
  int splitting_order = 4;
  double stride = 0.1;
  double norm_tolerance = 1e-9;
  double symmetry_tolerance = 1e-8;
  bool frozen_bath = false;
  bool observe_start = true;
};

using Observer = std::function<void(const CoupledState&)>;

CoupledState evolve_coupled(CoupledState state, const SystemParams& params, const PulseSpec& pulse,
                            const PropagationOptions& options = {}, const Observer& observer = {});

// Removes the down components and renormalizes the impurity.
CoupledState blast_project(CoupledState state);

// Dark evolution for t_b with loss rate gamma on the down components, then renormalization.
CoupledState apply_blast_dissipative(CoupledState state, const SystemParams& params, double gamma, double t_b,
                                     const PropagationOptions& options = {});

// Mean-field energy pieces.
struct EnergyParts {
  double bath = 0.0;          // GP functional incl. trap and g_bb
  double impurity = 0.0;      // kinetic + trap of all impurity components
  double interspecies = 0.0;  // g_bi int rho_B rho_up
  double intraspecies = 0.0;  // g_ii contact
  double spin = 0.0;          // rf term
  double total() const { return bath + impurity + interspecies + intraspecies + spin; }
};

EnergyParts coupled_energy(const CoupledState& state, const SystemParams& params, const PulseSpec& pulse);

// Bath density carried to the impurity grid.
Vec bath_density_on(const BathField& bath, const Grid& target);

}  // namespace pps
