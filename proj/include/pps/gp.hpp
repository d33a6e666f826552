#pragma once

#include <functional>
#include <vector>

#include "pps/grid.hpp"
#include "pps/params.hpp"

namespace pps {

// Mean-field order parameter; sum |psi|^2 dx = N_B.
struct BathField {
  GridPtr grid;
  CVec psi;

  double norm() const { return psi.squaredNorm() * grid->dx; }
  Vec density() const { return psi.cwiseAbs2(); }
};

struct ThomasFermi {
  double mu = 0.0;
  double g = 0.0;
  double mass = 1.0;
  double omega = 1.0;

  double radius() const;
  double density(double x) const;
  Vec density(const Grid& grid) const;
};

ThomasFermi thomas_fermi_profile(const SystemParams& params);

struct RelaxOptions {
  double tol = 1e-10;
  int max_iterations = 5000;
  double tau_initial = 0.1;
  double tau_max = 0.12;
};

struct RelaxResult {
  BathField field;
  double mu = 0.0;
  double energy = 0.0;
  double residual = 0.0;
  int iterations = 0;
  std::vector<double> energies;  // accepted steps
};

// Imaginary-time relaxation to the stationary GP state; `extra_potential` (grid values) may be null.
RelaxResult relax_ground_state(const SystemParams& params, GridPtr grid, const Vec* extra_potential = nullptr,
                               const RelaxOptions& options = {});

// E[psi] = dx sum psi* T psi + (V + extra)|psi|^2 + g/2 |psi|^4.
double gp_energy(const BathField& field, const SystemParams& params, const Vec* extra_potential = nullptr);
// h_GP psi on the grid.
CVec gp_apply(const BathField& field, const SystemParams& params, const Vec* extra_potential = nullptr);

using PotentialSeries = std::function<Vec(double)>;

struct GpPropagation {
  double dt = 0.005;
  int splitting_order = 4;
  double stride = 0.1;
  double norm_tolerance = 1e-9;
};

// Real-time GP propagation; `observer` receives (t, field) at t=0 and every stride.
BathField propagate_gp(const BathField& state, const SystemParams& params, const PotentialSeries& extra_potential,
                       double duration, const GpPropagation& options = {},
                       const std::function<void(double, const BathField&)>& observer = {});

}  // namespace pps
