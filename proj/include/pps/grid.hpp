#pragma once

#include <cmath>
#include <complex>
#include <memory>

#include <Eigen/Core>

namespace pps {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using Diag = Eigen::DiagonalMatrix<double, Eigen::Dynamic>;

// Harmonic units: hbar = 1, lengths in sqrt(hbar/(m omega)), energies in hbar*omega.
struct UnitSystem {
  double hbar = 1.0;
  double mass_ref = 1.0;
  double omega = 1.0;

  double length() const { return std::sqrt(hbar / (mass_ref * omega)); }
  double energy() const { return hbar * omega; }
  double coupling() const { return std::sqrt(hbar * hbar * hbar * omega / mass_ref); }
};

// Uniform grid of interior points of [x_min, x_max]; the walls themselves are excluded.
struct Grid {
  int points = 0;
  double x_min = 0.0;
  double x_max = 0.0;
  double dx = 0.0;
  Vec x;

  double length() const { return x_max - x_min; }
};

using GridPtr = std::shared_ptr<const Grid>;

Grid build_sine_dvr(int points, double x_min, double x_max);

inline GridPtr make_grid(int points, double x_min, double x_max) {
  return std::make_shared<const Grid>(build_sine_dvr(points, x_min, x_max));
}

// Analytic sine-DVR kinetic matrix -(1/2m) d^2/dx^2 with hard walls.
Mat kinetic_matrix(const Grid& grid, double mass);

// Diagonal entries 1/2 m omega^2 x_q^2.
Diag harmonic_potential(const Grid& grid, double mass, double omega);

// S(n,q) = sqrt(2/(M+1)) sin(n pi q/(M+1)); orthogonal and symmetric.
Mat sine_transform(const Grid& grid);

// Box eigenvalues (n pi/L)^2 / 2m, n = 1..M, matching the diagonal of S T S.
Vec box_eigenvalues(const Grid& grid, double mass);

// Spectral interpolation from grid `from` onto the points of grid `to`.
// Exact for functions in the span of the first M sine modes of `from`.
Mat transfer_matrix(const Grid& from, const Grid& to);

bool same_grid(const Grid& a, const Grid& b);

// Process-wide memoized versions of the matrices above; safe to call from workers.
const Mat& cached_kinetic_matrix(const Grid& grid, double mass);
const Mat& cached_transfer_matrix(const Grid& from, const Grid& to);

// Exact kinetic propagation in the sine eigenbasis.
class KineticPropagator {
 public:
  KineticPropagator() = default;
  KineticPropagator(const Grid& grid, double mass);

  int size() const { return static_cast<int>(energies_.size()); }
  const Vec& energies() const { return energies_; }
  const Mat& transform() const { return s_; }

  // Eigenbasis phases exp(-i e_n tau), and exp(-i (e_n + e_m) tau) for pair amplitudes.
  CVec phases(double tau) const;
  CMat pair_phases(double tau) const;

  // psi <- exp(-i T tau) psi, columnwise.
  void apply(CMat& psi, const CVec& phases) const;
  void apply(CVec& psi, const CVec& phases) const;
  // F(x1,x2) <- exp(-i (T1 + T2) tau) F, both coordinates on this grid.
  void apply_pair(CMat& f, const CMat& pair_phases) const;
  // psi <- exp(-T tau) psi for real imaginary-time steps.
  void apply_imaginary(Vec& psi, double tau) const;

 private:
  Mat s_;
  Vec energies_;
};

}  // namespace pps
