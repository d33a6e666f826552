#pragma once

#include <iosfwd>
#include <map>
#include <vector>

#include <Eigen/Sparse>

#include "pps/coupled.hpp"
#include "pps/grid.hpp"
#include "pps/params.hpp"

namespace pps {

using SpMat = Eigen::SparseMatrix<double>;
using Occupation = std::vector<int>;

// Product basis bath (x) impurity. Impurity modes are 2*orbital + spin with spin 0 = up, 1 = down.
struct FockBasis {
  int n_bath = 0, d_bath = 0;
  int n_imp = 0, d_imp = 0;
  Statistics statistics = Statistics::boson;
  std::vector<Occupation> bath, imp;
  std::map<Occupation, int> bath_index, imp_index;

  Eigen::Index bath_size() const { return static_cast<Eigen::Index>(bath.size()); }
  Eigen::Index imp_size() const { return static_cast<Eigen::Index>(imp.size()); }
  Eigen::Index dimension() const { return bath_size() * imp_size(); }
  Eigen::Index index(Eigen::Index b, Eigen::Index i) const { return b * imp_size() + i; }
  bool imp_fermionic() const { return statistics == Statistics::fermion; }
  int spin_up_count(Eigen::Index i) const;
};

// Throws std::length_error when the dimension exceeds `cap` amplitudes.
FockBasis build_fock_basis(int n_bath, int d_bath, int n_imp, int d_imp, Statistics statistics, double cap = 5e7);

// Orbital columns on a common grid, normalized with the dx weight.
struct OrbitalSet {
  GridPtr grid;
  Mat bath, imp;
};

// Lowest trap eigenfunctions for each species.
OrbitalSet trap_orbital_set(const SystemParams& params, GridPtr grid, int d_bath, int d_imp);

// Hamiltonian pieces on the composite basis; couplings are included.
struct CiHamiltonian {
  SpMat bath;          // one-body + g_BB contact
  SpMat imp;           // one-body of both spin states + g_II contact between up impurities
  SpMat interspecies;  // g_BI contact between bath and up impurities
  SpMat spin_x;        // sum over impurities of sigma_x
  SpMat spin_z;        // N_up - N_down

  SpMat assemble(const PulseSpec& pulse) const;
  SpMat spin_free() const { return bath + imp + interspecies; }
};

CiHamiltonian assemble_hamiltonian(const FockBasis& basis, const SystemParams& params, const OrbitalSet& orbitals);

// Contact integrals dx sum_q a_i a_j b_k b_l at row i + d_a j, column k + d_b l.
Mat contact_integrals(const Mat& a, const Mat& b, double dx);

struct CiEigenpair {
  double energy = 0.0;
  Vec state;
  double residual = 0.0;
  int matvecs = 0;
};

// Lowest eigenpair in the symmetry sector of `start` (all-up impurities if empty).
CiEigenpair ground_state_lanczos(const SpMat& h, const Vec& start = {}, double tol = 1e-9);

// Normalized deterministic start vector supported on states with `n_up` up impurities.
Vec sector_start(const FockBasis& basis, int n_up);

// state <- exp(-i H dt) state.
void krylov_propagate(const SpMat& h, CVec& state, double dt, double tol = 1e-12);

// Squared singular values of the bath|impurity split, descending.
Vec schmidt_decompose(const FockBasis& basis, const CVec& state);


// D_ij = <a_i^dagger a_j> over the orbitals of one species.
CMat orbital_density_matrix(const FockBasis& basis, const CVec& state, Species species);

double expectation(const SpMat& op, const CVec& state);

// sum |A - B| / sum A over matching grids.
double convergence_deviation(const Mat& g1, const Mat& g1_other);

// "row col value" lines, 0-based, preceded by a "# rows cols nnz" header.
void write_sparse_triplets(std::ostream& out, const SpMat& m);
// One line per composite index: bath occupations | impurity occupations.
void write_basis(std::ostream& out, const FockBasis& basis);

}  // namespace pps
