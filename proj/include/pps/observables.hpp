#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "pps/ci.hpp"
#include "pps/coupled.hpp"

namespace pps {

// rho(x, x') on grid points; trace with the dx weight is the particle number.
struct OneBodyDensityMatrix {
  Species species = Species::bath;
  GridPtr grid;
  CMat rho;
  double time = 0.0;

  Vec density() const { return rho.diagonal().real(); }
  double trace() const { return grid->dx * density().sum(); }
  double hermiticity_residual() const { return (rho - rho.adjoint()).cwiseAbs().maxCoeff(); }
  // Eigenvalues of dx * rho, descending: natural occupations.
  Vec occupations() const;
};

OneBodyDensityMatrix one_body_density_matrix(const CoupledState& state, Species species);
// CI amplitudes mapped back to the grid through the orbitals.
OneBodyDensityMatrix one_body_density_matrix(const FockBasis& basis, const OrbitalSet& orbitals, const CVec& state,
                                             Species species, double time = 0.0);

// |g1(x, x')| with support where both densities exceed threshold * max density; zero outside.
struct CoherenceField {
  GridPtr grid;
  Mat g;
  Eigen::Array<bool, Eigen::Dynamic, 1> support;
  double time = 0.0;
};

CoherenceField coherence_function(const OneBodyDensityMatrix& rho1, double threshold = 1e-6);

template <typename T>
struct TimeSeries {
  std::vector<double> t;
  std::vector<T> values;

  void push(double time, T value) {
    if (!t.empty() && !(time > t.back())) throw std::invalid_argument("TimeSeries: times must increase strictly");
    t.push_back(time);
    values.push_back(std::move(value));
  }
  std::size_t size() const { return t.size(); }
  bool empty() const { return t.empty(); }
  double span() const { return t.back() - t.front(); }
};

// Trapezoidal average over [t.front(), t.back()].
template <typename T>
T time_average(const TimeSeries<T>& series) {
  if (series.size() < 2) throw std::invalid_argument("time_average: need at least two samples");
  T acc = series.values.front() * 0.0;
  for (std::size_t k = 1; k < series.size(); ++k)
    acc = acc + (series.values[k] + series.values[k - 1]) * (0.5 * (series.t[k] - series.t[k - 1]));
  return acc * (1.0 / series.span());
}

// Restriction to samples with lo <= t <= hi.
template <typename T>
TimeSeries<T> window(const TimeSeries<T>& series, double lo, double hi) {
  TimeSeries<T> out;
  for (std::size_t k = 0; k < series.size(); ++k)
    if (series.t[k] >= lo - 1e-9 && series.t[k] <= hi + 1e-9) out.push(series.t[k], series.values[k]);
  return out;
}

using Region = Eigen::Array<bool, Eigen::Dynamic, 1>;

// {x : rho(x) > fraction * max rho}
Region region_from_density(const Vec& density, double fraction = 1e-3);

// Running variance of |g1| around its running time average, one value per sample time T
// (the first sample has T = 0 and is reported as 0).
TimeSeries<double> coherence_variance_curve(const TimeSeries<Mat>& g1, const Region& region);
double coherence_variance(const TimeSeries<Mat>& g1, const Region& region);

// Streaming form for long runs: running integrals over the whole grid, with checkpoints so the
// region can be fixed after the run. Masked pairs of a CoherenceField drop out of the time
// integrals instead of counting as zero; with full support this equals coherence_variance_curve.
class CoherenceAccumulator {
 public:
  void push(double t, const Mat& g);
  void push(const CoherenceField& c);
  void checkpoint();
  // variance at each checkpoint
  TimeSeries<double> curve(const Region& region) const;
  double variance(const Region& region) const;
  std::size_t samples() const { return samples_; }

 private:
  struct Integrals {
    double t = 0.0;
    Mat s0, s1, s2;
  };
  void push(double t, const Mat& g, const Mat& w);
  double t0_ = 0.0, t_ = 0.0;
  std::size_t samples_ = 0;
  Mat prev_, prev_w_, s0_, s1_, s2_;
  std::vector<Integrals> checkpoints_;
};

// <H_BI> / N_I
double interspecies_energy(const CoupledState& state, const SystemParams& params);
double interspecies_energy(const CiHamiltonian& h, const CVec& state, const SystemParams& params);

// Impurity kinetic + trap + <H_BI> + <H_II>
double impurity_energy(const CoupledState& state, const SystemParams& params);
double impurity_energy(const CiHamiltonian& h, const CVec& state);

std::pair<double, double> spin_populations(const CoupledState& state);
std::pair<double, double> spin_populations(const CiHamiltonian& h, const CVec& state, int n_imp);

// |S(t)| = |<Psi0| exp(i E0 t) exp(-i H_R t) |Psi0>| with Psi0 the g_BI = 0 ground state (impurities up).
TimeSeries<double> structure_factor(const FockBasis& basis, const SystemParams& params, const OrbitalSet& orbitals,
                                    double duration, double stride);
// Hartree-product version: overlap of bath and impurity orbitals, the bath factor raised to N_B.
TimeSeries<double> structure_factor(const SystemParams& params, GridPtr bath_grid, GridPtr imp_grid, double duration,
                                    const PropagationOptions& options = {});

}  // namespace pps
