#include "pps/observables.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace pps {

Vec OneBodyDensityMatrix::occupations() const {
  Eigen::SelfAdjointEigenSolver<CMat> es(grid->dx * rho, Eigen::EigenvaluesOnly);
  return es.eigenvalues().reverse();
}

OneBodyDensityMatrix one_body_density_matrix(const CoupledState& state, Species species) {
  OneBodyDensityMatrix r;
  r.species = species;
  r.time = state.time;
  if (species == Species::bath) {
    if (!state.bath.grid) throw std::invalid_argument("one_body_density_matrix: state has no bath");
    r.grid = state.bath.grid;
    r.rho = state.bath.psi * state.bath.psi.adjoint();
    return r;
  }
  const ImpurityState& s = state.imp;
  if (!s.grid) throw std::invalid_argument("one_body_density_matrix: state has no impurity");
  r.grid = s.grid;
  const bool up = species == Species::up;
  if (s.particles == 1) {
    const CVec& f = up ? s.up : s.down;
    r.rho = f * f.adjoint();
    return r;
  }
  // trace over the partner coordinate and spin
  const double w = 2.0 * s.grid->dx;
  if (up) {
    r.rho = w * (s.uu * s.uu.adjoint() + s.ud * s.ud.adjoint());
  } else {
    r.rho = w * (s.dd * s.dd.adjoint() + s.ud.transpose() * s.ud.conjugate());
  }
  return r;
}

OneBodyDensityMatrix one_body_density_matrix(const FockBasis& basis, const OrbitalSet& orbitals, const CVec& state,
                                             Species species, double time) {
  const CMat d = orbital_density_matrix(basis, state, species);
  const Mat& phi = species == Species::bath ? orbitals.bath : orbitals.imp;
  OneBodyDensityMatrix r;
  r.species = species;
  r.grid = orbitals.grid;
  r.time = time;
  r.rho = phi.cast<cplx>() * d.transpose() * phi.transpose().cast<cplx>();
  return r;
}

CoherenceField coherence_function(const OneBodyDensityMatrix& rho1, double threshold) {
  const Vec n = rho1.density().cwiseMax(0.0);
  const Eigen::Index m = n.size();
  CoherenceField c;
  c.grid = rho1.grid;
  c.time = rho1.time;
  c.support = n.array() > threshold * n.maxCoeff();
  c.g = Mat::Zero(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    if (!c.support(j)) continue;
    for (Eigen::Index i = 0; i < m; ++i)
      if (c.support(i)) c.g(i, j) = std::abs(rho1.rho(i, j)) / std::sqrt(n(i) * n(j));
  }
  return c;
}

Region region_from_density(const Vec& density, double fraction) {
  return density.array() > fraction * density.maxCoeff();
}

TimeSeries<double> coherence_variance_curve(const TimeSeries<Mat>& g1, const Region& region) {
  if (g1.empty()) throw std::invalid_argument("coherence_variance: empty series");
  std::vector<Eigen::Index> idx;
  for (Eigen::Index k = 0; k < region.size(); ++k)
    if (region(k)) idx.push_back(k);
  if (idx.empty()) throw std::invalid_argument("coherence_variance: empty region");
  const Eigen::Index n = static_cast<Eigen::Index>(idx.size());
  auto restrict = [&](const Mat& g) {
    Mat r(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i) r(i, j) = g(idx[i], idx[j]);
    return r;
  };
  // running integrals of g and g^2; the variance is (int g^2 - (int g)^2 / T) / T
  Mat s1 = Mat::Zero(n, n), s2 = Mat::Zero(n, n);
  Mat prev = restrict(g1.values.front());
  TimeSeries<double> out;
  out.push(g1.t.front(), 0.0);
  for (std::size_t k = 1; k < g1.size(); ++k) {
    const Mat cur = restrict(g1.values[k]);
    const double h = 0.5 * (g1.t[k] - g1.t[k - 1]);
    s1 += h * (cur + prev);
    s2 += h * (cur.cwiseAbs2() + prev.cwiseAbs2());
    prev = cur;
    const double span = g1.t[k] - g1.t.front();
    const double v = (s2 - s1.cwiseAbs2() / span).sum() / (span * double(n * n));
    out.push(g1.t[k], std::max(0.0, v));
  }
  return out;
}

double coherence_variance(const TimeSeries<Mat>& g1, const Region& region) {
  return coherence_variance_curve(g1, region).values.back();
}

void CoherenceAccumulator::push(double t, const Mat& g) { push(t, g, Mat::Ones(g.rows(), g.cols())); }

void CoherenceAccumulator::push(const CoherenceField& c) {
  const Vec m = c.support.cast<double>();
  push(c.time, c.g, m * m.transpose());
}

void CoherenceAccumulator::push(double t, const Mat& g, const Mat& w) {
  if (samples_ == 0) {
    t0_ = t;
    s0_ = s1_ = s2_ = Mat::Zero(g.rows(), g.cols());
  } else {
    if (!(t > t_)) throw std::invalid_argument("CoherenceAccumulator: times must increase strictly");
    if (g.rows() != s1_.rows() || g.cols() != s1_.cols()) throw std::invalid_argument("CoherenceAccumulator: shape");
    const double h = 0.5 * (t - t_);
    s0_ += h * (w + prev_w_);
    s1_ += h * (w.cwiseProduct(g) + prev_w_.cwiseProduct(prev_));
    s2_ += h * (w.cwiseProduct(g.cwiseAbs2()) + prev_w_.cwiseProduct(prev_.cwiseAbs2()));
  }
  prev_ = g;
  prev_w_ = w;
  t_ = t;
  ++samples_;
}

void CoherenceAccumulator::checkpoint() {
  if (samples_ == 0) throw std::logic_error("CoherenceAccumulator: checkpoint before any sample");
  if (!checkpoints_.empty() && checkpoints_.back().t == t_) return;
  checkpoints_.push_back({t_, s0_, s1_, s2_});
}

TimeSeries<double> CoherenceAccumulator::curve(const Region& region) const {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index k = 0; k < region.size(); ++k)
    if (region(k)) idx.push_back(k);
  if (idx.empty()) throw std::invalid_argument("coherence_variance: empty region");
  TimeSeries<double> out;
  for (const Integrals& c : checkpoints_) {
    const double span = c.t - t0_;
    double acc = 0.0;
    long pairs = 0;
    if (span > 0.0)
      for (Eigen::Index j : idx)
        for (Eigen::Index i : idx) {
          const double w = c.s0(i, j);
          if (w <= 1e-12 * span) continue;
          const double m = c.s1(i, j) / w;
          acc += c.s2(i, j) / w - m * m;
          ++pairs;
        }
    out.push(c.t, pairs ? std::max(0.0, acc / pairs) : 0.0);
  }
  return out;
}

double CoherenceAccumulator::variance(const Region& region) const {
  CoherenceAccumulator last;
  last.t0_ = t0_;
  last.checkpoints_.push_back({t_, s0_, s1_, s2_});
  return last.curve(region).values.back();
}

double interspecies_energy(const CoupledState& state, const SystemParams& params) {
  return coupled_energy(state, params, PulseSpec::dark(1.0)).interspecies / params.n_imp;
}

double interspecies_energy(const CiHamiltonian& h, const CVec& state, const SystemParams& params) {
  return expectation(h.interspecies, state) / state.squaredNorm() / params.n_imp;
}

double impurity_energy(const CoupledState& state, const SystemParams& params) {
  const EnergyParts e = coupled_energy(state, params, PulseSpec::dark(1.0));
  return e.impurity + e.interspecies + e.intraspecies;
}

double impurity_energy(const CiHamiltonian& h, const CVec& state) {
  return (expectation(h.imp, state) + expectation(h.interspecies, state)) / state.squaredNorm();
}

std::pair<double, double> spin_populations(const CoupledState& state) {
  return {state.imp.population_up(), state.imp.population_down()};
}

std::pair<double, double> spin_populations(const CiHamiltonian& h, const CVec& state, int n_imp) {
  const double sz = expectation(h.spin_z, state) / state.squaredNorm();
  return {0.5 * (n_imp + sz), 0.5 * (n_imp - sz)};
}

TimeSeries<double> structure_factor(const FockBasis& basis, const SystemParams& params, const OrbitalSet& orbitals,
                                    double duration, double stride) {
  if (!(stride > 0) || duration < 0) throw std::invalid_argument("structure_factor: invalid time window");
  SystemParams free = params;
  free.g_bi = 0.0;
  const SpMat h0 = assemble_hamiltonian(basis, free, orbitals).spin_free();
  const CiEigenpair gs = ground_state_lanczos(h0, sector_start(basis, params.n_imp), 1e-11);
  const SpMat hr = assemble_hamiltonian(basis, params, orbitals).spin_free();
  const CVec psi0 = gs.state.cast<cplx>();
  CVec psi = psi0;
  TimeSeries<double> out;
  out.push(0.0, 1.0);
  const int steps = static_cast<int>(std::llround(duration / stride));
  for (int k = 1; k <= steps; ++k) {
    krylov_propagate(hr, psi, stride);
    // |S| does not depend on the reference phase exp(i E0 t)
    out.push(k * stride, std::abs(psi0.dot(psi)));
  }
  return out;
}

TimeSeries<double> structure_factor(const SystemParams& params, GridPtr bath_grid, GridPtr imp_grid, double duration,
                                    const PropagationOptions& options) {
  CoupledState s0;
  s0.bath = relax_ground_state(params, bath_grid).field;
  s0.imp = impurity_ground_state(params, imp_grid, true);
  const double nb = params.n_bath;
  // normalized overlaps, so the propagator's norm drift is not raised to the power N_B
  auto overlap = [](const auto& a, const auto& b) {
    return std::abs((a.conjugate().cwiseProduct(b)).sum()) / (a.norm() * b.norm());
  };
  TimeSeries<double> out;
  evolve_coupled(s0, params, PulseSpec::dark(duration), options, [&](const CoupledState& c) {
    const double bath = std::pow(overlap(s0.bath.psi, c.bath.psi), nb);
    const double imp = c.imp.particles == 1 ? overlap(s0.imp.up, c.imp.up) : overlap(s0.imp.uu, c.imp.uu);
    out.push(c.time, bath * imp);
  });
  return out;
}

}  // namespace pps
