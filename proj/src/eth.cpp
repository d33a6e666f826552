#include "pps/eth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

namespace pps {

namespace {

double log_sum_exp(const Vec& a) {
  if (a.size() == 0) return -std::numeric_limits<double>::infinity();
  const double m = a.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((a.array() - m).exp().sum());
}

double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  if (!std::isfinite(b)) return a;
  return a + std::log1p(std::exp(b - a));
}

void check_inputs(const Vec& energies, double temperature, int min_levels) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (energies.size() < min_levels) throw std::invalid_argument("not enough levels");
}

}  // namespace

std::string to_string(Ensemble e) {
  switch (e) {
    case Ensemble::boltzmann: return "boltzmann";
    case Ensemble::fermi_pair: return "fermi-pair";
    case Ensemble::bose_pair: return "bose-pair";
  }
  return "?";
}

Ensemble ensemble_from_string(const std::string& s) {
  if (s == "boltzmann" || s == "boson" || s == "bosons") return Ensemble::boltzmann;
  if (s == "fermi-pair" || s == "fermion" || s == "fermions") return Ensemble::fermi_pair;
  if (s == "bose-pair") return Ensemble::bose_pair;
  throw std::invalid_argument("unknown ensemble '" + s + "'");
}

EffectiveHamiltonian effective_hamiltonian(GridPtr grid, const Vec& rho_bar_bath, const SystemParams& params,
                                           const EthTruncation& truncation) {
  if (rho_bar_bath.size() != grid->points) throw std::invalid_argument("effective_hamiltonian: density size");
  if (rho_bar_bath.minCoeff() < -1e-12) throw std::invalid_argument("effective_hamiltonian: negative density");
  EffectiveHamiltonian h;
  h.grid = grid;
  h.mass = params.mass_imp;
  h.potential = harmonic_potential(*grid, params.mass_imp, params.omega).diagonal() +
                params.g_bi * rho_bar_bath.cwiseMax(0.0);
  Mat H = kinetic_matrix(*grid, params.mass_imp);
  H.diagonal() += h.potential;
  Eigen::SelfAdjointEigenSolver<Mat> es(H);
  const Vec& e = es.eigenvalues();
  int keep = 0;
  while (keep < std::min<int>(truncation.max_states, e.size()) && e(keep) < truncation.max_energy) ++keep;
  keep = std::max(keep, 1);
  h.energies = e.head(keep);
  h.vectors = es.eigenvectors().leftCols(keep);
  h.discarded = e.tail(e.size() - keep);
  for (int i = 1; i < keep; ++i)
    if (e(i) - e(i - 1) < 1e-9) h.degenerate = true;
  return h;
}

OccupationDistribution boltzmann_occupations(const Vec& energies, double temperature, int n_imp) {
  check_inputs(energies, temperature, 1);
  if (n_imp < 1) throw std::invalid_argument("boltzmann_occupations: n_imp >= 1");
  OccupationDistribution d;
  d.ensemble = Ensemble::boltzmann;
  d.n_imp = n_imp;
  d.temperature = temperature;
  const Vec x = -(energies.array() - energies.minCoeff()) / temperature;
  const double lz = log_sum_exp(x);
  d.n = n_imp * (x.array() - lz).exp();
  d.log_z1 = lz - energies.minCoeff() / temperature;
  return d;
}

OccupationDistribution fermi_two_particle_occupations(const Vec& energies, double temperature) {
  check_inputs(energies, temperature, 2);
  const Eigen::Index m = energies.size();
  const double e0 = energies.minCoeff();
  const Vec x = -(energies.array() - e0) / temperature;
  // log of Z(1) - w_i from prefix and suffix sums
  const double ninf = -std::numeric_limits<double>::infinity();
  Vec pre(m + 1), suf(m + 1);
  pre(0) = ninf;
  suf(m) = ninf;
  for (Eigen::Index i = 0; i < m; ++i) pre(i + 1) = log_add(pre(i), x(i));
  for (Eigen::Index i = m; i-- > 0;) suf(i) = log_add(suf(i + 1), x(i));
  Vec ln(m);
  for (Eigen::Index i = 0; i < m; ++i) ln(i) = x(i) + log_add(pre(i), suf(i + 1));
  const double lz2 = log_sum_exp(ln) - std::log(2.0);
  OccupationDistribution d;
  d.ensemble = Ensemble::fermi_pair;
  d.n_imp = 2;
  d.temperature = temperature;
  d.n = (ln.array() - lz2).exp();
  d.log_z1 = pre(m) - e0 / temperature;
  d.log_z2 = lz2 - 2.0 * e0 / temperature;
  return d;
}

OccupationDistribution bose_two_particle_occupations(const Vec& energies, double temperature) {
  check_inputs(energies, temperature, 1);
  const double e0 = energies.minCoeff();
  const Vec x = -(energies.array() - e0) / temperature;
  const double lz1 = log_sum_exp(x);
  Vec ln(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) ln(i) = x(i) + log_add(lz1, x(i));
  const double lz2 = log_sum_exp(ln) - std::log(2.0);
  OccupationDistribution d;
  d.ensemble = Ensemble::bose_pair;
  d.n_imp = 2;
  d.temperature = temperature;
  d.n = (ln.array() - lz2).exp();
  d.log_z1 = lz1 - e0 / temperature;
  d.log_z2 = lz2 - 2.0 * e0 / temperature;
  return d;
}

OccupationDistribution occupations(const EffectiveHamiltonian& h, Ensemble ensemble, int n_imp, double temperature) {
  OccupationDistribution d;
  switch (ensemble) {
    case Ensemble::boltzmann: d = boltzmann_occupations(h.energies, temperature, n_imp); break;
    case Ensemble::fermi_pair:
      if (n_imp != 2) throw std::invalid_argument("fermi-pair ensemble needs two impurities");
      d = fermi_two_particle_occupations(h.energies, temperature);
      break;
    case Ensemble::bose_pair:
      if (n_imp != 2) throw std::invalid_argument("bose-pair ensemble needs two impurities");
      d = bose_two_particle_occupations(h.energies, temperature);
      break;
  }
  if (h.discarded.size() > 0) {
    const double e0 = h.energies(0);
    const Vec kept = -(h.energies.array() - e0) / temperature;
    const Vec tail = -(h.discarded.array() - e0) / temperature;
    d.discarded = std::exp(log_sum_exp(tail) - log_add(log_sum_exp(kept), log_sum_exp(tail)));
  }
  return d;
}

OneBodyDensityMatrix gibbs_density_matrix(const EffectiveHamiltonian& h, const OccupationDistribution& occ) {
  if (occ.n.size() != h.size()) throw std::invalid_argument("gibbs_density_matrix: occupation count");
  OneBodyDensityMatrix r;
  r.species = Species::up;
  r.grid = h.grid;
  r.rho = (h.vectors * occ.n.asDiagonal() * h.vectors.transpose() / h.grid->dx).cast<cplx>();
  return r;
}

double thermal_energy(const EffectiveHamiltonian& h, Ensemble ensemble, int n_imp, double temperature) {
  return occupations(h, ensemble, n_imp, temperature).n.dot(h.energies);
}

TemperatureFit fit_temperature(const OneBodyDensityMatrix& rho_bar, const EffectiveHamiltonian& h, Ensemble ensemble,
                               int n_imp, const FitOptions& options) {
  if (!same_grid(*rho_bar.grid, *h.grid)) throw std::invalid_argument("fit_temperature: grid mismatch");
  if (!(options.t_min > 0.0 && options.t_max > options.t_min && options.scan_points >= 3))
    throw std::invalid_argument("fit_temperature: bad bracket");
  const double dx = h.grid->dx;
  const Mat target = dx * rho_bar.rho.real();
  auto residual = [&](double t) {
    const OccupationDistribution occ = occupations(h, ensemble, n_imp, t);
    return (target - h.vectors * occ.n.asDiagonal() * h.vectors.transpose()).norm();
  };
  const double la = std::log(options.t_min), lb = std::log(options.t_max);
  auto at = [&](int k) { return std::exp(la + (lb - la) * k / (options.scan_points - 1)); };
  int best = 0;
  double best_r = std::numeric_limits<double>::infinity();
  for (int k = 0; k < options.scan_points; ++k) {
    const double r = residual(at(k));
    if (r < best_r) best_r = r, best = k;
  }
  TemperatureFit fit;
  if (best == 0 || best == options.scan_points - 1) {
    fit.temperature = at(best);
    fit.residual = best_r;
    fit.at_boundary = true;
    fit.warning = "residual minimum not bracketed; reporting the boundary T = " + std::to_string(fit.temperature);
    return fit;
  }
  const double lo = at(best - 1), hi = at(best + 1);
  std::uintmax_t iters = 200;
  // bits so that the relative step is well below tolerance / T
  const int bits = std::clamp(static_cast<int>(-std::log2(options.tolerance / hi)) + 4, 8, 26);
  const auto [t, r] = boost::math::tools::brent_find_minima(residual, lo, hi, bits, iters);
  fit.temperature = t;
  fit.residual = r;
  return fit;
}

double temperature_from_energy(double energy, const EffectiveHamiltonian& h, Ensemble ensemble, int n_imp,
                               double tolerance) {
  const int levels = ensemble == Ensemble::boltzmann ? 1 : 2;
  if (h.size() < levels) throw std::invalid_argument("temperature_from_energy: not enough levels");
  double floor = 0.0;
  switch (ensemble) {
    case Ensemble::boltzmann: floor = n_imp * h.energies(0); break;
    case Ensemble::fermi_pair: floor = h.energies(0) + h.energies(1); break;
    case Ensemble::bose_pair: floor = 2.0 * h.energies(0); break;
  }
  const double scale = std::max(1.0, std::abs(floor));
  if (energy < floor - 1e-12 * scale) throw std::domain_error("temperature_from_energy: energy below zero point");
  if (energy <= floor + 1e-12 * scale) return 0.0;
  auto f = [&](double t) { return thermal_energy(h, ensemble, n_imp, t) - energy; };
  double lo = 1e-3, hi = 1.0;
  while (f(lo) > 0.0 && lo > 1e-8) lo *= 0.1;
  if (f(lo) > 0.0) return lo;
  while (f(hi) < 0.0) {
    hi *= 2.0;
    if (hi > 1e8) throw std::domain_error("temperature_from_energy: energy beyond the truncated spectrum");
  }
  auto tol = [&](double a, double b) { return std::abs(b - a) < tolerance * std::max(1.0, std::abs(a)); };
  const auto [a, b] = boost::math::tools::bisect(f, lo, hi, tol);
  return 0.5 * (a + b);
}

}  // namespace pps
