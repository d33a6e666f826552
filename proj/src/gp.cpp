#include "pps/gp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "pps/lanczos.hpp"

namespace pps {

double ThomasFermi::radius() const { return std::sqrt(2.0 * mu / (mass * omega * omega)); }

double ThomasFermi::density(double x) const {
  const double v = mu - 0.5 * mass * omega * omega * x * x;
  return v > 0 ? v / g : 0.0;
}

Vec ThomasFermi::density(const Grid& grid) const {
  Vec r(grid.points);
  for (int q = 0; q < grid.points; ++q) r(q) = density(grid.x(q));
  return r;
}

ThomasFermi thomas_fermi_profile(const SystemParams& params) {
  if (!(params.g_bb > 0)) throw std::invalid_argument("Thomas-Fermi profile requires g_bb > 0");
  ThomasFermi tf;
  tf.g = params.g_bb;
  tf.mass = params.mass_bath;
  tf.omega = params.omega;
  // N = (4 sqrt 2 / 3) mu^{3/2} / (g sqrt(m omega^2))
  const double a = 3.0 * params.n_bath * params.g_bb / (4.0 * std::sqrt(2.0));
  tf.mu = std::pow(a, 2.0 / 3.0) * std::cbrt(params.mass_bath * params.omega * params.omega);
  return tf;
}

namespace {

struct LinearGp {
  const Mat& t;
  Vec v;
  Vec operator()(const Vec& x) const { return t * x + v.cwiseProduct(x); }
};

Vec total_potential(const Grid& grid, const SystemParams& p, const Vec* extra) {
  Vec v = harmonic_potential(grid, p.mass_bath, p.omega).diagonal();
  if (extra) {
    if (extra->size() != grid.points) throw std::invalid_argument("extra potential size does not match grid");
    v += *extra;
  }
  return v;
}

double energy_of(const Mat& t, const Vec& v, double g, const Vec& psi, double dx) {
  const Vec rho = psi.cwiseAbs2();
  return dx * (psi.dot(t * psi) + v.dot(rho) + 0.5 * g * rho.squaredNorm());
}

}  // namespace

double gp_energy(const BathField& field, const SystemParams& params, const Vec* extra_potential) {
  const Grid& grid = *field.grid;
  const Mat& t = cached_kinetic_matrix(grid, params.mass_bath);
  const Vec v = total_potential(grid, params, extra_potential);
  const Vec rho = field.density();
  const double kin = (field.psi.adjoint() * (t * field.psi))(0).real();
  return grid.dx * (kin + v.dot(rho) + 0.5 * params.g_bb * rho.squaredNorm());
}

CVec gp_apply(const BathField& field, const SystemParams& params, const Vec* extra_potential) {
  const Grid& grid = *field.grid;
  const Mat& t = cached_kinetic_matrix(grid, params.mass_bath);
  Vec v = total_potential(grid, params, extra_potential) + params.g_bb * field.density();
  return t * field.psi + (v.cast<cplx>().array() * field.psi.array()).matrix();
}

RelaxResult relax_ground_state(const SystemParams& params, GridPtr grid, const Vec* extra_potential,
                               const RelaxOptions& options) {
  params.validate();
  if (!(options.tol > 0)) throw std::invalid_argument("relaxation tolerance must be positive");
  const Grid& g = *grid;
  const double n = params.n_bath;
  const Mat& t = cached_kinetic_matrix(g, params.mass_bath);
  const Vec v0 = total_potential(g, params, extra_potential);

  Vec psi(g.points);
  const double width = 1.0 / std::sqrt(params.mass_bath * params.omega);
  for (int q = 0; q < g.points; ++q) psi(q) = std::exp(-0.5 * std::pow(g.x(q) / width, 2));
  if (params.g_bb > 0) psi = 1e-3 * psi + thomas_fermi_profile(params).density(g).cwiseSqrt();
  psi *= std::sqrt(n / (psi.squaredNorm() * g.dx));

  auto normalize = [&](Vec& p) { p *= std::sqrt(n / (p.squaredNorm() * g.dx)); };
  double energy = energy_of(t, v0, params.g_bb, psi, g.dx);
  double tau = options.tau_initial;
  double residual = 0.0;
  double tau_cap = options.tau_max;
  double mu = energy / n;

  double change = 0.0;
  std::vector<double> history{energy};
  int it = 0;
  auto finish = [&]() {
    RelaxResult r;
    r.field = BathField{grid, psi.cast<cplx>()};
    r.mu = mu;
    r.energy = energy;
    r.residual = residual;
    r.iterations = it;
    r.energies = history;
    return r;
  };
  for (it = 1; it <= options.max_iterations; ++it) {
    // shifted by the current mu so the Krylov tolerance is relative to O(1) amplitudes
    LinearGp h{t, v0 + params.g_bb * psi.cwiseAbs2() - mu * Vec::Ones(g.points)};
    Vec trial = psi;
    krylov_exp(h, trial, -tau, 1e-12 * psi.norm(), 40);
    normalize(trial);
    const double e_new = energy_of(t, v0, params.g_bb, trial, g.dx);
    if (e_new > energy + 1e-13 * std::abs(energy)) {
      tau *= 0.5;
      if (tau < 1e-7) break;
      continue;
    }
    change = energy - e_new;
    psi = trial;
    energy = e_new;
    history.push_back(energy);
    tau = std::min(tau_cap, tau * 1.25);

    LinearGp hn{t, v0 + params.g_bb * psi.cwiseAbs2()};
    const Vec hpsi = hn(psi);
    mu = psi.dot(hpsi) / psi.squaredNorm();
    const double previous = residual;
    residual = (hpsi - mu * psi).norm() / psi.norm();
    // the density feedback makes large steps oscillate near the fixed point
    if (it > 1 && residual > previous) {
      tau_cap = std::max(0.01, 0.8 * tau_cap);
      tau = std::min(tau, tau_cap);
    }
    if (std::abs(change) < options.tol && residual < 10.0 * options.tol) return finish();
  }
  if (residual < 10.0 * options.tol) return finish();
  throw std::runtime_error("GP relaxation did not converge: residual " + std::to_string(residual) + ", mu " +
                           std::to_string(mu));
}

}  // namespace pps
