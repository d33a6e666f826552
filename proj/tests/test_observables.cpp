#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pps/observables.hpp"

using namespace pps;

namespace {

double hermite0(double x) { return std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * x * x); }
double hermite1(double x) { return std::sqrt(2.0) * x * hermite0(x); }

SystemParams few_body(int nb, int ni, double g_bi, Statistics st = Statistics::boson) {
  SystemParams p;
  p.n_bath = nb;
  p.n_imp = ni;
  p.g_bi = g_bi;
  p.statistics = st;
  return p;
}

void check_physical(const OneBodyDensityMatrix& r, double n) {
  CHECK(r.hermiticity_residual() < 1e-12);
  CHECK(r.trace() == doctest::Approx(n).epsilon(1e-9));
  CHECK(r.occupations().minCoeff() > -1e-10);
}

}  // namespace

TEST_CASE("one-body density matrix of pure and Slater states") {
  auto grid = make_grid(127, -8, 8);
  SystemParams p;
  CoupledState s;
  s.imp = impurity_ground_state(p, grid, true);
  OneBodyDensityMatrix r = one_body_density_matrix(s, Species::up);
  check_physical(r, 1.0);
  Vec occ = r.occupations();
  CHECK(occ(0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(occ(1)) < 1e-10);
  CHECK(one_body_density_matrix(s, Species::down).trace() == 0.0);
  CHECK_THROWS(one_body_density_matrix(s, Species::bath));
  CHECK_THROWS(species_from_string("sideways"));
  CHECK(species_from_string("B") == Species::bath);

  p.n_imp = 2;
  p.statistics = Statistics::fermion;
  s.imp = impurity_ground_state(p, grid, true);
  r = one_body_density_matrix(s, Species::up);
  check_physical(r, 2.0);
  occ = r.occupations();
  CHECK(occ(0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(occ(1) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(occ(2)) < 1e-9);
}

TEST_CASE("CI density matrices: condensate and Slater determinant") {
  auto grid = make_grid(99, -8, 8);
  const SystemParams p = few_body(2, 2, 0.0, Statistics::fermion);
  SystemParams q = p;
  q.g_bb = 0.0;
  const FockBasis basis = build_fock_basis(2, 4, 2, 4, p.statistics);
  const OrbitalSet orb = trap_orbital_set(q, grid, 4, 4);
  const CiHamiltonian h = assemble_hamiltonian(basis, q, orb);
  const CVec gs = ground_state_lanczos(h.spin_free(), sector_start(basis, 2)).state.cast<cplx>();
  const OneBodyDensityMatrix rb = one_body_density_matrix(basis, orb, gs, Species::bath);
  check_physical(rb, 2.0);
  CHECK(rb.occupations()(0) == doctest::Approx(2.0).epsilon(1e-9));
  const OneBodyDensityMatrix ru = one_body_density_matrix(basis, orb, gs, Species::up);
  check_physical(ru, 2.0);
  CHECK(ru.occupations()(1) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(ru.occupations()(2)) < 1e-9);

  // interacting ground state: fragmented bath, still a valid density matrix
  const CiHamiltonian hi = assemble_hamiltonian(basis, few_body(2, 2, 1.5, Statistics::fermion), orb);
  const CVec gi = ground_state_lanczos(hi.spin_free(), sector_start(basis, 2)).state.cast<cplx>();
  const OneBodyDensityMatrix rbi = one_body_density_matrix(basis, orb, gi, Species::bath);
  check_physical(rbi, 2.0);
  CHECK(rbi.occupations()(0) < 2.0 - 1e-6);
}

TEST_CASE("coherence of pure and mixed states") {
  auto grid = make_grid(127, -8, 8);
  const Vec& x = grid->x;
  CVec phi0(x.size()), phi1(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    phi0(k) = hermite0(x(k));
    phi1(k) = hermite1(x(k));
  }
  OneBodyDensityMatrix pure{Species::up, grid, phi1 * phi1.adjoint(), 0.0};
  CoherenceField c = coherence_function(pure);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j)
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (c.support(i) && c.support(j)) worst = std::max(worst, std::abs(c.g(i, j) - 1.0));
  CHECK(worst < 1e-10);
  // the node of phi1 sits on the grid point x = 0 and is masked
  CHECK_FALSE(c.support(63));

  OneBodyDensityMatrix mixed{Species::up, grid, 0.5 * (phi0 * phi0.adjoint() + phi1 * phi1.adjoint()), 0.0};
  c = coherence_function(mixed);
  CHECK(x(71) == doctest::Approx(1.0));
  CHECK(x(55) == doctest::Approx(-1.0));
  // (c^2 - 2c^2) / (c^2 + 2c^2) with c = phi0(1)
  CHECK(c.g(71, 55) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(c.g(71, 71) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.g.maxCoeff() <= 1.0 + 1e-10);
}

TEST_CASE("trapezoidal time averages") {
  TimeSeries<double> s;
  for (int k = 0; k <= 200; ++k) s.push(0.05 * k, 3.0);
  CHECK(time_average(s) == doctest::Approx(3.0).epsilon(1e-14));
  TimeSeries<double> w;
  for (int k = 0; k <= 400; ++k) w.push(0.05 * k, std::sin(2.0 * std::numbers::pi * 0.05 * k / 5.0));
  CHECK(std::abs(time_average(w)) < 1e-12);
  CHECK_THROWS(time_average(TimeSeries<double>{}));
  CHECK_THROWS(s.push(1.0, 0.0));
  CHECK(window(s, 2.0, 4.0).size() == 41);

  // stationary bath under real-time evolution
  auto grid = make_grid(300, -12, 12);
  SystemParams p;
  const BathField b = relax_ground_state(p, grid).field;
  TimeSeries<Vec> dens;
  GpPropagation o;
  o.stride = 0.25;
  propagate_gp(b, p, {}, 2.0, o, [&](double t, const BathField& f) { dens.push(t, f.density()); });
  CHECK((time_average(dens) - b.density()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("coherence variance") {
  const Region all = Region::Constant(4, true);
  TimeSeries<Mat> constant, alternating;
  for (int k = 0; k <= 50; ++k) {
    constant.push(0.1 * k, Mat::Constant(4, 4, 0.7));
    alternating.push(0.1 * k, Mat::Constant(4, 4, k % 2 ? 0.0 : 1.0));
  }
  CHECK(coherence_variance(constant, all) < 1e-14);
  CHECK(coherence_variance(alternating, all) == doctest::Approx(0.25).epsilon(1e-12));
  Region none = Region::Constant(4, false);
  CHECK_THROWS(coherence_variance(constant, none));
  // only the region enters
  Region part = all;
  part(0) = false;
  alternating.values.back()(0, 0) = 5.0;
  CHECK(coherence_variance(alternating, part) == doctest::Approx(0.25).epsilon(1e-12));

  // streaming accumulator with the region chosen afterwards
  TimeSeries<Mat> wavy;
  CoherenceAccumulator acc;
  for (int k = 0; k <= 60; ++k) {
    const double t = 0.05 * k + 0.01 * (k % 3);
    Mat g(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) g(i, j) = 0.5 + 0.4 * std::sin(1.3 * t * (i + 1) + j);
    wavy.push(t, g);
    acc.push(t, g);
    if (k % 10 == 0) acc.checkpoint();
  }
  const TimeSeries<double> full = coherence_variance_curve(wavy, part);
  const TimeSeries<double> streamed = acc.curve(part);
  REQUIRE(streamed.size() == 7);
  for (std::size_t c = 0; c < streamed.size(); ++c) {
    CHECK(streamed.t[c] == full.t[10 * c]);
    CHECK(streamed.values[c] == doctest::Approx(full.values[10 * c]).epsilon(1e-12));
  }
  CHECK(acc.variance(part) == doctest::Approx(full.values.back()).epsilon(1e-12));
  CHECK(acc.variance(part) > 0.01);

  const Vec d = (Vec(5) << 0.0, 1e-4, 0.5, 1.0, 2e-3).finished();
  const Region r = region_from_density(d);
  CHECK(r.cast<int>().sum() == 3);
}

TEST_CASE("interspecies energy against a Thomas-Fermi quadrature") {
  auto grid = make_grid(1199, -12, 12);
  SystemParams p;
  p.g_bi = 1.5;
  const ThomasFermi tf = thomas_fermi_profile(p);
  CoupledState s;
  s.bath.grid = grid;
  s.bath.psi = tf.density(*grid).cwiseSqrt().cast<cplx>();
  s.imp = impurity_ground_state(p, grid, true);
  const double mu = tf.mu, g = p.g_bb, rad = tf.radius();
  // int (mu - x^2/2)/g exp(-x^2)/sqrt(pi) over |x| < R
  const double sp = std::sqrt(std::numbers::pi);
  const double closed = (mu * sp * std::erf(rad) - 0.5 * (0.5 * sp * std::erf(rad) - rad * std::exp(-rad * rad))) / (g * sp);
  MESSAGE("E_BI quadrature " << interspecies_energy(s, p) << ", closed form " << p.g_bi * closed);
  CHECK(interspecies_energy(s, p) == doctest::Approx(p.g_bi * closed).epsilon(1e-4));
  p.g_bi = 0.0;
  CHECK(interspecies_energy(s, p) == 0.0);
}

TEST_CASE("spin populations and impurity energy") {
  auto grid = make_grid(99, -8, 8);
  SystemParams p;
  CoupledState s;
  s.imp = impurity_ground_state(p, grid, false);
  auto [u, d] = spin_populations(s);
  CHECK(u == 0.0);
  CHECK(d == doctest::Approx(1.0).epsilon(1e-12));
  s.imp.up = s.imp.down / std::sqrt(2.0);
  s.imp.down = s.imp.up;
  std::tie(u, d) = spin_populations(s);
  CHECK(u == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(u + d == doctest::Approx(1.0).epsilon(1e-10));

  s.imp = impurity_ground_state(p, grid, true);
  CHECK(impurity_energy(s, p) == doctest::Approx(0.5).epsilon(1e-10));
  p.n_imp = 2;
  p.statistics = Statistics::fermion;
  s.imp = impurity_ground_state(p, grid, true);
  CHECK(impurity_energy(s, p) == doctest::Approx(2.0).epsilon(1e-10));
  std::tie(u, d) = spin_populations(s);
  CHECK(u + d == doctest::Approx(2.0).epsilon(1e-10));

  // CI: total minus bath-only terms is the impurity energy
  const SystemParams q = few_body(3, 2, 1.2, Statistics::fermion);
  const FockBasis basis = build_fock_basis(3, 4, 2, 4, q.statistics);
  const OrbitalSet orb = trap_orbital_set(q, grid, 4, 4);
  const CiHamiltonian h = assemble_hamiltonian(basis, q, orb);
  CVec psi = ground_state_lanczos(h.spin_free(), sector_start(basis, 2)).state.cast<cplx>();
  krylov_propagate(h.assemble({PulseLabel::pump, 3.0, 1.0, 1.0}), psi, 0.4);
  const double direct = expectation(h.spin_free(), psi) - expectation(h.bath, psi);
  CHECK(std::abs(impurity_energy(h, psi) - direct) < 1e-10);
  std::tie(u, d) = spin_populations(h, psi, 2);
  CHECK(u + d == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(d > 0.01);
}

TEST_CASE("structure factor bounds") {
  auto grid = make_grid(80, -8, 8);
  SystemParams p = few_body(3, 1, 0.0);
  const FockBasis basis = build_fock_basis(3, 5, 1, 8, p.statistics);
  const OrbitalSet orb = trap_orbital_set(p, grid, 5, 8);
  TimeSeries<double> s = structure_factor(basis, p, orb, 5.0, 0.1);
  CHECK(s.values.front() == 1.0);
  for (double v : s.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-10));

  p.g_bi = 1.5;
  s = structure_factor(basis, p, orb, 10.0, 0.05);
  double lo = 1.0, hi = 0.0;
  for (double v : s.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  MESSAGE("CI |S(t)| minimum over 10 periods: " << lo);
  CHECK(hi <= 1.0 + 1e-10);
  CHECK(lo < 0.95);

  // mean-field N_B = 100
  auto bath_grid = make_grid(300, -15, 15);
  SystemParams mf;
  mf.g_bi = 1.5;
  PropagationOptions o;
  o.stride = 0.05;
  const TimeSeries<double> m = structure_factor(mf, bath_grid, bath_grid, 10.0, o);
  lo = 1.0;
  hi = 0.0;
  for (double v : m.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  MESSAGE("mean-field |S(t)| minimum over 10 periods: " << lo);
  CHECK(m.values.front() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(hi <= 1.0 + 1e-10);
}

TEST_CASE("mean-field snapshots are fully coherent and physical") {
  auto grid = make_grid(300, -15, 15);
  SystemParams p;
  p.g_bi = 1.5;
  CoupledState s;
  s.bath = relax_ground_state(p, grid).field;
  s.imp = impurity_ground_state(p, grid, true);
  PropagationOptions o;
  o.stride = 1.0;
  double worst = 0.0;
  evolve_coupled(s, p, PulseSpec::dark(5.0), o, [&](const CoupledState& c) {
    for (Species sp : {Species::bath, Species::up}) {
      const OneBodyDensityMatrix r = one_body_density_matrix(c, sp);
      check_physical(r, sp == Species::bath ? 100.0 : 1.0);
      const CoherenceField g = coherence_function(r);
      for (Eigen::Index j = 0; j < g.g.cols(); ++j)
        for (Eigen::Index i = 0; i < g.g.rows(); ++i)
          if (g.support(i) && g.support(j)) worst = std::max(worst, std::abs(g.g(i, j) - 1.0));
    }
  });
  CHECK(worst < 1e-10);
}

TEST_CASE("time averages are insensitive to the stride") {
  auto grid = make_grid(300, -15, 15);
  SystemParams p;
  p.g_bi = 1.5;
  CoupledState s;
  s.bath = relax_ground_state(p, grid).field;
  s.imp = impurity_ground_state(p, grid, true);
  double avg[2];
  int k = 0;
  for (double stride : {0.1, 0.05}) {
    TimeSeries<double> e;
    PropagationOptions o;
    o.stride = stride;
    evolve_coupled(s, p, PulseSpec::dark(10.0), o, [&](const CoupledState& c) { e.push(c.time, interspecies_energy(c, p)); });
    avg[k++] = time_average(e);
  }
  MESSAGE("E_BI average stride 0.1: " << avg[0] << ", 0.05: " << avg[1]);
  CHECK(std::abs(avg[0] / avg[1] - 1.0) < 0.01);
}
