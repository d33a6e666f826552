#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "pps/ci.hpp"
#include "pps/lanczos.hpp"
#include "grid_oracle.hpp"

using namespace pps;
using pps::testing::GridOracle;

namespace {


double ci_ground(const SystemParams& p, GridPtr grid, int d_bath, int d_imp) {
  const FockBasis basis = build_fock_basis(p.n_bath, d_bath, p.n_imp, d_imp, p.statistics);
  const CiHamiltonian h = assemble_hamiltonian(basis, p, trap_orbital_set(p, grid, d_bath, d_imp));
  return ground_state_lanczos(h.spin_free(), sector_start(basis, p.n_imp)).energy;
}

SystemParams ci_params(int nb, int ni, double g_bb, double g_bi, Statistics st = Statistics::boson) {
  SystemParams p;
  p.n_bath = nb;
  p.n_imp = ni;
  p.g_bb = g_bb;
  p.g_bi = g_bi;
  p.statistics = st;
  return p;
}

// One bath atom and one up impurity, symmetric under swapping their orbitals.
Vec exchange_symmetric_start(const FockBasis& basis) {
  const int d = basis.d_bath;
  Vec v = Vec::Zero(basis.dimension());
  for (int a = 0; a < d; ++a)
    for (int o = 0; o < d; ++o) {
      Occupation ob(d, 0), oi(2 * d, 0);
      ob[a] = 1;
      oi[2 * o] = 1;
      v(basis.index(basis.bath_index.at(ob), basis.imp_index.at(oi))) = 1.0 / (1 + a + o);
    }
  return v / v.norm();
}

}  // namespace

TEST_CASE("Fock basis dimensions") {
  CHECK(build_fock_basis(2, 2, 1, 1, Statistics::boson).bath_size() == 3);
  CHECK(build_fock_basis(1, 1, 2, 2, Statistics::fermion).imp_size() == 6);
  CHECK(build_fock_basis(1, 1, 2, 2, Statistics::boson).imp_size() == 10);
  CHECK(build_fock_basis(10, 3, 1, 1, Statistics::boson).bath_size() == 66);
  CHECK(build_fock_basis(0, 3, 1, 2, Statistics::boson).dimension() == 4);
  CHECK_THROWS_AS(build_fock_basis(10, 10, 2, 10, Statistics::boson, 1e4), std::length_error);
  CHECK_THROWS(build_fock_basis(1, 0, 1, 1, Statistics::boson));
  CHECK_THROWS(build_fock_basis(1, 1, 3, 1, Statistics::fermion));

  const FockBasis b = build_fock_basis(3, 4, 2, 3, Statistics::fermion);
  for (const auto& occ : b.imp) {
    int total = 0;
    for (int n : occ) {
      CHECK(n <= 1);
      total += n;
    }
    CHECK(total == 2);
  }
  for (Eigen::Index k = 0; k < b.bath_size(); ++k) CHECK(b.bath_index.at(b.bath[k]) == k);
}

TEST_CASE("noninteracting Hamiltonian is diagonal with oscillator sums") {
  auto grid = make_grid(120, -10, 10);
  SystemParams p = ci_params(2, 2, 0.0, 0.0, Statistics::fermion);
  const FockBasis basis = build_fock_basis(2, 4, 2, 3, p.statistics);
  const CiHamiltonian h = assemble_hamiltonian(basis, p, trap_orbital_set(p, grid, 4, 3));
  const Mat dense = Mat(h.spin_free());
  CHECK((dense - Mat(dense.diagonal().asDiagonal())).cwiseAbs().maxCoeff() < 1e-10);
  for (Eigen::Index b = 0; b < basis.bath_size(); ++b)
    for (Eigen::Index i = 0; i < basis.imp_size(); ++i) {
      double e = 0.0;
      for (int a = 0; a < 4; ++a) e += basis.bath[b][a] * (a + 0.5);
      for (int m = 0; m < 6; ++m) e += basis.imp[i][m] * (m / 2 + 0.5);
      CHECK(dense(basis.index(b, i), basis.index(b, i)) == doctest::Approx(e).epsilon(1e-8));
    }
  const auto gs = ground_state_lanczos(h.spin_free());
  // two bath atoms and an up/down impurity pair all in the lowest orbital
  CHECK(gs.energy == doctest::Approx(1.0 + 1.0).epsilon(1e-8));
}

TEST_CASE("single impurity in the rf field has the two-level spectrum") {
  auto grid = make_grid(80, -8, 8);
  SystemParams p = ci_params(0, 1, 0.0, 0.0);
  const FockBasis basis = build_fock_basis(0, 1, 1, 1, p.statistics);
  const CiHamiltonian h = assemble_hamiltonian(basis, p, trap_orbital_set(p, grid, 1, 1));
  const PulseSpec pulse{PulseLabel::pump, 3.0, 4.0, 1.0};
  Eigen::SelfAdjointEigenSolver<Mat> es{Mat(h.assemble(pulse))};
  CHECK(es.eigenvalues()(0) == doctest::Approx(0.5 - 2.5).epsilon(1e-8));
  CHECK(es.eigenvalues()(1) == doctest::Approx(0.5 + 2.5).epsilon(1e-8));
}

TEST_CASE("CI in the complete grid basis equals the first-quantized grid solution") {
  struct Case {
    int nb, ni;
    Statistics st;
    double g_bb, g_bi, g_ii;
    int m;
  };
  const Case cases[] = {
      {1, 1, Statistics::boson, 0.5, 1.5, 0.0, 24},   {1, 1, Statistics::boson, 0.5, -0.8, 0.0, 24},
      {2, 1, Statistics::boson, 0.5, 1.5, 0.0, 14},   {1, 2, Statistics::boson, 0.5, 1.5, 0.7, 14},
      {1, 2, Statistics::fermion, 0.5, 1.5, 0.0, 14}, {0, 2, Statistics::boson, 0.5, 0.0, 2.0, 24},
  };
  for (const Case& c : cases) {
    auto grid = make_grid(c.m, -5, 5);
    SystemParams p = ci_params(c.nb, c.ni, c.g_bb, c.g_bi, c.st);
    p.g_ii = c.g_ii;
    const double ci = ci_ground(p, grid, std::max(1, c.m * (c.nb > 0)), c.m);

    GridOracle o{grid, {}, {}, -1};
    for (int k = 0; k < c.nb; ++k) o.mass.push_back(1.0);
    for (int k = 0; k < c.ni; ++k) o.mass.push_back(1.0);
    if (c.nb == 2) o.contacts.emplace_back(0, 1, c.g_bb);
    for (int b = 0; b < c.nb; ++b)
      for (int i = 0; i < c.ni; ++i) o.contacts.emplace_back(b, c.nb + i, c.g_bi);
    if (c.ni == 2) {
      if (c.st == Statistics::fermion) o.pair = c.nb;
      else o.contacts.emplace_back(c.nb, c.nb + 1, c.g_ii);
    }
    const double grid_e = o.ground_energy();
    MESSAGE("N_B=" << c.nb << " N_I=" << c.ni << " " << to_string(c.st) << ": CI " << ci << ", grid " << grid_e);
    CHECK(std::abs(ci / grid_e - 1.0) < 1e-8);
  }
}

TEST_CASE("hard-core limit of one bath atom and one impurity") {
  // equal masses and traps: the exchange-symmetric sector holds the interacting ground state,
  // the antisymmetric one sits at exactly 2 and is blind to the contact
  auto grid = make_grid(36, -6, 6);
  const SystemParams p = ci_params(1, 1, 0.5, 100.0);
  const FockBasis basis = build_fock_basis(1, 36, 1, 36, p.statistics);
  const CiHamiltonian h = assemble_hamiltonian(basis, p, trap_orbital_set(p, grid, 36, 36));
  const double ci = ground_state_lanczos(h.spin_free(), exchange_symmetric_start(basis)).energy;
  GridOracle o{grid, {1.0, 1.0}, {{0, 1, 100.0}}, 0, 1.0};
  const double grid_e = o.ground_energy();
  MESSAGE("g=100 symmetric sector: CI " << ci << ", grid " << grid_e);
  CHECK(std::abs(ci / grid_e - 1.0) < 1e-8);
  // the 36-point lattice sits ~2% above the fermionized value 2
  CHECK(std::abs(ci / 2.0 - 1.0) < 0.025);
  CHECK(ci > ci_ground(ci_params(1, 1, 0.5, 10.0), grid, 36, 36));
  GridOracle antisym{grid, {1.0, 1.0}, {{0, 1, 100.0}}, 0, -1.0};
  CHECK(antisym.ground_energy() == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("Lanczos agrees with dense diagonalization") {
  auto grid = make_grid(80, -8, 8);
  const SystemParams p = ci_params(1, 1, 0.5, 0.5);
  const FockBasis basis = build_fock_basis(1, 8, 1, 8, p.statistics);
  const CiHamiltonian h = assemble_hamiltonian(basis, p, trap_orbital_set(p, grid, 8, 8));
  const SpMat hs = h.spin_free();
  const Mat dense(hs);
  CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() == 0.0);

  const auto global = ground_state_lanczos(hs);
  Eigen::SelfAdjointEigenSolver<Mat> es(dense);
  CHECK(std::abs(global.energy - es.eigenvalues()(0)) < 1e-10);
  CHECK(global.residual < 1e-9);

  std::vector<Eigen::Index> up;
  for (Eigen::Index b = 0; b < basis.bath_size(); ++b)
    for (Eigen::Index i = 0; i < basis.imp_size(); ++i)
      if (basis.spin_up_count(i) == 1) up.push_back(basis.index(b, i));
  Mat block(up.size(), up.size());
  for (size_t a = 0; a < up.size(); ++a)
    for (size_t b = 0; b < up.size(); ++b) block(a, b) = dense(up[a], up[b]);
  Eigen::SelfAdjointEigenSolver<Mat> eb(block);
  const auto sector = ground_state_lanczos(hs, sector_start(basis, 1));
  CHECK(std::abs(sector.energy - eb.eigenvalues()(0)) < 1e-10);
  CHECK(sector.residual < 1e-9);
}

TEST_CASE("attractive coupling lowers the ground energy monotonically") {
  auto grid = make_grid(80, -8, 8);
  double previous = 1e300;
  for (double g : {0.0, -0.3, -0.6, -1.0, -1.5}) {
    const double e = ci_ground(ci_params(2, 1, 0.5, g), grid, 5, 5);
    CHECK(e < previous);
    previous = e;
  }
}

TEST_CASE("enlarging the orbital basis never raises the ground energy") {
  auto grid = make_grid(80, -8, 8);
  const SystemParams p = ci_params(2, 1, 0.5, 1.5);
  double previous = 1e300;
  for (int d = 2; d <= 7; ++d) {
    const double e = ci_ground(p, grid, d, d);
    CHECK(e <= previous + 1e-12);
    previous = e;
  }
}

TEST_CASE("Krylov propagation") {
  SUBCASE("eigenstate acquires only a phase") {
    auto grid = make_grid(60, -7, 7);
    const SystemParams p = ci_params(2, 1, 0.5, 1.5);
    const FockBasis basis = build_fock_basis(2, 4, 1, 4, p.statistics);
    const SpMat h = assemble_hamiltonian(basis, p, trap_orbital_set(p, grid, 4, 4)).spin_free();
    const auto gs = ground_state_lanczos(h, sector_start(basis, 1), 1e-12);
    CVec v = gs.state.cast<cplx>();
    const CVec v0 = v;
    krylov_propagate(h, v, 0.01);
    CHECK((v - std::exp(cplx(0, -gs.energy * 0.01)) * v0).norm() < 1e-10);
  }
  SUBCASE("matches the dense exponential of a random Hermitian matrix") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    Mat a(50, 50);
    for (auto& x : a.reshaped()) x = n(rng);
    const Mat hd = 0.5 * (a + a.transpose());
    const SpMat h = hd.sparseView();
    CVec v(50);
    for (auto& x : v) x = cplx(n(rng), n(rng));
    v.normalize();
    Eigen::SelfAdjointEigenSolver<Mat> es(hd);
    const double t = 0.3;
    const CMat q = es.eigenvectors().cast<cplx>();
    const CVec phase = (cplx(0, -t) * es.eigenvalues().cast<cplx>()).array().exp();
    const CVec exact = q * phase.asDiagonal() * q.adjoint() * v;
    krylov_propagate(h, v, t);
    CHECK((v - exact).norm() < 1e-10);
    CHECK(std::abs(v.norm() - 1.0) < 1e-12);
  }
  SUBCASE("energy and norm stay constant over many steps") {
    auto grid = make_grid(40, -6, 6);
    const SystemParams p = ci_params(1, 1, 0.5, 1.0);
    const FockBasis basis = build_fock_basis(1, 3, 1, 3, p.statistics);
    const CiHamiltonian hh = assemble_hamiltonian(basis, p, trap_orbital_set(p, grid, 3, 3));
    const SpMat h = hh.assemble({PulseLabel::pump, 2.0, 1.0, 1.0});
    CVec v = sector_start(basis, 0).cast<cplx>();
    const double e0 = expectation(h, v);
    double worst_e = 0.0, worst_n = 0.0;
    for (int k = 0; k < 10000; ++k) {
      krylov_propagate(h, v, 0.01);
      worst_e = std::max(worst_e, std::abs(expectation(h, v) - e0));
      worst_n = std::max(worst_n, std::abs(v.norm() - 1.0));
    }
    CHECK(worst_e < 1e-10);
    CHECK(worst_n < 1e-10);
  }
}

TEST_CASE("dark evolution conserves the impurity spin") {
  auto grid = make_grid(60, -7, 7);
  const SystemParams p = ci_params(2, 2, 0.5, 1.5, Statistics::fermion);
  const FockBasis basis = build_fock_basis(2, 3, 2, 3, p.statistics);
  const CiHamiltonian h = assemble_hamiltonian(basis, p, trap_orbital_set(p, grid, 3, 3));
  // tilted spins by a short pulse, then dark
  CVec v = sector_start(basis, 0).cast<cplx>();
  const SpMat pump = h.assemble({PulseLabel::pump, 5.0, 0.0, 1.0});
  for (int k = 0; k < 20; ++k) krylov_propagate(pump, v, 0.01);
  const SpMat dark = h.spin_free();
  const double sz0 = expectation(h.spin_z, v);
  CHECK(std::abs(sz0 + 2.0) > 0.1);
  double worst = 0.0;
  for (int k = 0; k < 500; ++k) {
    krylov_propagate(dark, v, 0.01);
    worst = std::max(worst, std::abs(expectation(h.spin_z, v) - sz0));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("Schmidt decomposition") {
  SUBCASE("product state") {
    const FockBasis basis = build_fock_basis(1, 3, 1, 2, Statistics::boson);
    CVec v = CVec::Zero(basis.dimension());
    CVec a(3), b(4);
    a << 1, 2, 3;
    b << cplx(0, 1), 1, 0, 2;
    for (Eigen::Index x = 0; x < 3; ++x)
      for (Eigen::Index y = 0; y < 4; ++y) v(basis.index(x, y)) = a(x) * b(y);
    v.normalize();
    const Vec l = schmidt_decompose(basis, v);
    CHECK(l(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(l.tail(l.size() - 1).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("maximally entangled pair") {
    const FockBasis basis = build_fock_basis(1, 2, 1, 1, Statistics::boson);
    CVec v = CVec::Zero(4);
    v(basis.index(0, 0)) = 1.0 / std::sqrt(2.0);
    v(basis.index(1, 1)) = 1.0 / std::sqrt(2.0);
    const Vec l = schmidt_decompose(basis, v);
    CHECK(l(0) == doctest::Approx(0.5));
    CHECK(l(1) == doctest::Approx(0.5));
  }
  SUBCASE("interacting ground state is entangled") {
    auto grid = make_grid(80, -8, 8);
    const SystemParams p = ci_params(2, 1, 0.5, 1.5);
    const FockBasis basis = build_fock_basis(2, 5, 1, 5, p.statistics);
    const CiHamiltonian h = assemble_hamiltonian(basis, p, trap_orbital_set(p, grid, 5, 5));
    const auto gs = ground_state_lanczos(h.spin_free(), sector_start(basis, 1));
    const Vec l = schmidt_decompose(basis, gs.state.cast<cplx>());
    CHECK(l.sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (Eigen::Index k = 1; k < l.size(); ++k) CHECK(l(k) <= l(k - 1));
    MESSAGE("lambda_2 = " << l(1));
    CHECK(l(1) > 1e-3);
  }
}

TEST_CASE("orbital density matrices") {
  auto grid = make_grid(80, -8, 8);
  SUBCASE("noninteracting bath condenses") {
    const SystemParams p = ci_params(2, 1, 0.0, 0.0);
    const FockBasis basis = build_fock_basis(2, 4, 1, 3, p.statistics);
    const CiHamiltonian h = assemble_hamiltonian(basis, p, trap_orbital_set(p, grid, 4, 3));
    const auto gs = ground_state_lanczos(h.spin_free(), sector_start(basis, 1));
    const CMat d = orbital_density_matrix(basis, gs.state.cast<cplx>(), Species::bath);
    Eigen::SelfAdjointEigenSolver<CMat> es(d);
    CHECK(es.eigenvalues()(3) == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(es.eigenvalues().head(3).cwiseAbs().maxCoeff() < 1e-10);
    const CMat up = orbital_density_matrix(basis, gs.state.cast<cplx>(), Species::up);
    CHECK(up.trace().real() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(orbital_density_matrix(basis, gs.state.cast<cplx>(), Species::down).norm() < 1e-12);
  }
  SUBCASE("interacting bath is depleted but keeps its trace") {
    const SystemParams p = ci_params(3, 1, 2.0, 1.0);
    const FockBasis basis = build_fock_basis(3, 4, 1, 3, p.statistics);
    const CiHamiltonian h = assemble_hamiltonian(basis, p, trap_orbital_set(p, grid, 4, 3));
    const auto gs = ground_state_lanczos(h.spin_free(), sector_start(basis, 1));
    const CMat d = orbital_density_matrix(basis, gs.state.cast<cplx>(), Species::bath);
    CHECK(d.trace().real() == doctest::Approx(3.0).epsilon(1e-10));
    CHECK((d - d.adjoint()).norm() < 1e-12);
    Eigen::SelfAdjointEigenSolver<CMat> es(d);
    CHECK(es.eigenvalues()(3) < 3.0 - 1e-4);
    CHECK(es.eigenvalues()(0) > -1e-12);
  }
}

TEST_CASE("convergence deviation") {
  const Mat a = Mat::Ones(5, 5);
  CHECK(convergence_deviation(a, a) == 0.0);
  CHECK(convergence_deviation(a, 0.9 * a) == doctest::Approx(0.1));
  CHECK_THROWS(convergence_deviation(a, Mat::Ones(4, 5)));
}

TEST_CASE("sparse triplet and basis dumps") {
  auto grid = make_grid(40, -6, 6);
  const SystemParams p = ci_params(1, 1, 0.5, 1.0);
  const FockBasis basis = build_fock_basis(1, 2, 1, 2, p.statistics);
  const SpMat h = assemble_hamiltonian(basis, p, trap_orbital_set(p, grid, 2, 2)).spin_free();
  std::ostringstream out;
  write_sparse_triplets(out, h);
  std::istringstream in(out.str());
  std::string hash;
  Eigen::Index rows, cols, nnz;
  in >> hash >> rows >> cols >> nnz;
  CHECK(rows == h.rows());
  CHECK(nnz == h.nonZeros());
  Mat back = Mat::Zero(rows, cols);
  Eigen::Index r, c;
  double v;
  while (in >> r >> c >> v) back(r, c) = v;
  CHECK((back - Mat(h)).cwiseAbs().maxCoeff() == 0.0);

  std::ostringstream b;
  write_basis(b, basis);
  const std::string text = b.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == basis.dimension() + 1);
}
