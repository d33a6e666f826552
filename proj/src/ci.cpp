#include "pps/ci.hpp"

#include <cmath>
#include <functional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#include <unsupported/Eigen/KroneckerProduct>

#include "pps/lanczos.hpp"

namespace pps {

namespace {

double multiset_count(int n, int d) {
  // C(n + d - 1, n)
  double c = 1.0;
  for (int k = 1; k <= n; ++k) c = c * (d - 1 + k) / k;
  return c;
}

double subset_count(int n, int d) {
  if (n > d) return 0.0;
  double c = 1.0;
  for (int k = 1; k <= n; ++k) c = c * (d - n + k) / k;
  return c;
}

// Occupations in descending lexicographic order; fermionic when max_occ == 1.
void enumerate(int n, int modes, int max_occ, std::vector<Occupation>& out) {
  Occupation occ(modes, 0);
  std::function<void(int, int)> rec = [&](int mode, int left) {
    if (mode == modes - 1) {
      if (left <= max_occ) {
        occ[mode] = left;
        out.push_back(occ);
      }
      return;
    }
    for (int k = std::min(left, max_occ); k >= 0; --k) {
      occ[mode] = k;
      rec(mode + 1, left - k);
    }
    occ[mode] = 0;
  };
  if (modes == 0) {
    if (n == 0) out.push_back(occ);
    return;
  }
  rec(0, n);
}

double annihilate(Occupation& n, int m, bool fermion) {
  if (n[m] == 0) return 0.0;
  double a;
  if (fermion) {
    int parity = 0;
    for (int k = 0; k < m; ++k) parity += n[k];
    a = parity % 2 ? -1.0 : 1.0;
  } else {
    a = std::sqrt(double(n[m]));
  }
  --n[m];
  return a;
}

double create(Occupation& n, int m, bool fermion) {
  if (fermion) {
    if (n[m]) return 0.0;
    int parity = 0;
    for (int k = 0; k < m; ++k) parity += n[k];
    n[m] = 1;
    return parity % 2 ? -1.0 : 1.0;
  }
  ++n[m];
  return std::sqrt(double(n[m]));
}

struct Sector {
  const std::vector<Occupation>& states;
  const std::map<Occupation, int>& index;
  bool fermion;
  int modes;
};

struct Hop {
  int src, dst, p, q;
  double amp;  // <dst| a_p^dagger a_q |src>
};

std::vector<Hop> hops(const Sector& sp, const std::vector<int>& modes) {
  std::vector<Hop> out;
  for (int src = 0; src < int(sp.states.size()); ++src) {
    for (int q : modes) {
      Occupation n = sp.states[src];
      const double a = annihilate(n, q, sp.fermion);
      if (a == 0.0) continue;
      for (int p : modes) {
        Occupation m = n;
        const double c = create(m, p, sp.fermion);
        if (c == 0.0) continue;
        out.push_back({src, sp.index.at(m), p, q, a * c});
      }
    }
  }
  return out;
}

SpMat one_body(const Sector& sp, const std::vector<int>& modes, const std::function<double(int, int)>& h) {
  std::vector<Eigen::Triplet<double>> t;
  for (const Hop& x : hops(sp, modes)) {
    const double v = h(x.p, x.q);
    if (v != 0.0) t.emplace_back(x.dst, x.src, x.amp * v);
  }
  const Eigen::Index n = sp.states.size();
  SpMat m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

// (1/2) sum w(p,q,r,s) a_p^dagger a_q^dagger a_r a_s over the listed modes
SpMat two_body(const Sector& sp, const std::vector<int>& modes, const std::function<double(int, int, int, int)>& w) {
  std::vector<Eigen::Triplet<double>> t;
  for (int src = 0; src < int(sp.states.size()); ++src) {
    for (int s : modes) {
      Occupation n1 = sp.states[src];
      const double a1 = annihilate(n1, s, sp.fermion);
      if (a1 == 0.0) continue;
      for (int r : modes) {
        Occupation n2 = n1;
        const double a2 = annihilate(n2, r, sp.fermion);
        if (a2 == 0.0) continue;
        for (int q : modes) {
          Occupation n3 = n2;
          const double a3 = create(n3, q, sp.fermion);
          if (a3 == 0.0) continue;
          for (int p : modes) {
            Occupation n4 = n3;
            const double a4 = create(n4, p, sp.fermion);
            if (a4 == 0.0) continue;
            const double v = w(p, q, r, s);
            if (v != 0.0) t.emplace_back(sp.index.at(n4), src, 0.5 * v * a1 * a2 * a3 * a4);
          }
        }
      }
    }
  }
  const Eigen::Index n = sp.states.size();
  SpMat m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

std::vector<int> range_modes(int n, int start = 0, int step = 1) {
  std::vector<int> m;
  for (int k = start; k < n; k += step) m.push_back(k);
  return m;
}

SpMat identity(Eigen::Index n) {
  SpMat m(n, n);
  m.setIdentity();
  return m;
}

Mat one_body_matrix(const Mat& phi, const Grid& grid, double mass, double omega) {
  Mat h = cached_kinetic_matrix(grid, mass);
  h.diagonal() += harmonic_potential(grid, mass, omega).diagonal();
  Mat r = grid.dx * phi.transpose() * h * phi;
  return 0.5 * (r + r.transpose());
}

}  // namespace

int FockBasis::spin_up_count(Eigen::Index i) const {
  int c = 0;
  for (int a = 0; a < d_imp; ++a) c += imp[i][2 * a];
  return c;
}

FockBasis build_fock_basis(int n_bath, int d_bath, int n_imp, int d_imp, Statistics statistics, double cap) {
  if (d_bath < 1 || d_imp < 1) throw std::invalid_argument("orbital counts must be at least 1");
  if (n_bath < 0 || n_imp < 0) throw std::invalid_argument("particle numbers must be non-negative");
  const bool fermion = statistics == Statistics::fermion;
  const double nb = multiset_count(n_bath, d_bath);
  const double ni = fermion ? subset_count(n_imp, 2 * d_imp) : multiset_count(n_imp, 2 * d_imp);
  if (ni == 0.0) throw std::invalid_argument("not enough impurity modes for " + std::to_string(n_imp) + " fermions");
  if (nb * ni > cap)
    throw std::length_error("Fock basis dimension " + std::to_string(nb * ni) + " exceeds the cap " + std::to_string(cap));
  FockBasis b;
  b.n_bath = n_bath;
  b.d_bath = d_bath;
  b.n_imp = n_imp;
  b.d_imp = d_imp;
  b.statistics = statistics;
  enumerate(n_bath, d_bath, n_bath, b.bath);
  enumerate(n_imp, 2 * d_imp, fermion ? 1 : n_imp, b.imp);
  for (int k = 0; k < int(b.bath.size()); ++k) b.bath_index[b.bath[k]] = k;
  for (int k = 0; k < int(b.imp.size()); ++k) b.imp_index[b.imp[k]] = k;
  return b;
}

OrbitalSet trap_orbital_set(const SystemParams& params, GridPtr grid, int d_bath, int d_imp) {
  OrbitalSet o;
  o.grid = grid;
  o.bath = trap_orbitals(*grid, params.mass_bath, params.omega, d_bath);
  o.imp = trap_orbitals(*grid, params.mass_imp, params.omega, d_imp);
  return o;
}

Mat contact_integrals(const Mat& a, const Mat& b, double dx) {
  if (a.rows() != b.rows()) throw std::invalid_argument("contact_integrals: orbitals on different grids");
  const Eigen::Index m = a.rows(), da = a.cols(), db = b.cols();
  Mat pa(m, da * da), pb(m, db * db);
  for (Eigen::Index j = 0; j < da; ++j)
    for (Eigen::Index i = 0; i < da; ++i) pa.col(i + da * j) = a.col(i).cwiseProduct(a.col(j));
  for (Eigen::Index l = 0; l < db; ++l)
    for (Eigen::Index k = 0; k < db; ++k) pb.col(k + db * l) = b.col(k).cwiseProduct(b.col(l));
  return dx * pa.transpose() * pb;
}

SpMat CiHamiltonian::assemble(const PulseSpec& pulse) const {
  SpMat h = spin_free();
  if (pulse.rabi != 0.0) h += (0.5 * pulse.rabi) * spin_x;
  if (pulse.detuning != 0.0) h -= (0.5 * pulse.detuning) * spin_z;
  return h;
}

CiHamiltonian assemble_hamiltonian(const FockBasis& basis, const SystemParams& params, const OrbitalSet& orbitals) {
  params.validate(true);
  if (orbitals.bath.cols() != basis.d_bath || orbitals.imp.cols() != basis.d_imp)
    throw std::invalid_argument("orbital set does not match the Fock basis truncation");
  if (basis.n_bath != params.n_bath || basis.n_imp != params.n_imp)
    throw std::invalid_argument("Fock basis particle numbers do not match the parameters");
  const Grid& grid = *orbitals.grid;
  const double dx = grid.dx;
  const int db = basis.d_bath, di = basis.d_imp;
  const Sector bath{basis.bath, basis.bath_index, false, db};
  const Sector imp{basis.imp, basis.imp_index, basis.imp_fermionic(), 2 * di};
  const std::vector<int> bath_modes = range_modes(db);
  const std::vector<int> imp_modes = range_modes(2 * di);
  const std::vector<int> up_modes = range_modes(2 * di, 0, 2);

  const Mat hb = one_body_matrix(orbitals.bath, grid, params.mass_bath, params.omega);
  const Mat hi = one_body_matrix(orbitals.imp, grid, params.mass_imp, params.omega);

  SpMat bath_op = one_body(bath, bath_modes, [&](int p, int q) { return hb(p, q); });
  if (params.g_bb != 0.0 && basis.n_bath > 1) {
    const Mat v = contact_integrals(orbitals.bath, orbitals.bath, dx);
    bath_op += two_body(bath, bath_modes, [&](int p, int q, int r, int s) {
      return params.g_bb * v(p + db * q, r + db * s);
    });
  }

  SpMat imp_op = one_body(imp, imp_modes, [&](int p, int q) { return p % 2 == q % 2 ? hi(p / 2, q / 2) : 0.0; });
  if (params.g_ii != 0.0 && basis.n_imp > 1) {
    const Mat v = contact_integrals(orbitals.imp, orbitals.imp, dx);
    imp_op += two_body(imp, up_modes, [&](int p, int q, int r, int s) {
      return params.g_ii * v(p / 2 + di * (q / 2), r / 2 + di * (s / 2));
    });
  }
  const SpMat sx = one_body(imp, imp_modes, [](int p, int q) { return p / 2 == q / 2 && p != q ? 1.0 : 0.0; });
  const SpMat sz = one_body(imp, imp_modes, [](int p, int q) { return p == q ? (p % 2 ? -1.0 : 1.0) : 0.0; });

  const SpMat ib = identity(basis.bath_size()), ii = identity(basis.imp_size());
  CiHamiltonian h;
  h.bath = Eigen::kroneckerProduct(bath_op, ii);
  h.imp = Eigen::kroneckerProduct(ib, imp_op);
  h.spin_x = Eigen::kroneckerProduct(ib, sx);
  h.spin_z = Eigen::kroneckerProduct(ib, sz);

  const Eigen::Index n = basis.dimension();
  h.interspecies.resize(n, n);
  if (params.g_bi != 0.0 && basis.n_bath > 0 && basis.n_imp > 0) {
    const Mat v = contact_integrals(orbitals.bath, orbitals.imp, dx);
    const std::vector<Hop> bh = hops(bath, bath_modes);
    const std::vector<Hop> ih = hops(imp, up_modes);
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(bh.size() * ih.size());
    for (const Hop& a : bh)
      for (const Hop& c : ih) {
        const double w = params.g_bi * a.amp * c.amp * v(a.p + db * a.q, c.p / 2 + di * (c.q / 2));
        if (w != 0.0) t.emplace_back(basis.index(a.dst, c.dst), basis.index(a.src, c.src), w);
      }
    h.interspecies.setFromTriplets(t.begin(), t.end());
  }
  return h;
}

Vec sector_start(const FockBasis& basis, int n_up) {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  Vec v = Vec::Zero(basis.dimension());
  for (Eigen::Index b = 0; b < basis.bath_size(); ++b)
    for (Eigen::Index i = 0; i < basis.imp_size(); ++i)
      if (basis.spin_up_count(i) == n_up) v(basis.index(b, i)) = u(rng);
  if (v.norm() == 0.0) throw std::invalid_argument("empty spin sector");
  return v / v.norm();
}

CiEigenpair ground_state_lanczos(const SpMat& h, const Vec& start, double tol) {
  if (h.rows() != h.cols()) throw std::invalid_argument("Hamiltonian must be square");
  Vec v = start.size() ? start : Vec::Ones(h.rows());
  if (v.size() != h.rows()) throw std::invalid_argument("start vector size does not match the Hamiltonian");
  // small problems are diagonalized exactly
  if (h.rows() <= 64) {
    Eigen::SelfAdjointEigenSolver<Mat> es{Mat(h)};
    const Mat& q = es.eigenvectors();
    for (Eigen::Index k = 0; k < q.cols(); ++k) {
      if (std::abs(q.col(k).dot(v)) > 1e-8 * v.norm()) {
        CiEigenpair r;
        r.energy = es.eigenvalues()(k);
        r.state = q.col(k);
        r.residual = (h * r.state - r.energy * r.state).norm();
        return r;
      }
    }
  }
  auto apply = [&](const Vec& x) -> Vec { return h * x; };
  const auto e = lowest_eigenpair(apply, v, tol, 60);
  CiEigenpair r;
  r.energy = e.value;
  r.state = e.vector;
  r.residual = e.residual;
  r.matvecs = e.matvecs;
  return r;
}

void krylov_propagate(const SpMat& h, CVec& state, double dt, double tol) {
  auto apply = [&](const CVec& x) -> CVec {
    CVec y(x.size());
    y.real() = h * x.real();
    y.imag() = h * x.imag();
    return y;
  };
  krylov_exp(apply, state, cplx(0.0, -dt), tol, 40);
}

Vec schmidt_decompose(const FockBasis& basis, const CVec& state) {
  if (state.size() != basis.dimension()) throw std::invalid_argument("state size does not match the basis");
  Eigen::Map<const CMat> psi(state.data(), basis.imp_size(), basis.bath_size());
  Eigen::BDCSVD<CMat> svd(psi);
  Vec s = svd.singularValues().cwiseAbs2();
  return s / state.squaredNorm();
}

CMat orbital_density_matrix(const FockBasis& basis, const CVec& state, Species species) {
  if (state.size() != basis.dimension()) throw std::invalid_argument("state size does not match the basis");
  Eigen::Map<const CMat> psi(state.data(), basis.imp_size(), basis.bath_size());
  if (species == Species::bath) {
    const Sector sp{basis.bath, basis.bath_index, false, basis.d_bath};
    CMat d = CMat::Zero(basis.d_bath, basis.d_bath);
    for (const Hop& x : hops(sp, range_modes(basis.d_bath))) d(x.p, x.q) += x.amp * psi.col(x.dst).dot(psi.col(x.src));
    return d;
  }
  const Sector sp{basis.imp, basis.imp_index, basis.imp_fermionic(), 2 * basis.d_imp};
  CMat d = CMat::Zero(basis.d_imp, basis.d_imp);
  const int spin = species == Species::up ? 0 : 1;
  for (const Hop& x : hops(sp, range_modes(2 * basis.d_imp, spin, 2)))
    d(x.p / 2, x.q / 2) += x.amp * psi.row(x.dst).dot(psi.row(x.src));
  return d;
}

double expectation(const SpMat& op, const CVec& state) {
  const Vec re = state.real(), im = state.imag();
  return re.dot(op * re) + im.dot(op * im);
}

double convergence_deviation(const Mat& g1, const Mat& g1_other) {
  if (g1.rows() != g1_other.rows() || g1.cols() != g1_other.cols())
    throw std::invalid_argument("convergence_deviation: coherence matrices on different grids");
  const double denom = g1.sum();
  if (!(denom > 0)) throw std::invalid_argument("convergence_deviation: reference coherence integrates to zero");
  return (g1 - g1_other).cwiseAbs().sum() / denom;
}

void write_sparse_triplets(std::ostream& out, const SpMat& m) {
  out << "# " << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
  out.precision(17);
  for (int k = 0; k < m.outerSize(); ++k)
    for (SpMat::InnerIterator it(m, k); it; ++it) out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

void write_basis(std::ostream& out, const FockBasis& basis) {
  out << "# bath " << basis.n_bath << " in " << basis.d_bath << ", impurity " << basis.n_imp << " in " << basis.d_imp
      << "x2 " << to_string(basis.statistics) << '\n';
  for (Eigen::Index b = 0; b < basis.bath_size(); ++b)
    for (Eigen::Index i = 0; i < basis.imp_size(); ++i) {
      out << basis.index(b, i) << ' ';
      for (int n : basis.bath[b]) out << n;
      out << " | ";
      for (int n : basis.imp[i]) out << n;
      out << '\n';
    }
}

}  // namespace pps
