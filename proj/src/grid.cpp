#include "pps/grid.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>
#include <numbers>
#include <unordered_map>

#include <fftw3.h>
#include <stdexcept>
#include <string>

namespace pps {

Grid build_sine_dvr(int points, double x_min, double x_max) {
  if (points < 2) throw std::invalid_argument("sine DVR needs at least 2 points, got " + std::to_string(points));
  if (!(x_min < x_max)) throw std::invalid_argument("sine DVR bounds must satisfy x_min < x_max");
  Grid g;
  g.points = points;
  g.x_min = x_min;
  g.x_max = x_max;
  g.dx = (x_max - x_min) / (points + 1);
  g.x.resize(points);
  for (int q = 0; q < points; ++q) g.x(q) = x_min + (q + 1) * g.dx;
  return g;
}

Mat kinetic_matrix(const Grid& grid, double mass) {
  if (!(mass > 0)) throw std::invalid_argument("kinetic_matrix: mass must be positive");
  using std::numbers::pi;
  const int m = grid.points;
  const double n = m + 1;
  const double L = grid.length();
  const double pre = (1.0 / (2.0 * mass)) * pi * pi / (2.0 * L * L);
  Mat t(m, m);
  for (int i = 1; i <= m; ++i) {
    const double si = std::sin(pi * i / n);
    t(i - 1, i - 1) = pre * ((2.0 * n * n + 1.0) / 3.0 - 1.0 / (si * si));
    for (int j = 1; j < i; ++j) {
      const double a = std::sin(pi * (i - j) / (2.0 * n));
      const double b = std::sin(pi * (i + j) / (2.0 * n));
      const double sign = ((i - j) % 2 == 0) ? 1.0 : -1.0;
      const double v = pre * sign * (1.0 / (a * a) - 1.0 / (b * b));
      t(i - 1, j - 1) = v;
      t(j - 1, i - 1) = v;
    }
  }
  return t;
}

Diag harmonic_potential(const Grid& grid, double mass, double omega) {
  if (!(mass > 0) || !(omega > 0)) throw std::invalid_argument("harmonic_potential: mass and omega must be positive");
  Vec v = (0.5 * mass * omega * omega) * grid.x.array().square();
  return Diag(v);
}

Mat sine_transform(const Grid& grid) {
  using std::numbers::pi;
  const int m = grid.points;
  const double n = m + 1;
  const double c = std::sqrt(2.0 / n);
  Mat s(m, m);
  for (int i = 1; i <= m; ++i)
    for (int q = 1; q <= m; ++q) s(i - 1, q - 1) = c * std::sin(pi * double(i) * q / n);
  return s;
}

Vec box_eigenvalues(const Grid& grid, double mass) {
  using std::numbers::pi;
  const double k = pi / grid.length();
  Vec e(grid.points);
  for (int n = 1; n <= grid.points; ++n) e(n - 1) = (n * k) * (n * k) / (2.0 * mass);
  return e;
}

Mat transfer_matrix(const Grid& from, const Grid& to) {
  using std::numbers::pi;
  const int nb = from.points;
  const double L = from.length();
  // basis u_n(x) = sqrt(2/L) sin(n pi (x - a)/L); coefficients c_n = dx sum_q f_q u_n(x_q)
  Mat ua(nb, nb), ub(to.points, nb);
  const double c = std::sqrt(2.0 / L);
  for (int n = 1; n <= nb; ++n) {
    for (int q = 0; q < nb; ++q) ua(n - 1, q) = c * std::sin(n * pi * (from.x(q) - from.x_min) / L);
    for (int q = 0; q < to.points; ++q) {
      const double y = to.x(q);
      ub(q, n - 1) = (y <= from.x_min || y >= from.x_max) ? 0.0 : c * std::sin(n * pi * (y - from.x_min) / L);
    }
  }
  return ub * (from.dx * ua);
}

bool same_grid(const Grid& a, const Grid& b) {
  return a.points == b.points && a.x_min == b.x_min && a.x_max == b.x_max;
}

namespace {

using GridKey = std::tuple<int, double, double>;
GridKey key_of(const Grid& g) { return {g.points, g.x_min, g.x_max}; }

std::mutex cache_mutex;
std::map<std::tuple<GridKey, double>, std::unique_ptr<const Mat>> kinetic_cache;
std::map<std::tuple<GridKey, GridKey>, std::unique_ptr<const Mat>> transfer_cache;

}  // namespace

const Mat& cached_kinetic_matrix(const Grid& grid, double mass) {
  std::lock_guard<std::mutex> lock(cache_mutex);
  auto& slot = kinetic_cache[{key_of(grid), mass}];
  if (!slot) slot = std::make_unique<const Mat>(kinetic_matrix(grid, mass));
  return *slot;
}

const Mat& cached_transfer_matrix(const Grid& from, const Grid& to) {
  std::lock_guard<std::mutex> lock(cache_mutex);
  auto& slot = transfer_cache[{key_of(from), key_of(to)}];
  if (!slot) slot = std::make_unique<const Mat>(transfer_matrix(from, to));
  return *slot;
}

namespace {

// Orthonormal DST-I down each column of complex rows x cols column-major data, in place,
// through a complex DFT of the odd extension (length 2(rows+1)). FFTW's real odd transform is
// several times slower when rows+1 is prime, as for the 600-point grid.
std::mutex plan_mutex;
std::unordered_map<int, fftw_plan> plans;

fftw_plan dst_plan(int rows) {
  std::lock_guard<std::mutex> lock(plan_mutex);
  auto it = plans.find(rows);
  if (it != plans.end()) return it->second;
  const int n = 2 * (rows + 1);
  std::vector<cplx> scratch(n);
  auto* d = reinterpret_cast<fftw_complex*>(scratch.data());
  fftw_plan p = fftw_plan_dft_1d(n, d, d, FFTW_FORWARD, FFTW_MEASURE | FFTW_UNALIGNED);
  if (!p) throw std::runtime_error("FFTW could not plan a sine transform");
  plans.emplace(rows, p);
  return p;
}

void dst_columns(cplx* data, int rows, int cols) {
  static thread_local std::vector<cplx> buf;
  const int n = 2 * (rows + 1);
  buf.assign(n, cplx(0.0));
  const fftw_plan plan = dst_plan(rows);
  auto* d = reinterpret_cast<fftw_complex*>(buf.data());
  const cplx scale(0.0, 0.5 * std::sqrt(2.0 / (rows + 1)));
  for (int c = 0; c < cols; ++c) {
    cplx* x = data + size_t(c) * rows;
    buf[0] = buf[rows + 1] = 0.0;
    for (int k = 1; k <= rows; ++k) {
      buf[k] = x[k - 1];
      buf[n - k] = -x[k - 1];
    }
    fftw_execute_dft(plan, d, d);
    for (int k = 1; k <= rows; ++k) x[k - 1] = scale * buf[k];
  }
}

void dst(double* data, int n) {
  static thread_local std::unordered_map<int, fftw_plan> local;
  auto it = local.find(n);
  if (it == local.end()) {
    std::lock_guard<std::mutex> lock(plan_mutex);
    std::vector<double> scratch(n);
    fftw_plan p = fftw_plan_r2r_1d(n, scratch.data(), scratch.data(), FFTW_RODFT00, FFTW_ESTIMATE | FFTW_UNALIGNED);
    it = local.emplace(n, p).first;
  }
  fftw_execute_r2r(it->second, data, data);
  const double scale = 0.5 * std::sqrt(2.0 / (n + 1));
  for (int k = 0; k < n; ++k) data[k] *= scale;
}

}  // namespace

KineticPropagator::KineticPropagator(const Grid& grid, double mass)
    : s_(sine_transform(grid)), energies_(box_eigenvalues(grid, mass)) {
  if (!(mass > 0)) throw std::invalid_argument("KineticPropagator: mass must be positive");
}

CVec KineticPropagator::phases(double tau) const {
  return (cplx(0, -tau) * energies_.cast<cplx>()).array().exp();
}

CMat KineticPropagator::pair_phases(double tau) const {
  const Eigen::Index m = energies_.size();
  CMat p(m, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < m; ++i) p(i, j) = std::exp(cplx(0, -tau * (energies_(i) + energies_(j))));
  return p;
}

void KineticPropagator::apply(CMat& psi, const CVec& phases) const {
  const int m = size();
  const int k = static_cast<int>(psi.cols());
  dst_columns(psi.data(), m, k);
  psi = phases.asDiagonal() * psi;
  dst_columns(psi.data(), m, k);
}

void KineticPropagator::apply(CVec& psi, const CVec& phases) const {
  dst_columns(psi.data(), size(), 1);
  psi.array() *= phases.array();
  dst_columns(psi.data(), size(), 1);
}

void KineticPropagator::apply_pair(CMat& f, const CMat& pair_phases) const {
  const int m = size();
  auto both = [m](CMat& a) {
    dst_columns(a.data(), m, m);
    a.transposeInPlace();
    dst_columns(a.data(), m, m);
    a.transposeInPlace();
  };
  both(f);
  f.array() *= pair_phases.array();
  both(f);
}

void KineticPropagator::apply_imaginary(Vec& psi, double tau) const {
  dst(psi.data(), size());
  psi.array() *= (-tau * energies_.array()).exp();
  dst(psi.data(), size());
}

}  // namespace pps
