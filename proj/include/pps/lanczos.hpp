#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <type_traits>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

namespace pps {

template <typename Vector>
struct Eigenpair {
  double value = 0.0;
  Vector vector;
  double residual = 0.0;
  int matvecs = 0;
};

struct KrylovStats {
  int matvecs = 0;
  int substeps = 1;
  double error_estimate = 0.0;
};

namespace detail {

template <typename Scalar>
double real_part(const Scalar& s) {
  if constexpr (std::is_floating_point_v<Scalar>) return s;
  else return s.real();
}

// Lanczos recursion with full reorthogonalization. Columns of `basis` hold the
// orthonormal Krylov vectors; alpha/beta the tridiagonal projection.
template <typename Vector, typename Apply>
struct LanczosBuilder {
  using Scalar = typename Vector::Scalar;
  using Basis = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  const Apply& apply;
  Basis basis;
  Eigen::VectorXd alpha, beta;
  int steps = 0;
  int matvecs = 0;
  bool invariant = false;

  LanczosBuilder(const Apply& a, const Vector& start, int max_dim) : apply(a) {
    const Eigen::Index n = start.size();
    const int m = static_cast<int>(std::min<Eigen::Index>(max_dim, n));
    basis.resize(n, m + 1);
    alpha.resize(m);
    beta.resize(m);
    basis.col(0) = start / start.norm();
  }

  int capacity() const { return static_cast<int>(alpha.size()); }

  // Adds one Krylov vector; returns false once the space is exhausted.
  bool step() {
    if (invariant || steps >= capacity()) return false;
    const int j = steps;
    Vector w = apply(Vector(basis.col(j)));
    ++matvecs;
    alpha(j) = real_part<Scalar>(basis.col(j).dot(w));
    for (int pass = 0; pass < 2; ++pass) {
      auto view = basis.leftCols(j + 1);
      Vector h = view.adjoint() * w;
      w.noalias() -= view * h;
    }
    beta(j) = w.norm();
    ++steps;
    const double scale = std::abs(alpha(j)) + (j > 0 ? beta(j - 1) : 0.0) + 1e-300;
    if (beta(j) <= 1e-13 * scale) {
      invariant = true;
      beta(j) = 0.0;
      return false;
    }
    basis.col(j + 1) = w / beta(j);
    return true;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> projected() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    Eigen::VectorXd d = alpha.head(steps);
    if (steps == 1) {
      Eigen::MatrixXd t(1, 1);
      t(0, 0) = d(0);
      es.compute(t);
    } else {
      Eigen::VectorXd e = beta.head(steps - 1);
      es.computeFromTridiagonal(d, e, Eigen::ComputeEigenvectors);
    }
    return es;
  }
};

}  // namespace detail

// Lowest eigenpair of a Hermitian operator given only its action, by explicitly
// restarted Lanczos. `apply` maps Vector -> Vector.
template <typename Vector, typename Apply>
Eigenpair<Vector> lowest_eigenpair(const Apply& apply, Vector start, double tol = 1e-10, int krylov_dim = 60,
                                   int max_restarts = 2000) {
  if (start.size() == 0) throw std::invalid_argument("lowest_eigenpair: empty start vector");
  if (start.norm() == 0.0) start.setOnes();
  Eigenpair<Vector> out;
  Vector v = start / start.norm();
  for (int restart = 0; restart < max_restarts; ++restart) {
    detail::LanczosBuilder<Vector, Apply> lz(apply, v, krylov_dim);
    while (lz.step()) {
    }
    out.matvecs += lz.matvecs;
    auto es = lz.projected();
    Eigen::VectorXd y = es.eigenvectors().col(0);
    Vector x = lz.basis.leftCols(lz.steps) * y.cast<typename Vector::Scalar>();
    x /= x.norm();
    Vector hx = apply(x);
    ++out.matvecs;
    const double theta = detail::real_part<typename Vector::Scalar>(x.dot(hx));
    const double res = (hx - theta * x).norm();
    out.value = theta;
    out.vector = x;
    out.residual = res;
    if (res < tol || lz.invariant) return out;
    v = x;
  }
  throw std::runtime_error("lowest_eigenpair: no convergence, residual " + std::to_string(out.residual));
}

// v <- exp(c A) v for Hermitian A, with c = -i tau (real time) or c = -tau (imaginary time).
// The Krylov dimension grows until the a-posteriori error estimate falls below tol;
// otherwise the step is split in halves.
template <typename Vector, typename Apply, typename Coef>
KrylovStats krylov_exp(const Apply& apply, Vector& v, Coef c, double tol = 1e-12, int max_dim = 40) {
  using Scalar = typename Vector::Scalar;
  KrylovStats stats;
  const double nrm = v.norm();
  if (nrm == 0.0) return stats;
  detail::LanczosBuilder<Vector, Apply> lz(apply, v, max_dim);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> y;
  bool done = false;
  while (!done) {
    const bool grew = lz.step();
    const int k = lz.steps;
    auto es = lz.projected();
    const Eigen::MatrixXd& q = es.eigenvectors();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w(k);
    for (int i = 0; i < k; ++i) w(i) = Scalar(std::exp(c * es.eigenvalues()(i)) * q(0, i));
    y = q.template cast<Scalar>() * w;
    const double err = lz.invariant ? 0.0 : nrm * lz.beta(k - 1) * std::abs(y(k - 1));
    stats.error_estimate = err;
    if (err < tol || lz.invariant) done = true;
    else if (!grew || k >= lz.capacity()) break;
  }
  stats.matvecs = lz.matvecs;
  if (done) {
    v = nrm * (lz.basis.leftCols(lz.steps) * y);
    return stats;
  }
  Coef half = c / 2.0;
  KrylovStats a = krylov_exp(apply, v, half, tol / 2, max_dim);
  KrylovStats b = krylov_exp(apply, v, half, tol / 2, max_dim);
  stats.matvecs += a.matvecs + b.matvecs;
  stats.substeps = a.substeps + b.substeps;
  stats.error_estimate = a.error_estimate + b.error_estimate;
  return stats;
}

}  // namespace pps
