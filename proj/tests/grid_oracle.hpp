#pragma once

#include <cmath>
#include <random>
#include <tuple>
#include <vector>

#include "pps/grid.hpp"
#include "pps/lanczos.hpp"

namespace pps::testing {

// First-quantized ground state on the tensor grid of up to three coordinates with pairwise contacts.
struct GridOracle {
  GridPtr grid;
  std::vector<double> mass;
  std::vector<std::tuple<int, int, double>> contacts;
  int pair = -1;      // coordinates (pair, pair+1) projected when >= 0
  double parity = -1; // -1 antisymmetric, +1 symmetric under their exchange

  double ground_energy() const {
    const int m = grid->points;
    const int d = static_cast<int>(mass.size());
    const Eigen::Index n = static_cast<Eigen::Index>(std::pow(m, d));
    std::vector<Mat> h1;
    for (double ms : mass) {
      Mat h = kinetic_matrix(*grid, ms);
      h.diagonal() += harmonic_potential(*grid, ms, 1.0).diagonal();
      h1.push_back(h);
    }
    Vec diag = Vec::Zero(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      int q[3] = {0, 0, 0};
      Eigen::Index r = k;
      for (int a = 0; a < d; ++a) {
        q[a] = r % m;
        r /= m;
      }
      for (auto [a, b, g] : contacts)
        if (q[a] == q[b]) diag(k) += g / grid->dx;
    }
    auto swap = [&](const Vec& x) {
      Vec y(n);
      for (Eigen::Index k = 0; k < n; ++k) {
        int q[3] = {0, 0, 0};
        Eigen::Index r = k;
        for (int a = 0; a < d; ++a) {
          q[a] = r % m;
          r /= m;
        }
        std::swap(q[pair], q[pair + 1]);
        Eigen::Index t = 0;
        for (int a = d - 1; a >= 0; --a) t = t * m + q[a];
        y(k) = x(t);
      }
      return y;
    };
    auto project = [&](const Vec& x) { return pair < 0 ? x : Vec(0.5 * (x + parity * swap(x))); };
    auto apply = [&](const Vec& x0) -> Vec {
      const Vec x = project(x0);
      Vec y = diag.cwiseProduct(x);
      for (int a = 0; a < d; ++a) {
        const Eigen::Index inner = static_cast<Eigen::Index>(std::pow(m, a));
        const Eigen::Index outer = n / (inner * m);
        for (Eigen::Index o = 0; o < outer; ++o) {
          Eigen::Map<const Mat, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>> xs(
              x.data() + o * inner * m, inner, m, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(inner, 1));
          Eigen::Map<Mat, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>> ys(
              y.data() + o * inner * m, inner, m, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(inner, 1));
          ys += xs * h1[a];
        }
      }
      return project(y);
    };
    Vec start(n);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    for (Eigen::Index k = 0; k < n; ++k) start(k) = u(rng);
    return lowest_eigenpair(apply, project(start), 1e-9, 80).value;
  }
};

}  // namespace pps::testing
