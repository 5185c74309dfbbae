#pragma once

// Test-only reference implementations. They follow the textbook definitions
// directly and share no code with the library paths they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// Random weighted circular split system on the identity ordering; returns
/// (arc list as (i, j) with 0 <= i <= j <= n-2, weights).
struct CircularSystem {
  std::size_t n = 0;
  std::vector<std::pair<std::size_t, std::size_t>> arcs;
  std::vector<double> weights;
};

/// Whether positions p and q (0-based, on the identity ordering) fall on
/// opposite sides of arc [i..j].
inline bool separated(std::size_t i, std::size_t j, std::size_t p, std::size_t q) {
  const bool ip = p >= i && p <= j, iq = q >= i && q <= j;
  return ip != iq;
}

/// d(a, b) = sum of weights of splits separating a and b, for taxa placed at
/// position perm_pos[t].
inline Eigen::MatrixXd distances(const CircularSystem& s, const std::vector<std::size_t>& perm_pos) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(s.n), static_cast<Eigen::Index>(s.n));
  for (std::size_t a = 0; a < s.n; ++a)
    for (std::size_t b = 0; b < s.n; ++b) {
      double sum = 0.0;
      for (std::size_t k = 0; k < s.arcs.size(); ++k)
        if (separated(s.arcs[k].first, s.arcs[k].second, perm_pos[a], perm_pos[b])) sum += s.weights[k];
      d(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = sum;
    }
  return d;
}

/// Exhaustive Neighbor-Net selection score for clusters given as node
/// lists, evaluated straight from the definitions.
inline double avg(const Eigen::MatrixXd& d, const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  double s = 0;
  for (auto x : a)
    for (auto y : b) s += d(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
  return s / static_cast<double>(a.size() * b.size());
}

inline std::pair<std::size_t, std::size_t> brute_cluster_pair(const Eigen::MatrixXd& d,
                                                              const std::vector<std::vector<std::size_t>>& clusters) {
  const std::size_t m = clusters.size();
  double best = std::numeric_limits<double>::infinity();
  std::pair<std::size_t, std::size_t> arg{0, 1};
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      double q = (static_cast<double>(m) - 2.0) * avg(d, clusters[i], clusters[j]);
      for (std::size_t k = 0; k < m; ++k) {
        if (k != i) q -= avg(d, clusters[i], clusters[k]);
        if (k != j) q -= avg(d, clusters[j], clusters[k]);
      }
      // ties (including the m = 3 case where every pair scores the same)
      // resolve to the lowest index pair
      if (std::isinf(best) || q < best - 1e-9 * (1.0 + std::abs(best))) {
        best = q;
        arg = {i, j};
      }
    }
  return arg;
}

inline std::pair<std::size_t, std::size_t> brute_node_pair(const Eigen::MatrixXd& d,
                                                           const std::vector<std::vector<std::size_t>>& clusters,
                                                           std::size_t ci, std::size_t cj) {
  // ground set: other clusters whole, members of ci and cj one by one
  std::vector<std::vector<std::size_t>> ground;
  for (std::size_t k = 0; k < clusters.size(); ++k)
    if (k != ci && k != cj) ground.push_back(clusters[k]);
  for (auto x : clusters[ci]) ground.push_back({x});
  for (auto x : clusters[cj]) ground.push_back({x});
  const double mhat = static_cast<double>(ground.size());
  double best = std::numeric_limits<double>::infinity();
  std::pair<std::size_t, std::size_t> arg{};
  std::vector<std::size_t> xs = clusters[ci], ys = clusters[cj];
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  for (auto x : xs)
    for (auto y : ys) {
      double q = (mhat - 2.0) * d(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
      for (const auto& g : ground) {
        q -= avg(d, {x}, g);
        q -= avg(d, {y}, g);
      }
      if (std::isinf(best) || q < best - 1e-9 * (1.0 + std::abs(best))) {
        best = q;
        arg = {x, y};
      }
    }
  return arg;
}

/// Exact (within floating point) dense NNLS by enumerating supports; only for
/// tiny problems.
inline std::vector<double> brute_nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const auto n = a.cols();
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd arg = Eigen::VectorXd::Zero(n);
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index k = 0; k < n; ++k)
      if (mask & (1u << k)) cols.push_back(k);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    if (!cols.empty()) {
      Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(cols.size()));
      for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = a.col(cols[c]);
      const Eigen::VectorXd xs = sub.colPivHouseholderQr().solve(b);
      if ((xs.array() < 0).any()) continue;
      for (std::size_t c = 0; c < cols.size(); ++c) x(cols[c]) = xs(static_cast<Eigen::Index>(c));
    }
    const double r = (a * x - b).squaredNorm();
    if (r < best - 1e-14) {
      best = r;
      arg = x;
    }
  }
  return {arg.data(), arg.data() + n};
}

}  // namespace oracle
