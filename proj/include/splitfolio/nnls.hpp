#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "splitfolio/error.hpp"

namespace splitfolio {

/// Anything that can compute y = A x and y = A^T x without exposing A.
template <class Op>
concept LinearOperator = requires(const Op& op, std::span<const double> in, std::span<double> out) {
  { op.rows() } -> std::convertible_to<std::size_t>;
  { op.cols() } -> std::convertible_to<std::size_t>;
  op.apply(in, out);
  op.apply_transpose(in, out);
};

class DenseOperator {
 public:
  explicit DenseOperator(const Eigen::MatrixXd& a) : a_(a) {}
  std::size_t rows() const { return static_cast<std::size_t>(a_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(a_.cols()); }
  void apply(std::span<const double> x, std::span<double> y) const {
    Eigen::Map<Eigen::VectorXd>(y.data(), a_.rows()) = a_ * Eigen::Map<const Eigen::VectorXd>(x.data(), a_.cols());
  }
  void apply_transpose(std::span<const double> r, std::span<double> g) const {
    Eigen::Map<Eigen::VectorXd>(g.data(), a_.cols()) =
        a_.transpose() * Eigen::Map<const Eigen::VectorXd>(r.data(), a_.rows());
  }
  double gram(std::size_t i, std::size_t j) const {
    return a_.col(static_cast<Eigen::Index>(i)).dot(a_.col(static_cast<Eigen::Index>(j)));
  }

 private:
  const Eigen::MatrixXd& a_;
};

struct NnlsOptions {
  /// Stationarity target on the gradient A^T (A x - b).
  double kkt_tol = 1e-9;
  /// Variables at or below this value count as being on the bound.
  double zero_tol = 1e-10;
  std::size_t max_outer = 0;  ///< 0 picks 3 * cols + 100
  std::size_t max_cg = 0;     ///< per inner solve; 0 picks max(20 * free, 500)
};

struct NnlsResult {
  std::vector<double> x;
  std::vector<double> gradient;  ///< A^T (A x - b) at the solution
  double residual_norm = 0.0;
  std::size_t outer_iterations = 0;
  bool converged = false;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <LinearOperator Op>
void residual(const Op& op, std::span<const double> b, std::span<const double> x, std::vector<double>& r) {
  r.resize(op.rows());
  op.apply(x, r);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
}

/// CGLS restricted to the free variables, warm-started from `x`. Variables
/// outside `free` stay untouched (they are expected to be zero).
template <LinearOperator Op>
void cgls_free(const Op& op, std::span<const double> b, const std::vector<char>& free, std::vector<double>& x,
               double tol, std::size_t max_iter) {
  const std::size_t n = op.cols();
  std::vector<double> r, s(n), p(n), q(op.rows());
  residual(op, b, x, r);
  auto masked_gradient = [&] {
    op.apply_transpose(r, s);
    double inf = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!free[i]) s[i] = 0.0;
      inf = std::max(inf, std::abs(s[i]));
    }
    return inf;
  };
  double inf = masked_gradient();
  p = s;
  double gamma = dot(s, s);
  for (std::size_t k = 0; k < max_iter && inf > tol && gamma > 0.0; ++k) {
    op.apply(p, q);
    const double qq = dot(q, q);
    if (!(qq > 0.0)) break;
    const double alpha = gamma / qq;
    for (std::size_t i = 0; i < n; ++i) x[i] += alpha * p[i];
    if ((k + 1) % 50 == 0) {
      residual(op, b, x, r);  // keep the recurrence honest
    } else {
      for (std::size_t i = 0; i < r.size(); ++i) r[i] -= alpha * q[i];
    }
    inf = masked_gradient();
    const double gamma_new = dot(s, s);
    const double beta = gamma_new / gamma;
    gamma = gamma_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = s[i] + beta * p[i];
  }
}

}  // namespace detail

/// Operators that can also report entries of A^T A cheaply.
template <class Op>
concept GramOperator = LinearOperator<Op> && requires(const Op& op, std::size_t i) {
  { op.gram(i, i) } -> std::convertible_to<double>;
};

namespace detail {

/// Least squares on the free columns, other entries of `z` set to zero.
/// With Gram entries available the normal equations are factored directly
/// and polished by one refinement step through the operator; otherwise CGLS
/// runs warm-started from `z`.
template <LinearOperator Op>
void solve_free(const Op& op, std::span<const double> b, std::span<const double> atb, const std::vector<char>& free,
                std::vector<double>& z, double tol, std::size_t max_cg) {
  if constexpr (GramOperator<Op>) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < free.size(); ++i)
      if (free[i]) idx.push_back(i);
    const auto k = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd g(k, k);
    Eigen::VectorXd rhs(k);
    for (Eigen::Index a = 0; a < k; ++a) {
      rhs(a) = atb[idx[static_cast<std::size_t>(a)]];
      for (Eigen::Index c = 0; c <= a; ++c) g(a, c) = g(c, a) = op.gram(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(c)]);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    if (llt.info() == Eigen::Success) {
      const Eigen::VectorXd zf = llt.solve(rhs);
      std::fill(z.begin(), z.end(), 0.0);
      for (Eigen::Index a = 0; a < k; ++a) z[idx[static_cast<std::size_t>(a)]] = zf(a);
      std::vector<double> r, grad(op.cols());
      residual(op, b, z, r);
      op.apply_transpose(r, grad);
      Eigen::VectorXd gf(k);
      for (Eigen::Index a = 0; a < k; ++a) gf(a) = grad[idx[static_cast<std::size_t>(a)]];
      const Eigen::VectorXd delta = llt.solve(gf);
      for (Eigen::Index a = 0; a < k; ++a) z[idx[static_cast<std::size_t>(a)]] += delta(a);
      return;
    }
  }
  for (std::size_t i = 0; i < free.size(); ++i)
    if (!free[i]) z[i] = 0.0;
  cgls_free(op, b, free, z, tol, max_cg);
}

}  // namespace detail

/// Active-set non-negative least squares, min ||A x - b|| s.t. x >= 0.
/// Lawson-Hanson: starting from x = 0, the variable with the steepest
/// descent joins the free set, the unconstrained problem on the free set is
/// solved, and the step backs off to the boundary whenever it would leave
/// the feasible region.
template <LinearOperator Op>
NnlsResult nnls(const Op& op, std::span<const double> b, const NnlsOptions& opt = {}) {
  const std::size_t n = op.cols();
  if (b.size() != op.rows())
    throw Error(ErrorKind::DimensionMismatch, "right-hand side has " + std::to_string(b.size()) + " entries, operator has " +
                                                  std::to_string(op.rows()) + " rows");
  NnlsResult res;
  res.x.assign(n, 0.0);
  if (n == 0) {
    res.converged = true;
    res.residual_norm = std::sqrt(detail::dot(b, b));
    return res;
  }
  const double inner_tol = 0.05 * opt.kkt_tol;
  const std::size_t max_outer = opt.max_outer ? opt.max_outer : 3 * n + 100;
  auto cg_budget = [&](const std::vector<char>& free) {
    const auto nf = static_cast<std::size_t>(std::count(free.begin(), free.end(), char{1}));
    return opt.max_cg ? opt.max_cg : std::max<std::size_t>(20 * nf, 500);
  };

  std::vector<double>& x = res.x;
  std::vector<double> atb(n), z(n), r, g(n);
  op.apply_transpose(b, atb);
  std::vector<char> free(n, 0), blocked(n, 0);
  std::size_t outer = 0;
  for (; outer < max_outer; ++outer) {
    detail::residual(op, b, x, r);
    op.apply_transpose(r, g);  // g = A^T (b - A x) = -gradient
    std::size_t enter = n;
    double most = opt.kkt_tol;
    for (std::size_t i = 0; i < n; ++i)
      if (!free[i] && !blocked[i] && g[i] > most) {
        most = g[i];
        enter = i;
      }
    if (enter == n) break;
    free[enter] = 1;

    for (std::size_t guard = 0; guard <= n; ++guard) {
      z = x;
      detail::solve_free(op, b, atb, free, z, inner_tol, cg_budget(free));
      if (enter != n) {
        // A variable that will not move off its bound is blocked until the
        // iterate changes; this rules out cycling on it.
        if (!(z[enter] > 0.0)) {
          free[enter] = 0;
          blocked[enter] = 1;
          break;
        }
        std::fill(blocked.begin(), blocked.end(), char{0});
        enter = n;
      }
      double step = 1.0;
      std::size_t hit = n;
      for (std::size_t i = 0; i < n; ++i)
        if (free[i] && !(z[i] > 0.0)) {
          const double t = x[i] / (x[i] - z[i]);
          if (t < step) {
            step = t;
            hit = i;
          }
        }
      if (hit == n) {
        x = z;
        break;
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (!free[i]) continue;
        x[i] += step * (z[i] - x[i]);
        if (i == hit || !(x[i] > opt.zero_tol)) {
          x[i] = 0.0;
          free[i] = 0;
        }
      }
    }
  }
  res.outer_iterations = outer;

  for (auto& v : x) v = std::max(v, 0.0);
  detail::residual(op, b, x, r);
  res.residual_norm = std::sqrt(detail::dot(r, r));
  op.apply_transpose(r, g);
  res.gradient.resize(n);
  bool ok = true;
  for (std::size_t i = 0; i < n; ++i) {
    res.gradient[i] = -g[i];
    if (res.gradient[i] < -10 * opt.kkt_tol) ok = false;
    if (x[i] > opt.zero_tol && std::abs(res.gradient[i]) > 10 * opt.kkt_tol) ok = false;
  }
  res.converged = ok;
  return res;
}

}  // namespace splitfolio
