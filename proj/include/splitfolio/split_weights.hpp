#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "splitfolio/error.hpp"
#include "splitfolio/neighbor_net.hpp"
#include "splitfolio/nnls.hpp"

namespace splitfolio {

/// A circular split: the arc of ordering positions i..j (0 <= i <= j <= n-2)
/// against the rest. The last position is never inside an arc, so every
/// split has exactly one representation.
struct Split {
  std::size_t i = 0;
  std::size_t j = 0;
  double weight = 0.0;

  bool contains_position(std::size_t p) const { return p >= i && p <= j; }
  std::size_t size() const { return j - i + 1; }
  friend bool operator==(const Split&, const Split&) = default;
};

inline std::size_t pair_count(std::size_t n) { return n * (n - 1) / 2; }

/// Row offset of the block that starts at `a` in the upper-triangle walk.
/// Arc (i, j) and position pair (a, b) share the same packing:
///   arc (i, j)    -> offset(i) + (j - i)
///   pair (a < b)  -> offset(a) + (b - a - 1)
inline std::size_t tri_offset(std::size_t a, std::size_t n) { return a * (n - 1) - a * (a - (a > 0 ? 1 : 0)) / 2; }

inline std::size_t arc_index(std::size_t i, std::size_t j, std::size_t n) { return tri_offset(i, n) + (j - i); }

inline std::size_t pair_index(std::size_t a, std::size_t b, std::size_t n) {
  if (a > b) std::swap(a, b);
  return tri_offset(a, n) + (b - a - 1);
}

/// All n(n-1)/2 circular splits of an ordering of n taxa, weights unset.
inline std::vector<Split> circular_splits(std::size_t n) {
  if (n < 2) throw Error(ErrorKind::PreconditionViolation, "need at least two taxa for a split");
  std::vector<Split> out;
  out.reserve(pair_count(n));
  for (std::size_t i = 0; i + 1 < n; ++i)
    for (std::size_t j = i; j + 1 < n; ++j) out.push_back({i, j, 0.0});
  return out;
}

inline std::vector<Split> circular_splits(const CircularOrdering& ordering) { return circular_splits(ordering.size()); }

/// Taxon indices on the arc side of `s`.
inline std::vector<std::size_t> split_members(const Split& s, const CircularOrdering& ordering) {
  return {ordering.order.begin() + static_cast<std::ptrdiff_t>(s.i), ordering.order.begin() + static_cast<std::ptrdiff_t>(s.j + 1)};
}

/// Upper-triangle vector of a symmetric matrix, rows (a, b) with a < b in
/// index order.
inline std::vector<double> pair_vector(const Eigen::MatrixXd& d) {
  const auto n = static_cast<std::size_t>(d.rows());
  std::vector<double> v;
  if (n < 2) return v;
  v.reserve(pair_count(n));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) v.push_back(d(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
  return v;
}

/// Dense 0/1 splits matrix. Rows are taxon pairs (a < b by taxon index),
/// columns follow `splits`; an entry is 1 when the split separates the pair.
inline Eigen::MatrixXd splits_matrix(std::span<const Split> splits, const CircularOrdering& ordering) {
  const std::size_t n = ordering.size();
  const auto pos = ordering.positions();
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(pair_count(n)), static_cast<Eigen::Index>(splits.size()));
  for (std::size_t k = 0; k < splits.size(); ++k) {
    std::size_t row = 0;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b, ++row)
        if (splits[k].contains_position(pos[a]) != splits[k].contains_position(pos[b]))
          x(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(k)) = 1.0;
  }
  return x;
}

inline Eigen::MatrixXd splits_matrix(std::span<const Split> splits, std::size_t n) {
  return splits_matrix(splits, CircularOrdering::identity(n));
}

/// Matrix-free splits matrix of the full circular system, in ordering
/// position space: columns are arcs packed by arc_index, rows are position
/// pairs packed by pair_index. Both products cost O(n^2).
///
/// The forward product uses the four-point identity
///   d(a,b) = d(a,b-1) + d(a+1,b) - d(a+1,b-1) - 2 w[a+1..b-1];
/// the transpose grows each arc one position at a time.
class CircularSplitOperator {
 public:
  explicit CircularSplitOperator(std::size_t n) : n_(n) {
    if (n < 2) throw Error(ErrorKind::PreconditionViolation, "need at least two taxa");
    arcs_.resize(pair_count(n));
    for (std::size_t i = 0; i + 1 < n; ++i)
      for (std::size_t j = i; j + 1 < n; ++j) arcs_[arc_index(i, j, n)] = {i, j};
  }

  std::size_t taxa() const { return n_; }
  std::size_t rows() const { return pair_count(n_); }
  std::size_t cols() const { return pair_count(n_); }

  void apply(std::span<const double> w, std::span<double> d) const {
    const std::size_t n = n_;
    auto W = [&](std::size_t i, std::size_t j) { return w[arc_index(i, j, n)]; };
    auto D = [&](std::size_t a, std::size_t b) -> double& { return d[pair_index(a, b, n)]; };
    // adjacent pairs: every split cutting between a and a+1
    std::vector<double> ending(n, 0.0), starting(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i)
      for (std::size_t j = i; j + 1 < n; ++j) {
        const double v = W(i, j);
        ending[j] += v;
        starting[i] += v;
      }
    for (std::size_t a = 0; a + 1 < n; ++a) D(a, a + 1) = ending[a] + starting[a + 1];
    for (std::size_t gap = 2; gap < n; ++gap)
      for (std::size_t a = 0; a + gap < n; ++a) {
        const std::size_t b = a + gap;
        const double inner = gap == 2 ? 0.0 : D(a + 1, b - 1);
        D(a, b) = D(a, b - 1) + D(a + 1, b) - inner - 2.0 * W(a + 1, b - 1);
      }
  }

  void apply_transpose(std::span<const double> r, std::span<double> g) const {
    const std::size_t n = n_;
    auto R = [&](std::size_t a, std::size_t b) { return r[pair_index(a, b, n)]; };
    std::vector<double> row_sum(n, 0.0), col(n, 0.0);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) {
        const double v = R(a, b);
        row_sum[a] += v;
        row_sum[b] += v;
      }
    for (std::size_t i = n - 1; i-- > 0;) {
      for (std::size_t j = i + 1; j < n; ++j) col[j] += R(i, j);  // col[j] = sum_{a=i}^{j-1} r(a, j)
      double acc = row_sum[i];
      g[arc_index(i, i, n)] = acc;
      for (std::size_t j = i + 1; j + 1 < n; ++j) {
        acc += row_sum[j] - 2.0 * col[j];
        g[arc_index(i, j, n)] = acc;
      }
    }
  }

  /// (X^T X)(s, t): the number of pairs separated by both arcs,
  /// |A & B| |~A & ~B| + |A & ~B| |~A & B|.
  double gram(std::size_t s, std::size_t t) const {
    const auto [i1, j1] = arcs_[s];
    const auto [i2, j2] = arcs_[t];
    const std::size_t a = j1 - i1 + 1, b = j2 - i2 + 1;
    const std::size_t lo = std::max(i1, i2), hi = std::min(j1, j2);
    const std::size_t both = hi >= lo ? hi - lo + 1 : 0;
    return static_cast<double>(both * (n_ - a - b + both) + (a - both) * (b - both));
  }

 private:
  std::size_t n_;
  std::vector<std::pair<std::size_t, std::size_t>> arcs_;
};

/// A weighted circular split system over labelled taxa. `observed` keeps the
/// fitted distances (taxon-pair order) so the fit can be recomputed.
struct SplitSystem {
  std::vector<std::string> taxa;
  CircularOrdering ordering;
  std::vector<Split> splits;
  double fit = 0.0;  ///< ||X w - d||_2 against `observed`
  std::vector<double> observed;

  std::size_t taxon_count() const { return taxa.size(); }
};

/// Model distances X w in taxon-pair order.
inline std::vector<double> split_distances(const SplitSystem& s) {
  const std::size_t n = s.ordering.size();
  if (n < 2) return {};
  std::vector<double> w(pair_count(n), 0.0);
  for (const auto& sp : s.splits) w[arc_index(sp.i, sp.j, n)] += sp.weight;
  std::vector<double> dpos(pair_count(n));
  CircularSplitOperator(n).apply(w, dpos);
  const auto pos = s.ordering.positions();
  std::vector<double> out(pair_count(n));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) out[pair_index(a, b, n)] = dpos[pair_index(pos[a], pos[b], n)];
  return out;
}

inline double residual_norm(const SplitSystem& s) {
  if (s.observed.empty()) return 0.0;
  const auto model = split_distances(s);
  double ss = 0.0;
  for (std::size_t k = 0; k < model.size(); ++k) ss += (model[k] - s.observed[k]) * (model[k] - s.observed[k]);
  return std::sqrt(ss);
}

/// Non-negative least squares weights for a dense splits matrix.
inline std::vector<double> estimate_weights(const Eigen::MatrixXd& x, std::span<const double> dvec,
                                            const NnlsOptions& opt = {}) {
  if (static_cast<std::size_t>(x.rows()) != dvec.size())
    throw Error(ErrorKind::DimensionMismatch, "distance vector has " + std::to_string(dvec.size()) +
                                                  " entries, splits matrix has " + std::to_string(x.rows()) + " rows");
  DenseOperator op(x);
  return nnls(op, dvec, opt).x;
}

struct WeightFit {
  std::vector<double> weights;  ///< by arc_index
  NnlsResult solver;
};

/// NNLS over all circular splits of `ordering`, matrix-free.
inline WeightFit estimate_circular_weights(const Eigen::MatrixXd& d, const CircularOrdering& ordering,
                                           const NnlsOptions& opt = {}) {
  const std::size_t n = ordering.size();
  if (static_cast<std::size_t>(d.rows()) != n || d.rows() != d.cols())
    throw Error(ErrorKind::DimensionMismatch, "distance matrix does not match the ordering");
  std::vector<double> dpos(pair_count(n));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      dpos[pair_index(a, b, n)] = d(static_cast<Eigen::Index>(ordering.order[a]), static_cast<Eigen::Index>(ordering.order[b]));
  CircularSplitOperator op(n);
  WeightFit fit;
  fit.solver = nnls(op, dpos, opt);
  fit.weights = fit.solver.x;
  return fit;
}

/// Ordering + weights in one step: the split system of a distance matrix
/// on a given ordering, keeping every split (zero weights included).
inline SplitSystem fit_split_system(const Eigen::MatrixXd& d, const std::vector<std::string>& labels,
                                    const CircularOrdering& ordering, const NnlsOptions& opt = {}) {
  const std::size_t n = ordering.size();
  if (!ordering.is_permutation_of(static_cast<std::size_t>(d.rows())))
    throw Error(ErrorKind::DimensionMismatch, "ordering is not a permutation of the taxa");
  SplitSystem s;
  s.taxa = labels;
  s.ordering = ordering;
  s.observed = pair_vector(d);
  if (n < 2) return s;
  const auto fit = estimate_circular_weights(d, ordering, opt);
  s.splits = circular_splits(n);
  for (auto& sp : s.splits) sp.weight = fit.weights[arc_index(sp.i, sp.j, n)];
  s.fit = fit.solver.residual_norm;
  return s;
}

/// Drop splits with weight <= threshold and recompute the fit.
inline SplitSystem prune(const SplitSystem& system, double threshold = 1e-8) {
  if (threshold < 0.0) throw Error(ErrorKind::InvalidParams, "prune threshold must be >= 0");
  SplitSystem out = system;
  std::erase_if(out.splits, [&](const Split& s) { return s.weight <= threshold; });
  out.fit = residual_norm(out);
  return out;
}

inline nlohmann::json split_system_to_json(const SplitSystem& s) {
  nlohmann::json splits = nlohmann::json::array();
  for (const auto& sp : s.splits) splits.push_back({{"i", sp.i}, {"j", sp.j}, {"weight", sp.weight}});
  return {{"schema", "splitfolio.split-system/1"},
          {"taxa", s.taxa},
          {"ordering", s.ordering.order},
          {"splits", splits},
          {"fit", s.fit},
          {"observed", s.observed}};
}

inline SplitSystem split_system_from_json(const nlohmann::json& j) {
  SplitSystem s;
  try {
    s.taxa = j.at("taxa").get<std::vector<std::string>>();
    s.ordering.order = j.at("ordering").get<std::vector<std::size_t>>();
    for (const auto& e : j.at("splits")) s.splits.push_back({e.at("i").get<std::size_t>(), e.at("j").get<std::size_t>(), e.at("weight").get<double>()});
    s.fit = j.at("fit").get<double>();
    if (j.contains("observed")) s.observed = j.at("observed").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("split system JSON: ") + e.what());
  }
  const std::size_t n = s.taxa.size();
  if (!s.ordering.is_permutation_of(n)) throw Error(ErrorKind::ParseError, "split system ordering is not a permutation");
  for (const auto& sp : s.splits)
    if (sp.i > sp.j || sp.j + 1 >= n || sp.weight < 0.0)
      throw Error(ErrorKind::ParseError, "split (" + std::to_string(sp.i) + "," + std::to_string(sp.j) + ") is not a valid arc");
  if (!s.observed.empty() && s.observed.size() != pair_count(n))
    throw Error(ErrorKind::DimensionMismatch, "observed distances do not match the taxon count");
  return s;
}

}  // namespace splitfolio
