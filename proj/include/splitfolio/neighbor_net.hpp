#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "splitfolio/error.hpp"

namespace splitfolio {

/// Weights of the 3 -> 2 distance reduction. Must be nonnegative and sum to 1.
struct ReductionParams {
  double alpha = 1.0 / 3.0;
  double beta = 1.0 / 3.0;
  double gamma = 1.0 / 3.0;

  void validate() const {
    if (!(alpha >= 0.0 && beta >= 0.0 && gamma >= 0.0))
      throw Error(ErrorKind::InvalidParams, "reduction weights alpha, beta, gamma must be nonnegative");
    if (std::abs(alpha + beta + gamma - 1.0) > 1e-12)
      throw Error(ErrorKind::InvalidParams, "reduction weights must sum to 1 (got " +
                                                std::to_string(alpha + beta + gamma) + ")");
  }
};

/// A permutation of taxon indices read around the circle.
struct CircularOrdering {
  std::vector<std::size_t> order;

  std::size_t size() const { return order.size(); }

  bool is_permutation_of(std::size_t n) const {
    if (order.size() != n) return false;
    std::vector<bool> seen(n, false);
    for (auto t : order) {
      if (t >= n || seen[t]) return false;
      seen[t] = true;
    }
    return true;
  }

  /// position[t] = index of taxon t in `order`.
  std::vector<std::size_t> positions() const {
    std::vector<std::size_t> pos(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
    return pos;
  }

  static CircularOrdering identity(std::size_t n) {
    CircularOrdering o;
    o.order.resize(n);
    std::iota(o.order.begin(), o.order.end(), std::size_t{0});
    return o;
  }
};

/// Equality up to rotation and reflection.
inline bool same_circular_ordering(const CircularOrdering& a, const CircularOrdering& b) {
  const auto n = a.size();
  if (n != b.size()) return false;
  if (n == 0) return true;
  const auto it = std::find(b.order.begin(), b.order.end(), a.order[0]);
  if (it == b.order.end()) return false;
  const auto start = static_cast<std::size_t>(it - b.order.begin());
  bool fwd = true, rev = true;
  for (std::size_t k = 0; k < n; ++k) {
    fwd = fwd && a.order[k] == b.order[(start + k) % n];
    rev = rev && a.order[k] == b.order[(start + n - k) % n];
  }
  return fwd || rev;
}

/// Mean distance between the members of two disjoint clusters.
template <class Dist>
double cluster_distance(std::span<const std::size_t> ci, std::span<const std::size_t> cj, const Dist& d) {
  double sum = 0.0;
  for (auto x : ci)
    for (auto y : cj) sum += d(x, y);
  return sum / static_cast<double>(ci.size() * cj.size());
}

struct MergeEvent {
  enum class Kind { Link, Reduce };
  Kind kind = Kind::Link;
  std::size_t x = 0, y = 0, z = 0;  ///< link: x-y; reduce: y was the middle of x-y-z
  std::size_t u = 0, v = 0;         ///< nodes created by a reduction
};

/// Working state of the agglomeration. Nodes 0..n-1 are taxa; every
/// reduction appends two new nodes. Neighbour links are symmetric and a node
/// holds at most two; clusters are the connected components of the links.
class AgglomState {
 public:
  explicit AgglomState(const Eigen::MatrixXd& d) : taxa_(static_cast<std::size_t>(d.rows())) {
    if (d.rows() != d.cols()) throw Error(ErrorKind::DimensionMismatch, "distance matrix is not square");
    cap_ = std::max<std::size_t>(3 * taxa_, 4);
    dist_.assign(cap_ * cap_, 0.0);
    for (std::size_t i = 0; i < taxa_; ++i)
      for (std::size_t j = 0; j < taxa_; ++j)
        dist_[i * cap_ + j] = d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    nbr_.assign(cap_, {kNone, kNone});
    active_.resize(taxa_);
    std::iota(active_.begin(), active_.end(), std::size_t{0});
    next_ = taxa_;
  }

  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  std::size_t taxon_count() const { return taxa_; }
  const std::vector<std::size_t>& active() const { return active_; }
  const std::vector<MergeEvent>& trace() const { return trace_; }

  double distance(std::size_t a, std::size_t b) const { return dist_[a * cap_ + b]; }
  double operator()(std::size_t a, std::size_t b) const { return distance(a, b); }

  std::size_t degree(std::size_t node) const {
    return static_cast<std::size_t>(nbr_[node][0] != kNone) + static_cast<std::size_t>(nbr_[node][1] != kNone);
  }

  std::vector<std::size_t> neighbors(std::size_t node) const {
    std::vector<std::size_t> out;
    for (auto m : nbr_[node])
      if (m != kNone) out.push_back(m);
    return out;
  }

  /// Clusters ordered by smallest member id; each listed in chain order
  /// starting from the end with the smaller id.
  std::vector<std::vector<std::size_t>> clusters() const {
    std::vector<std::size_t> sorted = active_;
    std::sort(sorted.begin(), sorted.end());
    std::vector<bool> done(cap_, false);
    std::vector<std::vector<std::size_t>> out;
    for (auto s : sorted) {
      if (done[s]) continue;
      // walk to an end of the chain
      std::size_t end = s, prev = kNone;
      std::size_t steps = 0;
      while (true) {
        std::size_t nxt = kNone;
        for (auto m : nbr_[end])
          if (m != kNone && m != prev) nxt = m;
        if (nxt == kNone || nxt == s || ++steps > active_.size()) break;
        prev = end;
        end = nxt;
      }
      std::vector<std::size_t> chain;
      std::size_t cur = end;
      prev = kNone;
      while (cur != kNone && !done[cur]) {
        chain.push_back(cur);
        done[cur] = true;
        std::size_t nxt = kNone;
        for (auto m : nbr_[cur])
          if (m != kNone && m != prev && !done[m]) nxt = m;
        prev = cur;
        cur = nxt;
      }
      if (chain.size() > 1 && chain.back() < chain.front()) std::reverse(chain.begin(), chain.end());
      out.push_back(std::move(chain));
    }
    return out;
  }

  void link(std::size_t x, std::size_t y) {
    if (x == y || degree(x) >= 2 || degree(y) >= 2)
      throw Error(ErrorKind::PreconditionViolation, "cannot link nodes " + std::to_string(x) + " and " + std::to_string(y));
    add_link(x, y);
    add_link(y, x);
    trace_.push_back({MergeEvent::Kind::Link, x, y, 0, 0, 0});
  }

  /// Replace x, y, z (y linked to both x and z) by two nodes u, v. u takes
  /// over x's outward link and v takes over z's.
  std::pair<std::size_t, std::size_t> reduce(std::size_t x, std::size_t y, std::size_t z, const ReductionParams& p) {
    const auto ny = neighbors(y);
    const bool ok = ny.size() == 2 && ((ny[0] == x && ny[1] == z) || (ny[0] == z && ny[1] == x));
    if (!ok)
      throw Error(ErrorKind::PreconditionViolation,
                  "node " + std::to_string(y) + " must have exactly the two neighbours " + std::to_string(x) + " and " +
                      std::to_string(z));
    if (next_ + 2 > cap_) throw Error(ErrorKind::PreconditionViolation, "node capacity exhausted");
    const std::size_t u = next_++, v = next_++;
    for (auto a : active_) {
      if (a == x || a == y || a == z) continue;
      const double du = (p.alpha + p.beta) * distance(x, a) + p.gamma * distance(y, a);
      const double dv = p.alpha * distance(y, a) + (p.beta + p.gamma) * distance(z, a);
      set(u, a, du);
      set(v, a, dv);
    }
    set(u, v, p.alpha * distance(x, y) + p.beta * distance(x, z) + p.gamma * distance(y, z));

    const std::size_t x_out = other_neighbor(x, y);
    const std::size_t z_out = other_neighbor(z, y);
    nbr_[u] = {v, x_out};
    nbr_[v] = {u, z_out};
    if (x_out != kNone) replace_link(x_out, x, u);
    if (z_out != kNone) replace_link(z_out, z, v);
    nbr_[x] = nbr_[y] = nbr_[z] = {kNone, kNone};

    std::erase_if(active_, [&](std::size_t a) { return a == x || a == y || a == z; });
    active_.push_back(u);
    active_.push_back(v);
    trace_.push_back({MergeEvent::Kind::Reduce, x, y, z, u, v});
    return {u, v};
  }

  std::size_t other_neighbor(std::size_t node, std::size_t excluded) const {
    for (auto m : nbr_[node])
      if (m != kNone && m != excluded) return m;
    return kNone;
  }

 private:
  void set(std::size_t a, std::size_t b, double v) { dist_[a * cap_ + b] = dist_[b * cap_ + a] = v; }
  void add_link(std::size_t a, std::size_t b) { (nbr_[a][0] == kNone ? nbr_[a][0] : nbr_[a][1]) = b; }
  void replace_link(std::size_t a, std::size_t from, std::size_t to) {
    for (auto& m : nbr_[a])
      if (m == from) m = to;
  }

  std::size_t taxa_;
  std::size_t cap_;
  std::size_t next_;
  std::vector<double> dist_;
  std::vector<std::array<std::size_t, 2>> nbr_;
  std::vector<std::size_t> active_;
  std::vector<MergeEvent> trace_;
};

namespace detail {
// Relative slack under which two selection scores count as tied, so that the
// lowest-index rule (not rounding noise) decides.
inline double tie_slack(double scale) { return 1e-12 * std::max(1.0, scale); }
}  // namespace detail

struct ClusterPair {
  std::size_t i = 0, j = 0;  ///< indices into AgglomState::clusters(), i < j
  std::vector<std::size_t> first, second;
};

/// Argmin over cluster pairs of
///   Q(Ci, Cj) = (m - 2) d(Ci, Cj) - sum_{k != i} d(Ci, Ck) - sum_{k != j} d(Cj, Ck).
inline ClusterPair select_cluster_pair(const AgglomState& state) {
  const auto cl = state.clusters();
  const std::size_t m = cl.size();
  if (m < 2) throw Error(ErrorKind::PreconditionViolation, "need at least two clusters");
  if (m == 2) return {0, 1, cl[0], cl[1]};
  std::vector<double> cd(m * m, 0.0), sums(m, 0.0);
  double scale = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      const double v = cluster_distance<AgglomState>(cl[i], cl[j], state);
      cd[i * m + j] = cd[j * m + i] = v;
      sums[i] += v;
      sums[j] += v;
      scale = std::max(scale, std::abs(v));
    }
  const double slack = detail::tie_slack(scale * static_cast<double>(m));
  std::size_t bi = 0, bj = 1;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      const double q = static_cast<double>(m - 2) * cd[i * m + j] - sums[i] - sums[j];
      if (q < best - slack) {
        best = q;
        bi = i;
        bj = j;
      }
    }
  return {bi, bj, cl[bi], cl[bj]};
}

/// Within the chosen clusters, argmin of
///   Qhat(x, y) = (mhat - 2) d(x, y) - R(x) - R(y),
/// where R sums over mhat = m + |Ci| + |Cj| - 2 elements: every other cluster
/// as a unit plus each member of Ci and Cj individually.
inline std::pair<std::size_t, std::size_t> select_node_pair(const AgglomState& state, std::span<const std::size_t> ci,
                                                            std::span<const std::size_t> cj) {
  const auto cl = state.clusters();
  const std::size_t m = cl.size();
  const std::size_t mhat = m + ci.size() + cj.size() - 2;
  auto in = [](std::span<const std::size_t> c, std::size_t x) { return std::find(c.begin(), c.end(), x) != c.end(); };
  std::vector<std::vector<std::size_t>> others;
  for (const auto& c : cl)
    if (!in(ci, c.front()) && !in(cj, c.front())) others.push_back(c);

  auto rsum = [&](std::size_t x) {
    double r = 0.0;
    for (const auto& c : others) r += cluster_distance<AgglomState>(std::span<const std::size_t>(&x, 1), c, state);
    for (auto y : ci) r += state.distance(x, y);
    for (auto y : cj) r += state.distance(x, y);
    return r;
  };
  std::vector<std::size_t> xs(ci.begin(), ci.end()), ys(cj.begin(), cj.end());
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  std::vector<double> rx, ry;
  double scale = 0.0;
  for (auto x : xs) rx.push_back(rsum(x));
  for (auto y : ys) ry.push_back(rsum(y));
  for (double r : rx) scale = std::max(scale, std::abs(r));
  for (double r : ry) scale = std::max(scale, std::abs(r));
  const double slack = detail::tie_slack(scale);
  std::pair<std::size_t, std::size_t> best_pair{xs.front(), ys.front()};
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < xs.size(); ++a)
    for (std::size_t b = 0; b < ys.size(); ++b) {
      const double q = static_cast<double>(mhat - 2) * state.distance(xs[a], ys[b]) - rx[a] - ry[b];
      if (q < best - slack) {
        best = q;
        best_pair = {xs[a], ys[b]};
      }
    }
  return best_pair;
}

struct NeighborNetResult {
  CircularOrdering ordering;
  std::vector<MergeEvent> trace;
  std::size_t reductions = 0;
};

/// Link x and y, then collapse any node that now has two neighbours. When
/// both sides were pairs this takes two reductions (a chain of four).
inline void agglomerate(AgglomState& state, std::size_t x, std::size_t y, const ReductionParams& params) {
  state.link(x, y);
  std::size_t a = x, b = y;
  if (state.degree(a) == 2) {
    const auto [u, v] = state.reduce(state.other_neighbor(a, b), a, b, params);
    a = u;
    b = v;
  }
  if (state.degree(b) == 2) state.reduce(a, b, state.other_neighbor(b, a), params);
}

/// Undo the reductions in reverse, splicing x, y, z back in where u, v sit.
inline CircularOrdering expand_ordering(std::vector<std::size_t> cycle, const std::vector<MergeEvent>& trace) {
  for (auto it = trace.rbegin(); it != trace.rend(); ++it) {
    if (it->kind != MergeEvent::Kind::Reduce) continue;
    const auto pu = std::find(cycle.begin(), cycle.end(), it->u);
    if (pu == cycle.end()) throw Error(ErrorKind::PreconditionViolation, "trace node missing during expansion");
    std::rotate(cycle.begin(), pu, cycle.end());
    if (cycle.size() > 1 && cycle[1] == it->v) {
      cycle[0] = it->x;
      cycle[1] = it->y;
      cycle.insert(cycle.begin() + 2, it->z);
    } else if (cycle.back() == it->v) {
      cycle[0] = it->x;
      cycle.back() = it->z;
      cycle.push_back(it->y);
    } else {
      throw Error(ErrorKind::PreconditionViolation, "merged nodes are not adjacent in the cycle");
    }
  }
  return {std::move(cycle)};
}

/// Agglomerate until one cluster remains, then expand the reductions to a
/// circular ordering of the taxa.
inline NeighborNetResult neighbor_net(const Eigen::MatrixXd& d, const ReductionParams& params = {}) {
  params.validate();
  const auto n = static_cast<std::size_t>(d.rows());
  if (d.rows() != d.cols()) throw Error(ErrorKind::DimensionMismatch, "distance matrix is not square");
  NeighborNetResult out;
  if (n <= 3) {
    out.ordering = CircularOrdering::identity(n);
    return out;
  }
  AgglomState state(d);
  while (true) {
    const auto pair = select_cluster_pair(state);
    const auto [x, y] = select_node_pair(state, pair.first, pair.second);
    agglomerate(state, x, y, params);
    if (state.clusters().size() == 1) break;
  }
  const auto final_clusters = state.clusters();
  out.trace = state.trace();
  out.reductions = static_cast<std::size_t>(std::count_if(
      out.trace.begin(), out.trace.end(), [](const MergeEvent& e) { return e.kind == MergeEvent::Kind::Reduce; }));
  out.ordering = expand_ordering(final_clusters.front(), out.trace);
  if (!out.ordering.is_permutation_of(n))
    throw Error(ErrorKind::PreconditionViolation, "expansion did not produce a permutation of the taxa");
  return out;
}

inline CircularOrdering neighbor_net_ordering(const Eigen::MatrixXd& d, const ReductionParams& params = {}) {
  return neighbor_net(d, params).ordering;
}

inline nlohmann::json trace_to_json(const NeighborNetResult& r, const std::vector<std::string>& labels) {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : r.trace) {
    if (e.kind == MergeEvent::Kind::Link)
      events.push_back({{"type", "link"}, {"x", e.x}, {"y", e.y}});
    else
      events.push_back({{"type", "reduce"}, {"x", e.x}, {"y", e.y}, {"z", e.z}, {"u", e.u}, {"v", e.v}});
  }
  nlohmann::json ordering = nlohmann::json::array();
  for (auto t : r.ordering.order) ordering.push_back(t < labels.size() ? labels[t] : std::to_string(t));
  return {{"taxa", labels}, {"events", events}, {"ordering", ordering}, {"reductions", r.reductions}};
}

}  // namespace splitfolio
