#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "splitfolio/error.hpp"
#include "splitfolio/neighbor_net.hpp"
#include "splitfolio/split_weights.hpp"

namespace splitfolio {

/// Clusters as arcs of a circular ordering. Cut b sits just before ordering
/// position b; arc c runs from cuts[c] up to (not including) cuts[c+1],
/// wrapping round, and carries cluster id labels[c]. A valid assignment has
/// each id 1..k on exactly one contiguous run of arcs.
struct ClusterAssignment {
  std::vector<std::string> taxa;
  CircularOrdering ordering;
  std::vector<std::size_t> cuts;
  std::vector<std::size_t> labels;
  std::string graph_hash;

  std::size_t arc_count() const { return cuts.size(); }
  std::size_t cluster_count() const { return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()); }

  /// Ordering positions covered by arc c, clockwise.
  std::vector<std::size_t> arc_positions(std::size_t c) const {
    const std::size_t n = ordering.size(), k = cuts.size();
    const std::size_t start = cuts[c], end = cuts[(c + 1) % k];
    const std::size_t len = k == 1 ? n : (end + n - start) % n;
    std::vector<std::size_t> out(len);
    for (std::size_t q = 0; q < len; ++q) out[q] = (start + q) % n;
    return out;
  }
};

/// Every id 1..k mapped to its member taxa in clockwise order.
/// clusters[c - 1] holds cluster c.
inline std::vector<std::vector<std::size_t>> cluster_members(const ClusterAssignment& a) {
  std::vector<std::vector<std::size_t>> out(a.cluster_count());
  for (std::size_t c = 0; c < a.arc_count(); ++c)
    for (auto p : a.arc_positions(c)) out[a.labels[c] - 1].push_back(a.ordering.order[p]);
  return out;
}

struct AssignmentReport {
  bool ok = true;
  std::vector<std::string> violations;
  std::vector<std::size_t> offending_clusters;
  std::vector<std::string> offending_taxa;
};

/// Contiguity and coverage check. Never throws for a malformed assignment;
/// every problem is listed instead.
inline AssignmentReport validate_assignment(const ClusterAssignment& a) {
  AssignmentReport r;
  auto fail = [&](const std::string& msg) {
    r.ok = false;
    r.violations.push_back(msg);
  };
  const std::size_t n = a.taxa.size();
  if (!a.ordering.is_permutation_of(n)) fail("ordering is not a permutation of the " + std::to_string(n) + " taxa");
  if (a.cuts.empty()) fail("at least one boundary is required");
  if (a.labels.size() != a.cuts.size())
    fail("expected one label per arc: " + std::to_string(a.cuts.size()) + " arcs, " + std::to_string(a.labels.size()) + " labels");
  for (std::size_t c = 0; c < a.cuts.size(); ++c) {
    if (a.cuts[c] >= n) fail("boundary " + std::to_string(a.cuts[c]) + " is outside the ordering");
    if (c > 0 && a.cuts[c] <= a.cuts[c - 1]) fail("boundaries must be strictly increasing");
  }
  if (!r.ok) return r;

  const std::size_t k = a.cluster_count();
  std::vector<std::vector<std::size_t>> arcs_of(k + 1);
  for (std::size_t c = 0; c < a.labels.size(); ++c) {
    if (a.labels[c] == 0) {
      fail("cluster ids start at 1");
      return r;
    }
    arcs_of[a.labels[c]].push_back(c);
  }
  const std::size_t m = a.labels.size();
  for (std::size_t id = 1; id <= k; ++id) {
    const auto& arcs = arcs_of[id];
    if (arcs.empty()) {
      fail("cluster " + std::to_string(id) + " has no members; ids must cover 1.." + std::to_string(k));
      r.offending_clusters.push_back(id);
      continue;
    }
    // contiguous iff the arcs carrying this id form one cyclic run
    std::size_t runs = 0;
    for (auto c : arcs)
      if (a.labels[(c + m - 1) % m] != id) ++runs;
    if (arcs.size() == m) runs = 1;
    if (runs > 1) {
      fail("cluster " + std::to_string(id) + " occupies " + std::to_string(runs) + " disjoint arcs");
      r.offending_clusters.push_back(id);
      for (auto c : arcs)
        for (auto p : a.arc_positions(c)) r.offending_taxa.push_back(a.taxa[a.ordering.order[p]]);
    }
  }
  return r;
}

/// Builds an assignment from a cluster id per taxon, cutting wherever the id
/// changes along the ordering. Non-contiguous memberships are representable
/// (and rejected by validate_assignment).
inline ClusterAssignment assignment_from_membership(const std::vector<std::string>& taxa, const CircularOrdering& ordering,
                                                    const std::vector<std::size_t>& cluster_of) {
  const std::size_t n = ordering.size();
  if (cluster_of.size() != n || taxa.size() != n) throw Error(ErrorKind::DimensionMismatch, "one cluster id per taxon required");
  ClusterAssignment a;
  a.taxa = taxa;
  a.ordering = ordering;
  for (std::size_t p = 0; p < n; ++p) {
    const auto here = cluster_of[ordering.order[p]], before = cluster_of[ordering.order[(p + n - 1) % n]];
    if (here != before) {
      a.cuts.push_back(p);
      a.labels.push_back(here);
    }
  }
  if (a.cuts.empty() && n > 0) {
    a.cuts.push_back(0);
    a.labels.push_back(cluster_of[ordering.order[0]]);
  }
  return a;
}

/// Contiguous assignment with k arcs cut at `cuts`, ids 1..k clockwise from
/// the first cut.
inline ClusterAssignment assignment_from_cuts(const std::vector<std::string>& taxa, const CircularOrdering& ordering,
                                              std::vector<std::size_t> cuts) {
  ClusterAssignment a;
  a.taxa = taxa;
  a.ordering = ordering;
  std::sort(cuts.begin(), cuts.end());
  a.cuts = std::move(cuts);
  a.labels.resize(a.cuts.size());
  std::iota(a.labels.begin(), a.labels.end(), std::size_t{1});
  return a;
}

inline void require_valid(const ClusterAssignment& a) {
  const auto r = validate_assignment(a);
  if (!r.ok) throw Error(ErrorKind::InvalidAssignment, r.violations.front());
}

// ---------------------------------------------------------------------------
// Pairing

/// partner[c - 1] = partner of cluster c.
using PairingMap = std::vector<std::size_t>;

/// Position of a cluster's arc midpoint on the circle, in ordering units.
inline double cluster_midpoint(const ClusterAssignment& a, std::size_t id) {
  const std::size_t n = a.ordering.size();
  std::size_t first_arc = a.arc_count();
  std::size_t length = 0;
  const std::size_t m = a.arc_count();
  for (std::size_t c = 0; c < m; ++c)
    if (a.labels[c] == id) {
      if (first_arc == m || (a.labels[(c + m - 1) % m] != id)) first_arc = c;
      length += a.arc_positions(c).size();
    }
  return std::fmod(static_cast<double>(a.cuts[first_arc]) + 0.5 * static_cast<double>(length), static_cast<double>(n));
}

/// Each cluster's most distant partner. Even k: c pairs with the cluster
/// half-way round by id. Odd k: the cluster whose arc midpoint is closest
/// to the point opposite c's midpoint (ties to the lower id); pairings need
/// not be reciprocal.
inline PairingMap pair_clusters(const ClusterAssignment& a) {
  require_valid(a);
  const std::size_t k = a.cluster_count();
  if (k < 2) throw Error(ErrorKind::SingleCluster, "pairing needs at least two clusters");
  PairingMap partner(k);
  if (k % 2 == 0) {
    for (std::size_t c = 1; c <= k; ++c) partner[c - 1] = ((c - 1 + k / 2) % k) + 1;
    return partner;
  }
  const double n = static_cast<double>(a.ordering.size());
  std::vector<double> mid(k + 1);
  for (std::size_t c = 1; c <= k; ++c) mid[c] = cluster_midpoint(a, c);
  auto circ = [n](double x, double y) {
    const double d = std::fmod(std::abs(x - y), n);
    return std::min(d, n - d);
  };
  for (std::size_t c = 1; c <= k; ++c) {
    const double target = std::fmod(mid[c] + 0.5 * n, n);
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t o = 1; o <= k; ++o) {
      if (o == c) continue;
      const double d = circ(mid[o], target);
      if (d < best_d - 1e-9) {
        best_d = d;
        best = o;
      }
    }
    partner[c - 1] = best;
  }
  return partner;
}

// ---------------------------------------------------------------------------
// Industry division

struct IndustryDivision {
  std::vector<std::string> dominant;  ///< dominant[c - 1] = dominant code of cluster c
  std::vector<bool> is_dominant;      ///< per taxon
};

/// Dominant industry per cluster: the modal code; ties go to the code with
/// more members across all taxa, then to the lexicographically smaller code.
inline IndustryDivision split_dominant(const ClusterAssignment& a, const std::vector<std::string>& industry_of) {
  require_valid(a);
  if (industry_of.size() != a.taxa.size()) throw Error(ErrorKind::DimensionMismatch, "one industry code per taxon required");
  std::map<std::string, std::size_t> market;
  for (const auto& code : industry_of) ++market[code];
  const auto members = cluster_members(a);
  IndustryDivision div;
  div.dominant.resize(members.size());
  div.is_dominant.assign(a.taxa.size(), false);
  for (std::size_t c = 0; c < members.size(); ++c) {
    std::map<std::string, std::size_t> counts;
    for (auto t : members[c]) ++counts[industry_of[t]];
    const auto best = std::max_element(counts.begin(), counts.end(), [&](const auto& l, const auto& r) {
      if (l.second != r.second) return l.second < r.second;
      if (market[l.first] != market[r.first]) return market[l.first] < market[r.first];
      return l.first > r.first;  // lexicographically smaller wins
    });
    div.dominant[c] = best->first;
    for (auto t : members[c]) div.is_dominant[t] = industry_of[t] == best->first;
  }
  return div;
}

/// Groups of taxa in circular order; each group may come from one cluster
/// or from several adjacent ones after merging.
using Grouping = std::vector<std::vector<std::size_t>>;

/// Repeatedly merges the smallest group below `min_size` (lowest index on
/// ties) into whichever circular neighbour has fewer members (the clockwise
/// one on ties) until every group reaches `min_size` or one group is left.
/// Empty groups are dropped first.
inline Grouping merge_small(Grouping groups, std::size_t min_size) {
  if (min_size < 1) throw Error(ErrorKind::InvalidParams, "min_size must be >= 1");
  std::erase_if(groups, [](const auto& g) { return g.empty(); });
  while (groups.size() > 1) {
    std::size_t victim = groups.size();
    for (std::size_t g = 0; g < groups.size(); ++g)
      if (groups[g].size() < min_size && (victim == groups.size() || groups[g].size() < groups[victim].size())) victim = g;
    if (victim == groups.size()) break;
    const std::size_t m = groups.size();
    const std::size_t next = (victim + 1) % m, prev = (victim + m - 1) % m;
    const bool clockwise = groups[next].size() <= groups[prev].size();
    // keep members in circular order: the earlier group's members come first
    const std::size_t first = clockwise ? victim : prev, second = clockwise ? next : victim;
    auto merged = groups[first];
    merged.insert(merged.end(), groups[second].begin(), groups[second].end());
    if (second == 0) {
      // wrapped: the merged group straddles the end of the sequence
      groups[first] = std::move(merged);
      groups.erase(groups.begin());
    } else {
      groups[first] = std::move(merged);
      groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(second));
    }
  }
  return groups;
}

/// The dominant (or non-dominant) sub-cluster of every cluster, in cluster
/// id order.
inline Grouping division_groups(const ClusterAssignment& a, const IndustryDivision& div, bool dominant) {
  Grouping out;
  for (const auto& members : cluster_members(a)) {
    std::vector<std::size_t> g;
    for (auto t : members)
      if (div.is_dominant[t] == dominant) g.push_back(t);
    out.push_back(std::move(g));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Suggested cuts

/// Separation between the taxa either side of every cut position: the total
/// weight of the non-trivial splits that cut there. Pendant splits are left
/// out; they measure how idiosyncratic a single taxon is, not how far apart
/// two groups are, and would otherwise put every cut among the noisiest taxa.
inline std::vector<double> cut_gaps(const SplitSystem& s) {
  const std::size_t n = s.ordering.size();
  std::vector<double> gap(n, 0.0);
  for (const auto& sp : s.splits) {
    const std::size_t len = sp.j - sp.i + 1;
    if (len == 1 || len + 1 == n) continue;
    gap[sp.i] += sp.weight;
    gap[(sp.j + 1) % n] += sp.weight;
  }
  return gap;
}

/// Starting point for the analyst: cut at the k widest gaps (lowest
/// positions on ties).
inline ClusterAssignment suggest_clusters(const SplitSystem& s, std::size_t k, const std::string& graph_hash = "") {
  const std::size_t n = s.ordering.size();
  if (k < 2) throw Error(ErrorKind::InvalidParams, "suggest_clusters needs k >= 2");
  if (k > n) throw Error(ErrorKind::KTooLarge, "k=" + std::to_string(k) + " exceeds the " + std::to_string(n) + " taxa");
  const auto gap = cut_gaps(s);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  double scale = 0.0;
  for (double g : gap) scale = std::max(scale, g);
  const double slack = 1e-12 * std::max(1.0, scale);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t l, std::size_t r) { return gap[l] > gap[r] + slack; });
  std::vector<std::size_t> cuts(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
  auto a = assignment_from_cuts(s.taxa, s.ordering, cuts);
  a.graph_hash = graph_hash;
  return a;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json assignment_to_json(const ClusterAssignment& a) {
  return {{"schema", "splitfolio.cluster-assignment/1"},
          {"graph_hash", a.graph_hash},
          {"taxa", a.taxa},
          {"ordering", a.ordering.order},
          {"boundaries", a.cuts},
          {"labels", a.labels}};
}

inline ClusterAssignment assignment_from_json(const nlohmann::json& j) {
  ClusterAssignment a;
  try {
    if (j.at("schema").get<std::string>() != "splitfolio.cluster-assignment/1")
      throw Error(ErrorKind::ParseError, "unknown cluster assignment schema");
    a.graph_hash = j.value("graph_hash", "");
    a.taxa = j.at("taxa").get<std::vector<std::string>>();
    a.ordering.order = j.at("ordering").get<std::vector<std::size_t>>();
    a.cuts = j.at("boundaries").get<std::vector<std::size_t>>();
    a.labels = j.at("labels").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("cluster assignment JSON: ") + e.what());
  }
  return a;
}

}  // namespace splitfolio
