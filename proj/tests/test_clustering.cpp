#include <gtest/gtest.h>

#include <map>
#include <set>

#include "circular_fixtures.hpp"
#include "splitfolio/clustering.hpp"

using namespace splitfolio;

namespace {

ClusterAssignment sized_arcs(const std::vector<std::size_t>& sizes) {
  std::size_t n = 0;
  std::vector<std::size_t> cuts;
  for (auto s : sizes) {
    cuts.push_back(n);
    n += s;
  }
  return assignment_from_cuts(fixtures::labels(n), CircularOrdering::identity(n), cuts);
}

std::vector<std::size_t> sizes_of(const Grouping& g) {
  std::vector<std::size_t> out;
  for (const auto& x : g) out.push_back(x.size());
  return out;
}

Grouping groups_of_sizes(const std::vector<std::size_t>& sizes) {
  Grouping g;
  std::size_t next = 0;
  for (auto s : sizes) {
    g.emplace_back();
    for (std::size_t q = 0; q < s; ++q) g.back().push_back(next++);
  }
  return g;
}

ClusterAssignment random_assignment(detail::Rng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> positions(n);
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  auto cuts = detail::sample_without_replacement<std::size_t>(positions, k, rng);
  CircularOrdering o;
  o.order = fixtures::random_positions(n, rng);
  return assignment_from_cuts(fixtures::labels(n), o, cuts);
}

}  // namespace

TEST(ValidateAssignment, SingleClusterIsValid) {
  const auto a = assignment_from_cuts(fixtures::labels(6), CircularOrdering::identity(6), {0});
  EXPECT_TRUE(validate_assignment(a).ok);
  EXPECT_EQ(cluster_members(a).front().size(), 6u);
}

TEST(ValidateAssignment, EightArcsOnTwentyTaxa) {
  const auto a = assignment_from_cuts(fixtures::labels(20), CircularOrdering::identity(20), {0, 2, 5, 7, 10, 12, 15, 18});
  const auto r = validate_assignment(a);
  EXPECT_TRUE(r.ok);
  std::size_t total = 0;
  for (const auto& c : cluster_members(a)) total += c.size();
  EXPECT_EQ(total, 20u);
}

TEST(ValidateAssignment, DisjointArcsNameTheCluster) {
  // cluster 1 = {t0, t1} and {t4}, cluster 2 = {t2, t3}, cluster 3 = {t5}
  const auto a = assignment_from_membership(fixtures::labels(6), CircularOrdering::identity(6), {1, 1, 2, 2, 1, 3});
  const auto r = validate_assignment(a);
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.offending_clusters, (std::vector<std::size_t>{1}));
  EXPECT_EQ(std::set<std::string>(r.offending_taxa.begin(), r.offending_taxa.end()), (std::set<std::string>{"t0", "t1", "t4"}));
  EXPECT_NE(r.violations.front().find("cluster 1"), std::string::npos);
}

TEST(ValidateAssignment, RunAcrossTheSeamIsContiguous) {
  const auto a = assignment_from_membership(fixtures::labels(5), CircularOrdering::identity(5), {1, 2, 2, 1, 1});
  EXPECT_TRUE(validate_assignment(a).ok);
  EXPECT_EQ(cluster_members(a)[0], (std::vector<std::size_t>{3, 4, 0}));
}

TEST(ValidateAssignment, ReportsMalformedInput) {
  auto a = assignment_from_cuts(fixtures::labels(6), CircularOrdering::identity(6), {0, 3});
  a.labels = {1, 3};
  EXPECT_FALSE(validate_assignment(a).ok);
  a.labels = {1};
  EXPECT_FALSE(validate_assignment(a).ok);
  a.labels = {1, 2};
  a.cuts = {3, 0};
  EXPECT_FALSE(validate_assignment(a).ok);
  a.cuts = {0, 6};
  EXPECT_FALSE(validate_assignment(a).ok);
  a.cuts = {0, 3};
  a.ordering.order = {0, 1, 2, 3, 4, 4};
  EXPECT_FALSE(validate_assignment(a).ok);
}

TEST(PairClusters, EightClusters) {
  const auto p = pair_clusters(sized_arcs({3, 2, 4, 1, 2, 5, 2, 1}));
  EXPECT_EQ(p, (PairingMap{5, 6, 7, 8, 1, 2, 3, 4}));
}

TEST(PairClusters, TwoClusters) { EXPECT_EQ(pair_clusters(sized_arcs({4, 9})), (PairingMap{2, 1})); }

TEST(PairClusters, FiveClusterWorkedExample) {
  // clusters two and three both pair with five; the map is not an involution
  EXPECT_EQ(pair_clusters(sized_arcs({7, 1, 4, 3, 8})), (PairingMap{4, 5, 5, 1, 2}));
}

TEST(PairClusters, SingleClusterRejected) {
  try {
    pair_clusters(sized_arcs({5}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SingleCluster);
  }
}

TEST(PairClusters, Properties) {
  detail::Rng rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 6 + detail::uniform_index(rng, 40);
    const std::size_t k = 2 + detail::uniform_index(rng, std::min<std::size_t>(n - 1, 11));
    const auto a = random_assignment(rng, n, k);
    const auto p = pair_clusters(a);
    ASSERT_EQ(p.size(), k);
    for (std::size_t c = 1; c <= k; ++c) {
      EXPECT_NE(p[c - 1], c);
      EXPECT_GE(p[c - 1], 1u);
      EXPECT_LE(p[c - 1], k);
      if (k % 2 == 0) EXPECT_EQ(p[p[c - 1] - 1], c);
    }
  }
}

TEST(SplitDominant, StrictMajority) {
  const auto a = sized_arcs({5});
  const auto d = split_dominant(a, {"F", "F", "F", "M", "E"});
  EXPECT_EQ(d.dominant, (std::vector<std::string>{"F"}));
  EXPECT_EQ(d.is_dominant, (std::vector<bool>{true, true, true, false, false}));
}

TEST(SplitDominant, SingleIndustryCluster) {
  const auto a = sized_arcs({3, 2});
  const auto d = split_dominant(a, {"M", "M", "M", "F", "E"});
  EXPECT_EQ(d.dominant[0], "M");
  EXPECT_EQ(division_groups(a, d, false)[0].size(), 0u);
}

TEST(SplitDominant, TieBreaks) {
  // cluster 1: F F M M; the market has 3 F against 2 M
  const auto a = sized_arcs({4, 2});
  auto d = split_dominant(a, {"F", "M", "F", "M", "F", "X"});
  EXPECT_EQ(d.dominant[0], "F");
  // cluster 2: one F, one X; F is larger market-wide
  EXPECT_EQ(d.dominant[1], "F");
  // equal market counts: lexicographic
  d = split_dominant(a, {"M", "F", "F", "M", "Y", "X"});
  EXPECT_EQ(d.dominant[0], "F");
  EXPECT_EQ(d.dominant[1], "X");
}

TEST(SplitDominant, DominantSetIsLargest) {
  detail::Rng rng(10);
  const std::vector<std::string> codes{"A", "B", "C", "D"};
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 10 + detail::uniform_index(rng, 30);
    const auto a = random_assignment(rng, n, 2 + detail::uniform_index(rng, 5));
    std::vector<std::string> ind(n);
    for (auto& c : ind) c = codes[detail::uniform_index(rng, codes.size())];
    const auto d = split_dominant(a, ind);
    const auto members = cluster_members(a);
    for (std::size_t c = 0; c < members.size(); ++c) {
      std::map<std::string, std::size_t> count;
      std::size_t dom = 0;
      for (auto t : members[c]) {
        ++count[ind[t]];
        if (d.is_dominant[t]) ++dom;
      }
      for (const auto& [code, k] : count) EXPECT_GE(dom, k);
    }
  }
}

TEST(MergeSmall, Examples) {
  EXPECT_EQ(sizes_of(merge_small(groups_of_sizes({3, 4, 5}), 3)), (std::vector<std::size_t>{3, 4, 5}));
  EXPECT_EQ(sizes_of(merge_small(groups_of_sizes({1, 9, 10}), 2)), (std::vector<std::size_t>{10, 10}));
  EXPECT_EQ(sizes_of(merge_small(groups_of_sizes({1, 1, 8}), 3)), (std::vector<std::size_t>{10}));
}

TEST(MergeSmall, PrefersSmallerNeighbourThenClockwise) {
  // group 2 (size 1) sits between sizes 5 and 3: joins the 3
  auto g = merge_small(groups_of_sizes({5, 1, 3, 6}), 2);
  EXPECT_EQ(sizes_of(g), (std::vector<std::size_t>{5, 4, 6}));
  // equal neighbours: clockwise
  g = merge_small(groups_of_sizes({4, 1, 4}), 2);
  EXPECT_EQ(sizes_of(g), (std::vector<std::size_t>{4, 5}));
  EXPECT_EQ(g[1], (std::vector<std::size_t>{4, 5, 6, 7, 8}));
  // wrap-around: the last group merges into the first
  g = merge_small(groups_of_sizes({2, 6, 1}), 2);
  EXPECT_EQ(sizes_of(g), (std::vector<std::size_t>{6, 3}));
  EXPECT_EQ(g[1], (std::vector<std::size_t>{8, 0, 1}));
}

TEST(MergeSmall, DropsEmptyGroupsAndRejectsZero) {
  EXPECT_EQ(sizes_of(merge_small(groups_of_sizes({3, 0, 3}), 2)), (std::vector<std::size_t>{3, 3}));
  EXPECT_THROW(merge_small(groups_of_sizes({3}), 0), Error);
}

TEST(MergeSmall, Properties) {
  detail::Rng rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 8 + detail::uniform_index(rng, 40);
    const auto a = random_assignment(rng, n, 2 + detail::uniform_index(rng, 7));
    const std::size_t min_size = 1 + detail::uniform_index(rng, 8);
    const auto merged = merge_small(cluster_members(a), min_size);
    std::size_t total = 0;
    for (const auto& g : merged) {
      total += g.size();
      if (merged.size() > 1) EXPECT_GE(g.size(), min_size);
    }
    EXPECT_EQ(total, n);
    // each merged group is a contiguous arc, so relabelling by group
    // passes validation
    std::vector<std::size_t> cluster_of(n);
    for (std::size_t g = 0; g < merged.size(); ++g)
      for (auto t : merged[g]) cluster_of[t] = g + 1;
    EXPECT_TRUE(validate_assignment(assignment_from_membership(a.taxa, a.ordering, cluster_of)).ok);
  }
}

TEST(SuggestClusters, CutsBetweenBlocks) {
  SplitSystem s;
  s.taxa = fixtures::labels(10);
  s.ordering = CircularOrdering::identity(10);
  for (std::size_t i = 0; i + 1 < 10; ++i) s.splits.push_back({i, i, 0.1});
  s.splits.push_back({0, 8, 0.1});
  s.splits.push_back({0, 4, 5.0});
  const auto a = suggest_clusters(s, 2);
  EXPECT_EQ(a.cuts, (std::vector<std::size_t>{0, 5}));
  EXPECT_TRUE(validate_assignment(a).ok);
}

TEST(SuggestClusters, LongPendantEdgesDoNotAttractCuts) {
  // A tight block 0..4 and five unrelated taxa 5..9 whose own edges are long.
  SplitSystem s;
  s.taxa = fixtures::labels(10);
  s.ordering = CircularOrdering::identity(10);
  for (std::size_t i = 0; i < 5; ++i) s.splits.push_back({i, i, 0.1});
  for (std::size_t i = 5; i + 1 < 10; ++i) s.splits.push_back({i, i, 3.0});
  s.splits.push_back({0, 8, 3.0});
  s.splits.push_back({0, 4, 1.0});
  EXPECT_EQ(suggest_clusters(s, 2).cuts, (std::vector<std::size_t>{0, 5}));
  const auto gaps = cut_gaps(s);
  EXPECT_DOUBLE_EQ(gaps[0], 1.0);
  EXPECT_DOUBLE_EQ(gaps[5], 1.0);
  EXPECT_DOUBLE_EQ(gaps[7], 0.0);
}

TEST(SuggestClusters, SingletonsAndTies) {
  SplitSystem s;
  s.taxa = fixtures::labels(6);
  s.ordering = CircularOrdering::identity(6);
  for (std::size_t i = 0; i + 1 < 6; ++i) s.splits.push_back({i, i, 1.0});
  s.splits.push_back({0, 4, 1.0});
  EXPECT_EQ(suggest_clusters(s, 3).cuts, (std::vector<std::size_t>{0, 1, 2}));
  const auto all = suggest_clusters(s, 6);
  for (const auto& c : cluster_members(all)) EXPECT_EQ(c.size(), 1u);
  EXPECT_THROW(suggest_clusters(s, 7), Error);
  EXPECT_THROW(suggest_clusters(s, 1), Error);
}

TEST(SuggestClusters, OutputsValidate) {
  detail::Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 5 + detail::uniform_index(rng, 10);
    const auto sys = fixtures::random_circular_system(n, rng);
    const auto s = fixtures::to_split_system(sys, fixtures::random_positions(n, rng), fixtures::labels(n));
    EXPECT_TRUE(validate_assignment(suggest_clusters(s, 2 + detail::uniform_index(rng, n - 1))).ok);
  }
}

TEST(AssignmentJson, RoundTrip) {
  auto a = sized_arcs({3, 4, 2});
  a.graph_hash = "00ff00ff00ff00ff";
  const auto text = assignment_to_json(a).dump();
  const auto b = assignment_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(b.taxa, a.taxa);
  EXPECT_EQ(b.ordering.order, a.ordering.order);
  EXPECT_EQ(b.cuts, a.cuts);
  EXPECT_EQ(b.labels, a.labels);
  EXPECT_EQ(b.graph_hash, a.graph_hash);
  EXPECT_EQ(assignment_to_json(b).dump(), text);
  EXPECT_THROW(assignment_from_json(nlohmann::json::parse(R"({"schema":"other"})")), Error);
}
