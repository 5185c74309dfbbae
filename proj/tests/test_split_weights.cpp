#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "circular_fixtures.hpp"
#include "oracles.hpp"
#include "splitfolio/split_weights.hpp"

using namespace splitfolio;

namespace {

Eigen::MatrixXd tree_metric() {
  // cherries (a,b), (c,d); pendant edges 1, internal edge 2
  Eigen::MatrixXd d(4, 4);
  d << 0, 2, 4, 4,  //
      2, 0, 4, 4,   //
      4, 4, 0, 2,   //
      4, 4, 2, 0;
  return d;
}

}  // namespace

TEST(CircularSplits, Counts) {
  EXPECT_EQ(circular_splits(2).size(), 1u);
  EXPECT_EQ(circular_splits(4).size(), 6u);
  const auto five = circular_splits(5);
  EXPECT_EQ(five.size(), 10u);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& s : five) {
    EXPECT_GE(s.size(), 1u);
    EXPECT_LE(s.size(), 4u);  // complement nonempty
    EXPECT_TRUE(seen.emplace(s.i, s.j).second);
  }
  for (std::size_t k = 0; k < five.size(); ++k) EXPECT_EQ(arc_index(five[k].i, five[k].j, 5), k);
}

TEST(SplitsMatrix, Examples) {
  const auto two = splits_matrix(circular_splits(2), 2);
  ASSERT_EQ(two.rows(), 1);
  ASSERT_EQ(two.cols(), 1);
  EXPECT_EQ(two(0, 0), 1.0);

  const std::size_t n = 6;
  const std::vector<Split> isolate{{2, 2, 0.0}};
  EXPECT_EQ(splits_matrix(isolate, n).sum(), static_cast<double>(n - 1));

  // ordering (a,b,c,d), split {b,c}: rows ab, ac, ad, bc, bd, cd
  const std::vector<Split> bc{{1, 2, 0.0}};
  const auto x = splits_matrix(bc, 4);
  const std::vector<double> expected{1, 1, 0, 0, 1, 1};
  for (Eigen::Index r = 0; r < 6; ++r) EXPECT_EQ(x(r, 0), expected[static_cast<std::size_t>(r)]) << "row " << r;
}

TEST(SplitsMatrix, Shape) {
  for (std::size_t n = 2; n < 9; ++n) {
    const auto s = circular_splits(n);
    const auto x = splits_matrix(s, n);
    EXPECT_EQ(static_cast<std::size_t>(x.rows()), n * (n - 1) / 2);
    EXPECT_EQ(static_cast<std::size_t>(x.cols()), s.size());
  }
}

TEST(CircularSplitOperator, MatchesDenseMatrix) {
  detail::Rng rng(9);
  for (std::size_t n = 2; n <= 12; ++n) {
    const auto x = splits_matrix(circular_splits(n), n);
    CircularSplitOperator op(n);
    std::vector<double> w(op.cols()), r(op.rows()), y(op.rows()), g(op.cols());
    for (auto& v : w) v = detail::uniform01(rng);
    for (auto& v : r) v = detail::uniform01(rng) - 0.5;
    op.apply(w, y);
    op.apply_transpose(r, g);
    const Eigen::VectorXd yd = x * Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    const Eigen::VectorXd gd = x.transpose() * Eigen::Map<Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
    for (std::size_t k = 0; k < y.size(); ++k) EXPECT_NEAR(y[k], yd(static_cast<Eigen::Index>(k)), 1e-12);
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(g[k], gd(static_cast<Eigen::Index>(k)), 1e-12);
  }
}

TEST(EstimateWeights, ZeroDistances) {
  const auto x = splits_matrix(circular_splits(5), 5);
  const std::vector<double> d(10, 0.0);
  for (double w : estimate_weights(x, d)) EXPECT_EQ(w, 0.0);
}

TEST(EstimateWeights, RecoversKnownWeights) {
  detail::Rng rng(6);
  const auto x = splits_matrix(circular_splits(6), 6);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd w0(x.cols());
    for (Eigen::Index k = 0; k < w0.size(); ++k) w0(k) = detail::uniform01(rng) < 0.3 ? 0.0 : detail::uniform01(rng);
    const Eigen::VectorXd d = x * w0;
    const auto w = estimate_weights(x, std::span<const double>(d.data(), static_cast<std::size_t>(d.size())));
    for (Eigen::Index k = 0; k < w0.size(); ++k) EXPECT_NEAR(w[static_cast<std::size_t>(k)], w0(k), 1e-6);
  }
}

TEST(EstimateWeights, TreeMetric) {
  const auto sys = fit_split_system(tree_metric(), {"a", "b", "c", "d"}, CircularOrdering::identity(4));
  for (const auto& s : sys.splits) {
    const bool trivial = s.size() == 1 || s.size() == 3;
    const bool internal = s.i == 0 && s.j == 1;  // {a,b}|{c,d}
    const double expected = trivial ? 1.0 : internal ? 2.0 : 0.0;
    EXPECT_NEAR(s.weight, expected, 1e-6) << s.i << "," << s.j;
  }
  EXPECT_EQ(prune(sys, 1e-6).splits.size(), 5u);
  EXPECT_LT(sys.fit, 1e-6);
}

TEST(EstimateWeights, DimensionMismatch) {
  const auto x = splits_matrix(circular_splits(4), 4);
  const std::vector<double> d(5, 1.0);
  EXPECT_THROW(estimate_weights(x, d), Error);
}

TEST(EstimateWeights, KktOnRandomDistances) {
  detail::Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 4 + detail::uniform_index(rng, 9);
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < d.rows(); ++i)
      for (Eigen::Index j = i + 1; j < d.cols(); ++j) d(i, j) = d(j, i) = 0.2 + detail::uniform01(rng);
    const auto fit = estimate_circular_weights(d, CircularOrdering::identity(n));
    for (std::size_t k = 0; k < fit.weights.size(); ++k) {
      EXPECT_GE(fit.weights[k], 0.0);
      EXPECT_GE(fit.solver.gradient[k], -1e-8);
      if (fit.weights[k] > 1e-10) EXPECT_LE(std::abs(fit.solver.gradient[k]), 1e-8);
    }
  }
}

TEST(SplitSystem, ReconstructionPipeline) {
  detail::Rng rng(55);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5 + detail::uniform_index(rng, 6);
    const auto sys = fixtures::random_circular_system(n, rng);
    const auto pos = fixtures::random_positions(n, rng);
    const auto d = oracle::distances(sys, pos);
    const auto order = neighbor_net_ordering(d);
    std::vector<std::string> labels(n, "t");
    const auto fitted = fit_split_system(d, labels, order);
    EXPECT_LE(fitted.fit, 1e-6);
    for (const auto& s : fitted.splits) EXPECT_GE(s.weight, 0.0);
    // every generating split appears with its weight
    const auto fpos = order.positions();
    for (std::size_t k = 0; k < sys.arcs.size(); ++k) {
      std::set<std::size_t> side;
      for (std::size_t t = 0; t < n; ++t)
        if (pos[t] >= sys.arcs[k].first && pos[t] <= sys.arcs[k].second) side.insert(t);
      bool found = false;
      for (const auto& s : fitted.splits) {
        std::set<std::size_t> mine;
        for (std::size_t t = 0; t < n; ++t)
          if (s.contains_position(fpos[t])) mine.insert(t);
        std::set<std::size_t> comp;
        for (std::size_t t = 0; t < n; ++t)
          if (!mine.contains(t)) comp.insert(t);
        if (mine == side || comp == side) {
          EXPECT_NEAR(s.weight, sys.weights[k], 1e-6);
          found = true;
        }
      }
      EXPECT_TRUE(found);
    }
  }
}

TEST(Prune, Examples) {
  SplitSystem s;
  s.taxa = {"a", "b", "c", "d"};
  s.ordering = CircularOrdering::identity(4);
  s.splits = {{0, 0, 0.5}, {1, 1, 0.25}, {0, 1, 1.0}};
  EXPECT_EQ(prune(s, 0.0).splits, s.splits);
  const auto none = prune(s, 5.0);
  EXPECT_TRUE(none.splits.empty());
  EXPECT_EQ(none.ordering.order, s.ordering.order);
  EXPECT_THROW(prune(s, -1.0), Error);
}

TEST(Prune, RecomputesFit) {
  const auto sys = fit_split_system(tree_metric(), {"a", "b", "c", "d"}, CircularOrdering::identity(4));
  const auto p = prune(sys, 1.5);  // drops the four pendant splits of weight 1
  EXPECT_EQ(p.splits.size(), 1u);
  EXPECT_NEAR(p.fit, residual_norm(p), 1e-15);
  EXPECT_GT(p.fit, 1.0);
}

TEST(SplitSystem, JsonRoundTrip) {
  const auto sys = fit_split_system(tree_metric(), {"a", "b", "c", "d"}, CircularOrdering::identity(4));
  const auto back = split_system_from_json(nlohmann::json::parse(split_system_to_json(sys).dump()));
  EXPECT_EQ(back.taxa, sys.taxa);
  EXPECT_EQ(back.ordering.order, sys.ordering.order);
  EXPECT_EQ(back.splits, sys.splits);
  EXPECT_EQ(back.fit, sys.fit);
  EXPECT_EQ(back.observed, sys.observed);
}
