#include <gtest/gtest.h>

#include <cmath>

#include "splitfolio/correlation.hpp"
#include "splitfolio/detail/random.hpp"

using namespace splitfolio;

namespace {

ReturnMatrix series(const std::vector<std::vector<double>>& cols) {
  ReturnMatrix r;
  for (std::size_t k = 0; k < cols.size(); ++k) r.tickers.push_back({"T" + std::to_string(k), "F"});
  const auto rows = cols.front().size();
  for (std::size_t t = 0; t < rows; ++t) r.dates.push_back(parse_date("2021-01-08", "") + std::chrono::days{7 * t});
  r.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k)
    for (std::size_t t = 0; t < rows; ++t) r.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) = cols[k][t];
  return r;
}

PeriodSpec all_of(const ReturnMatrix& r) { return {1, r.dates.front() - std::chrono::days{7}, r.dates.back()}; }

}  // namespace

TEST(EstimateCorrelation, Examples) {
  const auto r = series({{1, -1, 1, -1}, {1, 1, -1, -1}, {-1, 1, -1, 1}});
  const auto c = estimate_correlation(r, all_of(r));
  EXPECT_EQ(c.rho(0, 0), 1.0);
  EXPECT_NEAR(c.rho(0, 1), 0.0, 1e-15);   // hand evaluation: sum of products is 0
  EXPECT_NEAR(c.rho(0, 2), -1.0, 1e-15);  // negation
}

TEST(EstimateCorrelation, ZeroVarianceNamesTicker) {
  const auto r = series({{1, 2, 3, 4}, {5, 5, 5, 5}});
  try {
    estimate_correlation(r, all_of(r));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ZeroVariance);
    EXPECT_NE(std::string(e.what()).find("T1_F"), std::string::npos);
  }
}

TEST(EstimateCorrelation, TooFewObservations) {
  const auto r = series({{1, 2}, {2, 1}});
  EXPECT_THROW(estimate_correlation(r, all_of(r)), Error);
}

TEST(EstimateCorrelation, AffineInvariance) {
  detail::Rng rng(17);
  detail::NormalSource normal;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(30), b(30), a2(30);
    const double scale = 0.1 + 5 * detail::uniform01(rng), shift = 10 * (detail::uniform01(rng) - 0.5);
    for (std::size_t t = 0; t < 30; ++t) {
      a[t] = normal(rng);
      b[t] = 0.5 * a[t] + normal(rng);
      a2[t] = scale * a[t] + shift;
    }
    const auto r = series({a, b, a2});
    const auto c = estimate_correlation(r, all_of(r));
    EXPECT_NEAR(c.rho(0, 1), c.rho(2, 1), 1e-12);
  }
}

TEST(ToDistance, Examples) {
  EXPECT_EQ(correlation_distance(1.0), 0.0);
  EXPECT_NEAR(correlation_distance(-1.0), 2.0, 1e-15);
  EXPECT_NEAR(correlation_distance(0.0), 1.4142136, 1e-7);
  EXPECT_NEAR(correlation_distance(0.0), std::sqrt(2.0), 1e-15);
}

TEST(ToDistance, MonotoneAndInvertible) {
  detail::Rng rng(5);
  for (int k = 0; k < 10000; ++k) {
    const double a = 2 * detail::uniform01(rng) - 1, b = 2 * detail::uniform01(rng) - 1;
    if (a < b) EXPECT_GT(correlation_distance(a), correlation_distance(b));
    const double d = correlation_distance(a);
    EXPECT_NEAR(1 - d * d / 2, a, 1e-12);
  }
}

TEST(ToDistance, MatrixInvariants) {
  const auto r = series({{1, 2, 3, 5, 4}, {2, 1, 4, 3, 6}, {0, 3, 1, 1, 2}});
  const auto d = to_distance(estimate_correlation(r, all_of(r)));
  for (Eigen::Index i = 0; i < 3; ++i) {
    EXPECT_EQ(d.d(i, i), 0.0);
    for (Eigen::Index j = 0; j < 3; ++j) {
      EXPECT_EQ(d.d(i, j), d.d(j, i));
      EXPECT_GE(d.d(i, j), 0.0);
      EXPECT_LE(d.d(i, j), 2.0);
    }
  }
  const auto back = parse_distance_csv(distance_csv(d));
  EXPECT_EQ(back.labels, d.labels);
  EXPECT_TRUE(back.d.isApprox(d.d, 1e-14));
}

TEST(CorrelationSummary, Basic) {
  CorrelationMatrix c;
  c.tickers = {{"A", "F"}, {"B", "F"}, {"C", "F"}};
  c.rho.resize(3, 3);
  c.rho << 1, 0.2, 0.4, 0.2, 1, 0.6, 0.4, 0.6, 1;
  const auto s = summarize_correlations(c);
  EXPECT_EQ(s.pairs, 3u);
  EXPECT_NEAR(s.mean, 0.4, 1e-15);
  EXPECT_NEAR(s.median, 0.4, 1e-15);
  EXPECT_NEAR(s.min, 0.2, 1e-15);
  EXPECT_NEAR(s.max, 0.6, 1e-15);
}
