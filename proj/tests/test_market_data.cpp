#include <gtest/gtest.h>

#include <cmath>

#include "splitfolio/correlation.hpp"
#include "splitfolio/market_data.hpp"

using namespace splitfolio;

namespace {

PanelConfig one_period(const std::string& start, const std::string& end) {
  return {{{1, parse_date(start, "test"), parse_date(end, "test")}}, std::nullopt};
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::Io;
}

}  // namespace

TEST(LoadPricePanel, FlatFixture) {
  const std::string csv =
      "date,ticker,price,dividend\n"
      "2020-01-03,AAA_F,100,0\n2020-01-03,BBB_M,100,0\n"
      "2020-01-10,AAA_F,100,0\n2020-01-10,BBB_M,100,0\n"
      "2020-01-17,AAA_F,100,0\n2020-01-17,BBB_M,100,0\n";
  const auto panel = parse_price_panel(csv, one_period("2020-01-03", "2020-01-17"));
  EXPECT_EQ(panel.tickers.size(), 2u);
  EXPECT_EQ(panel.dates.size(), 3u);
  EXPECT_EQ(panel.dividends.cwiseAbs().sum(), 0.0);
  EXPECT_EQ(panel.tickers[0].symbol, "AAA");
  EXPECT_EQ(panel.tickers[1].industry, "M");
}

TEST(LoadPricePanel, ZeroPriceNamesRow) {
  const std::string csv =
      "date,ticker,price,dividend\n2020-01-03,AAA_F,100,0\n2020-01-10,AAA_F,0,0\n";
  try {
    parse_price_panel(csv, one_period("2020-01-03", "2020-01-10"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonPositivePrice);
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
  }
}

TEST(LoadPricePanel, IndustrySuffix) {
  const auto t = parse_ticker("CBA_F", std::nullopt, "x");
  EXPECT_EQ(t.symbol, "CBA");
  EXPECT_EQ(t.industry, "F");
  const auto two = parse_ticker("BHP_MM", std::set<std::string>{"MM"}, "x");
  EXPECT_EQ(two.industry, "MM");
}

TEST(LoadPricePanel, ErrorKinds) {
  const auto cfg = one_period("2020-01-03", "2020-01-10");
  EXPECT_EQ(kind_of([&] { parse_price_panel("date,ticker,price\n", cfg); }), ErrorKind::MissingColumn);
  EXPECT_EQ(kind_of([&] {
              parse_price_panel("date,ticker,price,dividend\n2020-01-10,A_F,1,0\n2020-01-03,A_F,1,0\n", cfg);
            }),
            ErrorKind::UnsortedDates);
  PanelConfig restricted = cfg;
  restricted.industries = std::set<std::string>{"F"};
  EXPECT_EQ(kind_of([&] {
              parse_price_panel("date,ticker,price,dividend\n2020-01-03,A_Q,1,0\n2020-01-10,A_Q,1,0\n", restricted);
            }),
            ErrorKind::UnknownIndustryCode);
  EXPECT_EQ(kind_of([&] {
              parse_price_panel("date,ticker,price,dividend\n2020-01-03,NOSUFFIX,1,0\n", cfg);
            }),
            ErrorKind::UnknownIndustryCode);
  EXPECT_EQ(kind_of([&] { parse_price_panel("date,ticker,price,dividend\n2020-01-03,A_F,1,0\n", one_period("2019-01-01", "2020-01-03")); }),
            ErrorKind::InvalidPeriod);
}

TEST(LoadPricePanel, ConfigForms) {
  const auto a = parse_panel_config(R"([{"index":1,"start":"2020-01-03","end":"2020-02-03"}])");
  ASSERT_EQ(a.periods.size(), 1u);
  EXPECT_FALSE(a.industries);
  const auto b = parse_panel_config(
      R"({"periods":[{"index":1,"start":"2020-01-03","end":"2020-02-03"}],"industries":["F","M"]})");
  ASSERT_TRUE(b.industries);
  EXPECT_EQ(b.industries->size(), 2u);
}

TEST(WeeklyReturns, Examples) {
  PricePanel p;
  p.tickers = {{"A", "F"}, {"B", "F"}, {"C", "F"}};
  p.dates = {parse_date("2020-01-03", ""), parse_date("2020-01-10", "")};
  p.prices.resize(2, 3);
  p.prices << 100, 100, 100, 110, 95, 100;
  p.dividends.resize(2, 3);
  p.dividends << 0, 0, 0, 0, 5, 2;
  const auto r = weekly_returns(p);
  ASSERT_EQ(r.values.rows(), 1);
  EXPECT_NEAR(r.values(0, 0), 0.10, 1e-15);
  EXPECT_NEAR(r.values(0, 1), 0.00, 1e-15);
  EXPECT_NEAR(r.values(0, 2), 0.02, 1e-15);
}

namespace {

ReturnMatrix returns_of(std::vector<double> weekly) {
  ReturnMatrix r;
  r.tickers = {{"A", "F"}};
  for (std::size_t t = 0; t < weekly.size(); ++t) r.dates.push_back(parse_date("2020-01-03", "") + std::chrono::days{7 * (t + 1)});
  r.values.resize(static_cast<Eigen::Index>(weekly.size()), 1);
  for (std::size_t t = 0; t < weekly.size(); ++t) r.values(static_cast<Eigen::Index>(t), 0) = weekly[t];
  return r;
}

PeriodSpec whole(const ReturnMatrix& r) { return {1, r.dates.front() - std::chrono::days{7}, r.dates.back()}; }

}  // namespace

TEST(PeriodReturn, Examples) {
  auto r = returns_of({0.10, 0.10});
  EXPECT_NEAR(period_return(r, whole(r), 0), 21.0, 1e-12);
  r = returns_of({0.0, 0.0, 0.0});
  EXPECT_EQ(period_return(r, whole(r), 0), 0.0);
  r = returns_of({0.5, -0.5});
  EXPECT_NEAR(period_return(r, whole(r), 0), -25.0, 1e-12);
}

TEST(PeriodReturn, EmptyPeriod) {
  auto r = returns_of({0.1, 0.2});
  const PeriodSpec before{3, r.dates.front() - std::chrono::days{70}, r.dates.front() - std::chrono::days{7}};
  EXPECT_EQ(kind_of([&] { period_return(r, before, 0); }), ErrorKind::EmptyPeriod);
}

TEST(PeriodReturn, ConcatenationCompounds) {
  detail::Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> w(20);
    for (auto& x : w) x = 0.1 * (detail::uniform01(rng) - 0.5);
    const auto r = returns_of(w);
    const std::size_t cut = 1 + detail::uniform_index(rng, 18);
    const PeriodSpec a{1, r.dates.front() - std::chrono::days{7}, r.dates[cut]};
    const PeriodSpec b{2, r.dates[cut], r.dates.back()};
    const double ra = period_return(r, a, 0) / 100, rb = period_return(r, b, 0) / 100;
    EXPECT_NEAR(period_return(r, whole(r), 0), 100 * ((1 + ra) * (1 + rb) - 1), 1e-9);
  }
}

TEST(WeeklyReturns, ReconstructPrices) {
  const auto panel = synth_panel({{5, 0.3}}, 60, 11);
  const auto r = weekly_returns(panel);
  for (Eigen::Index k = 0; k < panel.prices.cols(); ++k) {
    double price = panel.prices(0, k);
    for (Eigen::Index t = 0; t < r.values.rows(); ++t) {
      price *= 1.0 + r.values(t, k);
      EXPECT_NEAR(price / panel.prices(t + 1, k), 1.0, 1e-9);
    }
  }
}

TEST(SynthPanel, IntraBlockCorrelation) {
  const auto panel = synth_panel({{4, 0.9}}, 500, 1);
  const auto r = weekly_returns(panel);
  const auto c = estimate_correlation(r, panel.periods.front());
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = i + 1; j < 4; ++j) EXPECT_GT(c.rho(i, j), 0.8);
}

TEST(SynthPanel, CrossBlockNearZero) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto panel = synth_panel({{3, 0.5}, {3, 0.5}}, 500, seed);
    const auto c = estimate_correlation(weekly_returns(panel), panel.periods.front());
    for (Eigen::Index i = 0; i < 3; ++i)
      for (Eigen::Index j = 3; j < 6; ++j) EXPECT_LT(std::abs(c.rho(i, j)), 0.15) << "seed " << seed;
  }
}

TEST(SynthPanel, Deterministic) {
  const auto a = synth_panel({{3, 0.5}, {2, -0.2}}, 40, 99);
  const auto b = synth_panel({{3, 0.5}, {2, -0.2}}, 40, 99);
  EXPECT_EQ(price_panel_csv(a), price_panel_csv(b));
  EXPECT_TRUE((a.prices.array() == b.prices.array()).all());
  const auto c = synth_panel({{3, 0.5}, {2, -0.2}}, 40, 100);
  EXPECT_NE(price_panel_csv(a), price_panel_csv(c));
}

TEST(SynthPanel, InvalidCorrelation) {
  EXPECT_EQ(kind_of([] { synth_panel({{3, 1.0}}, 10, 1); }), ErrorKind::InvalidCorrelation);
  EXPECT_EQ(kind_of([] { synth_panel({{3, -1.0}}, 10, 1); }), ErrorKind::InvalidCorrelation);
  // -0.6 is not positive definite for three equicorrelated series
  EXPECT_EQ(kind_of([] { synth_panel({{3, -0.6}}, 10, 1); }), ErrorKind::InvalidCorrelation);
}

TEST(SynthPanel, CsvRoundTrip) {
  SynthOptions opt;
  opt.periods = 2;
  const auto a = synth_panel({{3, 0.5}}, 20, 5, opt);
  PanelConfig cfg{a.periods, std::nullopt};
  const auto b = parse_price_panel(price_panel_csv(a), cfg);
  EXPECT_TRUE((a.prices.array() == b.prices.array()).all());
  EXPECT_EQ(a.tickers, b.tickers);
}

TEST(MissingData, ExcludedFromPeriod) {
  const std::string csv =
      "date,ticker,price,dividend\n"
      "2020-01-03,A_F,100,0\n2020-01-03,B_F,100,0\n"
      "2020-01-10,A_F,101,0\n"
      "2020-01-17,A_F,102,0\n2020-01-17,B_F,99,0\n";
  const auto panel = parse_price_panel(csv, one_period("2020-01-03", "2020-01-17"));
  const auto r = weekly_returns(panel);
  const auto keep = complete_tickers(r, panel.periods[0]);
  ASSERT_EQ(keep.size(), 1u);
  EXPECT_EQ(keep[0], 0u);
  EXPECT_EQ(kind_of([&] { period_return(r, panel.periods[0], 1); }), ErrorKind::MissingData);
}
