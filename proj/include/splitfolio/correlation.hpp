#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "splitfolio/detail/format.hpp"
#include "splitfolio/error.hpp"
#include "splitfolio/market_data.hpp"

namespace splitfolio {

struct CorrelationMatrix {
  std::vector<Ticker> tickers;
  Eigen::MatrixXd rho;
};

/// Symmetric, zero diagonal, entries in [0, 2].
struct DistanceMatrix {
  std::vector<std::string> labels;
  Eigen::MatrixXd d;

  std::size_t size() const { return labels.size(); }
  double operator()(std::size_t i, std::size_t j) const {
    return d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
};

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = x[i] - mx, b = y[i] - my;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Pearson correlation of the period's weekly returns. Tickers without a
/// complete record in the period are left out.
inline CorrelationMatrix estimate_correlation(const ReturnMatrix& returns, const PeriodSpec& period) {
  const auto [first, last] = period_rows(returns, period);
  const auto obs = last - first;
  if (obs < 3)
    throw Error(ErrorKind::InsufficientObservations,
                "period " + std::to_string(period.index) + " has " + std::to_string(obs) + " weekly returns, need >= 3");
  const auto keep = complete_tickers(returns, period);
  CorrelationMatrix c;
  std::vector<std::vector<double>> series;
  for (auto k : keep) {
    c.tickers.push_back(returns.tickers[k]);
    std::vector<double> s(static_cast<std::size_t>(obs));
    for (Eigen::Index t = first; t < last; ++t) s[static_cast<std::size_t>(t - first)] = returns.values(t, static_cast<Eigen::Index>(k));
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    if (*lo == *hi)
      throw Error(ErrorKind::ZeroVariance, "ticker " + returns.tickers[k].label() + " has constant returns in period " +
                                               std::to_string(period.index));
    series.push_back(std::move(s));
  }
  const auto n = static_cast<Eigen::Index>(series.size());
  c.rho = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      c.rho(i, j) = c.rho(j, i) = pearson(series[static_cast<std::size_t>(i)], series[static_cast<std::size_t>(j)]);
  return c;
}

/// d = sqrt(2 (1 - rho)), the usual correlation-to-distance map.
inline double correlation_distance(double rho) { return std::sqrt(2.0 * std::max(0.0, 1.0 - rho)); }

inline DistanceMatrix to_distance(const CorrelationMatrix& c) {
  DistanceMatrix out;
  for (const auto& t : c.tickers) out.labels.push_back(t.label());
  const auto n = c.rho.rows();
  out.d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) out.d(i, j) = out.d(j, i) = correlation_distance(c.rho(i, j));
  return out;
}

struct CorrelationSummary {
  std::size_t pairs = 0;
  double mean = 0, stddev = 0, min = 0, median = 0, max = 0;
};

inline CorrelationSummary summarize_correlations(const CorrelationMatrix& c) {
  std::vector<double> v;
  for (Eigen::Index i = 0; i < c.rho.rows(); ++i)
    for (Eigen::Index j = i + 1; j < c.rho.cols(); ++j) v.push_back(c.rho(i, j));
  CorrelationSummary s;
  s.pairs = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  double sum = 0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.stddev = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  s.min = v.front();
  s.max = v.back();
  const auto m = v.size() / 2;
  s.median = v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  return s;
}

namespace detail {

inline std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

}  // namespace detail

/// Square CSV: a header row and a leading column of labels, 15 significant digits.
inline std::string matrix_csv(const std::vector<std::string>& labels, const Eigen::MatrixXd& m) {
  std::string out = "";
  for (const auto& l : labels) out += "," + detail::csv_cell(l);
  out += "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out += detail::csv_cell(labels[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < m.cols(); ++j) out += "," + detail::fmt15(m(i, j));
    out += "\n";
  }
  return out;
}

inline std::string distance_csv(const DistanceMatrix& d) { return matrix_csv(d.labels, d.d); }

inline std::string correlation_csv(const CorrelationMatrix& c) {
  std::vector<std::string> labels;
  for (const auto& t : c.tickers) labels.push_back(t.label());
  return matrix_csv(labels, c.rho);
}

inline DistanceMatrix parse_distance_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, "empty distance file");
  auto header = detail::split_csv_line(line);
  DistanceMatrix out;
  out.labels.assign(header.begin() + 1, header.end());
  const auto n = static_cast<Eigen::Index>(out.labels.size());
  out.d.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, "distance file ends at row " + std::to_string(i + 2));
    const auto cells = detail::split_csv_line(line);
    if (static_cast<Eigen::Index>(cells.size()) != n + 1)
      throw Error(ErrorKind::DimensionMismatch, "distance row " + std::to_string(i + 2) + " has wrong width");
    for (Eigen::Index j = 0; j < n; ++j)
      out.d(i, j) = detail::parse_double(cells[static_cast<std::size_t>(j + 1)],
                                         "row " + std::to_string(i + 2) + ", column " + std::to_string(j + 2));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (out.d(i, i) != 0.0) throw Error(ErrorKind::InvalidParams, "nonzero diagonal for " + out.labels[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < i; ++j)
      if (out.d(i, j) != out.d(j, i) || out.d(i, j) < 0.0)
        throw Error(ErrorKind::InvalidParams, "distance matrix not symmetric nonnegative at (" + std::to_string(i) + "," +
                                                  std::to_string(j) + ")");
  }
  return out;
}

}  // namespace splitfolio
