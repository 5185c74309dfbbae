#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "splitfolio/detail/format.hpp"
#include "splitfolio/detail/random.hpp"
#include "splitfolio/error.hpp"

namespace splitfolio {

using Date = std::chrono::sys_days;

inline Date parse_date(const std::string& text, const std::string& where) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  const std::string t = detail::trim(text);
  if (t.size() != 10 || std::sscanf(t.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3)
    throw Error(ErrorKind::ParseError, "bad ISO-8601 date '" + t + "' at " + where);
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw Error(ErrorKind::ParseError, "invalid calendar date '" + t + "' at " + where);
  return Date{ymd};
}

inline std::string format_date(Date date) {
  const std::chrono::year_month_day ymd{date};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

/// A listed stock. The industry code is carried as a `_<code>` suffix on the
/// ticker in input files.
struct Ticker {
  std::string symbol;
  std::string industry;

  std::string label() const { return symbol + "_" + industry; }
  friend bool operator==(const Ticker&, const Ticker&) = default;
};

inline Ticker parse_ticker(const std::string& raw, const std::optional<std::set<std::string>>& industries,
                           const std::string& where) {
  const auto cut = raw.rfind('_');
  if (cut == std::string::npos || cut == 0 || cut + 1 == raw.size())
    throw Error(ErrorKind::UnknownIndustryCode, "ticker '" + raw + "' lacks an _<industry> suffix at " + where);
  Ticker t{raw.substr(0, cut), raw.substr(cut + 1)};
  if (industries && !industries->contains(t.industry))
    throw Error(ErrorKind::UnknownIndustryCode,
                "industry code '" + t.industry + "' of ticker '" + raw + "' is not configured at " + where);
  return t;
}

/// One study period. A weekly return dated t belongs to the period when
/// start < t <= end, so abutting periods partition the returns.
struct PeriodSpec {
  int index = 1;
  Date start;
  Date end;
};

struct PanelConfig {
  std::vector<PeriodSpec> periods;
  std::optional<std::set<std::string>> industries;
};

/// Weekly prices and per-share dividends, [date x ticker]. NaN marks a
/// missing observation; such tickers drop out of the affected periods.
struct PricePanel {
  std::vector<Ticker> tickers;
  std::vector<Date> dates;
  Eigen::MatrixXd prices;
  Eigen::MatrixXd dividends;
  std::vector<PeriodSpec> periods;

  std::size_t ticker_count() const { return tickers.size(); }
};

struct ReturnMatrix {
  std::vector<Ticker> tickers;
  std::vector<Date> dates;  ///< dates[t] closes week t; one fewer than the panel
  Eigen::MatrixXd values;   ///< simple dividend-inclusive returns, NaN if missing
};

inline void validate_periods(const std::vector<PeriodSpec>& periods, const std::vector<Date>& dates) {
  for (std::size_t p = 0; p < periods.size(); ++p) {
    const auto& ps = periods[p];
    const std::string name = "period " + std::to_string(ps.index);
    if (!(ps.start < ps.end)) throw Error(ErrorKind::InvalidPeriod, name + ": start must precede end");
    if (!dates.empty() && (ps.start < dates.front() || ps.end > dates.back()))
      throw Error(ErrorKind::InvalidPeriod, name + " lies outside the panel's date span " +
                                                format_date(dates.front()) + ".." + format_date(dates.back()));
    if (p > 0 && periods[p - 1].end != ps.start)
      throw Error(ErrorKind::InvalidPeriod, name + " does not abut the previous period");
  }
}

inline void validate_panel(const PricePanel& panel) {
  const auto n_dates = static_cast<Eigen::Index>(panel.dates.size());
  const auto n_tickers = static_cast<Eigen::Index>(panel.tickers.size());
  if (panel.prices.rows() != n_dates || panel.prices.cols() != n_tickers || panel.dividends.rows() != n_dates ||
      panel.dividends.cols() != n_tickers)
    throw Error(ErrorKind::DimensionMismatch, "price/dividend matrices do not match dates x tickers");
  for (std::size_t t = 1; t < panel.dates.size(); ++t)
    if (!(panel.dates[t - 1] < panel.dates[t]))
      throw Error(ErrorKind::UnsortedDates, "date " + format_date(panel.dates[t]) + " at index " + std::to_string(t) +
                                                " is not after its predecessor");
  std::set<std::string> seen;
  for (const auto& t : panel.tickers) {
    if (t.symbol.empty()) throw Error(ErrorKind::ParseError, "empty ticker symbol");
    if (!seen.insert(t.label()).second) throw Error(ErrorKind::DuplicateEntry, "duplicate ticker " + t.label());
  }
  for (Eigen::Index r = 0; r < n_dates; ++r)
    for (Eigen::Index c = 0; c < n_tickers; ++c) {
      const double p = panel.prices(r, c);
      const double d = panel.dividends(r, c);
      const std::string where = "date " + format_date(panel.dates[static_cast<std::size_t>(r)]) + ", ticker " +
                                panel.tickers[static_cast<std::size_t>(c)].label();
      if (!std::isnan(p) && !(p > 0.0)) throw Error(ErrorKind::NonPositivePrice, where);
      if (!std::isnan(d) && d < 0.0) throw Error(ErrorKind::NegativeDividend, where);
    }
  validate_periods(panel.periods, panel.dates);
}

inline std::vector<PeriodSpec> parse_periods_json(const nlohmann::json& j) {
  std::vector<PeriodSpec> out;
  if (!j.is_array()) throw Error(ErrorKind::ParseError, "period config must be a JSON list");
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    const std::string where = "periods[" + std::to_string(i) + "]";
    for (const char* key : {"index", "start", "end"})
      if (!e.contains(key)) throw Error(ErrorKind::MissingColumn, where + " lacks field '" + key + "'");
    out.push_back({e.at("index").get<int>(), parse_date(e.at("start").get<std::string>(), where + ".start"),
                   parse_date(e.at("end").get<std::string>(), where + ".end")});
  }
  return out;
}

/// Accepts either a bare list of `{index,start,end}` or an object with
/// `periods` and an optional `industries` list.
inline PanelConfig parse_panel_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("period config: ") + e.what());
  }
  PanelConfig cfg;
  if (j.is_array()) {
    cfg.periods = parse_periods_json(j);
  } else {
    if (!j.contains("periods")) throw Error(ErrorKind::MissingColumn, "period config lacks 'periods'");
    cfg.periods = parse_periods_json(j.at("periods"));
    if (j.contains("industries")) cfg.industries = j.at("industries").get<std::set<std::string>>();
  }
  return cfg;
}

inline nlohmann::json periods_to_json(const std::vector<PeriodSpec>& periods) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : periods)
    arr.push_back({{"index", p.index}, {"start", format_date(p.start)}, {"end", format_date(p.end)}});
  return arr;
}

/// Parses the long CSV layout `date,ticker,price,dividend`. Rows must be in
/// non-decreasing date order; a (date, ticker) cell may appear once.
inline PricePanel parse_price_panel(const std::string& csv_text, const PanelConfig& config) {
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::MissingColumn, "empty price file");
  const auto header = detail::split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[detail::trim(header[i])] = i;
  for (const char* required : {"date", "ticker", "price", "dividend"})
    if (!col.contains(required)) throw Error(ErrorKind::MissingColumn, std::string("header lacks column '") + required + "'");

  struct Row {
    Date date;
    std::size_t ticker;
    double price;
    double dividend;
  };
  std::vector<Row> rows;
  std::vector<Ticker> tickers;
  std::map<std::string, std::size_t> ticker_index;
  std::vector<Date> dates;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    const std::string where = "row " + std::to_string(line_no);
    if (cells.size() < header.size()) throw Error(ErrorKind::MissingColumn, where + " has too few columns");
    const Date date = parse_date(cells[col["date"]], where + ", column date");
    const std::string raw = detail::trim(cells[col["ticker"]]);
    const double price = detail::parse_double(cells[col["price"]], where + ", column price");
    const std::string div_text = detail::trim(cells[col["dividend"]]);
    const double dividend = div_text.empty() ? 0.0 : detail::parse_double(div_text, where + ", column dividend");
    if (!(price > 0.0)) throw Error(ErrorKind::NonPositivePrice, where + ", column price: " + detail::trim(cells[col["price"]]));
    if (dividend < 0.0) throw Error(ErrorKind::NegativeDividend, where + ", column dividend");
    if (!dates.empty() && date < dates.back())
      throw Error(ErrorKind::UnsortedDates, where + ", column date: " + format_date(date) + " precedes " + format_date(dates.back()));
    if (dates.empty() || dates.back() != date) dates.push_back(date);
    auto it = ticker_index.find(raw);
    if (it == ticker_index.end()) {
      tickers.push_back(parse_ticker(raw, config.industries, where + ", column ticker"));
      it = ticker_index.emplace(raw, tickers.size() - 1).first;
    }
    rows.push_back({date, it->second, price, dividend});
  }

  PricePanel panel;
  panel.tickers = std::move(tickers);
  panel.dates = std::move(dates);
  const auto nan = std::numeric_limits<double>::quiet_NaN();
  panel.prices = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(panel.dates.size()),
                                           static_cast<Eigen::Index>(panel.tickers.size()), nan);
  panel.dividends = panel.prices;
  std::size_t date_row = 0;
  for (const auto& r : rows) {
    while (panel.dates[date_row] != r.date) ++date_row;
    const auto i = static_cast<Eigen::Index>(date_row);
    const auto j = static_cast<Eigen::Index>(r.ticker);
    if (!std::isnan(panel.prices(i, j)))
      throw Error(ErrorKind::DuplicateEntry, "ticker " + panel.tickers[r.ticker].label() + " repeated on " + format_date(r.date));
    panel.prices(i, j) = r.price;
    panel.dividends(i, j) = r.dividend;
  }
  panel.periods = config.periods;
  validate_panel(panel);
  return panel;
}

inline PricePanel load_price_panel(const std::string& csv_path, const PanelConfig& config) {
  return parse_price_panel(detail::read_file(csv_path), config);
}

inline std::string price_panel_csv(const PricePanel& panel) {
  std::string out = "date,ticker,price,dividend\n";
  for (std::size_t t = 0; t < panel.dates.size(); ++t)
    for (std::size_t k = 0; k < panel.tickers.size(); ++k) {
      const double p = panel.prices(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k));
      if (std::isnan(p)) continue;
      const double d = panel.dividends(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k));
      out += format_date(panel.dates[t]) + "," + panel.tickers[k].label() + "," + detail::fmt_exact(p) + "," +
             detail::fmt_exact(d) + "\n";
    }
  return out;
}

/// r[t][k] = (price[t][k] + dividend[t][k]) / price[t-1][k] - 1, with the
/// dividend credited in the week it is paid.
inline ReturnMatrix weekly_returns(const PricePanel& panel) {
  ReturnMatrix r;
  r.tickers = panel.tickers;
  if (panel.dates.size() < 2) {
    r.values.resize(0, static_cast<Eigen::Index>(panel.tickers.size()));
    return r;
  }
  r.dates.assign(panel.dates.begin() + 1, panel.dates.end());
  const Eigen::Index rows = panel.prices.rows() - 1;
  r.values.resize(rows, panel.prices.cols());
  for (Eigen::Index t = 0; t < rows; ++t)
    for (Eigen::Index k = 0; k < panel.prices.cols(); ++k) {
      const double prev = panel.prices(t, k);
      const double cur = panel.prices(t + 1, k);
      r.values(t, k) = (cur + panel.dividends(t + 1, k)) / prev - 1.0;  // NaN propagates
    }
  return r;
}

/// Half-open row range [first, last) of the returns that fall in `period`.
inline std::pair<Eigen::Index, Eigen::Index> period_rows(const ReturnMatrix& returns, const PeriodSpec& period) {
  const auto first = std::upper_bound(returns.dates.begin(), returns.dates.end(), period.start);
  const auto last = std::upper_bound(returns.dates.begin(), returns.dates.end(), period.end);
  return {static_cast<Eigen::Index>(first - returns.dates.begin()), static_cast<Eigen::Index>(last - returns.dates.begin())};
}

/// Tickers with a return in every week of the period.
inline std::vector<std::size_t> complete_tickers(const ReturnMatrix& returns, const PeriodSpec& period) {
  const auto [first, last] = period_rows(returns, period);
  std::vector<std::size_t> out;
  for (Eigen::Index k = 0; k < returns.values.cols(); ++k) {
    bool ok = last > first;
    for (Eigen::Index t = first; t < last && ok; ++t) ok = !std::isnan(returns.values(t, k));
    if (ok) out.push_back(static_cast<std::size_t>(k));
  }
  return out;
}

/// Compounded return over the period, in percent.
inline double period_return(const ReturnMatrix& returns, const PeriodSpec& period, std::size_t ticker) {
  const auto [first, last] = period_rows(returns, period);
  if (last <= first) throw Error(ErrorKind::EmptyPeriod, "no weeks fall in period " + std::to_string(period.index));
  double growth = 1.0;
  for (Eigen::Index t = first; t < last; ++t) {
    const double r = returns.values(t, static_cast<Eigen::Index>(ticker));
    if (std::isnan(r))
      throw Error(ErrorKind::MissingData, "ticker " + returns.tickers[ticker].label() + " lacks data in period " +
                                              std::to_string(period.index));
    growth *= 1.0 + r;
  }
  return 100.0 * (growth - 1.0);
}

struct CorrelationBlock {
  std::size_t size = 1;
  double rho = 0.0;
};

struct SynthOptions {
  double weekly_mean = 0.002;
  double weekly_vol = 0.03;
  double base_price = 100.0;
  std::size_t periods = 1;
  std::vector<std::string> industries = {"A", "B", "C", "D", "E", "F", "G", "H", "I", "J", "K"};
  Date first_date = Date{std::chrono::year{2000} / std::chrono::January / 7};
};

/// Gaussian weekly returns, equicorrelated within each block and independent
/// across blocks, turned into price paths from `base_price`. Industries are
/// dealt round-robin so they are unrelated to the block structure. `weeks` is
/// the number of returns; the panel has weeks + 1 dates.
inline PricePanel synth_panel(const std::vector<CorrelationBlock>& blocks, std::size_t weeks, std::uint64_t seed,
                              const SynthOptions& opt = {}) {
  if (blocks.empty()) throw Error(ErrorKind::InvalidParams, "no blocks requested");
  if (weeks < 1) throw Error(ErrorKind::InvalidParams, "weeks must be >= 1");
  if (opt.industries.empty()) throw Error(ErrorKind::InvalidParams, "no industry codes");
  std::vector<Eigen::MatrixXd> factors;
  std::size_t n = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& blk = blocks[b];
    if (blk.size < 1) throw Error(ErrorKind::InvalidParams, "block " + std::to_string(b) + " is empty");
    if (!(blk.rho > -1.0 && blk.rho < 1.0))
      throw Error(ErrorKind::InvalidCorrelation, "block " + std::to_string(b) + " correlation must lie in (-1, 1)");
    const auto s = static_cast<Eigen::Index>(blk.size);
    Eigen::MatrixXd corr = Eigen::MatrixXd::Constant(s, s, blk.rho);
    corr.diagonal().setOnes();
    Eigen::LLT<Eigen::MatrixXd> llt(corr);
    if (llt.info() != Eigen::Success)
      throw Error(ErrorKind::InvalidCorrelation,
                  "block " + std::to_string(b) + " correlation matrix is not positive definite");
    factors.push_back(llt.matrixL());
    n += blk.size;
  }

  PricePanel panel;
  for (std::size_t k = 0; k < n; ++k) {
    char sym[32];
    std::snprintf(sym, sizeof sym, "S%03zu", k + 1);
    panel.tickers.push_back({sym, opt.industries[k % opt.industries.size()]});
  }
  for (std::size_t t = 0; t <= weeks; ++t) panel.dates.push_back(opt.first_date + std::chrono::days{7 * t});
  const auto rows = static_cast<Eigen::Index>(weeks + 1);
  panel.prices.resize(rows, static_cast<Eigen::Index>(n));
  panel.dividends = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(n));
  panel.prices.row(0).setConstant(opt.base_price);

  detail::Rng rng(seed);
  detail::NormalSource normal;
  for (Eigen::Index t = 1; t < rows; ++t) {
    Eigen::Index col = 0;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const auto s = factors[b].rows();
      Eigen::VectorXd z(s);
      for (Eigen::Index i = 0; i < s; ++i) z(i) = normal(rng);
      const Eigen::VectorXd x = factors[b] * z;
      for (Eigen::Index i = 0; i < s; ++i) {
        const double r = std::max(opt.weekly_mean + opt.weekly_vol * x(i), -0.99);
        panel.prices(t, col + i) = panel.prices(t - 1, col + i) * (1.0 + r);
      }
      col += s;
    }
  }

  const std::size_t periods = std::max<std::size_t>(opt.periods, 1);
  for (std::size_t p = 0; p < periods; ++p) {
    const std::size_t a = p * weeks / periods;
    const std::size_t b = (p + 1) * weeks / periods;
    if (a == b) throw Error(ErrorKind::InvalidParams, "more periods than weeks");
    panel.periods.push_back({static_cast<int>(p + 1), panel.dates[a], panel.dates[b]});
  }
  validate_panel(panel);
  return panel;
}

}  // namespace splitfolio
