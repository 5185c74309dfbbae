#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/fisher_f.hpp>

#include "splitfolio/detail/format.hpp"
#include "splitfolio/error.hpp"
#include "splitfolio/portfolio_sim.hpp"

namespace splitfolio {

// ---------------------------------------------------------------------------
// Levene's test

enum class Centering { Mean, Median };

inline std::string to_string(Centering c) { return c == Centering::Mean ? "mean" : "median"; }

inline Centering parse_centering(const std::string& text) {
  if (text == "mean") return Centering::Mean;
  if (text == "median") return Centering::Median;
  throw Error(ErrorKind::InvalidParams, "centering must be 'mean' or 'median', got '" + text + "'");
}

struct LeveneResult {
  double W = 0.0;
  double df1 = 0.0;  ///< k - 1
  double df2 = 0.0;  ///< N - k
  double p = 1.0;
  Centering centering = Centering::Mean;
};

/// Upper tail P(F > x) of the F distribution with (d1, d2) degrees of freedom.
inline double f_survival(double x, double d1, double d2) {
  if (!(d1 > 0.0) || !(d2 > 0.0)) throw Error(ErrorKind::InvalidParams, "F degrees of freedom must be positive");
  if (std::isnan(x)) throw Error(ErrorKind::InvalidParams, "F statistic is NaN");
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::cdf(boost::math::complement(boost::math::fisher_f(d1, d2), x));
}

namespace detail {

inline double center_of(std::vector<double> v, Centering c) {
  if (c == Centering::Mean) return sorted_mean(std::move(v));
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace detail

/// Levene's W on absolute deviations from each group's center (mean by
/// default, median for the Brown-Forsythe variant), with the p-value from
/// F(k-1, N-k).
inline LeveneResult levene(const std::vector<std::vector<double>>& groups, Centering centering = Centering::Mean) {
  const std::size_t k = groups.size();
  if (k < 2) throw Error(ErrorKind::DegenerateGroup, "Levene's test needs at least 2 groups, got " + std::to_string(k));
  std::vector<std::vector<double>> z(k);
  std::size_t total = 0;
  for (std::size_t g = 0; g < k; ++g) {
    if (groups[g].size() < 2)
      throw Error(ErrorKind::DegenerateGroup, "group " + std::to_string(g + 1) + " has " +
                                                  std::to_string(groups[g].size()) + " observation(s); need >= 2");
    for (double x : groups[g])
      if (!std::isfinite(x)) throw Error(ErrorKind::DegenerateGroup, "group " + std::to_string(g + 1) + " has a non-finite value");
    const double c = detail::center_of(groups[g], centering);
    for (double x : groups[g]) z[g].push_back(std::abs(x - c));
    total += groups[g].size();
  }
  std::vector<double> zbar(k);
  for (std::size_t g = 0; g < k; ++g) zbar[g] = detail::sorted_mean(z[g]);
  // Between-group sum of squares in its pairwise form,
  //   sum_g n_g (zbar_g - zbar)^2 = (1/N) sum_{g<h} n_g n_h (zbar_g - zbar_h)^2,
  // which is exactly zero when the group means coincide.
  double between = 0.0, within = 0.0;
  for (std::size_t g = 0; g < k; ++g) {
    for (std::size_t h = g + 1; h < k; ++h)
      between += static_cast<double>(z[g].size() * z[h].size()) * (zbar[g] - zbar[h]) * (zbar[g] - zbar[h]);
    for (double v : z[g]) within += (v - zbar[g]) * (v - zbar[g]);
  }
  between /= static_cast<double>(total);
  if (!(within > 0.0))
    throw Error(ErrorKind::DegenerateGroup, "every group has constant absolute deviations; Levene's W is undefined");
  LeveneResult r;
  r.centering = centering;
  r.df1 = static_cast<double>(k - 1);
  r.df2 = static_cast<double>(total - k);
  r.W = (r.df2 / r.df1) * between / within;
  r.p = f_survival(r.W, r.df1, r.df2);
  return r;
}

// ---------------------------------------------------------------------------
// Report tables

/// Joint Levene tests for one portfolio size: across the strategies of the
/// first column block, and across the dominant/non-dominant pair.
struct LeveneRow {
  std::size_t size = 0;
  std::optional<LeveneResult> joint;
  std::optional<LeveneResult> division;
};

namespace detail {

inline bool in_division_block(Strategy s) { return s == Strategy::ClusterDominant || s == Strategy::ClusterNonDominant; }

inline const SimulationSummary* find_run(const std::vector<SimulationSummary>& runs, Strategy s, std::size_t size) {
  for (const auto& r : runs)
    if (r.kind == s && r.size == size) return &r;
  return nullptr;
}

inline std::vector<double> replication_returns(const SimulationSummary& s) {
  std::vector<double> v;
  for (const auto& r : s.replications) v.push_back(r.return_pct);
  return v;
}

inline std::vector<std::size_t> run_sizes(const std::vector<SimulationSummary>& runs) {
  std::vector<std::size_t> sizes;
  for (const auto& r : runs) sizes.push_back(r.size);
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  return sizes;
}

}  // namespace detail

inline std::vector<LeveneRow> report_levenes(const std::vector<SimulationSummary>& runs,
                                             Centering centering = Centering::Mean) {
  std::vector<LeveneRow> rows;
  for (std::size_t size : detail::run_sizes(runs)) {
    LeveneRow row;
    row.size = size;
    std::vector<std::vector<double>> main, division;
    for (Strategy s : all_strategies())
      if (const auto* run = detail::find_run(runs, s, size))
        (detail::in_division_block(s) ? division : main).push_back(detail::replication_returns(*run));
    if (main.size() >= 2) row.joint = levene(main, centering);
    if (division.size() == 2) row.division = levene(division, centering);
    rows.push_back(row);
  }
  return rows;
}

struct ReportCell {
  double mean = 0.0;
  double std = 0.0;
  double sharpe = 0.0;
  bool std_defined = false;
  bool lowest_std = false;
};

struct Report {
  std::string title;
  std::vector<Strategy> columns;  ///< present strategies in canonical order
  std::vector<std::size_t> sizes;
  std::map<std::pair<std::size_t, Strategy>, ReportCell> cells;
  std::vector<LeveneRow> levene;  ///< empty when no test applies

  bool has_levene() const {
    for (const auto& r : levene)
      if (r.joint || r.division) return true;
    return false;
  }
};

/// Builds the per-period table: mean, std, Sharpe-like ratio and Levene
/// p-values by portfolio size. Within each column block (random / industry /
/// cluster, then dominant / non-dominant) the lowest defined std of a size is
/// flagged; exact ties are all flagged.
inline Report summarize(const std::vector<SimulationSummary>& runs, const std::vector<LeveneRow>& levenes,
                        const std::string& title = "") {
  Report rep;
  rep.title = title;
  rep.sizes = detail::run_sizes(runs);
  for (Strategy s : all_strategies())
    for (const auto& r : runs)
      if (r.kind == s) {
        rep.columns.push_back(s);
        break;
      }
  for (const auto& r : runs) {
    ReportCell c;
    c.mean = r.mean_return;
    c.std = r.std_return;
    c.sharpe = r.sharpe;
    c.std_defined = r.std_defined;
    rep.cells[{r.size, r.kind}] = c;
  }
  for (std::size_t size : rep.sizes)
    for (bool division : {false, true}) {
      std::optional<double> best;
      for (Strategy s : rep.columns) {
        if (detail::in_division_block(s) != division) continue;
        auto it = rep.cells.find({size, s});
        if (it == rep.cells.end() || !it->second.std_defined) continue;
        if (!best || it->second.std < *best) best = it->second.std;
      }
      if (!best) continue;
      for (Strategy s : rep.columns) {
        if (detail::in_division_block(s) != division) continue;
        auto it = rep.cells.find({size, s});
        if (it != rep.cells.end() && it->second.std_defined && it->second.std == *best) it->second.lowest_std = true;
      }
    }
  for (const auto& row : levenes)
    if (row.joint || row.division) rep.levene.push_back(row);
  return rep;
}

namespace detail {

/// Column that carries a Levene p-value: the last present column of its block.
inline std::optional<Strategy> levene_column(const Report& rep, bool division) {
  std::optional<Strategy> col;
  for (Strategy s : rep.columns)
    if (in_division_block(s) == division) col = s;
  return col;
}

template <class CellFn>
std::vector<std::vector<std::string>> report_rows(const Report& rep, CellFn&& value) {
  // value(row_kind, cell) -> text, row_kind in {mean, std, sharpe}
  std::vector<std::vector<std::string>> rows;
  for (const char* kind : {"mean", "std", "sharpe"})
    for (std::size_t size : rep.sizes) {
      std::vector<std::string> row{kind, std::to_string(size)};
      for (Strategy s : rep.columns) {
        auto it = rep.cells.find({size, s});
        row.push_back(it == rep.cells.end() ? "" : value(std::string(kind), it->second));
      }
      rows.push_back(std::move(row));
    }
  return rows;
}

inline std::string fmt_p(double p) {
  char buf[32];
  if (p >= 0.01 || p == 0.0)
    std::snprintf(buf, sizeof buf, "%.3f", p);
  else
    std::snprintf(buf, sizeof buf, "%.1e", p);
  return buf;
}

}  // namespace detail

/// Machine-readable table. Flagged std cells carry a leading '*'.
inline std::string report_csv(const Report& rep) {
  std::string out = "row,size";
  for (Strategy s : rep.columns) out += "," + to_string(s);
  out += "\n";
  auto rows = detail::report_rows(rep, [](const std::string& kind, const ReportCell& c) {
    if (kind == "mean") return detail::fmt15(c.mean);
    if (kind == "sharpe") return detail::fmt15(c.sharpe);
    return (c.lowest_std ? "*" : "") + detail::fmt15(c.std);
  });
  const auto joint_col = detail::levene_column(rep, false);
  const auto div_col = detail::levene_column(rep, true);
  for (const auto& row : rep.levene) {
    std::vector<std::string> r{"levene_p", std::to_string(row.size)};
    for (Strategy s : rep.columns) {
      if (row.joint && joint_col == s)
        r.push_back(detail::fmt15(row.joint->p));
      else if (row.division && div_col == s)
        r.push_back(detail::fmt15(row.division->p));
      else
        r.push_back("");
    }
    rows.push_back(std::move(r));
  }
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + r[i];
    out += "\n";
  }
  return out;
}

/// Aligned plain-text rendering in the familiar layout: one block of rows per
/// statistic, one row per portfolio size, '*' on the lowest std.
inline std::string report_text(const Report& rep) {
  std::vector<std::string> header{"", ""};
  for (Strategy s : rep.columns) header.push_back(to_string(s));
  std::vector<std::vector<std::string>> lines;  // empty inner vector = section title placeholder
  std::vector<std::string> titles;
  auto section = [&](const std::string& t) {
    titles.push_back(t);
    lines.push_back({});
  };
  auto body = detail::report_rows(rep, [](const std::string& kind, const ReportCell& c) {
    if (kind == "mean") return detail::fmt_fixed(c.mean, 2);
    if (kind == "sharpe") return detail::fmt_fixed(c.sharpe, 2);
    if (!c.std_defined) return std::string("0 (undefined)");
    return (c.lowest_std ? "*" : "") + detail::fmt_fixed(c.std, 2);
  });
  const char* names[] = {"Mean return", "Std. Dev.", "Sharpe Ratio"};
  for (std::size_t block = 0; block < 3; ++block) {
    section(names[block]);
    for (std::size_t i = 0; i < rep.sizes.size(); ++i) {
      auto row = body[block * rep.sizes.size() + i];
      row[0] = "";
      row[1] = "(" + row[1] + "-stock)";
      lines.push_back(std::move(row));
    }
  }
  if (rep.has_levene()) {
    section("Levene Tests");
    const auto joint_col = detail::levene_column(rep, false);
    const auto div_col = detail::levene_column(rep, true);
    for (const auto& row : rep.levene) {
      std::vector<std::string> r{"", "(" + std::to_string(row.size) + "-stock)"};
      for (Strategy s : rep.columns) {
        if (row.joint && joint_col == s)
          r.push_back(detail::fmt_p(row.joint->p));
        else if (row.division && div_col == s)
          r.push_back(detail::fmt_p(row.division->p));
        else
          r.push_back("");
      }
      lines.push_back(std::move(r));
    }
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& l : lines)
    for (std::size_t c = 0; c < l.size(); ++c) width[c] = std::max(width[c], l[c].size());
  width[0] = 0;
  auto emit = [&](const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const std::string& v = cells[c];
      if (c > 1) s += "  ";
      if (c == 1)
        s += v + std::string(width[c] - v.size(), ' ');
      else
        s += std::string(width[c] - v.size(), ' ') + v;
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s + "\n";
  };
  std::string out;
  if (!rep.title.empty()) out += rep.title + "\n";
  out += emit(header);
  std::size_t t = 0;
  for (const auto& l : lines) {
    if (l.empty())
      out += titles[t++] + "\n";
    else
      out += emit(l);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scatter data

inline std::vector<std::pair<double, double>> scatter_data(const SimulationSummary& s) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : s.replications) pts.emplace_back(r.return_pct, r.weekly_vol);
  return pts;
}

inline std::string scatter_csv(const SimulationSummary& s) {
  std::string out = "return_pct,weekly_vol\n";
  for (const auto& [ret, vol] : scatter_data(s)) out += detail::fmt15(ret) + "," + detail::fmt15(vol) + "\n";
  return out;
}

inline std::vector<std::pair<double, double>> parse_scatter_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::pair<double, double>> pts;
  bool header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto cells = detail::split_csv_line(line);
    if (!header) {
      if (cells != std::vector<std::string>{"return_pct", "weekly_vol"})
        throw Error(ErrorKind::MissingColumn, "scatter CSV header must be return_pct,weekly_vol");
      header = true;
      continue;
    }
    const std::string at = "scatter CSV line " + std::to_string(line_no);
    if (cells.size() != 2) throw Error(ErrorKind::ParseError, at + ": expected 2 fields");
    pts.emplace_back(detail::parse_double(cells[0], at + ", return_pct"), detail::parse_double(cells[1], at + ", weekly_vol"));
  }
  if (!header) throw Error(ErrorKind::MissingColumn, "scatter CSV has no header");
  return pts;
}

}  // namespace splitfolio
