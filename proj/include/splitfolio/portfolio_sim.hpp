#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "splitfolio/clustering.hpp"
#include "splitfolio/detail/format.hpp"
#include "splitfolio/detail/random.hpp"
#include "splitfolio/error.hpp"
#include "splitfolio/market_data.hpp"

namespace splitfolio {

enum class Strategy { Random, Industry, Cluster, ClusterDominant, ClusterNonDominant };

inline const std::vector<Strategy>& all_strategies() {
  static const std::vector<Strategy> all{Strategy::Random, Strategy::Industry, Strategy::Cluster, Strategy::ClusterDominant,
                                         Strategy::ClusterNonDominant};
  return all;
}

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::Random: return "random";
    case Strategy::Industry: return "industry";
    case Strategy::Cluster: return "cluster";
    case Strategy::ClusterDominant: return "cluster-dominant";
    case Strategy::ClusterNonDominant: return "cluster-nondominant";
  }
  return "?";
}

inline Strategy parse_strategy(const std::string& text) {
  for (auto s : all_strategies())
    if (to_string(s) == text) return s;
  throw Error(ErrorKind::InvalidParams, "unknown strategy '" + text + "'");
}

struct StrategySpec {
  Strategy kind = Strategy::Random;
  std::size_t size = 2;
  std::size_t replications = 1000;
  std::uint64_t seed = 0;

  void validate() const {
    if (size < 2) throw Error(ErrorKind::InvalidParams, "portfolio size must be >= 2");
    if (replications < 1) throw Error(ErrorKind::InvalidParams, "replications must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Samplers. Every sampler returns indices into the simulation universe.

/// `size` members drawn uniformly without replacement from 0..n-1.
inline std::vector<std::size_t> sample_random(std::size_t n, std::size_t size, detail::Rng& rng) {
  if (size > n)
    throw Error(ErrorKind::UniverseTooSmall, "cannot draw " + std::to_string(size) + " stocks from " + std::to_string(n));
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return detail::sample_without_replacement<std::size_t>(all, size, rng);
}

/// How many stocks each group contributes: every group gets the quotient
/// size / #groups and a uniformly chosen set of `remainder` groups one more.
/// With fewer stocks than groups the quotient is zero, so `size` distinct
/// groups contribute one stock each.
inline std::vector<std::size_t> group_allocation(std::size_t groups, std::size_t size, detail::Rng& rng) {
  if (groups == 0) throw Error(ErrorKind::InvalidParams, "no groups to sample from");
  std::vector<std::size_t> alloc(groups, size / groups);
  std::vector<std::size_t> ids(groups);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  for (auto g : detail::sample_without_replacement<std::size_t>(ids, size % groups, rng)) ++alloc[g];
  return alloc;
}

inline std::vector<std::size_t> sample_by_groups(const Grouping& groups, std::size_t size, detail::Rng& rng,
                                                 const std::vector<std::string>& names = {}) {
  std::size_t total = 0;
  for (const auto& g : groups) total += g.size();
  if (total < size)
    throw Error(ErrorKind::UniverseTooSmall, "groups hold " + std::to_string(total) + " stocks, " + std::to_string(size) + " requested");
  const auto alloc = group_allocation(groups.size(), size, rng);
  std::vector<std::size_t> out;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (alloc[g] > groups[g].size())
      throw Error(ErrorKind::GroupTooSmall, "group " + (g < names.size() ? names[g] : std::to_string(g + 1)) + " has " +
                                                std::to_string(groups[g].size()) + " stocks, " + std::to_string(alloc[g]) + " needed");
    for (auto t : detail::sample_without_replacement<std::size_t>(groups[g], alloc[g], rng)) out.push_back(t);
  }
  return out;
}

/// ceil(size / 2) seed clusters drawn without replacement; each contributes
/// one stock from itself and one from its partner (the last pair only its
/// own stock when size is odd). Stocks never repeat, even when several
/// seeds share a partner. With more pairs needed than clusters, the draw
/// falls back to the quotient/remainder rule over clusters.
inline std::vector<std::size_t> sample_by_cluster_pairs(const Grouping& clusters, const PairingMap& partner, std::size_t size,
                                                        detail::Rng& rng) {
  const std::size_t k = clusters.size();
  if (k < 2) throw Error(ErrorKind::SingleCluster, "cluster pairs need at least two clusters");
  if (partner.size() != k) throw Error(ErrorKind::DimensionMismatch, "pairing does not match the clusters");
  const std::size_t pairs = (size + 1) / 2;
  if (pairs > k) return sample_by_groups(clusters, size, rng);

  std::vector<std::size_t> ids(k);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  const auto seeds = detail::sample_without_replacement<std::size_t>(ids, pairs, rng);
  std::vector<std::vector<bool>> taken(k);
  for (std::size_t c = 0; c < k; ++c) taken[c].assign(clusters[c].size(), false);
  auto draw = [&](std::size_t c) {
    std::vector<std::size_t> free;
    for (std::size_t q = 0; q < clusters[c].size(); ++q)
      if (!taken[c][q]) free.push_back(q);
    if (free.empty())
      throw Error(ErrorKind::ClusterTooSmall, "cluster " + std::to_string(c + 1) + " has no stock left to draw");
    const auto q = free[detail::uniform_index(rng, free.size())];
    taken[c][q] = true;
    return clusters[c][q];
  };
  std::vector<std::size_t> out;
  for (std::size_t p = 0; p < pairs; ++p) {
    out.push_back(draw(seeds[p]));
    if (out.size() < size) out.push_back(draw(partner[seeds[p]] - 1));
  }
  return out;
}

/// Equal-weighted portfolio return: the mean of constituent returns.
inline double portfolio_period_return(std::span<const std::size_t> members, std::span<const double> returns) {
  if (members.empty()) throw Error(ErrorKind::InvalidParams, "empty portfolio");
  double sum = 0.0;
  for (auto t : members) {
    if (t >= returns.size() || std::isnan(returns[t]))
      throw Error(ErrorKind::MissingReturn, "no period return for universe member " + std::to_string(t));
    sum += returns[t];
  }
  return sum / static_cast<double>(members.size());
}

// ---------------------------------------------------------------------------
// Simulation inputs and runs

/// Everything a run needs, indexed by universe member.
struct SimulationInputs {
  std::vector<std::string> tickers;    ///< labels, e.g. "BHP_M"
  std::vector<std::string> industry;   ///< industry code per member
  std::vector<double> period_returns;  ///< test-period return in percent
  Eigen::MatrixXd weekly;              ///< test-period weekly returns, weeks x members
  std::optional<ClusterAssignment> clusters;  ///< taxa listed in universe order
};

/// Test-period inputs for the tickers named by `labels` (usually the taxa of
/// a cluster assignment built on the model period).
inline SimulationInputs make_inputs(const ReturnMatrix& returns, const PeriodSpec& test_period,
                                    const std::vector<std::string>& labels) {
  std::map<std::string, std::size_t> column;
  for (std::size_t k = 0; k < returns.tickers.size(); ++k) column[returns.tickers[k].label()] = k;
  const auto [first, last] = period_rows(returns, test_period);
  if (last <= first) throw Error(ErrorKind::EmptyPeriod, "no weeks fall in period " + std::to_string(test_period.index));
  SimulationInputs in;
  in.weekly.resize(last - first, static_cast<Eigen::Index>(labels.size()));
  for (std::size_t m = 0; m < labels.size(); ++m) {
    const auto it = column.find(labels[m]);
    if (it == column.end()) throw Error(ErrorKind::MissingReturn, "ticker " + labels[m] + " is not in the return data");
    const auto k = it->second;
    in.tickers.push_back(labels[m]);
    in.industry.push_back(returns.tickers[k].industry);
    try {
      in.period_returns.push_back(period_return(returns, test_period, k));
    } catch (const Error& e) {
      throw Error(ErrorKind::MissingReturn, e.detail());
    }
    in.weekly.col(static_cast<Eigen::Index>(m)) = returns.values.block(first, static_cast<Eigen::Index>(k), last - first, 1);
  }
  return in;
}

struct Replication {
  std::size_t index = 0;
  std::vector<std::size_t> members;
  double return_pct = 0.0;
  double weekly_vol = 0.0;
};

struct SimulationSummary {
  Strategy kind = Strategy::Random;
  std::size_t size = 0;
  std::uint64_t seed = 0;
  std::vector<Replication> replications;
  double mean_return = 0.0;
  double std_return = 0.0;  ///< sample standard deviation; 0 when undefined
  double sharpe = 0.0;      ///< mean / std; 0 when std is 0 or undefined
  double mean_weekly_vol = 0.0;
  bool std_defined = false;
};

namespace detail {

inline double sorted_mean(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// Sample standard deviation computed from a sorted copy, so the result
/// does not depend on the input order.
inline double sorted_sample_std(std::vector<double> v) {
  if (v.size() < 2) return 0.0;
  std::sort(v.begin(), v.end());
  const double mean = sorted_mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline std::size_t thread_budget() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SPLITFOLIO_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min(n, static_cast<std::size_t>(cap));
  }
  return n;
}

}  // namespace detail

/// Aggregates from per-replication results; independent of their order.
inline void summarize_replications(SimulationSummary& s) {
  std::vector<double> ret, vol;
  for (const auto& r : s.replications) {
    ret.push_back(r.return_pct);
    vol.push_back(r.weekly_vol);
  }
  s.mean_return = detail::sorted_mean(ret);
  s.std_defined = ret.size() >= 2;
  s.std_return = detail::sorted_sample_std(ret);
  s.sharpe = s.std_return > 0.0 ? s.mean_return / s.std_return : 0.0;
  s.mean_weekly_vol = detail::sorted_mean(vol);
}

/// Standard deviation of the equal-weighted portfolio's weekly returns.
inline double portfolio_weekly_vol(const Eigen::MatrixXd& weekly, std::span<const std::size_t> members) {
  std::vector<double> series(static_cast<std::size_t>(weekly.rows()), 0.0);
  for (Eigen::Index t = 0; t < weekly.rows(); ++t) {
    double s = 0.0;
    for (auto m : members) s += weekly(t, static_cast<Eigen::Index>(m));
    series[static_cast<std::size_t>(t)] = s / static_cast<double>(members.size());
  }
  if (series.size() < 2) return 0.0;
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(series.size());
  double ss = 0.0;
  for (double x : series) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(series.size() - 1));
}

/// A strategy's sampling plan, fixed before any replication runs.
struct SamplingPlan {
  Strategy kind = Strategy::Random;
  std::size_t universe = 0;
  Grouping groups;
  std::vector<std::string> group_names;
  PairingMap partner;  ///< empty: sample groups by quotient/remainder
};

/// The dominant (or non-dominant) sub-clusters after merging those smaller
/// than the portfolio size, with pairings computed on the merged arcs.
inline SamplingPlan division_plan(const ClusterAssignment& a, const std::vector<std::string>& industry, bool dominant,
                                  std::size_t size) {
  const auto div = split_dominant(a, industry);
  const auto parts = division_groups(a, div, dominant);
  // merge by cluster index so the merged groups stay runs of whole clusters
  Grouping index_groups;
  for (std::size_t c = 0; c < parts.size(); ++c)
    if (!parts[c].empty()) {
      index_groups.emplace_back();
      for (std::size_t q = 0; q < parts[c].size(); ++q) index_groups.back().push_back(c);
    }
  SamplingPlan plan;
  plan.kind = dominant ? Strategy::ClusterDominant : Strategy::ClusterNonDominant;
  plan.universe = a.taxa.size();
  std::vector<std::size_t> group_of_cluster(parts.size(), 0);
  for (const auto& g : merge_small(index_groups, size)) {
    std::set<std::size_t> clusters(g.begin(), g.end());
    plan.groups.emplace_back();
    std::string name;
    for (auto c : clusters) {
      group_of_cluster[c] = plan.groups.size();
      plan.groups.back().insert(plan.groups.back().end(), parts[c].begin(), parts[c].end());
      name += (name.empty() ? "" : "+") + std::to_string(c + 1);
    }
    plan.group_names.push_back((dominant ? "dominant " : "non-dominant ") + name);
  }
  if (plan.groups.empty())
    throw Error(ErrorKind::GroupTooSmall, std::string("no cluster has ") + (dominant ? "dominant" : "non-dominant") + " stocks");
  if (plan.groups.size() >= 2) {
    // coarsen the assignment: clusters without members join the group of
    // the preceding cluster so every merged group is one arc
    const auto members = cluster_members(a);
    std::size_t last = 0;
    for (std::size_t c = 0; c < members.size(); ++c)
      if (group_of_cluster[c] != 0) {
        last = group_of_cluster[c];
        break;
      }
    std::vector<std::size_t> cluster_of(a.taxa.size(), 0);
    for (std::size_t c = 0; c < members.size(); ++c) {
      if (group_of_cluster[c] != 0) last = group_of_cluster[c];
      for (auto t : members[c]) cluster_of[t] = last;
    }
    const auto coarse = assignment_from_membership(a.taxa, a.ordering, cluster_of);
    if (validate_assignment(coarse).ok && coarse.cluster_count() == plan.groups.size()) plan.partner = pair_clusters(coarse);
  }
  return plan;
}

inline SamplingPlan make_plan(Strategy kind, const SimulationInputs& in, std::size_t size) {
  SamplingPlan plan;
  plan.kind = kind;
  plan.universe = in.tickers.size();
  switch (kind) {
    case Strategy::Random: break;
    case Strategy::Industry: {
      std::map<std::string, std::vector<std::size_t>> by_code;
      for (std::size_t m = 0; m < in.industry.size(); ++m) by_code[in.industry[m]].push_back(m);
      for (auto& [code, members] : by_code) {
        plan.groups.push_back(std::move(members));
        plan.group_names.push_back(code);
      }
      break;
    }
    case Strategy::Cluster:
    case Strategy::ClusterDominant:
    case Strategy::ClusterNonDominant: {
      if (!in.clusters) throw Error(ErrorKind::InvalidParams, to_string(kind) + " strategy needs a cluster assignment");
      const auto& a = *in.clusters;
      require_valid(a);
      if (a.taxa != in.tickers) throw Error(ErrorKind::DimensionMismatch, "cluster assignment taxa do not match the universe");
      if (kind == Strategy::Cluster) {
        plan.groups = cluster_members(a);
        for (std::size_t c = 1; c <= plan.groups.size(); ++c) plan.group_names.push_back("cluster " + std::to_string(c));
        if (plan.groups.size() >= 2) plan.partner = pair_clusters(a);
      } else {
        plan = division_plan(a, in.industry, kind == Strategy::ClusterDominant, size);
      }
      break;
    }
  }
  return plan;
}

inline std::vector<std::size_t> draw_portfolio(const SamplingPlan& plan, std::size_t size, detail::Rng& rng) {
  if (plan.kind == Strategy::Random) return sample_random(plan.universe, size, rng);
  if (!plan.partner.empty()) return sample_by_cluster_pairs(plan.groups, plan.partner, size, rng);
  return sample_by_groups(plan.groups, size, rng, plan.group_names);
}

/// Seed of replication r: a function of (master seed, strategy, size, r)
/// only, so any scheduling of replications gives the same draws.
inline std::uint64_t replication_seed(const StrategySpec& spec, std::size_t r) {
  const std::uint64_t stream = (static_cast<std::uint64_t>(spec.kind) << 32) | static_cast<std::uint64_t>(spec.size);
  return detail::derive_seed(spec.seed, stream, r);
}

inline SimulationSummary run_simulation(const StrategySpec& spec, const SimulationInputs& in) {
  spec.validate();
  const auto plan = make_plan(spec.kind, in, spec.size);
  SimulationSummary out;
  out.kind = spec.kind;
  out.size = spec.size;
  out.seed = spec.seed;
  out.replications.resize(spec.replications);

  std::mutex failure_lock;
  std::size_t failed_at = spec.replications;
  std::exception_ptr failure;
  auto worker = [&](std::size_t start, std::size_t stride) {
    for (std::size_t r = start; r < spec.replications; r += stride) {
      try {
        detail::Rng rng(replication_seed(spec, r));
        auto& rep = out.replications[r];
        rep.index = r;
        rep.members = draw_portfolio(plan, spec.size, rng);
        rep.return_pct = portfolio_period_return(rep.members, in.period_returns);
        rep.weekly_vol = portfolio_weekly_vol(in.weekly, rep.members);
      } catch (const Error& e) {
        std::lock_guard lock(failure_lock);
        if (r < failed_at) {
          failed_at = r;
          failure = std::make_exception_ptr(Error(e.kind(), "replication " + std::to_string(r) + ": " + e.detail()));
        }
        return;
      }
    }
  };
  const std::size_t threads = std::min(detail::thread_budget(), spec.replications);
  if (threads <= 1) {
    worker(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker, t, threads);
  }
  if (failure) std::rethrow_exception(failure);
  summarize_replications(out);
  return out;
}

// ---------------------------------------------------------------------------
// Raw replication output

inline std::string replications_csv(const std::vector<SimulationSummary>& runs) {
  std::string out = "strategy,size,replication,return_pct,weekly_vol\n";
  for (const auto& s : runs)
    for (const auto& r : s.replications)
      out += to_string(s.kind) + "," + std::to_string(s.size) + "," + std::to_string(r.index) + "," +
             detail::fmt15(r.return_pct) + "," + detail::fmt15(r.weekly_vol) + "\n";
  return out;
}

/// Rebuilds per-run summaries (aggregates included) from the raw CSV; runs
/// appear in first-seen order. Lines starting with '#' are ignored.
inline std::vector<SimulationSummary> parse_replications_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<SimulationSummary> runs;
  std::map<std::pair<Strategy, std::size_t>, std::size_t> where;
  bool header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto cells = detail::split_csv_line(line);
    if (!header) {
      if (cells != std::vector<std::string>{"strategy", "size", "replication", "return_pct", "weekly_vol"})
        throw Error(ErrorKind::MissingColumn, "replication CSV header must be strategy,size,replication,return_pct,weekly_vol");
      header = true;
      continue;
    }
    const std::string at = "replication CSV line " + std::to_string(line_no);
    if (cells.size() != 5) throw Error(ErrorKind::ParseError, at + ": expected 5 fields");
    const auto kind = parse_strategy(cells[0]);
    const auto size = static_cast<std::size_t>(detail::parse_double(cells[1], at + ", size"));
    auto [it, fresh] = where.try_emplace({kind, size}, runs.size());
    if (fresh) {
      runs.emplace_back();
      runs.back().kind = kind;
      runs.back().size = size;
    }
    Replication r;
    r.index = static_cast<std::size_t>(detail::parse_double(cells[2], at + ", replication"));
    r.return_pct = detail::parse_double(cells[3], at + ", return_pct");
    r.weekly_vol = detail::parse_double(cells[4], at + ", weekly_vol");
    runs[it->second].replications.push_back(r);
  }
  if (!header) throw Error(ErrorKind::MissingColumn, "replication CSV has no header");
  for (auto& s : runs) summarize_replications(s);
  return runs;
}

// ---------------------------------------------------------------------------
// Configuration

struct SimulationConfig {
  std::vector<Strategy> strategies = all_strategies();
  std::vector<std::size_t> sizes = {2, 4, 8};
  std::size_t replications = 1000;
  std::optional<std::uint64_t> seed;
  int model_period = 1;
  int test_period = 2;
};

inline SimulationConfig parse_simulation_config(const nlohmann::json& j) {
  SimulationConfig c;
  try {
    if (j.contains("strategies")) {
      c.strategies.clear();
      for (const auto& s : j.at("strategies")) c.strategies.push_back(parse_strategy(s.get<std::string>()));
    }
    if (j.contains("sizes")) c.sizes = j.at("sizes").get<std::vector<std::size_t>>();
    if (j.contains("replications")) c.replications = j.at("replications").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("period_mapping")) {
      c.model_period = j.at("period_mapping").at("model").get<int>();
      c.test_period = j.at("period_mapping").at("test").get<int>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("simulation config: ") + e.what());
  }
  if (c.strategies.empty()) throw Error(ErrorKind::InvalidParams, "simulation config lists no strategies");
  if (c.sizes.empty()) throw Error(ErrorKind::InvalidParams, "simulation config lists no sizes");
  for (auto s : c.sizes)
    if (s < 2) throw Error(ErrorKind::InvalidParams, "portfolio sizes must be >= 2");
  if (c.replications < 1) throw Error(ErrorKind::InvalidParams, "replications must be >= 1");
  return c;
}

}  // namespace splitfolio
