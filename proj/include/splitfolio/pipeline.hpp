#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "splitfolio/clustering.hpp"
#include "splitfolio/correlation.hpp"
#include "splitfolio/detail/format.hpp"
#include "splitfolio/detail/hash.hpp"
#include "splitfolio/error.hpp"
#include "splitfolio/market_data.hpp"
#include "splitfolio/neighbor_net.hpp"
#include "splitfolio/portfolio_sim.hpp"
#include "splitfolio/split_weights.hpp"
#include "splitfolio/splits_graph.hpp"
#include "splitfolio/stats.hpp"

/// File-based stages. Each stage maps the text of its input artifacts to the
/// text of its outputs and records the content hash of those inputs, so a
/// directory of artifacts can be checked for a consistent chain.
namespace splitfolio::pipeline {

namespace files {
inline constexpr const char* prices = "prices.csv";
inline constexpr const char* config = "config.json";
inline constexpr const char* returns = "returns.json";
inline constexpr const char* distances = "distances.csv";
inline constexpr const char* splits = "splits.json";
inline constexpr const char* nexus = "network.nex";
inline constexpr const char* graph = "graph.json";
inline constexpr const char* svg = "graph.svg";
inline constexpr const char* clusters = "clusters.json";
inline constexpr const char* replications = "replications.csv";
inline constexpr const char* report_csv = "report.csv";
inline constexpr const char* report_txt = "report.txt";
}  // namespace files

/// Hash of one or more input artifacts, in order.
inline std::string hash_of(std::initializer_list<std::string_view> inputs) {
  if (inputs.size() == 1) return detail::content_hash(*inputs.begin());
  std::string joined;
  for (auto s : inputs) {
    joined += detail::content_hash(s);
    joined += '\n';
  }
  return detail::content_hash(joined);
}

namespace detail {

/// `# key=value` header lines of a CSV artifact.
inline std::map<std::string, std::string> csv_meta(std::string_view text) {
  std::map<std::string, std::string> meta;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line) && line.rfind("# ", 0) == 0) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) meta[line.substr(2, eq - 2)] = line.substr(eq + 1);
  }
  return meta;
}

inline std::string strip_comment_lines(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line, out;
  while (std::getline(in, line))
    if (line.rfind("#", 0) != 0) out += line + "\n";
  return out;
}

inline nlohmann::json parse_json(std::string_view text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, what + ": " + e.what());
  }
}

inline std::string dump(const nlohmann::json& j) { return j.dump(1) + "\n"; }

}  // namespace detail

// ---------------------------------------------------------------------------
// synth

struct SynthParams {
  std::vector<CorrelationBlock> blocks = {{50, 0.8}, {50, 0.8}};
  std::size_t weeks = 200;
  std::uint64_t seed = 42;
  std::size_t periods = 2;
};

/// "50:0.8,50:0.3" -> two independent blocks of 50 with intra-block correlations 0.8 and 0.3.
inline std::vector<CorrelationBlock> parse_blocks(const std::string& text) {
  std::vector<CorrelationBlock> blocks;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw Error(ErrorKind::InvalidParams, "block '" + item + "' must read size:rho");
    const double size = splitfolio::detail::parse_double(item.substr(0, colon), "block size");
    if (size < 1 || size != std::floor(size)) throw Error(ErrorKind::InvalidParams, "block size must be a positive integer");
    blocks.push_back({static_cast<std::size_t>(size), splitfolio::detail::parse_double(item.substr(colon + 1), "block rho")});
  }
  if (blocks.empty()) throw Error(ErrorKind::InvalidParams, "no blocks given");
  return blocks;
}

struct SynthOutput {
  std::string prices_csv;
  std::string config_json;
};

inline SynthOutput synth(const SynthParams& p) {
  SynthOptions opt;
  opt.periods = p.periods;
  const auto panel = synth_panel(p.blocks, p.weeks, p.seed, opt);
  nlohmann::json cfg = {{"periods", periods_to_json(panel.periods)}, {"industries", opt.industries}};
  return {price_panel_csv(panel), detail::dump(cfg)};
}

// ---------------------------------------------------------------------------
// ingest

struct ReturnsArtifact {
  ReturnMatrix returns;
  std::vector<PeriodSpec> periods;
  std::string input_hash;

  const PeriodSpec& period(int index) const {
    for (const auto& p : periods)
      if (p.index == index) return p;
    throw Error(ErrorKind::InvalidPeriod, "period " + std::to_string(index) + " is not configured");
  }
};

inline std::string ingest(std::string_view prices_csv, std::string_view config_json) {
  const auto cfg = parse_panel_config(std::string(config_json));
  const auto panel = parse_price_panel(std::string(prices_csv), cfg);
  const auto r = weekly_returns(panel);
  nlohmann::json tickers = nlohmann::json::array(), dates = nlohmann::json::array(), values = nlohmann::json::array();
  for (const auto& t : r.tickers) tickers.push_back(t.label());
  for (const auto& d : r.dates) dates.push_back(format_date(d));
  for (Eigen::Index t = 0; t < r.values.rows(); ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < r.values.cols(); ++k) {
      const double v = r.values(t, k);
      row.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
    }
    values.push_back(std::move(row));
  }
  return detail::dump({{"schema", "splitfolio.returns/1"},
                       {"input_hash", hash_of({prices_csv, config_json})},
                       {"tickers", tickers},
                       {"dates", dates},
                       {"periods", periods_to_json(panel.periods)},
                       {"values", values}});
}

inline ReturnsArtifact parse_returns(std::string_view text) {
  const auto j = detail::parse_json(text, "returns JSON");
  ReturnsArtifact a;
  try {
    if (j.at("schema").get<std::string>() != "splitfolio.returns/1") throw Error(ErrorKind::ParseError, "unknown returns schema");
    a.input_hash = j.value("input_hash", "");
    const auto labels = j.at("tickers").get<std::vector<std::string>>();
    for (std::size_t k = 0; k < labels.size(); ++k)
      a.returns.tickers.push_back(parse_ticker(labels[k], std::nullopt, "returns JSON tickers[" + std::to_string(k) + "]"));
    for (const auto& d : j.at("dates")) a.returns.dates.push_back(parse_date(d.get<std::string>(), "returns JSON dates"));
    a.periods = parse_periods_json(j.at("periods"));
    const auto& values = j.at("values");
    if (values.size() != a.returns.dates.size()) throw Error(ErrorKind::DimensionMismatch, "returns JSON: one row per date required");
    a.returns.values.resize(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(labels.size()));
    for (std::size_t t = 0; t < values.size(); ++t) {
      if (values[t].size() != labels.size())
        throw Error(ErrorKind::DimensionMismatch, "returns JSON: row " + std::to_string(t) + " has the wrong width");
      for (std::size_t k = 0; k < labels.size(); ++k)
        a.returns.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) =
            values[t][k].is_null() ? std::nan("") : values[t][k].get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("returns JSON: ") + e.what());
  }
  return a;
}

// ---------------------------------------------------------------------------
// distances

inline std::string distances(std::string_view returns_json, int period) {
  const auto a = parse_returns(returns_json);
  const auto d = to_distance(estimate_correlation(a.returns, a.period(period)));
  return "# input_hash=" + hash_of({returns_json}) + "\n# period=" + std::to_string(period) + "\n" + distance_csv(d);
}

inline DistanceMatrix parse_distances(std::string_view text) { return parse_distance_csv(detail::strip_comment_lines(text)); }

// ---------------------------------------------------------------------------
// nnet

struct NnetOutput {
  std::string splits_json;
  std::string nexus;
};

inline NnetOutput nnet(std::string_view distances_csv, const ReductionParams& params = {}, double prune_below = 1e-8) {
  params.validate();
  const auto d = parse_distances(distances_csv);
  if (d.size() < 3) throw Error(ErrorKind::UniverseTooSmall, "Neighbor-Net needs at least 3 taxa, got " + std::to_string(d.size()));
  const auto ordering = neighbor_net_ordering(d.d, params);
  const auto system = prune(fit_split_system(d.d, d.labels, ordering), prune_below);
  auto j = split_system_to_json(system);
  j["input_hash"] = hash_of({distances_csv});
  auto nex = export_nexus(system);
  nex.insert(nex.find('\n') + 1, "[input_hash=" + hash_of({distances_csv}) + "]\n");
  return {detail::dump(j), nex};
}

// ---------------------------------------------------------------------------
// graph

struct GraphOutput {
  std::string graph_json;
  std::string svg;
};

/// Industry code per taxon: the `_<code>` suffix of its label.
inline std::map<std::string, std::string> industries_of(const std::vector<std::string>& taxa) {
  std::map<std::string, std::string> out;
  for (const auto& t : taxa) {
    const auto cut = t.rfind('_');
    out[t] = cut == std::string::npos ? std::string() : t.substr(cut + 1);
  }
  return out;
}

inline GraphOutput graph(std::string_view splits_json) {
  const auto system = split_system_from_json(detail::parse_json(splits_json, "split system JSON"));
  const auto g = layout(system);
  return {export_json(system, g, industries_of(system.taxa), hash_of({splits_json})), render_svg(system, g)};
}

// ---------------------------------------------------------------------------
// clusters

inline std::string clusters_suggest(std::string_view graph_json, std::size_t k) {
  const auto g = graph_from_json(detail::parse_json(graph_json, "graph JSON"));
  return detail::dump(assignment_to_json(suggest_clusters(g.system, k, hash_of({graph_json}))));
}

/// Structural validation, plus agreement with the graph it claims to come
/// from when that graph is supplied.
inline AssignmentReport clusters_validate(std::string_view clusters_json, std::optional<std::string_view> graph_json = {}) {
  const auto a = assignment_from_json(detail::parse_json(clusters_json, "cluster assignment JSON"));
  auto rep = validate_assignment(a);
  if (graph_json) {
    const auto g = graph_from_json(detail::parse_json(*graph_json, "graph JSON"));
    if (a.graph_hash != hash_of({*graph_json})) {
      rep.ok = false;
      rep.violations.push_back("graph_hash " + a.graph_hash + " does not match the graph (" + hash_of({*graph_json}) + ")");
    }
    if (a.taxa != g.system.taxa || a.ordering.order != g.system.ordering.order) {
      rep.ok = false;
      rep.violations.push_back("taxa or ordering differ from the graph");
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// simulate

inline std::string simulate(std::string_view returns_json, std::string_view clusters_json, const SimulationConfig& cfg) {
  if (!cfg.seed) throw Error(ErrorKind::InvalidParams, "simulation needs a seed");
  const auto r = parse_returns(returns_json);
  const auto a = assignment_from_json(detail::parse_json(clusters_json, "cluster assignment JSON"));
  require_valid(a);
  auto in = make_inputs(r.returns, r.period(cfg.test_period), a.taxa);
  in.clusters = a;
  std::vector<SimulationSummary> runs;
  for (Strategy s : cfg.strategies)
    for (std::size_t size : cfg.sizes) {
      StrategySpec spec{s, size, cfg.replications, *cfg.seed};
      try {
        runs.push_back(run_simulation(spec, in));
      } catch (const Error& e) {
        throw Error(e.kind(), to_string(s) + ", size " + std::to_string(size) + ": " + e.detail());
      }
    }
  return "# input_hash=" + hash_of({returns_json, clusters_json}) + "\n# model_period=" + std::to_string(cfg.model_period) +
         "\n# test_period=" + std::to_string(cfg.test_period) + "\n# seed=" + std::to_string(*cfg.seed) + "\n" +
         replications_csv(runs);
}

// ---------------------------------------------------------------------------
// report

struct ReportOutput {
  std::string csv;
  std::string text;
  std::map<std::string, std::string> scatter;  ///< file name -> CSV
};

inline ReportOutput report(std::string_view replications, Centering centering = Centering::Mean) {
  const auto meta = detail::csv_meta(replications);
  const auto runs = parse_replications_csv(std::string(replications));
  const std::string title = meta.contains("test_period") ? "Period " + meta.at("test_period") : "";
  const auto rep = summarize(runs, report_levenes(runs, centering), title);
  const std::string head = "# input_hash=" + hash_of({replications}) + "\n# centering=" + to_string(centering) + "\n";
  ReportOutput out{head + report_csv(rep), report_text(rep), {}};
  for (const auto& s : runs)
    out.scatter["scatter_" + to_string(s.kind) + "_" + std::to_string(s.size) + ".csv"] =
        "# input_hash=" + hash_of({replications}) + "\n" + scatter_csv(s);
  return out;
}

// ---------------------------------------------------------------------------
// Chain checking over a directory of artifacts

struct ChainLink {
  std::string artifact;
  std::string recorded;  ///< hash stored in the artifact
  std::string actual;    ///< hash of the inputs now on disk
  bool ok() const { return recorded == actual; }
};

/// Every link whose artifact and inputs are all present in `dir`.
inline std::vector<ChainLink> chain_links(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::map<std::string, std::string> text;
  for (const char* name : {files::prices, files::config, files::returns, files::distances, files::splits, files::graph,
                           files::clusters, files::replications, files::report_csv})
    if (fs::exists(dir / name)) text[name] = splitfolio::detail::read_file((dir / name).string());
  auto has = [&](std::initializer_list<const char*> names) {
    for (auto n : names)
      if (!text.contains(n)) return false;
    return true;
  };
  auto json_hash = [&](const char* name, const char* key) {
    return detail::parse_json(text.at(name), name).value(key, std::string());
  };
  auto csv_hash = [&](const char* name) {
    const auto m = detail::csv_meta(text.at(name));
    return m.contains("input_hash") ? m.at("input_hash") : std::string();
  };
  std::vector<ChainLink> links;
  if (has({files::returns, files::prices, files::config}))
    links.push_back({files::returns, json_hash(files::returns, "input_hash"), hash_of({text[files::prices], text[files::config]})});
  if (has({files::distances, files::returns}))
    links.push_back({files::distances, csv_hash(files::distances), hash_of({text[files::returns]})});
  if (has({files::splits, files::distances}))
    links.push_back({files::splits, json_hash(files::splits, "input_hash"), hash_of({text[files::distances]})});
  if (has({files::graph, files::splits}))
    links.push_back({files::graph, json_hash(files::graph, "input_hash"), hash_of({text[files::splits]})});
  if (has({files::clusters, files::graph}))
    links.push_back({files::clusters, json_hash(files::clusters, "graph_hash"), hash_of({text[files::graph]})});
  if (has({files::replications, files::returns, files::clusters}))
    links.push_back({files::replications, csv_hash(files::replications), hash_of({text[files::returns], text[files::clusters]})});
  if (has({files::report_csv, files::replications}))
    links.push_back({files::report_csv, csv_hash(files::report_csv), hash_of({text[files::replications]})});
  return links;
}

/// Throws ChainMismatch naming the first artifact whose recorded input hash
/// disagrees with the inputs present alongside it.
inline void verify_chain(const std::filesystem::path& dir, std::optional<std::string> skip = {}) {
  for (const auto& l : chain_links(dir)) {
    if (skip && l.artifact == *skip) continue;
    if (!l.ok())
      throw Error(ErrorKind::ChainMismatch, (dir / l.artifact).string() + ": input_hash " + l.recorded +
                                                " does not match its inputs (" + l.actual + ")");
  }
}

}  // namespace splitfolio::pipeline
