// Command-line front end: one subcommand per pipeline stage, exchanging
// artifacts through a working directory.
//
//   splitfolio synth --out run --seed 42
//   splitfolio ingest --out run
//   splitfolio distances --out run --period 1
//   splitfolio nnet --out run
//   splitfolio graph --out run
//   splitfolio clusters-suggest --out run --k 2
//   splitfolio clusters-validate --out run
//   splitfolio simulate --out run --seed 7
//   splitfolio report --out run
//
// Exit status: 0 on success, 2 on invalid input or parameters, 1 on I/O or
// parse errors.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "splitfolio/pipeline.hpp"

namespace fs = std::filesystem;
using namespace splitfolio;

namespace {

std::string read_artifact(const fs::path& p) {
  if (!fs::exists(p)) throw Error(ErrorKind::Io, p.string() + ": no such file");
  return detail::read_file(p.string());
}

void write_artifact(const fs::path& p, const std::string& text) {
  detail::write_file(p.string(), text);
  std::cout << "wrote " << p.string() << "\n";
}

/// Runs `fn`, prefixing any library error with the artifact it concerns.
template <class Fn>
auto about(const fs::path& file, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), file.string() + ": " + e.detail());
  }
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> sizes;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const double v = detail::parse_double(item, "--sizes");
    if (v < 2 || v != std::floor(v)) throw Error(ErrorKind::InvalidParams, "--sizes entries must be integers >= 2");
    sizes.push_back(static_cast<std::size_t>(v));
  }
  if (sizes.empty()) throw Error(ErrorKind::InvalidParams, "--sizes is empty");
  return sizes;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Correlation-cluster portfolio selection with Neighbor-Net splits graphs"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string out = ".";
  app.add_option("--out", out, "Working directory for artifacts")->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic block-correlated market");
  pipeline::SynthParams sp;
  std::string blocks = "50:0.8,50:0.8";
  synth->add_option("--blocks", blocks, "Comma list of size:rho blocks")->capture_default_str();
  synth->add_option("--weeks", sp.weeks, "Weekly returns to generate")->capture_default_str();
  synth->add_option("--seed", sp.seed, "Random seed")->capture_default_str();
  synth->add_option("--periods", sp.periods, "Equal-length study periods")->capture_default_str();

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate a price panel and compute weekly returns");
  std::string prices_path, panel_config_path;
  ingest->add_option("--prices", prices_path, "Price CSV (default <out>/prices.csv)");
  ingest->add_option("--config", panel_config_path, "Period config JSON (default <out>/config.json)");

  // distances
  auto* dist = app.add_subcommand("distances", "Correlation distances for one period");
  int model_period = 1;
  dist->add_option("--period", model_period, "Period to estimate on")->capture_default_str();

  // nnet
  auto* nnet = app.add_subcommand("nnet", "Circular ordering and split weights");
  ReductionParams rp;
  double prune_eps = 1e-8;
  nnet->add_option("--alpha", rp.alpha, "Reduction weight alpha")->capture_default_str();
  nnet->add_option("--beta", rp.beta, "Reduction weight beta")->capture_default_str();
  nnet->add_option("--gamma", rp.gamma, "Reduction weight gamma")->capture_default_str();
  nnet->add_option("--prune", prune_eps, "Drop splits with weight <= eps")->capture_default_str();

  // graph
  auto* graph = app.add_subcommand("graph", "Planar splits graph layout, JSON and SVG");

  // clusters
  auto* suggest = app.add_subcommand("clusters-suggest", "Cut the circular ordering into k arcs");
  std::size_t k = 2;
  suggest->add_option("--k", k, "Number of clusters")->capture_default_str();
  auto* validate = app.add_subcommand("clusters-validate", "Check a cluster assignment");
  std::string clusters_path;
  validate->add_option("--clusters", clusters_path, "Assignment JSON (default <out>/clusters.json)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Monte Carlo portfolio replications");
  std::string sim_config_path, sizes_text;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  std::optional<int> test_period;
  sim->add_option("--config", sim_config_path, "Simulation config JSON");
  sim->add_option("--seed", seed, "Random seed (required here or in the config)");
  sim->add_option("--replications", reps, "Replications per strategy and size");
  sim->add_option("--sizes", sizes_text, "Portfolio sizes, e.g. 2,4,8");
  sim->add_option("--period", test_period, "Test period");
  sim->add_option("--clusters", clusters_path, "Assignment JSON (default <out>/clusters.json)");

  // report
  auto* report = app.add_subcommand("report", "Summary tables, Levene tests and scatter data");
  std::string centering = "mean";
  report->add_option("--centering", centering, "Levene centering: mean or median")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const fs::path dir(out);
  auto in_dir = [&](const std::string& given, const char* name) { return given.empty() ? dir / name : fs::path(given); };
  try {
    fs::create_directories(dir);
    if (*synth) {
      sp.blocks = pipeline::parse_blocks(blocks);
      const auto s = pipeline::synth(sp);
      write_artifact(dir / pipeline::files::prices, s.prices_csv);
      write_artifact(dir / pipeline::files::config, s.config_json);
    } else if (*ingest) {
      const auto pp = in_dir(prices_path, pipeline::files::prices);
      const auto cp = in_dir(panel_config_path, pipeline::files::config);
      const auto prices = read_artifact(pp);
      const auto cfg = read_artifact(cp);
      write_artifact(dir / pipeline::files::returns, about(pp, [&] { return pipeline::ingest(prices, cfg); }));
    } else if (*dist) {
      const auto p = dir / pipeline::files::returns;
      const auto text = read_artifact(p);
      write_artifact(dir / pipeline::files::distances, about(p, [&] { return pipeline::distances(text, model_period); }));
    } else if (*nnet) {
      const auto p = dir / pipeline::files::distances;
      const auto text = read_artifact(p);
      const auto r = about(p, [&] { return pipeline::nnet(text, rp, prune_eps); });
      write_artifact(dir / pipeline::files::splits, r.splits_json);
      write_artifact(dir / pipeline::files::nexus, r.nexus);
    } else if (*graph) {
      const auto p = dir / pipeline::files::splits;
      const auto text = read_artifact(p);
      const auto r = about(p, [&] { return pipeline::graph(text); });
      write_artifact(dir / pipeline::files::graph, r.graph_json);
      write_artifact(dir / pipeline::files::svg, r.svg);
    } else if (*suggest) {
      const auto p = dir / pipeline::files::graph;
      const auto text = read_artifact(p);
      write_artifact(dir / pipeline::files::clusters, about(p, [&] { return pipeline::clusters_suggest(text, k); }));
    } else if (*validate) {
      const auto p = in_dir(clusters_path, pipeline::files::clusters);
      const auto text = read_artifact(p);
      std::optional<std::string> graph_text;
      if (fs::exists(dir / pipeline::files::graph)) graph_text = read_artifact(dir / pipeline::files::graph);
      const auto rep = about(p, [&] {
        return graph_text ? pipeline::clusters_validate(text, std::string_view(*graph_text)) : pipeline::clusters_validate(text);
      });
      if (rep.ok) {
        std::cout << p.string() << ": valid\n";
        return 0;
      }
      for (const auto& v : rep.violations) std::cerr << p.string() << ": " << v << "\n";
      for (auto c : rep.offending_clusters) std::cerr << p.string() << ": offending cluster " << c << "\n";
      return 2;
    } else if (*sim) {
      SimulationConfig cfg;
      if (!sim_config_path.empty())
        cfg = about(sim_config_path, [&] {
          return parse_simulation_config(pipeline::detail::parse_json(read_artifact(sim_config_path), "simulation config"));
        });
      if (seed) cfg.seed = seed;
      if (reps) {
        if (*reps < 1) throw Error(ErrorKind::InvalidParams, "--replications must be >= 1");
        cfg.replications = *reps;
      }
      if (!sizes_text.empty()) cfg.sizes = parse_sizes(sizes_text);
      if (test_period) cfg.test_period = *test_period;
      if (!cfg.seed) throw Error(ErrorKind::InvalidParams, "simulate needs --seed or a seed in --config");
      const auto rp_path = dir / pipeline::files::returns;
      const auto cp = in_dir(clusters_path, pipeline::files::clusters);
      const auto returns = read_artifact(rp_path);
      const auto clusters = read_artifact(cp);
      write_artifact(dir / pipeline::files::replications,
                     about(cp, [&] { return pipeline::simulate(returns, clusters, cfg); }));
    } else if (*report) {
      const auto c = parse_centering(centering);
      pipeline::verify_chain(dir, std::string(pipeline::files::report_csv));
      const auto p = dir / pipeline::files::replications;
      const auto text = read_artifact(p);
      const auto r = about(p, [&] { return pipeline::report(text, c); });
      write_artifact(dir / pipeline::files::report_csv, r.csv);
      write_artifact(dir / pipeline::files::report_txt, r.text);
      for (const auto& [name, csv] : r.scatter) write_artifact(dir / name, csv);
      std::cout << "\n" << r.text;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_validation() ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
