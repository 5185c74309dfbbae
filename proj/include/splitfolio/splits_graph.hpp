#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <queue>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "splitfolio/detail/format.hpp"
#include "splitfolio/detail/random.hpp"
#include "splitfolio/error.hpp"
#include "splitfolio/split_weights.hpp"

namespace splitfolio {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct GraphEdge {
  std::size_t source = 0;
  std::size_t target = 0;
  std::size_t split = 0;  ///< index into SplitSystem::splits
  friend bool operator==(const GraphEdge&, const GraphEdge&) = default;
};

/// Planar splits graph. Every edge carries the split it realises; all edges
/// of one split are parallel translates of weight * direction(split).
struct GraphLayout {
  std::vector<Point> vertices;
  std::vector<GraphEdge> edges;
  std::vector<std::size_t> anchors;  ///< anchors[taxon] = vertex index
  friend bool operator==(const GraphLayout&, const GraphLayout&) = default;
};

namespace detail {

/// Direction of a split's edges: the angle of its arc midpoint, with taxa
/// at equal angles in ordering position.
inline Point split_direction(const Split& s, std::size_t n) {
  const double theta = std::numbers::pi * static_cast<double>(s.i + s.j) / static_cast<double>(n);
  return {std::cos(theta), std::sin(theta)};
}

/// Circle points between consecutive positions. Gap g sits between
/// positions g and g+1; a deterministic jitter keeps chords in general
/// position (no three through one point), which the face walk relies on.
inline std::vector<Point> gap_points(std::size_t n) {
  std::vector<Point> pts(n);
  for (std::size_t g = 0; g < n; ++g) {
    std::uint64_t state = 0x5eed0f5a11ed5eedULL + g;
    const double jitter = 0.5 * (static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53 - 0.5);
    const double phi = 2.0 * std::numbers::pi * (static_cast<double>(g) + 0.5 + jitter) / static_cast<double>(n);
    pts[g] = {std::cos(phi), std::sin(phi)};
  }
  return pts;
}

/// Whether gap c lies strictly inside the counter-clockwise run from a to b.
inline bool strictly_between(std::size_t a, std::size_t b, std::size_t c, std::size_t n) {
  const std::size_t span = (b + n - a) % n, off = (c + n - a) % n;
  return off > 0 && off < span;
}

struct Chord {
  std::size_t a = 0;  ///< gap before the arc
  std::size_t b = 0;  ///< gap after the arc
};

inline Chord chord_of(const Split& s, std::size_t n) { return {(s.i + n - 1) % n, s.j}; }

inline bool chords_cross(const Chord& p, const Chord& q, std::size_t n) {
  if (p.a == q.a || p.a == q.b || p.b == q.a || p.b == q.b) return false;
  return strictly_between(p.a, p.b, q.a, n) != strictly_between(p.a, p.b, q.b, n);
}

struct BitsHash {
  std::size_t operator()(const std::vector<std::uint64_t>& v) const noexcept {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (auto w : v) {
      std::uint64_t x = h ^ w;
      h = splitmix64(x);
    }
    return static_cast<std::size_t>(h);
  }
};

}  // namespace detail

/// Equal-angle splits graph of a circular split system.
///
/// The splits are drawn as chords of a circle between the gaps that bound
/// their arcs; the faces of that chord arrangement become vertices, and two
/// faces separated by a chord segment of split s become an edge of s. A
/// face's position is the sum of weight * direction over the splits whose
/// arc side it lies on, so crossing split s always moves by the same vector.
inline GraphLayout layout(const SplitSystem& system) {
  const std::size_t n = system.ordering.size();
  if (n != system.taxa.size()) throw Error(ErrorKind::DimensionMismatch, "ordering and taxa disagree in size");
  const std::size_t m = system.splits.size();
  GraphLayout out;
  if (n == 0) return out;
  {
    std::vector<std::pair<std::size_t, std::size_t>> arcs;
    for (const auto& s : system.splits) {
      if (s.i > s.j || s.j + 1 >= n) throw Error(ErrorKind::InvalidParams, "split is not a valid arc of the ordering");
      arcs.emplace_back(s.i, s.j);
    }
    std::sort(arcs.begin(), arcs.end());
    if (std::adjacent_find(arcs.begin(), arcs.end()) != arcs.end())
      throw Error(ErrorKind::InvalidParams, "split system lists the same split twice");
  }

  std::vector<Point> step(m);
  std::vector<detail::Chord> chords(m);
  for (std::size_t k = 0; k < m; ++k) {
    const auto u = detail::split_direction(system.splits[k], n);
    step[k] = {system.splits[k].weight * u.x, system.splits[k].weight * u.y};
    chords[k] = detail::chord_of(system.splits[k], n);
  }
  const auto gaps = detail::gap_points(n);
  const std::size_t words = (m + 63) / 64;

  std::unordered_map<std::vector<std::uint64_t>, std::size_t, detail::BitsHash> ids;
  auto vertex = [&](const std::vector<std::uint64_t>& bits, Point p) {
    auto [it, fresh] = ids.try_emplace(bits, out.vertices.size());
    if (fresh) out.vertices.push_back(p);
    return it->second;
  };
  auto set_bit = [](std::vector<std::uint64_t>& bits, std::size_t k, bool on) {
    const std::uint64_t mask = std::uint64_t{1} << (k % 64);
    if (on)
      bits[k / 64] |= mask;
    else
      bits[k / 64] &= ~mask;
  };
  auto position_of = [&](const std::vector<std::uint64_t>& bits) {
    Point p;
    for (std::size_t k = 0; k < m; ++k)
      if (bits[k / 64] >> (k % 64) & 1U) {
        p.x += step[k].x;
        p.y += step[k].y;
      }
    return p;
  };

  std::size_t crossings = 0;
  for (std::size_t s = 0; s < m; ++s) {
    const auto& cs = chords[s];
    const Point a = gaps[cs.a], b = gaps[cs.b];
    // Side of every other chord next to the start of this one: chords that
    // share the start gap put it on the far endpoint's side, all others on
    // the side of the taxon just after the start gap.
    std::vector<std::uint64_t> bits(words, 0);
    std::vector<std::pair<double, std::size_t>> hits;
    for (std::size_t t = 0; t < m; ++t) {
      if (t == s) continue;
      const auto& ct = chords[t];
      const bool shares_start = ct.a == cs.a || ct.b == cs.a;
      const std::size_t probe = shares_start ? system.splits[s].j : system.splits[s].i;
      set_bit(bits, t, system.splits[t].contains_position(probe));
      if (detail::chords_cross(cs, ct, n)) {
        const Point c = gaps[ct.a], d = gaps[ct.b];
        const double ex = b.x - a.x, ey = b.y - a.y, fx = d.x - c.x, fy = d.y - c.y;
        const double den = ex * fy - ey * fx;
        hits.emplace_back(((c.x - a.x) * fy - (c.y - a.y) * fx) / den, t);
      }
    }
    crossings += hits.size();
    std::sort(hits.begin(), hits.end());
    Point left = position_of(bits);
    for (std::size_t h = 0; h <= hits.size(); ++h) {
      set_bit(bits, s, false);
      const std::size_t lv = vertex(bits, left);
      set_bit(bits, s, true);
      const std::size_t rv = vertex(bits, {left.x + step[s].x, left.y + step[s].y});
      out.edges.push_back({lv, rv, s});
      set_bit(bits, s, false);
      if (h == hits.size()) break;
      const std::size_t t = hits[h].second;
      const bool on = !(bits[t / 64] >> (t % 64) & 1U);
      set_bit(bits, t, on);
      left.x += on ? step[t].x : -step[t].x;
      left.y += on ? step[t].y : -step[t].y;
    }
  }
  // every crossing was seen from both chords
  if (m > 0 && out.vertices.size() != 1 + m + crossings / 2)
    throw Error(ErrorKind::PreconditionViolation, "chord arrangement is degenerate; faces do not match crossings");

  out.anchors.resize(n);
  const auto pos = system.ordering.positions();
  for (std::size_t taxon = 0; taxon < n; ++taxon) {
    std::vector<std::uint64_t> bits(words, 0);
    for (std::size_t k = 0; k < m; ++k) set_bit(bits, k, system.splits[k].contains_position(pos[taxon]));
    out.anchors[taxon] = vertex(bits, position_of(bits));
  }
  return out;
}

/// Shortest-path distances between all anchors, edge length = split weight.
inline Eigen::MatrixXd anchor_distances(const SplitSystem& system, const GraphLayout& g) {
  const std::size_t v = g.vertices.size(), n = g.anchors.size();
  std::vector<std::vector<std::pair<std::size_t, double>>> adj(v);
  for (const auto& e : g.edges) {
    const double w = system.splits[e.split].weight;
    adj[e.source].emplace_back(e.target, w);
    adj[e.target].emplace_back(e.source, w);
  }
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<double> dist(v, std::numeric_limits<double>::infinity());
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[g.anchors[a]] = 0.0;
    pq.emplace(0.0, g.anchors[a]);
    while (!pq.empty()) {
      const auto [du, u] = pq.top();
      pq.pop();
      if (du > dist[u]) continue;
      for (const auto& [x, w] : adj[u])
        if (du + w < dist[x]) {
          dist[x] = du + w;
          pq.emplace(dist[x], x);
        }
    }
    for (std::size_t b = 0; b < n; ++b) d(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = dist[g.anchors[b]];
  }
  return d;
}

// ---------------------------------------------------------------------------
// Nexus

namespace detail {

inline std::string nexus_label(const std::string& s) {
  const bool plain = !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '.' || c == '-';
  });
  if (plain) return s;
  std::string q = "'";
  for (char c : s) {
    if (c == '\'') q += '\'';
    q += c;
  }
  return q + "'";
}

struct NexusToken {
  std::string text;
  bool comment = false;
  bool quoted = false;
};

inline std::vector<NexusToken> nexus_tokens(std::string_view src) {
  std::vector<NexusToken> out;
  std::size_t p = 0;
  while (p < src.size()) {
    const char c = src[p];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++p;
    } else if (c == '[') {
      const auto end = src.find(']', p);
      if (end == std::string_view::npos) throw Error(ErrorKind::ParseError, "Nexus: unterminated comment");
      out.push_back({std::string(src.substr(p + 1, end - p - 1)), true, false});
      p = end + 1;
    } else if (c == '\'') {
      std::string text;
      ++p;
      while (true) {
        if (p >= src.size()) throw Error(ErrorKind::ParseError, "Nexus: unterminated quoted label");
        if (src[p] == '\'') {
          if (p + 1 < src.size() && src[p + 1] == '\'') {
            text += '\'';
            p += 2;
            continue;
          }
          ++p;
          break;
        }
        text += src[p++];
      }
      out.push_back({text, false, true});
    } else if (c == ';' || c == ',' || c == '=') {
      out.push_back({std::string(1, c), false, false});
      ++p;
    } else {
      const auto start = p;
      while (p < src.size() && !std::isspace(static_cast<unsigned char>(src[p])) && src[p] != ';' && src[p] != ',' &&
             src[p] != '=' && src[p] != '[' && src[p] != '\'')
        ++p;
      out.push_back({std::string(src.substr(start, p - start)), false, false});
    }
  }
  return out;
}

inline std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace detail

/// Nexus document with Taxa, (optionally) Distances and Splits blocks. The
/// Splits block carries the cycle and weighted splits; weights and the fit
/// are written with round-trip precision.
inline std::string export_nexus(const SplitSystem& s) {
  const std::size_t n = s.taxa.size();
  std::ostringstream os;
  os << "#NEXUS\n\nBEGIN Taxa;\nDIMENSIONS ntax=" << n << ";\nTAXLABELS\n";
  for (std::size_t t = 0; t < n; ++t) os << "[" << t + 1 << "] " << detail::nexus_label(s.taxa[t]) << "\n";
  os << ";\nEND; [Taxa]\n";
  if (!s.observed.empty()) {
    os << "\nBEGIN Distances;\nDIMENSIONS ntax=" << n << ";\nFORMAT labels=left diagonal triangle=both;\nMATRIX\n";
    for (std::size_t a = 0; a < n; ++a) {
      os << "[" << a + 1 << "] " << detail::nexus_label(s.taxa[a]);
      for (std::size_t b = 0; b < n; ++b) os << " " << (a == b ? "0" : detail::fmt_exact(s.observed[pair_index(a, b, n)]));
      os << "\n";
    }
    os << ";\nEND; [Distances]\n";
  }
  os << "\nBEGIN Splits;\nDIMENSIONS ntax=" << n << " nsplits=" << s.splits.size()
     << ";\nFORMAT labels=no weights=yes confidences=no intervals=no;\nPROPERTIES cyclic;\n";
  os << "[residual=" << detail::fmt_exact(s.fit) << "]\nCYCLE";
  for (auto t : s.ordering.order) os << " " << t + 1;
  os << ";\nMATRIX\n";
  for (std::size_t k = 0; k < s.splits.size(); ++k) {
    const auto members = split_members(s.splits[k], s.ordering);
    std::vector<std::size_t> ids(members.begin(), members.end());
    std::sort(ids.begin(), ids.end());
    os << "[" << k + 1 << ", size=" << ids.size() << "]\t" << detail::fmt_exact(s.splits[k].weight) << "\t";
    for (std::size_t q = 0; q < ids.size(); ++q) os << (q ? " " : "") << ids[q] + 1;
    os << ",\n";
  }
  os << ";\nEND; [Splits]\n";
  return os.str();
}

/// Reads documents written by export_nexus (and the same subset of the
/// format written by other tools: TAXLABELS, a labelled full distance
/// MATRIX, CYCLE and a weighted unlabelled splits MATRIX).
inline SplitSystem parse_nexus(std::string_view text) {
  const auto toks = detail::nexus_tokens(text);
  std::size_t p = 0;
  auto fail = [](const std::string& what) -> Error { return Error(ErrorKind::ParseError, "Nexus: " + what); };
  auto next = [&]() -> const detail::NexusToken& {
    while (p < toks.size() && toks[p].comment) ++p;
    if (p >= toks.size()) throw fail("unexpected end of document");
    return toks[p++];
  };
  auto skip_command = [&]() {
    while (next().text != ";") {
    }
  };
  auto to_size = [&](const std::string& t) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) throw fail("expected an integer, got '" + t + "'");
    return v;
  };

  SplitSystem s;
  std::size_t ntax = 0;
  bool have_fit = false;
  if (p >= toks.size() || detail::upper(toks[p].text) != "#NEXUS") throw fail("missing #NEXUS header");
  ++p;
  while (true) {
    while (p < toks.size() && toks[p].comment) ++p;
    if (p >= toks.size()) break;
    if (detail::upper(next().text) != "BEGIN") throw fail("expected BEGIN");
    const std::string block = detail::upper(next().text);
    if (next().text != ";") throw fail("expected ';' after block name");
    while (true) {
      // residual comment in a Splits block
      while (p < toks.size() && toks[p].comment) {
        if (block == "SPLITS" && toks[p].text.rfind("residual=", 0) == 0) {
          s.fit = detail::parse_double(toks[p].text.substr(9), "Nexus residual");
          have_fit = true;
        }
        ++p;
      }
      const std::string cmd = detail::upper(next().text);
      if (cmd == "END" || cmd == "ENDBLOCK") {
        if (next().text != ";") throw fail("expected ';' after END");
        break;
      }
      if (cmd == "DIMENSIONS") {
        while (true) {
          const auto& t = next();
          if (t.text == ";") break;
          if (detail::upper(t.text) == "NTAX") {
            if (next().text != "=") throw fail("expected '=' after ntax");
            const auto v = to_size(next().text);
            if (ntax != 0 && v != ntax) throw fail("blocks disagree on ntax");
            ntax = v;
          }
        }
      } else if (block == "TAXA" && cmd == "TAXLABELS") {
        while (true) {
          const auto& t = next();
          if (!t.quoted && t.text == ";") break;
          s.taxa.push_back(t.text);
        }
        if (s.taxa.size() != ntax) throw fail("TAXLABELS lists " + std::to_string(s.taxa.size()) + " taxa, ntax=" + std::to_string(ntax));
      } else if (block == "DISTANCES" && cmd == "MATRIX") {
        s.observed.assign(pair_count(ntax), 0.0);
        for (std::size_t a = 0; a < ntax; ++a) {
          const auto& label = next();
          if (a >= s.taxa.size() || label.text != s.taxa[a]) throw fail("distance row " + std::to_string(a + 1) + " label mismatch");
          for (std::size_t b = 0; b < ntax; ++b) {
            const double v = detail::parse_double(next().text, "Nexus distance");
            if (b > a) s.observed[pair_index(a, b, ntax)] = v;
          }
        }
        if (next().text != ";") throw fail("distance MATRIX not terminated");
      } else if (block == "SPLITS" && cmd == "CYCLE") {
        while (true) {
          const auto& t = next();
          if (t.text == ";") break;
          const auto id = to_size(t.text);
          if (id == 0) throw fail("CYCLE ids are 1-based");
          s.ordering.order.push_back(id - 1);
        }
      } else if (block == "SPLITS" && cmd == "MATRIX") {
        if (!s.ordering.is_permutation_of(ntax)) throw fail("CYCLE missing or not a permutation of the taxa");
        const auto pos = s.ordering.positions();
        while (true) {
          const auto& first = next();
          if (first.text == ";") break;
          const double w = detail::parse_double(first.text, "Nexus split weight");
          std::vector<bool> side(ntax, false);
          std::size_t count = 0;
          while (true) {
            const auto& t = next();
            if (t.text == ",") break;
            const auto id = to_size(t.text);
            if (id == 0 || id > ntax) throw fail("split taxon id out of range");
            side[pos[id - 1]] = true;
            ++count;
          }
          // the arc is the side that avoids the last position
          if (side[ntax - 1]) {
            side.flip();
            count = ntax - count;
          }
          const auto first_in = static_cast<std::size_t>(std::find(side.begin(), side.end(), true) - side.begin());
          if (count == 0 || first_in + count >= ntax ||
              !std::all_of(side.begin() + static_cast<std::ptrdiff_t>(first_in),
                           side.begin() + static_cast<std::ptrdiff_t>(first_in + count), [](bool b) { return b; }))
            throw fail("split is not circular with respect to CYCLE");
          s.splits.push_back({first_in, first_in + count - 1, w});
        }
      } else {
        skip_command();
      }
    }
  }
  if (s.taxa.size() != ntax) throw fail("missing Taxa block");
  if (!s.ordering.is_permutation_of(ntax)) throw fail("missing CYCLE");
  if (!have_fit) s.fit = residual_norm(s);
  return s;
}

// ---------------------------------------------------------------------------
// JSON for the cluster UI

/// Splits graph document: the split system, its drawing and the taxon
/// industry codes.
struct SplitsGraph {
  SplitSystem system;
  GraphLayout layout;
  std::map<std::string, std::string> industries;  ///< taxon label -> code
  std::string input_hash;                         ///< hash of the split system artifact
};

inline nlohmann::json graph_to_json(const SplitsGraph& g) {
  const auto& s = g.system;
  nlohmann::json splits = nlohmann::json::array();
  for (std::size_t k = 0; k < s.splits.size(); ++k) {
    auto members = split_members(s.splits[k], s.ordering);
    std::sort(members.begin(), members.end());
    splits.push_back({{"id", k}, {"i", s.splits[k].i}, {"j", s.splits[k].j}, {"weight", s.splits[k].weight}, {"members", members}});
  }
  nlohmann::json vertices = nlohmann::json::array();
  for (const auto& v : g.layout.vertices) vertices.push_back({{"x", v.x}, {"y", v.y}});
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : g.layout.edges) edges.push_back({{"source", e.source}, {"target", e.target}, {"split", e.split}});
  nlohmann::json industries = nlohmann::json::object();
  for (const auto& [k, v] : g.industries) industries[k] = v;
  return {{"schema", "splitfolio.splits-graph/1"},
          {"input_hash", g.input_hash},
          {"taxa", s.taxa},
          {"ordering", s.ordering.order},
          {"fit", s.fit},
          {"splits", splits},
          {"vertices", vertices},
          {"edges", edges},
          {"anchors", g.layout.anchors},
          {"industries", industries}};
}

inline std::string export_json(const SplitSystem& system, const GraphLayout& layout,
                               const std::map<std::string, std::string>& industries, const std::string& input_hash = "") {
  return graph_to_json({system, layout, industries, input_hash}).dump(1) + "\n";
}

inline SplitsGraph graph_from_json(const nlohmann::json& j) {
  SplitsGraph g;
  try {
    if (j.at("schema").get<std::string>() != "splitfolio.splits-graph/1") throw Error(ErrorKind::ParseError, "unknown graph schema");
    g.input_hash = j.value("input_hash", "");
    g.system.taxa = j.at("taxa").get<std::vector<std::string>>();
    g.system.ordering.order = j.at("ordering").get<std::vector<std::size_t>>();
    g.system.fit = j.at("fit").get<double>();
    for (const auto& e : j.at("splits"))
      g.system.splits.push_back({e.at("i").get<std::size_t>(), e.at("j").get<std::size_t>(), e.at("weight").get<double>()});
    for (const auto& v : j.at("vertices")) g.layout.vertices.push_back({v.at("x").get<double>(), v.at("y").get<double>()});
    for (const auto& e : j.at("edges"))
      g.layout.edges.push_back({e.at("source").get<std::size_t>(), e.at("target").get<std::size_t>(), e.at("split").get<std::size_t>()});
    g.layout.anchors = j.at("anchors").get<std::vector<std::size_t>>();
    for (const auto& [k, v] : j.at("industries").items()) g.industries[k] = v.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("graph JSON: ") + e.what());
  }
  const std::size_t n = g.system.taxa.size();
  if (!g.system.ordering.is_permutation_of(n)) throw Error(ErrorKind::ParseError, "graph JSON: ordering is not a permutation");
  if (g.layout.anchors.size() != n) throw Error(ErrorKind::ParseError, "graph JSON: one anchor per taxon required");
  for (auto a : g.layout.anchors)
    if (a >= g.layout.vertices.size()) throw Error(ErrorKind::ParseError, "graph JSON: anchor names a missing vertex");
  for (const auto& e : g.layout.edges)
    if (e.source >= g.layout.vertices.size() || e.target >= g.layout.vertices.size() || e.split >= g.system.splits.size())
      throw Error(ErrorKind::ParseError, "graph JSON: edge references a missing vertex or split");
  return g;
}

/// Static drawing of the splits graph with taxon labels.
inline std::string render_svg(const SplitSystem& system, const GraphLayout& g, double size = 800.0) {
  double lo_x = 0, hi_x = 0, lo_y = 0, hi_y = 0;
  if (!g.vertices.empty()) {
    lo_x = hi_x = g.vertices[0].x;
    lo_y = hi_y = g.vertices[0].y;
  }
  for (const auto& v : g.vertices) {
    lo_x = std::min(lo_x, v.x);
    hi_x = std::max(hi_x, v.x);
    lo_y = std::min(lo_y, v.y);
    hi_y = std::max(hi_y, v.y);
  }
  const double margin = 0.12 * size;
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-12});
  const double scale = (size - 2 * margin) / span;
  auto sx = [&](double x) { return margin + (x - lo_x) * scale; };
  auto sy = [&](double y) { return size - margin - (y - lo_y) * scale; };
  const double cx = 0.5 * (sx(lo_x) + sx(hi_x)), cy = 0.5 * (sy(lo_y) + sy(hi_y));

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::fmt_fixed(size, 0) << "\" height=\""
     << detail::fmt_fixed(size, 0) << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<g stroke=\"#333\" stroke-width=\"1\">\n";
  for (const auto& e : g.edges) {
    const auto& a = g.vertices[e.source];
    const auto& b = g.vertices[e.target];
    os << "<line x1=\"" << detail::fmt_fixed(sx(a.x), 2) << "\" y1=\"" << detail::fmt_fixed(sy(a.y), 2) << "\" x2=\""
       << detail::fmt_fixed(sx(b.x), 2) << "\" y2=\"" << detail::fmt_fixed(sy(b.y), 2) << "\"/>\n";
  }
  os << "</g>\n<g fill=\"#036\">\n";
  for (std::size_t t = 0; t < g.anchors.size(); ++t) {
    const auto& v = g.vertices[g.anchors[t]];
    double dx = sx(v.x) - cx, dy = sy(v.y) - cy;
    const double len = std::max(std::hypot(dx, dy), 1e-9);
    dx /= len;
    dy /= len;
    std::string label;
    for (char c : system.taxa[t]) {
      if (c == '<') label += "&lt;";
      else if (c == '>') label += "&gt;";
      else if (c == '&') label += "&amp;";
      else label += c;
    }
    os << "<text x=\"" << detail::fmt_fixed(sx(v.x) + 6 * dx, 2) << "\" y=\"" << detail::fmt_fixed(sy(v.y) + 6 * dy + 3, 2)
       << "\" text-anchor=\"" << (dx < -0.3 ? "end" : dx > 0.3 ? "start" : "middle") << "\">" << label << "</text>\n";
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

}  // namespace splitfolio
