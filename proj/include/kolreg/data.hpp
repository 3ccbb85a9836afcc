#pragma once

// Edge-list ingestion and the train / validation / test split used for link
// prediction.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "kolreg/bdm.hpp"
#include "kolreg/error.hpp"
#include "kolreg/random.hpp"

namespace kolreg {

struct Edge {
  int u = 0;
  int v = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

inline Edge canonical(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }

inline std::uint64_t edge_code(const Edge& e) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(e.u)) << 32) | static_cast<std::uint32_t>(e.v);
}

// Simple undirected graph: u < v, no self-loops, no duplicates. Node ids are
// 0..node_count-1.
struct EdgeList {
  int node_count = 0;
  std::vector<Edge> edges;
  std::vector<std::string> labels;  // original token of each node id
};

inline EdgeList parse_edge_list(std::istream& is) {
  EdgeList out;
  std::unordered_map<std::string, int> ids;
  std::set<Edge> seen;
  auto id_of = [&](const std::string& tok) {
    auto [it, fresh] = ids.emplace(tok, static_cast<int>(out.labels.size()));
    if (fresh) out.labels.push_back(tok);
    return it->second;
  };

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#' || line[first] == '%') continue;
    std::istringstream ls(line);
    std::string a, b, extra;
    if (!(ls >> a >> b)) throw ParseError("expected '<u> <v>'", lineno);
    // A third column (weight, timestamp) is tolerated and ignored.
    const int u = id_of(a);
    const int v = id_of(b);
    if (u == v) continue;
    const Edge e = canonical(u, v);
    if (seen.insert(e).second) out.edges.push_back(e);
  }
  out.node_count = static_cast<int>(out.labels.size());
  if (out.edges.empty()) throw EmptyGraph("edge list has no edges");
  return out;
}

inline EdgeList parse_edge_list(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open '" + path + "'");
  return parse_edge_list(is);
}

struct SplitData {
  int node_count = 0;
  std::vector<Edge> train;
  std::vector<Edge> val_pos, val_neg;
  std::vector<Edge> test_pos, test_neg;
  BinaryMatrix a_train;
};

namespace detail {

// Uniform non-edges, avoiding `exclude`, by rejection; after 100x the
// requested count in attempts, falls back to enumerating every remaining
// non-edge.
inline std::vector<Edge> sample_non_edges(int n, std::size_t needed, std::unordered_set<std::uint64_t>& exclude,
                                          Rng& rng) {
  std::vector<Edge> out;
  if (needed == 0) return out;
  if (n < 2) throw NotEnoughNonEdges("graph has fewer than two nodes");
  const std::size_t cap = 100 * needed;
  for (std::size_t attempt = 0; attempt < cap && out.size() < needed; ++attempt) {
    const int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    const int b = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    if (a == b) continue;
    const Edge e = canonical(a, b);
    if (exclude.insert(edge_code(e)).second) out.push_back(e);
  }
  if (out.size() < needed) {
    std::vector<Edge> pool;
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b)
        if (!exclude.count(edge_code(Edge{a, b}))) pool.push_back(Edge{a, b});
    if (pool.size() < needed - out.size())
      throw NotEnoughNonEdges("graph is too dense to supply " + std::to_string(needed) + " false edges");
    rng.shuffle(pool.begin(), pool.end());
    pool.resize(needed - out.size());
    for (const Edge& e : pool) {
      exclude.insert(edge_code(e));
      out.push_back(e);
    }
  }
  return out;
}

}  // namespace detail

inline BinaryMatrix adjacency(int n, const std::vector<Edge>& edges) {
  BinaryMatrix a(n);
  for (const Edge& e : edges) {
    a.set(e.u, e.v, true);
    a.set(e.v, e.u, true);
  }
  return a;
}

// train = floor(0.8 |E|); the rest is halved, validation taking the larger
// half. Validation negatives avoid the graph; test negatives avoid the graph
// and the validation negatives.
inline SplitData split(const EdgeList& g, std::uint64_t seed) {
  const std::size_t total = g.edges.size();
  if (total < 10) throw ConfigError("splitting needs at least 10 edges");
  Rng rng(seed);
  std::vector<Edge> shuffled = g.edges;
  rng.shuffle(shuffled.begin(), shuffled.end());

  const std::size_t n_train = total * 4 / 5;
  const std::size_t rest = total - n_train;
  const std::size_t n_val = (rest + 1) / 2;

  SplitData s;
  s.node_count = g.node_count;
  s.train.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val_pos.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train),
                   shuffled.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test_pos.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), shuffled.end());

  std::unordered_set<std::uint64_t> exclude;
  for (const Edge& e : g.edges) exclude.insert(edge_code(e));
  s.val_neg = detail::sample_non_edges(g.node_count, s.val_pos.size(), exclude, rng);
  s.test_neg = detail::sample_non_edges(g.node_count, s.test_pos.size(), exclude, rng);
  s.a_train = adjacency(g.node_count, s.train);
  return s;
}

struct GraphData {
  int n = 0;
  BinaryMatrix a_train;  // symmetric, zero diagonal
  BinaryMatrix label;    // a_train + I
};

inline GraphData to_graph_data(const SplitData& s) {
  GraphData d;
  d.n = s.node_count;
  d.a_train = s.a_train;
  d.label = s.a_train;
  for (int i = 0; i < d.n; ++i) d.label.set(i, i, true);
  return d;
}

}  // namespace kolreg
