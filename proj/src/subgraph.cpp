// SPDX-License-Identifier: Apache-2.0

#include "igpose/subgraph.hpp"

#include <algorithm>
#include <string>

#include "igpose/error.hpp"

namespace igpose::subgraph {

using featurize::Edge;
using featurize::EdgeKind;

const char* to_string(SeedMode m) {
  switch (m) {
    case SeedMode::interface: return "interface";
    case SeedMode::cdr: return "cdr";
    case SeedMode::explicit_set: return "explicit";
  }
  return "?";
}

SeedMode parse_seed_mode(std::string_view s) {
  if (s == "interface")
    return SeedMode::interface;
  if (s == "cdr")
    return SeedMode::cdr;
  if (s == "explicit")
    return SeedMode::explicit_set;
  fail(ErrorKind::config, "unknown seed mode '" + std::string(s) + "'");
}

void SamplerConfig::validate() const {
  if (k < 1)
    fail(ErrorKind::config, "sampler requires k >= 1");
  if (n_max < 1)
    fail(ErrorKind::config, "sampler requires n_max >= 1");
}

std::vector<int> seed_nodes(const ResidueGraph& g, SeedMode mode,
                            const std::vector<int>& explicit_nodes) {
  std::vector<int> seeds;
  switch (mode) {
    case SeedMode::interface:
      seeds = g.interface_set;
      break;
    case SeedMode::cdr:
      for (int i = 0; i < g.node_count(); ++i)
        if (g.cdr_mask[i])
          seeds.push_back(i);
      break;
    case SeedMode::explicit_set:
      for (int v : explicit_nodes)
        if (v < 0 || v >= g.node_count())
          fail(ErrorKind::validation, "seed node " + std::to_string(v) +
                                          " outside graph of " +
                                          std::to_string(g.node_count()) + " nodes");
      seeds = explicit_nodes;
      std::sort(seeds.begin(), seeds.end());
      seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
      break;
  }
  if (seeds.empty())
    fail(ErrorKind::empty_set, "graph '" + g.id + "': no " + to_string(mode) + " seed nodes");
  return seeds;
}

std::vector<int> khop_nodes(const ResidueGraph& g, const std::vector<int>& seeds,
                            const SamplerConfig& cfg) {
  cfg.validate();
  const int n = g.node_count();
  if (seeds.empty())
    fail(ErrorKind::empty_set, "khop_sample: empty seed set");
  std::vector<char> selected(static_cast<size_t>(n), 0);
  size_t count = 0;
  for (int s : seeds) {
    if (s < 0 || s >= n)
      fail(ErrorKind::validation, "khop_sample: seed " + std::to_string(s) + " out of range");
    if (!selected[s]) {
      selected[s] = 1;
      ++count;
    }
  }
  if (count >= static_cast<size_t>(cfg.n_max))
    fail(ErrorKind::validation, "khop_sample: " + std::to_string(count) +
                                    " seeds do not fit the node budget " +
                                    std::to_string(cfg.n_max));

  std::vector<std::vector<int>> adj(static_cast<size_t>(n));
  for (const Edge& e : g.edges) {
    adj[e.i].push_back(e.j);
    adj[e.j].push_back(e.i);
  }
  // Selected nodes are exactly the BFS balls of radius < i, so the frontier
  // expansion of the previous layer yields layer i.
  std::vector<int> frontier;
  for (int v = 0; v < n; ++v)
    if (selected[v])
      frontier.push_back(v);
  for (int hop = 1; hop <= cfg.k; ++hop) {
    std::vector<int> layer;
    for (int u : frontier)
      for (int v : adj[u])
        if (!selected[v])
          layer.push_back(v);
    std::sort(layer.begin(), layer.end());
    layer.erase(std::unique(layer.begin(), layer.end()), layer.end());
    if (layer.empty() || count + layer.size() > static_cast<size_t>(cfg.n_max))
      break;
    for (int v : layer)
      selected[v] = 1;
    count += layer.size();
    frontier = std::move(layer);
  }
  std::vector<int> out;
  out.reserve(count);
  for (int v = 0; v < n; ++v)
    if (selected[v])
      out.push_back(v);
  return out;
}

ResidueGraph khop_sample(const ResidueGraph& g, const std::vector<int>& seeds,
                         const SamplerConfig& cfg) {
  return induced_subgraph(g, khop_nodes(g, seeds, cfg));
}

ResidueGraph induced_subgraph(const ResidueGraph& g, std::vector<int> nodes) {
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  if (nodes.empty())
    fail(ErrorKind::empty_set, "induced_subgraph: empty node set");
  const int n = g.node_count();
  if (nodes.front() < 0 || nodes.back() >= n)
    fail(ErrorKind::validation, "induced_subgraph: node index out of range");
  std::vector<int> remap(static_cast<size_t>(n), -1);
  for (size_t k = 0; k < nodes.size(); ++k)
    remap[nodes[k]] = static_cast<int>(k);

  ResidueGraph s;
  s.id = g.id;
  const long m = static_cast<long>(nodes.size());
  s.coords.resize(m, 3);
  s.node_feats.resize(m, g.node_feats.cols());
  for (long k = 0; k < m; ++k) {
    const int v = nodes[k];
    s.coords.row(k) = g.coords.row(v);
    s.node_feats.row(k) = g.node_feats.row(v);
    s.node_role.push_back(g.node_role[v]);
    s.cdr_mask.push_back(g.cdr_mask[v]);
    s.residue_labels.push_back(g.residue_labels[v]);
  }
  std::vector<long> kept;
  for (size_t k = 0; k < g.edges.size(); ++k) {
    const Edge& e = g.edges[k];
    if (remap[e.i] >= 0 && remap[e.j] >= 0) {
      s.edges.push_back({remap[e.i], remap[e.j], e.kind});
      kept.push_back(static_cast<long>(k));
    }
  }
  s.edge_feats.resize(static_cast<long>(kept.size()), g.edge_feats.cols());
  for (size_t k = 0; k < kept.size(); ++k)
    s.edge_feats.row(static_cast<long>(k)) = g.edge_feats.row(kept[k]);
  featurize::recompute_interface_set(s);
  return s;
}

} // namespace igpose::subgraph
