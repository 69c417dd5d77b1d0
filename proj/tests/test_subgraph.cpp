// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "igpose/subgraph.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace igpose;
using namespace igpose::subgraph;
using featurize::Edge;
using featurize::EdgeKind;

namespace {

// Nodes 0..n-1 (all heavy) with the listed edges; features tag the node index.
ResidueGraph plain_graph(int n, const std::vector<Edge>& edges) {
  ResidueGraph g;
  g.id = "plain";
  g.coords = Eigen::MatrixXd::Zero(n, 3);
  g.node_feats.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    g.coords(i, 0) = i;
    g.node_feats(i, 0) = i;
    g.node_feats(i, 1) = -i;
    g.node_role.push_back(structio::ChainRole::heavy);
    g.cdr_mask.push_back(0);
    g.residue_labels.push_back("H:" + std::to_string(i));
  }
  g.edges = edges;
  g.edge_feats.resize(static_cast<long>(edges.size()), 1);
  for (size_t k = 0; k < edges.size(); ++k)
    g.edge_feats(static_cast<long>(k), 0) = 100 * edges[k].i + edges[k].j;
  featurize::recompute_interface_set(g);
  return g;
}

// 1-2-3-4-5 mapped to indices 0..4
ResidueGraph path5() {
  return plain_graph(5, {{0, 1, EdgeKind::intra}, {1, 2, EdgeKind::intra},
                         {2, 3, EdgeKind::intra}, {3, 4, EdgeKind::intra}});
}

} // namespace

TEST_CASE("seed_nodes") {
  auto g = plain_graph(9, {{2, 7, EdgeKind::inter}, {3, 7, EdgeKind::inter}, {0, 1, EdgeKind::intra}});
  for (int v : {7, 8})
    g.node_role[v] = structio::ChainRole::antigen;
  featurize::recompute_interface_set(g);
  CHECK(seed_nodes(g, SeedMode::interface) == std::vector<int>{2, 3, 7});
  g.cdr_mask[4] = g.cdr_mask[5] = 1;
  CHECK(seed_nodes(g, SeedMode::cdr) == std::vector<int>{4, 5});
  CHECK(seed_nodes(g, SeedMode::explicit_set, {6, 1, 6}) == std::vector<int>{1, 6});
  CHECK_ERROR_KIND(seed_nodes(g, SeedMode::explicit_set, {9}), ErrorKind::validation);
  const auto nd = featurize::remove_inter_edges(g);
  CHECK_ERROR_KIND(seed_nodes(nd, SeedMode::interface), ErrorKind::empty_set);
  auto nocdr = g;
  std::fill(nocdr.cdr_mask.begin(), nocdr.cdr_mask.end(), 0);
  CHECK_ERROR_KIND(seed_nodes(nocdr, SeedMode::cdr), ErrorKind::empty_set);
}

TEST_CASE("seed mode names") {
  for (auto m : {SeedMode::interface, SeedMode::cdr, SeedMode::explicit_set})
    CHECK(parse_seed_mode(to_string(m)) == m);
  CHECK_ERROR_KIND(parse_seed_mode("everything"), ErrorKind::config);
}

TEST_CASE("khop on a path graph") {
  const auto g = path5();
  SamplerConfig cfg;
  CHECK(khop_nodes(g, {0}, cfg) == std::vector<int>{0, 1, 2, 3});
  cfg.n_max = 2;
  CHECK(khop_nodes(g, {0}, cfg) == std::vector<int>{0, 1});
  cfg = {};
  cfg.k = 1;
  CHECK(khop_nodes(g, {2}, cfg) == std::vector<int>{1, 2, 3});
}

TEST_CASE("khop fixed point and preconditions") {
  const auto g = path5();
  SamplerConfig cfg;
  std::vector<int> all = {0, 1, 2, 3, 4};
  const auto s = khop_sample(g, all, cfg);
  CHECK(s.node_count() == 5);
  CHECK(s.edges == g.edges);
  cfg.n_max = 1;
  CHECK_ERROR_KIND(khop_nodes(g, {0}, cfg), ErrorKind::validation);
  cfg = {};
  CHECK_ERROR_KIND(khop_nodes(g, {}, cfg), ErrorKind::empty_set);
  CHECK_ERROR_KIND(khop_nodes(g, {5}, cfg), ErrorKind::validation);
  cfg.k = 0;
  CHECK_ERROR_KIND(khop_nodes(g, {0}, cfg), ErrorKind::config);
}

TEST_CASE("khop property: budget, seeds kept, oracle equality") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = std::uniform_int_distribution<int>(3, 80)(rng);
    const auto g = oracle::random_graph(rng, n, 2.5 / n, 3, 1);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const int ns = std::uniform_int_distribution<int>(1, std::min(5, n - 1))(rng);
    std::vector<int> seeds(perm.begin(), perm.begin() + ns);
    std::sort(seeds.begin(), seeds.end());
    SamplerConfig cfg;
    cfg.k = std::uniform_int_distribution<int>(1, 4)(rng);
    cfg.n_max = std::uniform_int_distribution<int>(ns + 1, n + 5)(rng);
    const auto got = khop_nodes(g, seeds, cfg);
    CHECK(got == oracle::khop_oracle(g, seeds, cfg.k, cfg.n_max));
    CHECK(static_cast<int>(got.size()) <= cfg.n_max);
    CHECK(std::includes(got.begin(), got.end(), seeds.begin(), seeds.end()));
    CHECK(std::is_sorted(got.begin(), got.end()));
  }
}

TEST_CASE("induced_subgraph") {
  SUBCASE("all nodes is the identity") {
    const auto g = path5();
    const auto s = induced_subgraph(g, {4, 3, 2, 1, 0});
    CHECK(s.edges == g.edges);
    CHECK(s.node_feats == g.node_feats);
    CHECK(s.edge_feats == g.edge_feats);
  }
  SUBCASE("triangle minus one node") {
    const auto g = plain_graph(3, {{0, 1, EdgeKind::intra}, {0, 2, EdgeKind::intra},
                                   {1, 2, EdgeKind::intra}});
    const auto s = induced_subgraph(g, {0, 2});
    REQUIRE(s.edges.size() == 1);
    CHECK(s.edges[0] == Edge{0, 1, EdgeKind::intra});
    CHECK(s.edge_feats(0, 0) == 2);  // original (0, 2)
  }
  SUBCASE("random 50-node graph, 20-node subset, filter oracle") {
    std::mt19937_64 rng(50);
    const auto g = oracle::random_graph(rng, 50, 0.15, 3, 2);
    std::vector<int> perm(50);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> keep(perm.begin(), perm.begin() + 20);
    std::sort(keep.begin(), keep.end());
    const auto s = induced_subgraph(g, keep);
    std::vector<std::pair<int, int>> want, got;
    for (const auto& e : g.edges) {
      const auto a = std::find(keep.begin(), keep.end(), e.i);
      const auto b = std::find(keep.begin(), keep.end(), e.j);
      if (a != keep.end() && b != keep.end())
        want.push_back({e.i, e.j});
    }
    for (size_t k = 0; k < s.edges.size(); ++k) {
      got.push_back({keep[s.edges[k].i], keep[s.edges[k].j]});
      CHECK(s.node_role[s.edges[k].i] == g.node_role[keep[s.edges[k].i]]);
    }
    std::sort(want.begin(), want.end());
    std::sort(got.begin(), got.end());
    CHECK(got == want);
    for (int i = 0; i < 20; ++i) {
      CHECK(s.node_feats.row(i) == g.node_feats.row(keep[i]));
      CHECK(s.cdr_mask[i] == g.cdr_mask[keep[i]]);
      CHECK(s.residue_labels[i] == g.residue_labels[keep[i]]);
    }
    // interface set is recomputed on the subgraph
    std::set<int> ends;
    for (const auto& e : s.edges)
      if (e.kind == EdgeKind::inter) {
        ends.insert(e.i);
        ends.insert(e.j);
      }
    CHECK(std::vector<int>(ends.begin(), ends.end()) == s.interface_set);
  }
  SUBCASE("errors") {
    const auto g = path5();
    CHECK_ERROR_KIND(induced_subgraph(g, {}), ErrorKind::empty_set);
    CHECK_ERROR_KIND(induced_subgraph(g, {7}), ErrorKind::validation);
  }
}

TEST_CASE("khop_sample is deterministic") {
  std::mt19937_64 rng(8);
  const auto g = oracle::random_graph(rng, 60, 0.05, 3, 1);
  const auto seeds = seed_nodes(g, SeedMode::interface);
  SamplerConfig cfg;
  cfg.n_max = static_cast<int>(seeds.size()) + 10;
  const auto a = khop_sample(g, seeds, cfg);
  const auto b = khop_sample(g, seeds, cfg);
  CHECK(a.edges == b.edges);
  CHECK(a.node_feats == b.node_feats);
}
