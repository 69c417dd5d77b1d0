// SPDX-License-Identifier: Apache-2.0
//
// Seeded k-hop BFS subgraph extraction with a node budget.

#ifndef IGPOSE_SUBGRAPH_HPP_
#define IGPOSE_SUBGRAPH_HPP_

#include <string_view>
#include <vector>

#include "igpose/featurize.hpp"

namespace igpose::subgraph {

using featurize::ResidueGraph;

enum class SeedMode { interface, cdr, explicit_set };

const char* to_string(SeedMode m);
SeedMode parse_seed_mode(std::string_view s);

struct SamplerConfig {
  int k = 3;
  int n_max = 600;
  SeedMode seed_mode = SeedMode::interface;

  void validate() const;
};

// Sorted seed set. `explicit_nodes` is only consulted in explicit mode.
std::vector<int> seed_nodes(const ResidueGraph& g, SeedMode mode,
                            const std::vector<int>& explicit_nodes = {});

// Grows the seed set one BFS layer at a time over all edges. A layer that
// adds nothing or would push the node count past n_max ends the growth and
// is not added.
std::vector<int> khop_nodes(const ResidueGraph& g, const std::vector<int>& seeds,
                            const SamplerConfig& cfg);
ResidueGraph khop_sample(const ResidueGraph& g, const std::vector<int>& seeds,
                         const SamplerConfig& cfg);

// Keeps the edges with both endpoints in `nodes`; new indices follow the
// ascending order of the original ones.
ResidueGraph induced_subgraph(const ResidueGraph& g, std::vector<int> nodes);

} // namespace igpose::subgraph

#endif
