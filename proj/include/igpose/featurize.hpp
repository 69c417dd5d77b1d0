// SPDX-License-Identifier: Apache-2.0
//
// Residue graph construction: distance-cutoff edges, Gaussian RBF edge
// attributes and per-residue node features.

#ifndef IGPOSE_FEATURIZE_HPP_
#define IGPOSE_FEATURIZE_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "igpose/structio.hpp"

namespace igpose::featurize {

using structio::ChainRole;

inline constexpr int kEmbeddingDim = 320;

enum class EdgeKind : std::uint8_t { intra = 0, inter = 1 };

// Undirected edge stored once with i < j.
struct Edge {
  int i = 0;
  int j = 0;
  EdgeKind kind = EdgeKind::intra;
  bool operator==(const Edge&) const = default;
};

struct ResidueGraph {
  std::string id;
  Eigen::MatrixXd coords;      // N x 3, CA positions
  Eigen::MatrixXd node_feats;  // N x d_x
  std::vector<Edge> edges;
  Eigen::MatrixXd edge_feats;  // |E| x d_e, row k belongs to edges[k]
  std::vector<ChainRole> node_role;
  std::vector<std::uint8_t> cdr_mask;
  std::vector<int> interface_set;  // sorted endpoints of inter edges
  std::vector<std::string> residue_labels;  // "H:26" per node

  int node_count() const { return static_cast<int>(node_role.size()); }
  bool nondocking() const { return interface_set.empty(); }
  void validate() const;
};

struct FeaturizerConfig {
  double tau_intra = 3.5;
  double tau_inter = 10.0;
  int rbf_count = 10;
  double rbf_lo = 0.25;
  double rbf_hi = 8.0;

  int edge_dim() const { return 3 * rbf_count; }
  void validate() const;
};

struct PairDistances {
  double d_min = 0;  // minimum atom-atom distance
  double d_ca = 0;   // CA-CA distance
  double d_com = 0;  // distance between unweighted atom centroids
};

PairDistances residue_pair_distances(const structio::Residue& a,
                                     const structio::Residue& b);

// Gaussian RBF expansion on log-spaced centers over [rbf_lo, rbf_hi]; each
// width is the gap to the next center, the last width repeats the previous.
Eigen::VectorXd rbf_expand(double d, const FeaturizerConfig& cfg);
Eigen::VectorXd rbf_centers(const FeaturizerConfig& cfg);

// Nodes follow chain order, then seq_index order. Requires roles on every
// chain. A graph without inter edges is returned with nondocking() set.
ResidueGraph build_graph(const structio::Complex& c,
                         const Eigen::MatrixXd& node_feats,
                         const FeaturizerConfig& cfg);

// Embedding file: "IGEMB1", u64 rows, u64 cols, rows*cols f32, little endian.
Eigen::MatrixXd load_embeddings(const std::string& path, long expected_rows,
                                const std::string& chain_id = {});
void write_embeddings(const std::string& path, const Eigen::MatrixXd& m);

// One-hot residue type (20) + one-hot role (3) + CDR bit, zero padded to 320.
Eigen::MatrixXd fallback_features(const structio::Complex& c);

// Stacks per-chain embedding files in node order; with an empty map the
// fallback featurizer is used. Partial maps are rejected.
Eigen::MatrixXd assemble_node_features(
    const structio::Complex& c, const std::map<std::string, std::string>& paths);

// Nondocking ablation: drops every inter edge.
ResidueGraph remove_inter_edges(const ResidueGraph& g);
void recompute_interface_set(ResidueGraph& g);

// Graph cache file: JSON header line, then a little-endian f64 blob.
void save_graph(const ResidueGraph& g, const std::string& path);
ResidueGraph load_graph(const std::string& path);

} // namespace igpose::featurize

#endif
