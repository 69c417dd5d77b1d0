// SPDX-License-Identifier: Apache-2.0
//
// Pose network: input projection, T rounds of EGNN message passing each
// followed by a gated update whose input concatenates the EGNN output with
// the previous hidden state, weighted pooling over a selected node set and
// classification / node-type / regression heads. Forward and reverse passes
// are templated on the scalar type; float is the training precision and
// double the verification precision.

#ifndef IGPOSE_NET_HPP_
#define IGPOSE_NET_HPP_

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "igpose/featurize.hpp"

namespace igpose::net {

using featurize::ResidueGraph;

enum class PoolingStrategy {
  all,
  interface_only,
  cdr_only,
  cdr_epitope_only,
  no_interface,
  no_cdr,
  no_cdr_epitope,
};
enum class HeadMode { classifier, regressor };
enum class Mode { train, infer };

const char* to_string(PoolingStrategy p);
PoolingStrategy parse_pooling(std::string_view s);
const std::vector<PoolingStrategy>& all_pooling_strategies();
const char* to_string(HeadMode m);
HeadMode parse_head_mode(std::string_view s);

struct ModelConfig {
  int hidden_dim = 64;
  int layers = 4;
  double dropout = 0.1;  // classifier head only
  PoolingStrategy pooling = PoolingStrategy::all;
  HeadMode head_mode = HeadMode::classifier;
  int input_dim = featurize::kEmbeddingDim;
  int edge_dim = 30;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

template<typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template<typename S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

// y = x W + b with W stored in x out; a 0x0 bias means no bias term.
template<typename S>
struct Linear {
  Mat<S> weight;
  Mat<S> bias;
};

template<typename S>
struct EgnnParams {
  Linear<S> edge1, edge2;    // (2h + 1 + d_e) -> h -> h, SiLU after each
  Linear<S> coord1, coord2;  // h -> h -> 1, SiLU between, final layer bias-free
  Linear<S> node1, node2;    // 2h -> h -> h, SiLU between
};

template<typename S>
struct GruParams {
  Mat<S> w_ir, w_iz, w_in;  // 2h x h, act on [h_tilde | h_prev]
  Mat<S> w_hr, w_hz, w_hn;  // h x h, act on h_prev
  Mat<S> b_r, b_z, b_n;     // 1 x h
};

template<typename S>
struct ModelParams {
  ModelConfig cfg;
  Linear<S> input;
  std::vector<EgnnParams<S>> egnn;
  std::vector<GruParams<S>> gru;
  Linear<S> pool_gate;  // h -> 1
  Linear<S> cls1, cls2;  // h -> h -> 2
  Linear<S> node_head;   // h -> 3
  Linear<S> reg_head;    // h -> 1

  // Calls f(name, tensor) for every tensor in a fixed order.
  template<typename F> void visit(F&& f);
  template<typename F> void visit(F&& f) const;

  ModelParams zeros_like() const;
  size_t parameter_count() const;
};

template<typename S>
ModelParams<S> init_params(const ModelConfig& cfg, std::uint64_t seed);

template<typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& p);

// Fresh regression head (Glorot weights, zero bias) on an existing backbone.
template<typename S>
void reset_regressor_head(ModelParams<S>& p, std::uint64_t seed);

template<typename S>
Mat<S> input_embed(const Mat<S>& x, const Linear<S>& input);

// Both directions of every undirected edge; row q of the feature matrix is
// shared by directed edges 2q and 2q+1.
struct DirectedEdges {
  std::vector<int> dst;
  std::vector<int> src;
  std::vector<int> feat_row;
  size_t size() const { return dst.size(); }
};
DirectedEdges directed_edges(const ResidueGraph& g);

template<typename S>
struct EgnnResult {
  Mat<S> h_tilde;  // N x h
  Mat<S> coords;   // N x 3
};

template<typename S>
EgnnResult<S> egnn_layer(const Mat<S>& h, const Mat<S>& coords, const DirectedEdges& edges,
                         const Mat<S>& edge_feats, const EgnnParams<S>& p,
                         int layer_index = 0);

template<typename S>
Mat<S> modified_gru_cell(const Mat<S>& h_tilde, const Mat<S>& h_prev,
                         const GruParams<S>& p);

// Conventional GRU cell on the same weights restricted to the h_tilde half of
// the input matrices; the reference the modified cell is compared against.
template<typename S>
Mat<S> standard_gru_cell(const Mat<S>& h_tilde, const Mat<S>& h_prev,
                         const GruParams<S>& p);

template<typename S>
struct PoolResult {
  RowVec<S> pooled;           // g
  std::vector<S> weights;     // w_i for every node
};

template<typename S>
PoolResult<S> weighted_pool(const Mat<S>& h, const std::vector<int>& nodes,
                            const Linear<S>& gate);

std::vector<int> select_pool_set(const ResidueGraph& g, PoolingStrategy strategy);

// Inverted dropout mask for the classifier's hidden layer; all ones in
// inference mode.
std::vector<double> dropout_mask(int width, double p, Mode mode, std::uint64_t seed);

template<typename S>
struct ClassifierResult {
  std::array<S, 2> logits;
  std::array<S, 2> probs;
};

template<typename S>
ClassifierResult<S> classifier_head(const RowVec<S>& g, const ModelParams<S>& p,
                                    const std::vector<double>& mask);

template<typename S>
S regressor_head(const RowVec<S>& g, const ModelParams<S>& p);

template<typename S>
S scaled_tanh(S z) {
  return S(0.5) * (std::tanh(S(0.5) * z) + S(1));
}

template<typename S>
Mat<S> node_type_head(const Mat<S>& h, const ModelParams<S>& p);

template<typename S>
struct ForwardOutput {
  std::array<S, 2> class_logits{};
  std::array<S, 2> class_probs{};
  Mat<S> node_logits;          // N x 3
  RowVec<S> pooled;            // g
  S reg_z = 0;
  S reg_score = 0;
  std::vector<S> pool_weights;
  std::vector<int> pool_set;
  Mat<S> coords_final;         // P after the last layer

  // Positive-class probability in classifier mode, score in regressor mode.
  S score(HeadMode m) const { return m == HeadMode::classifier ? class_probs[1] : reg_score; }
};

template<typename S>
ForwardOutput<S> forward(const ResidueGraph& g, const ModelParams<S>& p, Mode mode,
                         std::uint64_t dropout_seed = 0);

// Convex combination of M model outputs.
double ensemble_combine(std::span<const double> values, std::span<const double> weights);

// Gradient of a batch objective with respect to each graph's outputs.
struct OutputGrad {
  std::array<double, 2> d_class_logits{0, 0};
  Eigen::MatrixXd d_node_logits;  // N x 3 or empty
  double d_reg_score = 0;
};

struct ObjectiveValue {
  double loss = 0;
  std::vector<OutputGrad> grads;  // one per graph
};

template<typename S>
using Objective = std::function<ObjectiveValue(const std::vector<ForwardOutput<S>>&)>;

template<typename S>
struct GradientResult {
  double loss = 0;
  ModelParams<S> grads;
  std::vector<ForwardOutput<S>> outputs;
};

// Exact reverse-mode gradients of `objective` over a batch. dropout_seeds
// (one per graph) fix the masks in training mode.
template<typename S>
GradientResult<S> gradients(const ModelParams<S>& p,
                            std::span<const ResidueGraph* const> batch,
                            const Objective<S>& objective, Mode mode,
                            std::span<const std::uint64_t> dropout_seeds = {});

// Checkpoint: one JSON header line (format, config, seed, tensor manifest)
// followed by the tensors as little-endian f32.
void save_checkpoint(const ModelParams<float>& p, std::uint64_t seed,
                     const std::string& path);
ModelParams<float> load_checkpoint(const std::string& path,
                                   std::uint64_t* seed = nullptr);
// Rejects checkpoints whose architecture differs from `expected`
// (head mode and pooling may differ).
ModelParams<float> load_checkpoint(const std::string& path, const ModelConfig& expected,
                                   std::uint64_t* seed = nullptr);

// ---- implementation of the visitors ----

namespace detail {
template<typename P, typename F>
void visit_params(P& p, F&& f) {
  auto lin = [&](const std::string& name, auto& l) {
    f(name + ".weight", l.weight);
    if (l.bias.size() > 0)
      f(name + ".bias", l.bias);
  };
  lin("input", p.input);
  for (size_t t = 0; t < p.egnn.size(); ++t) {
    const std::string e = "layers." + std::to_string(t) + ".egnn.";
    lin(e + "edge1", p.egnn[t].edge1);
    lin(e + "edge2", p.egnn[t].edge2);
    lin(e + "coord1", p.egnn[t].coord1);
    lin(e + "coord2", p.egnn[t].coord2);
    lin(e + "node1", p.egnn[t].node1);
    lin(e + "node2", p.egnn[t].node2);
    const std::string g = "layers." + std::to_string(t) + ".gru.";
    auto& q = p.gru[t];
    f(g + "w_ir", q.w_ir);
    f(g + "w_iz", q.w_iz);
    f(g + "w_in", q.w_in);
    f(g + "w_hr", q.w_hr);
    f(g + "w_hz", q.w_hz);
    f(g + "w_hn", q.w_hn);
    f(g + "b_r", q.b_r);
    f(g + "b_z", q.b_z);
    f(g + "b_n", q.b_n);
  }
  lin("pool_gate", p.pool_gate);
  lin("classifier.0", p.cls1);
  lin("classifier.1", p.cls2);
  lin("node_head", p.node_head);
  lin("regressor", p.reg_head);
}
} // namespace detail

template<typename S>
template<typename F>
void ModelParams<S>::visit(F&& f) {
  detail::visit_params(*this, f);
}

template<typename S>
template<typename F>
void ModelParams<S>::visit(F&& f) const {
  detail::visit_params(*this, f);
}

} // namespace igpose::net

#endif
