// SPDX-License-Identifier: Apache-2.0
//
// Training loops: weighted sampling, Adam with cosine-annealed learning
// rate, early stopping on a validation metric, and the classifier to
// regressor transfer.

#ifndef IGPOSE_TRAINER_HPP_
#define IGPOSE_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "igpose/featurize.hpp"
#include "igpose/manifest.hpp"
#include "igpose/net.hpp"
#include "igpose/objectives.hpp"
#include "igpose/subgraph.hpp"

namespace igpose::trainer {

struct TrainConfig {
  double lr_init = 1e-4;
  double lr_final = 1e-5;
  int max_epochs = 50;
  int batch_size = 8;
  double w_neg = 0.8;
  double w_pos = 0.2;
  int patience = 5;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

struct DataConfig {
  featurize::FeaturizerConfig featurizer;
  subgraph::SamplerConfig sampler;
  bool use_subgraph = true;
  bool nondocking_ablation = false;  // strip inter edges after featurization
  bool allow_nondocking = false;     // score graphs without inter edges

  void validate() const;
};

// Draws with replacement, P(i) proportional to the weight of label_i.
std::vector<size_t> weighted_sampler(std::span<const int> labels, double w_neg, double w_pos,
                                     std::uint64_t seed, size_t n_draws);

double cosine_lr(double epoch, const TrainConfig& cfg);

// One Adam update on flat arrays; `step` is the 1-based update count.
template<typename S>
void adam_update(std::span<S> p, std::span<const S> g, std::span<S> m, std::span<S> v,
                 long step, double lr, double beta1, double beta2, double eps);

template<typename S>
struct AdamState {
  net::ModelParams<S> m, v;
  long step = 0;
};

template<typename S>
AdamState<S> adam_init(const net::ModelParams<S>& p);

template<typename S>
void adam_step(net::ModelParams<S>& p, const net::ModelParams<S>& g, AdamState<S>& state,
               double lr, const TrainConfig& cfg);

// Runs f(i) for i in [0, n) on up to `jobs` threads; the first exception is
// rethrown after all workers finish.
void parallel_for(size_t n, int jobs, const std::function<void(size_t)>& f);

struct Sample {
  std::string id;
  featurize::ResidueGraph graph;
  int label = 0;
  double dockq = 0;
  std::vector<int> node_labels;
};

// Structure (or cached graph) -> residue graph ready for the network.
featurize::ResidueGraph prepare_graph(const SampleRecord& r, const DataConfig& cfg);

// Prepares the records of one split ("" keeps all). Records that cannot be
// scored under `pooling` are skipped and their ids appended to `skipped`.
std::vector<Sample> load_samples(const std::vector<SampleRecord>& records,
                                 const std::string& split, const DataConfig& cfg,
                                 net::PoolingStrategy pooling, int jobs,
                                 std::vector<std::string>* skipped = nullptr);

Sample sample_from_graph(featurize::ResidueGraph g, int label, double dockq);

struct EpochRecord {
  int epoch = 0;
  double lr = 0;
  double train_loss = 0;
  std::optional<double> train_metric;
  std::optional<double> train_threshold;
  std::optional<double> val_metric;
  std::optional<double> val_threshold;
  bool improved = false;
};

struct TrainResult {
  net::ModelParams<float> best;
  net::ModelParams<float> last;
  int best_epoch = -1;
  std::optional<double> best_metric;
  std::vector<EpochRecord> history;
  std::string metric_name;  // "f1" or "pearson"
};

// Scores in inference mode (class probability or regression score).
std::vector<double> predict_scores(const net::ModelParams<float>& p,
                                   const std::vector<Sample>& samples);

// F1 at the F-beta-selected threshold; empty for an empty set.
std::optional<double> f1_at_selected_threshold(std::span<const double> scores,
                                               std::span<const int> labels, double beta,
                                               double* threshold = nullptr);

TrainResult train_classifier(const std::vector<Sample>& train, const std::vector<Sample>& val,
                             const net::ModelConfig& model_cfg, const TrainConfig& cfg,
                             const objectives::LossWeights& w);

enum class RegressorInit { fine_tune, from_scratch };
const char* to_string(RegressorInit m);

// fine_tune copies `classifier` (all parameters) and redraws the regression
// head; from_scratch ignores it.
TrainResult finetune_regressor(const net::ModelParams<float>* classifier,
                               const std::vector<Sample>& train, const std::vector<Sample>& val,
                               const net::ModelConfig& model_cfg, const TrainConfig& cfg,
                               RegressorInit init);

std::string history_to_json(const TrainResult& r);

} // namespace igpose::trainer

#endif
