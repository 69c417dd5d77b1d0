// SPDX-License-Identifier: Apache-2.0

#include "igpose/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "igpose/error.hpp"

namespace igpose {

namespace {

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                const char* section) {
  if (!j.is_object())
    fail(ErrorKind::config, std::string("config section '") + section + "' must be an object");
  for (const auto& [k, v] : j.items()) {
    const bool ok = std::any_of(allowed.begin(), allowed.end(),
                                [&](const char* a) { return k == a; });
    if (!ok)
      fail(ErrorKind::config, std::string("unknown key '") + k + "' in config section '" +
                                  section + "'");
  }
}

template<typename T>
void read(const nlohmann::json& j, const char* key, T& out, const char* section) {
  if (!j.contains(key))
    return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, std::string("config ") + section + "." + key + ": " + e.what());
  }
}

} // namespace

namespace featurize {
void to_json(nlohmann::json& j, const FeaturizerConfig& c) {
  j = {{"tau_intra", c.tau_intra}, {"tau_inter", c.tau_inter}, {"rbf_count", c.rbf_count},
       {"rbf_lo", c.rbf_lo},       {"rbf_hi", c.rbf_hi}};
}
void from_json(const nlohmann::json& j, FeaturizerConfig& c) {
  check_keys(j, {"tau_intra", "tau_inter", "rbf_count", "rbf_lo", "rbf_hi"}, "featurizer");
  read(j, "tau_intra", c.tau_intra, "featurizer");
  read(j, "tau_inter", c.tau_inter, "featurizer");
  read(j, "rbf_count", c.rbf_count, "featurizer");
  read(j, "rbf_lo", c.rbf_lo, "featurizer");
  read(j, "rbf_hi", c.rbf_hi, "featurizer");
}
} // namespace featurize

namespace subgraph {
void to_json(nlohmann::json& j, const SamplerConfig& c) {
  j = {{"k", c.k}, {"n_max", c.n_max}, {"seed_mode", to_string(c.seed_mode)}};
}
void from_json(const nlohmann::json& j, SamplerConfig& c) {
  check_keys(j, {"k", "n_max", "seed_mode"}, "sampler");
  read(j, "k", c.k, "sampler");
  read(j, "n_max", c.n_max, "sampler");
  std::string mode = to_string(c.seed_mode);
  read(j, "seed_mode", mode, "sampler");
  c.seed_mode = parse_seed_mode(mode);
}
} // namespace subgraph

namespace net {
void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"hidden_dim", c.hidden_dim},
       {"layers", c.layers},
       {"dropout", c.dropout},
       {"pooling", to_string(c.pooling)},
       {"head_mode", to_string(c.head_mode)},
       {"input_dim", c.input_dim},
       {"edge_dim", c.edge_dim}};
}
void from_json(const nlohmann::json& j, ModelConfig& c) {
  check_keys(j, {"hidden_dim", "layers", "dropout", "pooling", "head_mode", "input_dim",
                 "edge_dim"},
             "model");
  read(j, "hidden_dim", c.hidden_dim, "model");
  read(j, "layers", c.layers, "model");
  read(j, "dropout", c.dropout, "model");
  read(j, "input_dim", c.input_dim, "model");
  read(j, "edge_dim", c.edge_dim, "model");
  std::string pooling = to_string(c.pooling);
  read(j, "pooling", pooling, "model");
  c.pooling = parse_pooling(pooling);
  std::string head = to_string(c.head_mode);
  read(j, "head_mode", head, "model");
  c.head_mode = parse_head_mode(head);
}
} // namespace net

namespace objectives {
void to_json(nlohmann::json& j, const LossWeights& c) {
  j = {{"alpha", c.alpha}, {"beta", c.beta}, {"fbeta_beta", c.fbeta_beta}};
}
void from_json(const nlohmann::json& j, LossWeights& c) {
  check_keys(j, {"alpha", "beta", "fbeta_beta"}, "loss");
  read(j, "alpha", c.alpha, "loss");
  read(j, "beta", c.beta, "loss");
  read(j, "fbeta_beta", c.fbeta_beta, "loss");
}
} // namespace objectives

namespace trainer {
void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"lr_init", c.lr_init},     {"lr_final", c.lr_final}, {"max_epochs", c.max_epochs},
       {"batch_size", c.batch_size}, {"w_neg", c.w_neg},     {"w_pos", c.w_pos},
       {"patience", c.patience},   {"seed", c.seed},         {"beta1", c.beta1},
       {"beta2", c.beta2},         {"eps", c.eps}};
}
void from_json(const nlohmann::json& j, TrainConfig& c) {
  check_keys(j, {"lr_init", "lr_final", "max_epochs", "batch_size", "w_neg", "w_pos",
                 "patience", "seed", "beta1", "beta2", "eps"},
             "train");
  read(j, "lr_init", c.lr_init, "train");
  read(j, "lr_final", c.lr_final, "train");
  read(j, "max_epochs", c.max_epochs, "train");
  read(j, "batch_size", c.batch_size, "train");
  read(j, "w_neg", c.w_neg, "train");
  read(j, "w_pos", c.w_pos, "train");
  read(j, "patience", c.patience, "train");
  read(j, "seed", c.seed, "train");
  read(j, "beta1", c.beta1, "train");
  read(j, "beta2", c.beta2, "train");
  read(j, "eps", c.eps, "train");
}
void to_json(nlohmann::json& j, const DataConfig& c) {
  j = {{"featurizer", c.featurizer},
       {"sampler", c.sampler},
       {"use_subgraph", c.use_subgraph},
       {"nondocking_ablation", c.nondocking_ablation},
       {"allow_nondocking", c.allow_nondocking}};
}
void from_json(const nlohmann::json& j, DataConfig& c) {
  check_keys(j, {"featurizer", "sampler", "use_subgraph", "nondocking_ablation",
                 "allow_nondocking"},
             "data");
  if (j.contains("featurizer"))
    from_json(j["featurizer"], c.featurizer);
  if (j.contains("sampler"))
    from_json(j["sampler"], c.sampler);
  read(j, "use_subgraph", c.use_subgraph, "data");
  read(j, "nondocking_ablation", c.nondocking_ablation, "data");
  read(j, "allow_nondocking", c.allow_nondocking, "data");
}
} // namespace trainer

void to_json(nlohmann::json& j, const EvalConfig& c) {
  j = {{"dockq_positive", c.dockq_positive}, {"ks", c.ks}};
}
void from_json(const nlohmann::json& j, EvalConfig& c) {
  check_keys(j, {"dockq_positive", "ks"}, "eval");
  read(j, "dockq_positive", c.dockq_positive, "eval");
  read(j, "ks", c.ks, "eval");
}

void PipelineConfig::validate() const {
  model.validate();
  train.validate();
  loss.validate();
  data.validate();
  if (model.edge_dim != data.featurizer.edge_dim())
    fail(ErrorKind::config, "model.edge_dim " + std::to_string(model.edge_dim) +
                                " does not match featurizer edge width " +
                                std::to_string(data.featurizer.edge_dim()));
  if (!(eval.dockq_positive > 0 && eval.dockq_positive <= 1))
    fail(ErrorKind::config, "eval.dockq_positive must lie in (0, 1]");
  for (int k : eval.ks)
    if (k < 1)
      fail(ErrorKind::config, "eval.ks entries must be positive");
}

void to_json(nlohmann::json& j, const PipelineConfig& c) {
  j = {{"model", c.model}, {"train", c.train}, {"loss", c.loss}, {"data", c.data},
       {"eval", c.eval}};
}

void from_json(const nlohmann::json& j, PipelineConfig& c) {
  check_keys(j, {"model", "train", "loss", "data", "eval"}, "root");
  if (j.contains("model"))
    net::from_json(j["model"], c.model);
  if (j.contains("train"))
    trainer::from_json(j["train"], c.train);
  if (j.contains("loss"))
    objectives::from_json(j["loss"], c.loss);
  if (j.contains("data"))
    trainer::from_json(j["data"], c.data);
  if (j.contains("eval"))
    from_json(j["eval"], c.eval);
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    fail(ErrorKind::io, "cannot open config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, "config " + path + ": " + e.what());
  }
  PipelineConfig c;
  from_json(j, c);
  c.validate();
  return c;
}

} // namespace igpose
