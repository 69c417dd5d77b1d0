// SPDX-License-Identifier: Apache-2.0
//
// JSON form of every configuration struct and the combined pipeline config.
// Missing keys keep their defaults; unknown keys are rejected.

#ifndef IGPOSE_CONFIG_HPP_
#define IGPOSE_CONFIG_HPP_

#include <string>
#include <vector>

#include "json.hpp"

#include "igpose/featurize.hpp"
#include "igpose/net.hpp"
#include "igpose/objectives.hpp"
#include "igpose/subgraph.hpp"
#include "igpose/trainer.hpp"

namespace igpose {

namespace featurize {
void to_json(nlohmann::json& j, const FeaturizerConfig& c);
void from_json(const nlohmann::json& j, FeaturizerConfig& c);
}

namespace subgraph {
void to_json(nlohmann::json& j, const SamplerConfig& c);
void from_json(const nlohmann::json& j, SamplerConfig& c);
}

namespace net {
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
}

namespace objectives {
void to_json(nlohmann::json& j, const LossWeights& c);
void from_json(const nlohmann::json& j, LossWeights& c);
}

namespace trainer {
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const DataConfig& c);
void from_json(const nlohmann::json& j, DataConfig& c);
}

struct EvalConfig {
  double dockq_positive = 0.8;
  std::vector<int> ks = {10, 20, 50, 100};
};
void to_json(nlohmann::json& j, const EvalConfig& c);
void from_json(const nlohmann::json& j, EvalConfig& c);

struct PipelineConfig {
  net::ModelConfig model;
  trainer::TrainConfig train;
  objectives::LossWeights loss;
  trainer::DataConfig data;
  EvalConfig eval;

  void validate() const;
};
void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);

PipelineConfig load_pipeline_config(const std::string& path);

} // namespace igpose

#endif
