// SPDX-License-Identifier: Apache-2.0

#include "igpose/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "igpose/config.hpp"
#include "igpose/decoyforge.hpp"
#include "igpose/evalkit.hpp"
#include "igpose/log.hpp"
#include "igpose/manifest.hpp"
#include "igpose/rng.hpp"
#include "igpose/trainer.hpp"

namespace igpose::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string out;
  int verbose = 0;
  bool quiet = false;

  std::string manifest;
  std::vector<std::string> checkpoints;
  std::vector<double> ensemble_weights;
  std::string pooling;
  std::optional<int> k;
  std::optional<int> max_nodes;
  std::string seed_mode;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<int> patience;
  std::string split;
  std::string predictions;
  std::optional<double> threshold;
  std::string reg_mode = "ft";
  std::vector<double> ratios = {0.6, 0.2, 0.2};
  bool nondocking = false;
  bool no_subgraph = false;
  decoyforge::FixtureConfig fixture;
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out)
    fail(ErrorKind::io, "cannot write " + p.string());
  out << text;
  if (!out)
    fail(ErrorKind::io, "failed writing " + p.string());
}

fs::path resolve_out(const Options& o, const std::string& sub) {
  fs::path out;
  if (!o.out.empty())
    out = o.out;
  else if (const char* env = std::getenv("IGPOSE_OUT"); env && *env)
    out = fs::path(env) / sub;
  else
    out = fs::path("igpose-out") / sub;
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out))
    fail(ErrorKind::io, "output directory " + out.string() + " is not writable");
  return out;
}

void require_file(const std::string& path, const char* what) {
  if (path.empty())
    fail(ErrorKind::config, std::string("missing --") + what);
  if (!fs::exists(path))
    fail(ErrorKind::io, std::string(what) + " " + path + " does not exist");
}

PipelineConfig resolve_config(const Options& o) {
  PipelineConfig c;
  if (!o.config_path.empty())
    c = load_pipeline_config(o.config_path);
  if (o.seed)
    c.train.seed = *o.seed;
  if (!o.pooling.empty())
    c.model.pooling = net::parse_pooling(o.pooling);
  if (o.k)
    c.data.sampler.k = *o.k;
  if (o.max_nodes)
    c.data.sampler.n_max = *o.max_nodes;
  if (!o.seed_mode.empty())
    c.data.sampler.seed_mode = subgraph::parse_seed_mode(o.seed_mode);
  if (o.epochs)
    c.train.max_epochs = *o.epochs;
  if (o.batch_size)
    c.train.batch_size = *o.batch_size;
  if (o.patience)
    c.train.patience = *o.patience;
  if (o.nondocking) {
    c.data.nondocking_ablation = true;
    c.data.allow_nondocking = true;
  }
  if (o.no_subgraph)
    c.data.use_subgraph = false;
  c.validate();
  return c;
}

void write_snapshot(const fs::path& out, const std::string& sub, const Options& o,
                    const PipelineConfig& c) {
  nlohmann::ordered_json j;
  j["subcommand"] = sub;
  j["seed"] = c.train.seed;
  j["jobs"] = o.jobs;
  nlohmann::ordered_json in;
  in["manifest"] = o.manifest;
  in["checkpoints"] = o.checkpoints;
  in["ensemble_weights"] = o.ensemble_weights;
  in["predictions"] = o.predictions;
  in["split"] = o.split;
  j["inputs"] = in;
  if (sub == "forge")
    j["fixture"] = {{"complexes", o.fixture.complexes}, {"n_ig", o.fixture.n_ig},
                    {"n_ag", o.fixture.n_ag},           {"near", o.fixture.n_near},
                    {"far", o.fixture.n_far}};
  if (sub == "split")
    j["ratios"] = o.ratios;
  if (sub == "train-reg")
    j["mode"] = o.reg_mode;
  if (sub == "eval" && o.threshold)
    j["threshold"] = *o.threshold;
  j["pipeline"] = nlohmann::json(c);
  write_text(out / "config.json", j.dump(2) + "\n");
}

void cmd_featurize(const Options& o, const PipelineConfig& c, const fs::path& out) {
  require_file(o.manifest, "manifest");
  auto records = read_manifest(o.manifest);
  fs::create_directories(out / "graphs");
  trainer::DataConfig dc = c.data;
  dc.use_subgraph = false;
  std::vector<std::optional<SampleRecord>> done(records.size());
  trainer::parallel_for(records.size(), o.jobs, [&](size_t i) {
    SampleRecord r = records[i];
    try {
      const auto g = trainer::prepare_graph(r, dc);
      const std::string rel = "graphs/" + r.id + ".igg";
      featurize::save_graph(g, (out / rel).string());
      r.structure_path = rel;
      r.embedding_paths.clear();
      r.cdr_annotation_path.clear();
      done[i] = std::move(r);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::io)
        throw;
      log::warn("featurize: skipping " + r.id + ": " + e.what());
    }
  });
  std::vector<SampleRecord> kept;
  for (auto& r : done)
    if (r)
      kept.push_back(std::move(*r));
  write_manifest((out / "manifest.jsonl").string(), kept);
  log::info("featurized " + std::to_string(kept.size()) + " of " +
            std::to_string(records.size()) + " records");
}

void cmd_sample(const Options& o, const PipelineConfig& c, const fs::path& out) {
  require_file(o.manifest, "manifest");
  auto records = read_manifest(o.manifest);
  fs::create_directories(out / "subgraphs");
  trainer::DataConfig dc = c.data;
  dc.use_subgraph = true;
  std::vector<std::optional<SampleRecord>> done(records.size());
  trainer::parallel_for(records.size(), o.jobs, [&](size_t i) {
    SampleRecord r = records[i];
    try {
      const auto g = trainer::prepare_graph(r, dc);
      const std::string rel = "subgraphs/" + r.id + ".igg";
      featurize::save_graph(g, (out / rel).string());
      r.structure_path = rel;
      r.embedding_paths.clear();
      r.cdr_annotation_path.clear();
      done[i] = std::move(r);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::io)
        throw;
      log::warn("sample: skipping " + r.id + ": " + e.what());
    }
  });
  std::vector<SampleRecord> kept;
  for (auto& r : done)
    if (r)
      kept.push_back(std::move(*r));
  write_manifest((out / "manifest.jsonl").string(), kept);
}

void cmd_forge(const Options& o, const PipelineConfig& c, const fs::path& out) {
  const auto recs = decoyforge::write_fixture(out.string(), o.fixture, c.train.seed);
  log::info("forged " + std::to_string(recs.size()) + " decoys");
}

std::vector<trainer::Sample> split_samples(const std::vector<SampleRecord>& records,
                                           const char* split, const PipelineConfig& c,
                                           int jobs) {
  return trainer::load_samples(records, split, c.data, c.model.pooling, jobs);
}

void cmd_train_clf(const Options& o, const PipelineConfig& c, const fs::path& out) {
  require_file(o.manifest, "manifest");
  const auto records = read_manifest(o.manifest);
  const auto train = split_samples(records, "train", c, o.jobs);
  const auto val = split_samples(records, "validation", c, o.jobs);
  const auto res = trainer::train_classifier(train, val, c.model, c.train, c.loss);
  net::save_checkpoint(res.best, c.train.seed, (out / "classifier.ckpt").string());
  write_text(out / "history.json", trainer::history_to_json(res) + "\n");
}

void cmd_train_reg(const Options& o, const PipelineConfig& c, const fs::path& out) {
  require_file(o.manifest, "manifest");
  trainer::RegressorInit mode;
  if (o.reg_mode == "ft")
    mode = trainer::RegressorInit::fine_tune;
  else if (o.reg_mode == "fs")
    mode = trainer::RegressorInit::from_scratch;
  else
    fail(ErrorKind::config, "--mode must be ft or fs");
  std::optional<net::ModelParams<float>> clf;
  if (mode == trainer::RegressorInit::fine_tune) {
    if (o.checkpoints.size() != 1)
      fail(ErrorKind::config, "fine-tuning needs exactly one --checkpoint");
    require_file(o.checkpoints[0], "checkpoint");
    clf = net::load_checkpoint(o.checkpoints[0], c.model);
  }
  const auto records = read_manifest(o.manifest);
  const auto train = split_samples(records, "train", c, o.jobs);
  const auto val = split_samples(records, "validation", c, o.jobs);
  const auto res = trainer::finetune_regressor(clf ? &*clf : nullptr, train, val, c.model,
                                               c.train, mode);
  net::save_checkpoint(res.best, c.train.seed, (out / "regressor.ckpt").string());
  write_text(out / "history.json", trainer::history_to_json(res) + "\n");
}

void cmd_predict(const Options& o, const PipelineConfig& c, const fs::path& out) {
  require_file(o.manifest, "manifest");
  if (o.checkpoints.empty())
    fail(ErrorKind::config, "predict needs at least one --checkpoint");
  std::vector<net::ModelParams<float>> models;
  for (const auto& p : o.checkpoints) {
    require_file(p, "checkpoint");
    models.push_back(net::load_checkpoint(p));
  }
  std::vector<double> weights = o.ensemble_weights;
  if (!weights.empty() && weights.size() != models.size())
    fail(ErrorKind::config, "--ensemble-weights has " + std::to_string(weights.size()) +
                                " entries for " + std::to_string(models.size()) +
                                " checkpoints");
  std::vector<size_t> cls, reg;
  for (size_t m = 0; m < models.size(); ++m)
    (models[m].cfg.head_mode == net::HeadMode::classifier ? cls : reg).push_back(m);
  auto group_weights = [&](const std::vector<size_t>& g) {
    std::vector<double> w;
    for (size_t m : g)
      w.push_back(weights.empty() ? 1.0 / double(g.size()) : weights[m]);
    return w;
  };
  const auto w_cls = group_weights(cls);
  const auto w_reg = group_weights(reg);

  const auto records = read_manifest(o.manifest);
  std::vector<const SampleRecord*> chosen;
  for (const auto& r : records)
    if (o.split.empty() || r.split == o.split)
      chosen.push_back(&r);
  std::vector<std::optional<evalkit::Prediction>> slots(chosen.size());
  trainer::parallel_for(chosen.size(), o.jobs, [&](size_t i) {
    const SampleRecord& r = *chosen[i];
    try {
      const auto g = trainer::prepare_graph(r, c.data);
      evalkit::Prediction p;
      p.id = r.id;
      p.label = r.label;
      p.dockq = r.dockq;
      auto combine = [&](const std::vector<size_t>& group, const std::vector<double>& w) {
        std::vector<double> v;
        for (size_t m : group)
          v.push_back(static_cast<double>(
              net::forward(g, models[m], net::Mode::infer).score(models[m].cfg.head_mode)));
        return net::ensemble_combine(v, w);
      };
      if (!cls.empty())
        p.class_prob = combine(cls, w_cls);
      if (!reg.empty())
        p.reg_score = combine(reg, w_reg);
      slots[i] = std::move(p);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::io || e.kind() == ErrorKind::config)
        throw;
      log::warn("predict: skipping unscorable sample " + r.id + ": " + e.what());
    }
  });
  std::vector<evalkit::Prediction> preds;
  for (auto& s : slots)
    if (s)
      preds.push_back(std::move(*s));
  evalkit::write_predictions((out / "predictions.jsonl").string(), preds);
}

std::vector<double> threshold_scores(const std::vector<evalkit::Prediction>& preds,
                                     std::vector<int>& labels, double dockq_positive) {
  std::vector<double> s;
  for (const auto& p : preds) {
    if (!p.class_prob && !p.reg_score)
      fail(ErrorKind::data, "prediction " + p.id + " has no score");
    s.push_back(p.class_prob ? *p.class_prob : *p.reg_score);
    if (p.label)
      labels.push_back(*p.label);
    else if (p.dockq)
      labels.push_back(evalkit::label_from_dockq(*p.dockq, dockq_positive));
    else
      fail(ErrorKind::data, "prediction " + p.id + " has neither label nor dockq");
  }
  return s;
}

void cmd_threshold(const Options& o, const PipelineConfig& c, const fs::path& out) {
  require_file(o.predictions, "predictions");
  const auto preds = evalkit::read_predictions(o.predictions);
  std::vector<int> labels;
  const auto scores = threshold_scores(preds, labels, c.eval.dockq_positive);
  const auto t = evalkit::select_threshold_fbeta(scores, labels, c.loss.fbeta_beta);
  nlohmann::ordered_json j;
  j["beta"] = c.loss.fbeta_beta;
  j["threshold"] = t.tau;
  j["fbeta"] = t.score;
  j["degenerate"] = t.degenerate;
  j["n"] = scores.size();
  write_text(out / "threshold.json", j.dump(2) + "\n");
}

void cmd_eval(const Options& o, const PipelineConfig& c, const fs::path& out) {
  require_file(o.predictions, "predictions");
  const auto preds = evalkit::read_predictions(o.predictions);
  const auto r = evalkit::evaluate(preds, c.loss.fbeta_beta, c.eval.ks, o.threshold,
                                   c.eval.dockq_positive);
  write_text(out / "report.json", evalkit::report_to_json(r) + "\n");
}

void cmd_split(const Options& o, const PipelineConfig& c, const fs::path& out) {
  require_file(o.manifest, "manifest");
  if (o.ratios.size() != 3)
    fail(ErrorKind::config, "--ratios needs three values");
  auto records = read_manifest(o.manifest);
  std::vector<std::string> clusters;
  for (const auto& r : records)
    clusters.push_back(r.cluster_id);
  const auto s = evalkit::split_by_cluster(clusters, {o.ratios[0], o.ratios[1], o.ratios[2]},
                                           derive_seed(c.train.seed, "split"));
  for (size_t i = 0; i < records.size(); ++i)
    records[i].split = evalkit::to_string(s.tags[i]);
  write_manifest((out / "manifest.jsonl").string(), records);
  nlohmann::ordered_json j;
  j["train"] = s.fractions[0];
  j["validation"] = s.fractions[1];
  j["test"] = s.fractions[2];
  j["degenerate"] = s.degenerate;
  write_text(out / "split.json", j.dump(2) + "\n");
}

} // namespace

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 3;
    case ErrorKind::parse: return 4;
    case ErrorKind::validation: return 5;
    case ErrorKind::dimension: return 6;
    case ErrorKind::data: return 7;
    case ErrorKind::numeric: return 8;
    case ErrorKind::empty_set: return 9;
    case ErrorKind::io: return 10;
  }
  return 1;
}

int run(int argc, const char* const* argv) {
  CLI::App app{"igpose: immunoglobulin-antigen pose classification and scoring"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* s) {
    s->add_option("--config", o.config_path, "pipeline config JSON");
    s->add_option("--seed", o.seed, "run seed");
    s->add_option("--jobs", o.jobs, "worker threads for per-sample work")->check(CLI::PositiveNumber);
    s->add_option("--out", o.out, "output directory (default $IGPOSE_OUT/<subcommand>)");
    s->add_flag("-v,--verbose", o.verbose, "more logging");
    s->add_flag("-q,--quiet", o.quiet, "errors only");
  };
  auto data_flags = [&](CLI::App* s) {
    s->add_option("--k", o.k, "k-hop radius");
    s->add_option("--max-nodes", o.max_nodes, "subgraph node budget");
    s->add_option("--seed-mode", o.seed_mode, "interface | cdr");
    s->add_flag("--nondocking", o.nondocking, "drop inter-partner edges (ablation)");
    s->add_flag("--no-subgraph", o.no_subgraph, "use whole graphs");
  };
  auto train_flags = [&](CLI::App* s) {
    s->add_option("--pooling", o.pooling, "pooling strategy");
    s->add_option("--epochs", o.epochs, "max epochs");
    s->add_option("--batch-size", o.batch_size, "mini-batch size");
    s->add_option("--patience", o.patience, "early-stopping patience");
  };

  auto* featurize = app.add_subcommand("featurize", "structures -> serialized graphs");
  common(featurize);
  featurize->add_option("--manifest", o.manifest)->required();
  featurize->add_flag("--nondocking", o.nondocking, "drop inter-partner edges (ablation)");

  auto* sample = app.add_subcommand("sample", "k-hop subgraph extraction");
  common(sample);
  sample->add_option("--manifest", o.manifest)->required();
  data_flags(sample);

  auto* forge = app.add_subcommand("forge", "synthetic decoy fixtures");
  common(forge);
  forge->add_option("--complexes", o.fixture.complexes)->check(CLI::PositiveNumber);
  forge->add_option("--n-ig", o.fixture.n_ig)->check(CLI::PositiveNumber);
  forge->add_option("--n-ag", o.fixture.n_ag)->check(CLI::PositiveNumber);
  forge->add_option("--near", o.fixture.n_near)->check(CLI::NonNegativeNumber);
  forge->add_option("--far", o.fixture.n_far)->check(CLI::NonNegativeNumber);

  auto* train_clf = app.add_subcommand("train-clf", "train the pose classifier");
  common(train_clf);
  train_clf->add_option("--manifest", o.manifest)->required();
  data_flags(train_clf);
  train_flags(train_clf);

  auto* train_reg = app.add_subcommand("train-reg", "train the pose-quality regressor");
  common(train_reg);
  train_reg->add_option("--manifest", o.manifest)->required();
  train_reg->add_option("--checkpoint", o.checkpoints, "classifier checkpoint (ft mode)");
  train_reg->add_option("--mode", o.reg_mode, "ft (fine-tune) | fs (from scratch)");
  data_flags(train_reg);
  train_flags(train_reg);

  auto* predict = app.add_subcommand("predict", "score samples with one or more checkpoints");
  common(predict);
  predict->add_option("--manifest", o.manifest)->required();
  predict->add_option("--checkpoint", o.checkpoints, "checkpoint (repeatable)")->required();
  predict->add_option("--ensemble-weights", o.ensemble_weights, "weights in checkpoint order")
      ->delimiter(',');
  predict->add_option("--split", o.split, "only records of this split");
  data_flags(predict);

  auto* threshold = app.add_subcommand("threshold", "F-beta threshold on a prediction file");
  common(threshold);
  threshold->add_option("--predictions", o.predictions)->required();

  auto* eval = app.add_subcommand("eval", "evaluation report for a prediction file");
  common(eval);
  eval->add_option("--predictions", o.predictions)->required();
  eval->add_option("--threshold", o.threshold, "fixed threshold instead of F-beta selection");

  auto* split = app.add_subcommand("split", "cluster-level train/validation/test split");
  common(split);
  split->add_option("--manifest", o.manifest)->required();
  split->add_option("--ratios", o.ratios, "train,validation,test")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  log::set_level(o.quiet ? log::Level::quiet
                         : o.verbose >= 2 ? log::Level::debug
                         : o.verbose == 1 ? log::Level::info
                                          : log::Level::warn);
  try {
    const PipelineConfig cfg = resolve_config(o);
    const fs::path out = resolve_out(o, name);
    write_snapshot(out, name, o, cfg);
    if (name == "featurize")
      cmd_featurize(o, cfg, out);
    else if (name == "sample")
      cmd_sample(o, cfg, out);
    else if (name == "forge")
      cmd_forge(o, cfg, out);
    else if (name == "train-clf")
      cmd_train_clf(o, cfg, out);
    else if (name == "train-reg")
      cmd_train_reg(o, cfg, out);
    else if (name == "predict")
      cmd_predict(o, cfg, out);
    else if (name == "threshold")
      cmd_threshold(o, cfg, out);
    else if (name == "eval")
      cmd_eval(o, cfg, out);
    else if (name == "split")
      cmd_split(o, cfg, out);
  } catch (const Error& e) {
    std::fprintf(stderr, "igpose %s: %s error: %s\n", name.c_str(), to_string(e.kind()),
                 e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "igpose %s: %s\n", name.c_str(), e.what());
    return 1;
  }
  return 0;
}

} // namespace igpose::cli
