// SPDX-License-Identifier: Apache-2.0

#include "igpose/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <numeric>
#include <random>
#include <thread>

#include "json.hpp"

#include "igpose/error.hpp"
#include "igpose/evalkit.hpp"
#include "igpose/log.hpp"
#include "igpose/rng.hpp"

namespace igpose::trainer {

using net::ModelParams;

namespace {

template<typename S>
std::vector<net::Mat<S>*> tensors(ModelParams<S>& p) {
  std::vector<net::Mat<S>*> out;
  p.visit([&](const std::string&, net::Mat<S>& t) { out.push_back(&t); });
  return out;
}

template<typename S>
std::vector<const net::Mat<S>*> tensors(const ModelParams<S>& p) {
  std::vector<const net::Mat<S>*> out;
  p.visit([&](const std::string&, const net::Mat<S>& t) { out.push_back(&t); });
  return out;
}

std::vector<const featurize::ResidueGraph*> graph_ptrs(const std::vector<Sample>& s,
                                                       const std::vector<size_t>& idx) {
  std::vector<const featurize::ResidueGraph*> out;
  for (size_t i : idx)
    out.push_back(&s[i].graph);
  return out;
}

std::optional<double> pearson_or_null(std::span<const double> a, std::span<const double> b) {
  try {
    return evalkit::pearson_r(a, b);
  } catch (const Error&) {
    return std::nullopt;
  }
}

bool improves(const std::optional<double>& m, const std::optional<double>& best) {
  return m && (!best || *m > *best);
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

} // namespace

void TrainConfig::validate() const {
  if (!(lr_init >= 0) || !(lr_final >= 0) || lr_final > lr_init)
    fail(ErrorKind::config, "train config requires 0 <= lr_final <= lr_init");
  if (max_epochs < 0)
    fail(ErrorKind::config, "train config requires max_epochs >= 0");
  if (batch_size < 1)
    fail(ErrorKind::config, "train config requires batch_size >= 1");
  if (!(w_neg > 0) || !(w_pos > 0))
    fail(ErrorKind::config, "sampler weights must be positive");
  if (patience < 1)
    fail(ErrorKind::config, "train config requires patience >= 1");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) || !(eps > 0))
    fail(ErrorKind::config, "invalid Adam hyperparameters");
}

void DataConfig::validate() const {
  featurizer.validate();
  sampler.validate();
}

std::vector<size_t> weighted_sampler(std::span<const int> labels, double w_neg, double w_pos,
                                     std::uint64_t seed, size_t n_draws) {
  if (labels.empty())
    fail(ErrorKind::empty_set, "weighted_sampler: no labels");
  if (!(w_neg > 0) || !(w_pos > 0))
    fail(ErrorKind::config, "weighted_sampler: weights must be positive");
  std::vector<double> w;
  w.reserve(labels.size());
  for (int l : labels) {
    if (l != 0 && l != 1)
      fail(ErrorKind::validation, "weighted_sampler: label " + std::to_string(l));
    w.push_back(l == 1 ? w_pos : w_neg);
  }
  std::discrete_distribution<size_t> dist(w.begin(), w.end());
  std::mt19937_64 rng(seed);
  std::vector<size_t> out(n_draws);
  for (auto& i : out)
    i = dist(rng);
  return out;
}

double cosine_lr(double epoch, const TrainConfig& cfg) {
  if (!(epoch >= 0) || epoch >= double(std::max(cfg.max_epochs, 1)))
    fail(ErrorKind::config, "cosine_lr: epoch " + std::to_string(epoch) + " outside [0, " +
                                std::to_string(cfg.max_epochs) + ")");
  if (cfg.max_epochs <= 1)
    return cfg.lr_init;
  const double frac = epoch / double(cfg.max_epochs - 1);
  return cfg.lr_final + 0.5 * (cfg.lr_init - cfg.lr_final) * (1 + std::cos(std::numbers::pi * frac));
}

template<typename S>
void adam_update(std::span<S> p, std::span<const S> g, std::span<S> m, std::span<S> v,
                 long step, double lr, double beta1, double beta2, double eps) {
  if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size())
    fail(ErrorKind::dimension, "adam_update: state not aligned with parameters");
  if (step < 1)
    fail(ErrorKind::config, "adam_update: step count starts at 1");
  const double c1 = 1 - std::pow(beta1, double(step));
  const double c2 = 1 - std::pow(beta2, double(step));
  for (size_t i = 0; i < p.size(); ++i) {
    const double gi = static_cast<double>(g[i]);
    const double mi = beta1 * static_cast<double>(m[i]) + (1 - beta1) * gi;
    const double vi = beta2 * static_cast<double>(v[i]) + (1 - beta2) * gi * gi;
    m[i] = static_cast<S>(mi);
    v[i] = static_cast<S>(vi);
    p[i] = static_cast<S>(static_cast<double>(p[i]) -
                          lr * (mi / c1) / (std::sqrt(vi / c2) + eps));
  }
}

template<typename S>
AdamState<S> adam_init(const ModelParams<S>& p) {
  return {p.zeros_like(), p.zeros_like(), 0};
}

template<typename S>
void adam_step(ModelParams<S>& p, const ModelParams<S>& g, AdamState<S>& state, double lr,
               const TrainConfig& cfg) {
  auto pt = tensors(p);
  auto gt = tensors(g);
  auto mt = tensors(state.m);
  auto vt = tensors(state.v);
  if (gt.size() != pt.size() || mt.size() != pt.size() || vt.size() != pt.size())
    fail(ErrorKind::dimension, "adam_step: gradient/state layout differs from parameters");
  ++state.step;
  for (size_t k = 0; k < pt.size(); ++k) {
    if (gt[k]->size() != pt[k]->size() || mt[k]->size() != pt[k]->size() ||
        vt[k]->size() != pt[k]->size())
      fail(ErrorKind::dimension, "adam_step: tensor " + std::to_string(k) + " shape mismatch");
    const size_t n = static_cast<size_t>(pt[k]->size());
    adam_update<S>(std::span<S>(pt[k]->data(), n), std::span<const S>(gt[k]->data(), n),
                   std::span<S>(mt[k]->data(), n), std::span<S>(vt[k]->data(), n), state.step,
                   lr, cfg.beta1, cfg.beta2, cfg.eps);
  }
}

void parallel_for(size_t n, int jobs, const std::function<void(size_t)>& f) {
  const size_t workers = std::min<size_t>(n, static_cast<size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i)
      f(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!first)
            first = std::current_exception();
        }
      }
    });
  for (auto& t : pool)
    t.join();
  if (first)
    std::rethrow_exception(first);
}

featurize::ResidueGraph prepare_graph(const SampleRecord& r, const DataConfig& cfg) {
  featurize::ResidueGraph g;
  if (ends_with(r.structure_path, ".igg")) {
    g = featurize::load_graph(r.structure_path);
  } else {
    structio::Complex c = structio::read_pdb_file(r.structure_path);
    c.id = r.id;
    c = structio::assign_roles(std::move(c), r.role_map);
    const auto ann = r.cdr_annotation_path.empty()
                         ? structio::heuristic_cdr_windows(c)
                         : structio::read_cdr_annotation_file(r.cdr_annotation_path);
    c = structio::apply_cdr_annotation(std::move(c), ann);
    const Eigen::MatrixXd x = featurize::assemble_node_features(c, r.embedding_paths);
    g = featurize::build_graph(c, x, cfg.featurizer);
  }
  g.id = r.id;
  if (cfg.nondocking_ablation)
    g = featurize::remove_inter_edges(g);
  if (g.nondocking() && !cfg.allow_nondocking)
    fail(ErrorKind::data, "sample " + r.id + " has no inter-partner edges");
  if (cfg.use_subgraph) {
    const auto seeds = subgraph::seed_nodes(g, cfg.sampler.seed_mode);
    g = subgraph::khop_sample(g, seeds, cfg.sampler);
  }
  return g;
}

Sample sample_from_graph(featurize::ResidueGraph g, int label, double dockq) {
  Sample s;
  s.id = g.id;
  s.label = label;
  s.dockq = dockq;
  for (auto role : g.node_role)
    s.node_labels.push_back(static_cast<int>(role));
  s.graph = std::move(g);
  return s;
}

std::vector<Sample> load_samples(const std::vector<SampleRecord>& records,
                                 const std::string& split, const DataConfig& cfg,
                                 net::PoolingStrategy pooling, int jobs,
                                 std::vector<std::string>* skipped) {
  cfg.validate();
  std::vector<const SampleRecord*> chosen;
  for (const auto& r : records)
    if (split.empty() || r.split == split)
      chosen.push_back(&r);
  std::vector<std::optional<Sample>> slots(chosen.size());
  std::vector<std::string> why(chosen.size());
  parallel_for(chosen.size(), jobs, [&](size_t i) {
    const SampleRecord& r = *chosen[i];
    try {
      if (!r.label && !r.dockq)
        fail(ErrorKind::validation, "record " + r.id + " has neither label nor dockq");
      const int label = r.label ? *r.label : evalkit::label_from_dockq(*r.dockq);
      const double dockq = r.dockq ? *r.dockq : double(label);
      featurize::ResidueGraph g = prepare_graph(r, cfg);
      net::select_pool_set(g, pooling);
      slots[i] = sample_from_graph(std::move(g), label, dockq);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::io || e.kind() == ErrorKind::config)
        throw;
      why[i] = e.what();
    }
  });
  std::vector<Sample> out;
  for (size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]) {
      out.push_back(std::move(*slots[i]));
    } else {
      log::warn("skipping unscorable sample " + chosen[i]->id + ": " + why[i]);
      if (skipped)
        skipped->push_back(chosen[i]->id);
    }
  }
  return out;
}

std::vector<double> predict_scores(const ModelParams<float>& p,
                                   const std::vector<Sample>& samples) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples)
    out.push_back(static_cast<double>(
        net::forward(s.graph, p, net::Mode::infer).score(p.cfg.head_mode)));
  return out;
}

std::optional<double> f1_at_selected_threshold(std::span<const double> scores,
                                               std::span<const int> labels, double beta,
                                               double* threshold) {
  if (scores.empty())
    return std::nullopt;
  const auto t = evalkit::select_threshold_fbeta(scores, labels, beta);
  if (threshold)
    *threshold = t.tau;
  return evalkit::confusion_metrics(scores, labels, t.tau).f1;
}

namespace {


struct LoopHooks {
  std::string metric_name;
  // Batches of one epoch as index lists into the training set.
  std::function<std::vector<std::vector<size_t>>(int epoch)> batches;
  std::function<net::Objective<float>(const std::vector<size_t>& batch)> objective;
  std::function<std::optional<double>(const ModelParams<float>&, const std::vector<Sample>&,
                                      double* thr)>
      metric;
};

TrainResult run_loop(ModelParams<float> params, const std::vector<Sample>& train,
                     const std::vector<Sample>& val, const TrainConfig& cfg,
                     const LoopHooks& hooks) {
  TrainResult res;
  res.metric_name = hooks.metric_name;
  res.best = params;
  const bool thresholds = hooks.metric_name == "f1";
  AdamState<float> adam = adam_init(params);
  int stale = 0;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = cosine_lr(epoch, cfg);
    double loss_sum = 0;
    size_t n_batches = 0;
    std::uint64_t position = 0;
    for (const auto& batch : hooks.batches(epoch)) {
      std::vector<std::uint64_t> seeds;
      for (size_t k = 0; k < batch.size(); ++k)
        seeds.push_back(derive_seed(cfg.seed, "dropout", static_cast<std::uint64_t>(epoch),
                                    position++));
      const auto graphs = graph_ptrs(train, batch);
      auto gr = net::gradients<float>(params, graphs, hooks.objective(batch), net::Mode::train,
                                      seeds);
      adam_step(params, gr.grads, adam, rec.lr, cfg);
      loss_sum += gr.loss;
      ++n_batches;
    }
    rec.train_loss = n_batches ? loss_sum / double(n_batches) : 0.0;
    double thr = 0;
    rec.train_metric = hooks.metric(params, train, &thr);
    if (thresholds && rec.train_metric)
      rec.train_threshold = thr;
    thr = 0;
    rec.val_metric = hooks.metric(params, val, &thr);
    if (thresholds && rec.val_metric)
      rec.val_threshold = thr;
    if (improves(rec.val_metric, res.best_metric)) {
      rec.improved = true;
      res.best_metric = rec.val_metric;
      res.best_epoch = epoch;
      res.best = params;
      stale = 0;
    } else {
      ++stale;
    }
    log::info("epoch " + std::to_string(epoch) + " lr " + std::to_string(rec.lr) + " loss " +
              std::to_string(rec.train_loss));
    res.history.push_back(rec);
    if (stale >= cfg.patience)
      break;
  }
  res.last = std::move(params);
  return res;
}

void check_nonempty(const std::vector<Sample>& s, const char* split) {
  if (s.empty())
    fail(ErrorKind::empty_set, std::string("no usable ") + split + " samples");
}

} // namespace

TrainResult train_classifier(const std::vector<Sample>& train, const std::vector<Sample>& val,
                             const net::ModelConfig& model_cfg, const TrainConfig& cfg,
                             const objectives::LossWeights& w) {
  cfg.validate();
  w.validate();
  check_nonempty(train, "train");
  check_nonempty(val, "validation");
  net::ModelConfig mc = model_cfg;
  mc.head_mode = net::HeadMode::classifier;

  std::vector<int> labels;
  for (const auto& s : train)
    labels.push_back(s.label);

  LoopHooks hooks;
  hooks.metric_name = "f1";
  hooks.batches = [&](int epoch) {
    const auto draws = weighted_sampler(labels, cfg.w_neg, cfg.w_pos,
                                        derive_seed(cfg.seed, "sampler", epoch), train.size());
    std::vector<std::vector<size_t>> out;
    const size_t bs = static_cast<size_t>(cfg.batch_size);
    for (size_t b = 0; b < draws.size(); b += bs)
      out.emplace_back(draws.begin() + b, draws.begin() + std::min(draws.size(), b + bs));
    return out;
  };
  hooks.objective = [&](const std::vector<size_t>& batch) -> net::Objective<float> {
    objectives::ClassificationTargets t;
    for (size_t i : batch) {
      t.labels.push_back(train[i].label);
      t.node_labels.push_back(train[i].node_labels);
      t.dockq.push_back(train[i].dockq);
    }
    return [t, w](const std::vector<net::ForwardOutput<float>>& out) {
      return objectives::classification_objective(out, t, w);
    };
  };
  hooks.metric = [&](const ModelParams<float>& p, const std::vector<Sample>& set,
                     double* thr) -> std::optional<double> {
    std::vector<int> l;
    for (const auto& s : set)
      l.push_back(s.label);
    const auto scores = predict_scores(p, set);
    return f1_at_selected_threshold(scores, l, w.fbeta_beta, thr);
  };
  return run_loop(net::init_params<float>(mc, derive_seed(cfg.seed, "init")), train, val, cfg,
                  hooks);
}

const char* to_string(RegressorInit m) {
  return m == RegressorInit::fine_tune ? "fine_tune" : "from_scratch";
}

TrainResult finetune_regressor(const ModelParams<float>* classifier,
                               const std::vector<Sample>& train, const std::vector<Sample>& val,
                               const net::ModelConfig& model_cfg, const TrainConfig& cfg,
                               RegressorInit init) {
  cfg.validate();
  check_nonempty(train, "train");
  check_nonempty(val, "validation");
  if (train.size() < 2)
    fail(ErrorKind::config, "regression training needs at least 2 samples for the ranking list");
  net::ModelConfig mc = model_cfg;
  mc.head_mode = net::HeadMode::regressor;

  ModelParams<float> params;
  if (init == RegressorInit::fine_tune) {
    if (!classifier)
      fail(ErrorKind::config, "fine-tuning requires a classifier checkpoint");
    const auto& c = classifier->cfg;
    if (c.hidden_dim != mc.hidden_dim || c.layers != mc.layers || c.input_dim != mc.input_dim ||
        c.edge_dim != mc.edge_dim)
      fail(ErrorKind::config, "classifier checkpoint architecture does not match model config");
    params = *classifier;
    params.cfg = mc;
    net::reset_regressor_head(params, derive_seed(cfg.seed, "init-regressor"));
  } else {
    params = net::init_params<float>(mc, derive_seed(cfg.seed, "init"));
  }

  LoopHooks hooks;
  hooks.metric_name = "pearson";
  hooks.batches = [&](int epoch) {
    std::vector<size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(cfg.seed, "shuffle", epoch));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<size_t>> out;
    const size_t bs = static_cast<size_t>(std::max(cfg.batch_size, 2));
    for (size_t b = 0; b < order.size(); b += bs)
      out.emplace_back(order.begin() + b, order.begin() + std::min(order.size(), b + bs));
    // A one-item list has no ranking term; fold it into the previous batch.
    if (out.size() > 1 && out.back().size() == 1) {
      out[out.size() - 2].push_back(out.back().front());
      out.pop_back();
    }
    return out;
  };
  hooks.objective = [&](const std::vector<size_t>& batch) -> net::Objective<float> {
    std::vector<double> t;
    for (size_t i : batch)
      t.push_back(train[i].dockq);
    return [t](const std::vector<net::ForwardOutput<float>>& out) {
      return objectives::regression_objective(out, t);
    };
  };
  hooks.metric = [&](const ModelParams<float>& p, const std::vector<Sample>& set,
                     double*) -> std::optional<double> {
    std::vector<double> t;
    for (const auto& s : set)
      t.push_back(s.dockq);
    const auto scores = predict_scores(p, set);
    return pearson_or_null(scores, t);
  };
  return run_loop(std::move(params), train, val, cfg, hooks);
}

std::string history_to_json(const TrainResult& r) {
  using J = nlohmann::ordered_json;
  auto opt = [](const std::optional<double>& v) { return v ? J(*v) : J(nullptr); };
  J j;
  j["metric"] = r.metric_name;
  j["best_epoch"] = r.best_epoch;
  j["best_metric"] = opt(r.best_metric);
  J epochs = J::array();
  for (const auto& e : r.history) {
    J x;
    x["epoch"] = e.epoch;
    x["lr"] = e.lr;
    x["train_loss"] = e.train_loss;
    x["train_" + r.metric_name] = opt(e.train_metric);
    x["val_" + r.metric_name] = opt(e.val_metric);
    if (r.metric_name == "f1") {
      x["train_threshold"] = opt(e.train_threshold);
      x["val_threshold"] = opt(e.val_threshold);
    }
    x["improved"] = e.improved;
    epochs.push_back(x);
  }
  j["epochs"] = epochs;
  return j.dump(2);
}

template void adam_update<float>(std::span<float>, std::span<const float>, std::span<float>,
                                 std::span<float>, long, double, double, double, double);
template void adam_update<double>(std::span<double>, std::span<const double>,
                                  std::span<double>, std::span<double>, long, double, double,
                                  double, double);
template AdamState<float> adam_init<float>(const ModelParams<float>&);
template AdamState<double> adam_init<double>(const ModelParams<double>&);
template void adam_step<float>(ModelParams<float>&, const ModelParams<float>&,
                               AdamState<float>&, double, const TrainConfig&);
template void adam_step<double>(ModelParams<double>&, const ModelParams<double>&,
                                AdamState<double>&, double, const TrainConfig&);

} // namespace igpose::trainer
