// SPDX-License-Identifier: Apache-2.0
//
// Property-level acceptance checks. One PASS/FAIL line per criterion; the
// exit status is nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <algorithm>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "igpose/cli.hpp"
#include "igpose/config.hpp"
#include "igpose/decoyforge.hpp"
#include "igpose/evalkit.hpp"
#include "igpose/featurize.hpp"
#include "igpose/log.hpp"
#include "igpose/net.hpp"
#include "igpose/objectives.hpp"
#include "igpose/subgraph.hpp"
#include "igpose/trainer.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace igpose;
using Clock = std::chrono::steady_clock;

namespace {

// tolerances
constexpr double kInvTolF32 = 1e-5;
constexpr double kInvTolF64 = 1e-9;
constexpr double kInvSeconds = 10;
constexpr double kFdStep = 1e-5;
constexpr double kFdTol = 1e-3;
constexpr double kFdSeconds = 120;
constexpr double kShortcutMin = 1e-3;
constexpr double kShortcutMax = 1e-6;
constexpr int kOverfitEpochs = 300;
constexpr double kOverfitSeconds = 300;
constexpr double kOverfitPearson = 0.95;
constexpr double kMetricTol = 1e-9;
constexpr double kPoolTol = 1e-6;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char b[64];
  std::snprintf(b, sizeof b, f, a);
  return b;
}

double rel_err(double a, double b) {
  const double s = std::max({std::abs(a), std::abs(b), 1e-30});
  return std::abs(a - b) / s;
}

featurize::ResidueGraph graph_of(const structio::Complex& c) {
  featurize::FeaturizerConfig fc;
  return featurize::build_graph(c, featurize::fallback_features(c), fc);
}

// ---- 1 ----
Outcome e3_invariance() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> ut(-10, 10);
  double worst32 = 0, worst64 = 0;
  for (int i = 0; i < 10; ++i) {
    const auto c = decoyforge::micro_complex(6 + i % 3, 6 + i % 2, 100 + i);
    decoyforge::Perturbation pt;
    pt.rotation = oracle::random_rotation(rng);
    pt.translation = {ut(rng), ut(rng), ut(rng)};
    pt.applied_to = decoyforge::Partner::ig;
    auto moved = decoyforge::rigid_transform(c, pt);
    pt.applied_to = decoyforge::Partner::ag;
    moved = decoyforge::rigid_transform(moved, pt);
    const auto g = graph_of(c), h = graph_of(moved);
    if (g.edges != h.edges)
      return {false, "edge set changed under a rigid motion (micro-complex " + std::to_string(i) + ")"};
    net::ModelConfig mc;
    const auto p64 = net::init_params<double>(mc, 7 + i);
    const auto p32 = net::cast_params<float>(p64);
    const auto a64 = net::forward(g, p64, net::Mode::infer);
    const auto b64 = net::forward(h, p64, net::Mode::infer);
    const auto a32 = net::forward(g, p32, net::Mode::infer);
    const auto b32 = net::forward(h, p32, net::Mode::infer);
    for (int k = 0; k < 2; ++k) {
      worst64 = std::max(worst64, rel_err(a64.class_probs[k], b64.class_probs[k]));
      worst32 = std::max(worst32, rel_err(a32.class_probs[k], b32.class_probs[k]));
    }
    worst64 = std::max(worst64, rel_err(a64.reg_score, b64.reg_score));
    worst32 = std::max(worst32, rel_err(a32.reg_score, b32.reg_score));
    // coordinates are equivariant: P'(moved) = R P'(orig) + t
    for (long r = 0; r < a64.coords_final.rows(); ++r) {
      const Eigen::Vector3d x(a64.coords_final(r, 0), a64.coords_final(r, 1), a64.coords_final(r, 2));
      const Eigen::Vector3d y = pt.rotation * x + pt.translation;
      for (int d = 0; d < 3; ++d)
        worst64 = std::max(worst64, std::abs(y(d) - b64.coords_final(r, d)) /
                                        std::max(1.0, std::abs(y(d))));
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = worst32 <= kInvTolF32 && worst64 <= kInvTolF64 && secs < kInvSeconds;
  return {ok, "max rel err f32 " + fmt("%.2e", worst32) + " (tol 1e-5), f64 " +
                  fmt("%.2e", worst64) + " (tol 1e-9), " + fmt("%.2f", secs) + " s"};
}

// ---- 2 ----
struct FdBatch {
  std::vector<featurize::ResidueGraph> graphs;
  objectives::ClassificationTargets cls;
  std::vector<double> dockq;
  std::vector<std::uint64_t> seeds;
};

FdBatch fd_batch() {
  FdBatch b;
  const int labels[3] = {1, 0, 1};
  const double dq[3] = {0.9, 0.2, 0.55};
  for (int i = 0; i < 3; ++i) {
    b.graphs.push_back(oracle::micro_graph(3, 3, 40 + i));
    b.cls.labels.push_back(labels[i]);
    b.cls.dockq.push_back(dq[i]);
    std::vector<int> nl;
    for (auto r : b.graphs.back().node_role)
      nl.push_back(static_cast<int>(r));
    b.cls.node_labels.push_back(nl);
    b.dockq.push_back(dq[i]);
    b.seeds.push_back(900 + i);
  }
  return b;
}

std::string fd_run(const net::ModelConfig& mc, const FdBatch& b, bool regression,
                   size_t max_entries, bool& ok, size_t& tensors) {
  objectives::LossWeights w;  // 1e-3, 2e-3
  net::Objective<double> obj;
  if (regression)
    obj = [&](const std::vector<net::ForwardOutput<double>>& o) {
      return objectives::regression_objective(o, b.dockq);
    };
  else
    obj = [&](const std::vector<net::ForwardOutput<double>>& o) {
      return objectives::classification_objective(o, b.cls, w);
    };
  auto params = net::init_params<double>(mc, 31);
  std::vector<const featurize::ResidueGraph*> ptrs;
  for (const auto& g : b.graphs)
    ptrs.push_back(&g);
  const auto an = net::gradients<double>(params, ptrs, obj, net::Mode::train, b.seeds);
  auto loss = [&](const net::ModelParams<double>& p) {
    std::vector<net::ForwardOutput<double>> out;
    for (size_t i = 0; i < b.graphs.size(); ++i)
      out.push_back(net::forward(b.graphs[i], p, net::Mode::train, b.seeds[i]));
    return obj(out).loss;
  };
  const auto checks = oracle::fd_check(params, an.grads, loss, kFdStep, kFdTol, max_entries, 5);
  double worst = 0;
  std::string worst_name;
  for (const auto& c : checks) {
    if (c.rel_err >= worst) {
      worst = c.rel_err;
      worst_name = c.name;
    }
    if (!c.pass)
      ok = false;
  }
  tensors += checks.size();
  return fmt("%.1e", worst) + " (" + worst_name + ")";
}

Outcome gradient_check() {
  const auto t0 = Clock::now();
  const auto b = fd_batch();
  bool ok = true;
  size_t tensors = 0;
  net::ModelConfig small;
  small.hidden_dim = 6;
  small.layers = 2;
  net::ModelConfig full;  // h 64, T 4
  std::string d;
  d += "small/all entries: clf " + fd_run(small, b, false, SIZE_MAX, ok, tensors);
  small.head_mode = net::HeadMode::regressor;
  d += ", reg " + fd_run(small, b, true, SIZE_MAX, ok, tensors);
  d += "; default/sampled: clf " + fd_run(full, b, false, 12, ok, tensors);
  full.head_mode = net::HeadMode::regressor;
  d += ", reg " + fd_run(full, b, true, 12, ok, tensors);
  const double secs = seconds_since(t0);
  ok = ok && secs < kFdSeconds;
  return {ok, std::to_string(tensors) + " tensors, worst rel err " + d + ", " +
                  fmt("%.1f", secs) + " s"};
}

// ---- 3 ----
Outcome gru_shortcut() {
  net::ModelConfig mc;
  mc.hidden_dim = 8;
  mc.layers = 1;
  auto p = net::init_params<double>(mc, 3);
  auto& g = p.gru[0];
  g.b_r.setConstant(-50);
  g.b_z.setConstant(-50);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd(0, 1);
  net::Mat<double> ht(1, 8), hp(1, 8);
  for (int c = 0; c < 8; ++c) {
    ht(0, c) = nd(rng);
    hp(0, c) = nd(rng);
  }
  auto jac_norm = [&](auto cell) {
    double s = 0;
    for (int c = 0; c < 8; ++c) {
      auto a = hp, b = hp;
      a(0, c) += kFdStep;
      b(0, c) -= kFdStep;
      const net::Mat<double> d = (cell(ht, a, g) - cell(ht, b, g)) / (2 * kFdStep);
      s += d.squaredNorm();
    }
    return std::sqrt(s);
  };
  const double mod = jac_norm(net::modified_gru_cell<double>);
  const double std_ = jac_norm(net::standard_gru_cell<double>);
  return {mod > kShortcutMin && std_ < kShortcutMax,
          "||dH/dh_prev|| modified " + fmt("%.3e", mod) + " (> 1e-3), standard " +
              fmt("%.3e", std_) + " (< 1e-6)"};
}

// ---- 4 ----
Outcome overfit() {
  const auto t0 = Clock::now();
  const auto native = decoyforge::micro_complex(8, 8, 77);
  const auto decoys = decoyforge::forge_decoys(native, 8, 8, 77);
  std::vector<trainer::Sample> set;
  subgraph::SamplerConfig sc;
  for (const auto& d : decoys) {
    auto g = graph_of(d.complex);
    g = subgraph::khop_sample(g, subgraph::seed_nodes(g, sc.seed_mode), sc);
    set.push_back(trainer::sample_from_graph(std::move(g), d.label, d.quality));
  }
  net::ModelConfig mc;
  trainer::TrainConfig tc;
  tc.max_epochs = kOverfitEpochs;
  tc.patience = 20;
  tc.seed = 1;
  objectives::LossWeights w;
  const auto clf = trainer::train_classifier(set, set, mc, tc, w);
  int first = -1;
  for (const auto& e : clf.history)
    if (first < 0 && e.train_metric && *e.train_metric == 1.0)
      first = e.epoch;
  const double clf_secs = seconds_since(t0);

  std::vector<double> t;
  for (const auto& s : set)
    t.push_back(s.dockq);
  trainer::TrainConfig rc = tc;
  const auto reg = trainer::finetune_regressor(&clf.best, set, set, mc, rc,
                                               trainer::RegressorInit::fine_tune);
  const auto scores = trainer::predict_scores(reg.best, set);
  const double r = evalkit::pearson_r(scores, t);
  const bool ok = first >= 0 && first < kOverfitEpochs && clf_secs < kOverfitSeconds &&
                  r >= kOverfitPearson;
  return {ok, "train F1 = 1.0 at epoch " + std::to_string(first) + " (" +
                  fmt("%.1f", clf_secs) + " s); regressor train Pearson " + fmt("%.4f", r) +
                  " after " + std::to_string(reg.history.size()) + " epochs (>= 0.95)"};
}

// ---- 5 ----
Outcome khop_oracle() {
  std::mt19937_64 rng(55);
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 200)(rng);
    const double p = std::uniform_real_distribution<double>(0.5, 4.0)(rng) / n;
    const auto g = oracle::random_graph(rng, n, p, 4, 2);
    const int n_seeds = std::uniform_int_distribution<int>(1, std::max(1, std::min(8, n - 1)))(rng);
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<int> seeds(all.begin(), all.begin() + n_seeds);
    std::sort(seeds.begin(), seeds.end());
    subgraph::SamplerConfig sc;
    sc.k = std::uniform_int_distribution<int>(1, 5)(rng);
    sc.n_max = std::uniform_int_distribution<int>(n_seeds + 1, n + 10)(rng);
    const auto got = subgraph::khop_nodes(g, seeds, sc);
    const auto want = oracle::khop_oracle(g, seeds, sc.k, sc.n_max);
    const auto sub = subgraph::khop_sample(g, seeds, sc);
    if (got != want || sub.node_count() != static_cast<int>(want.size()))
      ++mismatches;
  }
  return {mismatches == 0, std::to_string(100 - mismatches) + "/100 graphs match"};
}

// ---- 6 ----
std::vector<double> random_scores(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0, 1);
  const bool coarse = u(rng) < 0.5;
  std::vector<double> s(n);
  for (double& x : s)
    x = coarse ? std::round(u(rng) * 10) / 10 : u(rng);
  return s;
}

std::vector<int> random_labels(std::mt19937_64& rng, int n, bool both) {
  std::uniform_real_distribution<double> u(0, 1);
  const double q = u(rng);
  std::vector<int> y(n);
  do {
    for (int& v : y)
      v = u(rng) < q ? 1 : 0;
  } while (both && (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), 0) == 0));
  return y;
}

Outcome threshold_oracle() {
  std::mt19937_64 rng(66);
  int bad = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 60)(rng);
    const auto s = random_scores(rng, n);
    const auto y = random_labels(rng, n, false);
    const auto got = evalkit::select_threshold_fbeta(s, y, 0.25);
    const auto want = oracle::threshold_scan(s, y, 0.25);
    if (got.tau != want.tau || got.score != want.score || got.degenerate != (want.score == 0))
      ++bad;
  }
  const std::vector<double> s = {0.3, 0.7, 0.9};
  const std::vector<int> y = {0, 0, 0};
  const auto d = evalkit::select_threshold_fbeta(s, y, 0.25);
  const bool neg_ok = d.tau == 0 && d.score == 0 && d.degenerate;
  return {bad == 0 && neg_ok, std::to_string(500 - bad) + "/500 exact; all-negative -> (" +
                                  fmt("%g", d.tau) + ", " + fmt("%g", d.score) + ")"};
}

// ---- 7 ----
Outcome metric_oracles() {
  std::mt19937_64 rng(77);
  double worst_auc = 0, worst_ap = 0;
  int count_bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 50)(rng);
    const auto s = random_scores(rng, n);
    const auto y = random_labels(rng, n, true);
    worst_auc = std::max(worst_auc, std::abs(evalkit::roc_auc(s, y) - oracle::auc_pairwise(s, y)));
    worst_ap = std::max(worst_ap, std::abs(evalkit::pr_auc(s, y) - oracle::ap_sweep(s, y)));
    const double tau = std::uniform_real_distribution<double>(0, 1)(rng);
    const auto c = evalkit::confusion_metrics(s, y, tau);
    const auto o = oracle::count(s, y, tau);
    if (c.counts.tp != o.tp || c.counts.fp != o.fp || c.counts.tn != o.tn || c.counts.fn != o.fn)
      ++count_bad;
  }
  const bool ok = worst_auc <= kMetricTol && worst_ap <= kMetricTol && count_bad == 0;
  return {ok, "max |dAUC| " + fmt("%.1e", worst_auc) + ", max |dAP| " + fmt("%.1e", worst_ap) +
                  ", confusion mismatches " + std::to_string(count_bad)};
}

// ---- 8 ----
Outcome closed_forms() {
  const std::vector<double> a = {1, 2, 4}, b = {0, 1, 2};
  const double np = objectives::neg_pearson(a, b);
  Eigen::MatrixXd u(1, 2);
  u << 0.5, 0.5;
  const std::vector<int> t = {1};
  const double ce = objectives::cross_entropy(u, t);
  const double r0 = net::scaled_tanh(0.0);
  const std::vector<double> v = {0.9, 0.5}, w = {0.7, 0.3};
  const double ens = net::ensemble_combine(v, w);
  const bool ok = std::abs(np - (-0.981981)) <= 1e-6 && std::abs(ce - std::log(2.0)) <= 1e-9 &&
                  r0 == 0.5 && std::abs(ens - 0.78) <= 1e-12;
  return {ok, "neg_pearson " + fmt("%.7f", np) + ", uniform CE - ln2 " +
                  fmt("%.1e", ce - std::log(2.0)) + ", head(0) " + fmt("%.17g", r0) +
                  ", ensemble " + fmt("%.15f", ens)};
}

// ---- 9 ----
Outcome default_config() {
  const auto c = load_pipeline_config(std::string(IGPOSE_SOURCE_DIR) + "/configs/default.json");
  std::vector<std::string> bad;
  auto want = [&](bool cond, const char* what) {
    if (!cond)
      bad.push_back(what);
  };
  const auto& f = c.data.featurizer;
  want(f.tau_intra == 3.5, "tau_intra");
  want(f.tau_inter == 10.0, "tau_inter");
  want(f.rbf_count == 10 && f.edge_dim() == 30 && c.model.edge_dim == 30, "D / d_e");
  want(c.model.input_dim == 320, "d_x");
  want(c.model.layers == 4, "T");
  want(c.model.hidden_dim == 64, "h");
  want(c.model.dropout == 0.1, "dropout");
  want(c.data.sampler.k == 3, "k");
  want(c.data.sampler.n_max == 600, "n_max");
  want(c.train.lr_init == 1e-4 && c.train.lr_final == 1e-5, "lr");
  want(trainer::cosine_lr(0, c.train) == 1e-4 && trainer::cosine_lr(49, c.train) == 1e-5,
       "cosine boundaries");
  want(c.train.max_epochs == 50, "max_epochs");
  want(c.train.w_neg == 0.8 && c.train.w_pos == 0.2, "sampler weights");
  want(c.loss.alpha == 1e-3, "alpha");
  want(c.loss.beta == 2e-3, "beta");
  want(c.loss.fbeta_beta == 0.25, "F-beta beta");
  want(c.eval.dockq_positive == 0.8 && evalkit::kPositiveDockq == 0.8 &&
           evalkit::label_from_dockq(0.8) == 1,
       "DockQ positive threshold");
  // the shipped file and the compiled-in defaults must agree
  nlohmann::json shipped, builtin;
  to_json(shipped, c);
  to_json(builtin, PipelineConfig{});
  want(shipped == builtin, "file vs builtin defaults");
  std::string d = bad.empty() ? "all 17 constants match" : "mismatch:";
  for (const auto& s : bad)
    d += " " + s;
  return {bad.empty(), d};
}

// ---- 10 ----
Outcome pooling_semantics() {
  std::mt19937_64 rng(1010);
  int mismatched = 0, checked = 0;
  double worst = 0;
  net::ModelConfig mc;
  mc.hidden_dim = 16;
  mc.layers = 1;
  const auto p = net::init_params<double>(mc, 9);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = std::uniform_int_distribution<int>(4, 40)(rng);
    const auto g = oracle::random_graph(rng, n, 0.2, 8, 2);
    net::Mat<double> h(n, 16);
    std::normal_distribution<double> nd(0, 1);
    for (long i = 0; i < h.size(); ++i)
      h.data()[i] = nd(rng);
    for (auto s : net::all_pooling_strategies()) {
      const auto want = oracle::pool_oracle(g, s);
      if (want.empty())
        continue;
      ++checked;
      if (net::select_pool_set(g, s) != want)
        ++mismatched;
      // pooling over S equals pooling over V with the non-S gate terms zeroed
      const auto ps = net::weighted_pool(h, want, p.pool_gate);
      std::vector<int> all(n);
      std::iota(all.begin(), all.end(), 0);
      const auto pv = net::weighted_pool(h, all, p.pool_gate);
      Eigen::RowVectorXd masked = Eigen::RowVectorXd::Zero(16);
      for (int i : want)
        masked += pv.weights[i] * h.row(i);
      worst = std::max(worst, (masked - ps.pooled).cwiseAbs().maxCoeff());
    }
  }
  return {mismatched == 0 && worst <= kPoolTol,
          std::to_string(checked - mismatched) + "/" + std::to_string(checked) +
              " strategy sets match; masking identity max err " + fmt("%.1e", worst)};
}

// ---- 11 ----
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "igpose");
  std::vector<const char*> argv;
  for (const auto& a : args)
    argv.push_back(a.c_str());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

Outcome e2e_determinism() {
  const fs::path root = fs::temp_directory_path() / ("igpose-accept-" + std::to_string(getpid()));
  fs::remove_all(root);
  std::vector<std::string> outputs;
  const char* files[] = {"clf/classifier.ckpt", "clf/history.json", "pred/predictions.jsonl",
                         "eval/report.json"};
  for (int run = 0; run < 2; ++run) {
    const std::string d = (root / ("run" + std::to_string(run))).string();
    const std::string jobs = run == 0 ? "1" : "2";
    int rc = cli({"forge", "-q", "--seed", "5", "--n-ig", "6", "--n-ag", "6", "--near", "4",
                  "--far", "4", "--out", d + "/forge"});
    if (!rc)
      rc = cli({"featurize", "-q", "--jobs", jobs, "--manifest", d + "/forge/manifest.jsonl",
                "--out", d + "/feat"});
    if (!rc)
      rc = cli({"train-clf", "-q", "--seed", "5", "--jobs", jobs, "--epochs", "3", "--manifest",
                d + "/feat/manifest.jsonl", "--out", d + "/clf"});
    if (!rc)
      rc = cli({"predict", "-q", "--jobs", jobs, "--manifest", d + "/feat/manifest.jsonl",
                "--checkpoint", d + "/clf/classifier.ckpt", "--split", "test", "--out",
                d + "/pred"});
    if (!rc)
      rc = cli({"eval", "-q", "--predictions", d + "/pred/predictions.jsonl", "--out",
                d + "/eval"});
    if (rc)
      return {false, "pipeline run " + std::to_string(run) + " exited " + std::to_string(rc)};
    for (const char* f : files)
      outputs.push_back(slurp(fs::path(d) / f));
  }
  fs::remove_all(root);
  int same = 0;
  for (size_t k = 0; k < std::size(files); ++k)
    same += outputs[k] == outputs[k + std::size(files)] && !outputs[k].empty();
  return {same == static_cast<int>(std::size(files)),
          std::to_string(same) + "/" + std::to_string(std::size(files)) +
              " artifacts bytewise identical (jobs 1 vs 2)"};
}

} // namespace

// Optional arguments select criteria by number.
int main(int argc, char** argv) {
  log::set_level(log::Level::warn);
  struct Item {
    const char* name;
    std::function<Outcome()> fn;
  };
  const std::vector<Item> items = {
      {"E(3)-invariance", e3_invariance},
      {"gradient correctness", gradient_check},
      {"GRU gradient shortcut", gru_shortcut},
      {"overfit capacity", overfit},
      {"k-hop sampling oracle", khop_oracle},
      {"threshold oracle", threshold_oracle},
      {"metric oracles", metric_oracles},
      {"loss closed forms", closed_forms},
      {"default config conformance", default_config},
      {"pooling semantics", pooling_semantics},
      {"end-to-end determinism", e2e_determinism},
  };
  std::vector<bool> run(items.size(), argc < 2);
  for (int a = 1; a < argc; ++a) {
    const int k = std::atoi(argv[a]);
    if (k >= 1 && k <= static_cast<int>(items.size()))
      run[k - 1] = true;
  }
  int failed = 0, ran = 0;
  for (size_t i = 0; i < items.size(); ++i) {
    if (!run[i])
      continue;
    ++ran;
    Outcome o;
    try {
      o = items[i].fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  %2zu  %-28s %s\n", o.pass ? "PASS" : "FAIL", i + 1, items[i].name,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed ? 1 : 0;
}
