// SPDX-License-Identifier: Apache-2.0

#include "igpose/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include "json.hpp"

#include "igpose/error.hpp"
#include "igpose/log.hpp"
#include "igpose/objectives.hpp"

namespace igpose::evalkit {

namespace {

void check_aligned(size_t a, size_t b, const char* what) {
  if (a != b)
    fail(ErrorKind::dimension, std::string(what) + ": " + std::to_string(a) + " scores but " +
                                   std::to_string(b) + " labels");
}

void check_labels(std::span<const int> labels, const char* what) {
  for (int l : labels)
    if (l != 0 && l != 1)
      fail(ErrorKind::validation, std::string(what) + ": label " + std::to_string(l) +
                                      " is not 0 or 1");
}

double safe_div(double a, double b) { return b > 0 ? a / b : 0.0; }

} // namespace

int label_from_dockq(double dockq, double threshold) {
  if (!(dockq >= 0 && dockq <= 1))
    fail(ErrorKind::data, "DockQ " + std::to_string(dockq) + " outside [0, 1]");
  return dockq >= threshold ? 1 : 0;
}

Confusion confusion_metrics(std::span<const double> scores, std::span<const int> labels,
                            double tau) {
  check_aligned(scores.size(), labels.size(), "confusion_metrics");
  check_labels(labels, "confusion_metrics");
  Confusion c;
  for (size_t i = 0; i < scores.size(); ++i) {
    const bool pos = scores[i] >= tau;
    if (labels[i] == 1)
      (pos ? c.counts.tp : c.counts.fn)++;
    else
      (pos ? c.counts.fp : c.counts.tn)++;
  }
  c.precision = safe_div(double(c.counts.tp), double(c.counts.tp + c.counts.fp));
  c.recall = safe_div(double(c.counts.tp), double(c.counts.tp + c.counts.fn));
  c.f1 = c.precision + c.recall > 0
             ? 2 * c.precision * c.recall / (c.precision + c.recall)
             : 0.0;
  return c;
}

double fbeta(double precision, double recall, double beta) {
  const double b2 = beta * beta;
  const double denom = b2 * precision + recall;
  return denom > 0 ? (1 + b2) * precision * recall / denom : 0.0;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  check_aligned(scores.size(), labels.size(), "roc_auc");
  check_labels(labels, "roc_auc");
  const size_t n = scores.size();
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  long n_pos = 0;
  double rank_sum = 0;
  for (size_t lo = 0; lo < n;) {
    size_t hi = lo;
    while (hi < n && scores[idx[hi]] == scores[idx[lo]])
      ++hi;
    const double mid = 0.5 * double(lo + 1 + hi);  // mean of ranks lo+1..hi
    for (size_t k = lo; k < hi; ++k)
      if (labels[idx[k]] == 1) {
        rank_sum += mid;
        ++n_pos;
      }
    lo = hi;
  }
  const long n_neg = static_cast<long>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0)
    fail(ErrorKind::data, "roc_auc: undefined with a single class present");
  return (rank_sum - 0.5 * double(n_pos) * double(n_pos + 1)) /
         (double(n_pos) * double(n_neg));
}

double pr_auc(std::span<const double> scores, std::span<const int> labels) {
  check_aligned(scores.size(), labels.size(), "pr_auc");
  check_labels(labels, "pr_auc");
  const size_t n = scores.size();
  const long n_pos = std::count(labels.begin(), labels.end(), 1);
  if (n_pos == 0)
    fail(ErrorKind::data, "pr_auc: undefined without positives");
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  double ap = 0;
  long tp = 0, seen = 0;
  double prev_recall = 0;
  for (size_t lo = 0; lo < n;) {
    size_t hi = lo;
    while (hi < n && scores[idx[hi]] == scores[idx[lo]]) {
      tp += labels[idx[hi]];
      ++hi;
    }
    seen += static_cast<long>(hi - lo);
    const double recall = double(tp) / double(n_pos);
    ap += (recall - prev_recall) * (double(tp) / double(seen));
    prev_recall = recall;
    lo = hi;
  }
  return ap;
}

double pearson_r(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size())
    fail(ErrorKind::dimension, "pearson_r: length mismatch");
  if (pred.size() < 2)
    fail(ErrorKind::data, "pearson_r: needs at least 2 items");
  auto variance = [](std::span<const double> x) {
    const double m = std::accumulate(x.begin(), x.end(), 0.0) / double(x.size());
    double s = 0;
    for (double v : x)
      s += (v - m) * (v - m);
    return s / double(x.size());
  };
  if (variance(pred) < objectives::kVarianceFloor || variance(target) < objectives::kVarianceFloor)
    fail(ErrorKind::data, "pearson_r: undefined for constant input");
  return -objectives::neg_pearson(pred, target);
}

Threshold select_threshold_fbeta(std::span<const double> scores, std::span<const int> labels,
                                 double beta) {
  check_aligned(scores.size(), labels.size(), "select_threshold_fbeta");
  check_labels(labels, "select_threshold_fbeta");
  if (scores.empty())
    fail(ErrorKind::empty_set, "select_threshold_fbeta: empty input");
  const size_t n = scores.size();
  const long n_pos = std::count(labels.begin(), labels.end(), 1);
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  std::vector<double> cand(scores.begin(), scores.end());
  cand.push_back(0.0);
  cand.push_back(1.0);
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

  // Items below the current candidate are predicted negative.
  long tp_below = 0;
  size_t below = 0;
  Threshold best;
  for (double tau : cand) {
    while (below < n && scores[idx[below]] < tau) {
      tp_below += labels[idx[below]];
      ++below;
    }
    const long tp = n_pos - tp_below;
    const long fp = static_cast<long>(n - below) - tp;
    const double p = safe_div(double(tp), double(tp + fp));
    const double r = safe_div(double(tp), double(n_pos));
    const double f = fbeta(p, r, beta);
    if (f > best.score) {
      best.tau = tau;
      best.score = f;
    }
  }
  best.degenerate = best.score == 0;
  return best;
}

std::vector<PrecisionAtK> precision_at_k(std::span<const double> class_probs,
                                         std::span<const double> reg_scores,
                                         std::span<const int> labels, double tau_filter,
                                         std::span<const int> ks) {
  check_aligned(class_probs.size(), labels.size(), "precision_at_k");
  check_aligned(reg_scores.size(), labels.size(), "precision_at_k");
  check_labels(labels, "precision_at_k");
  std::vector<size_t> kept;
  for (size_t i = 0; i < class_probs.size(); ++i)
    if (class_probs[i] >= tau_filter)
      kept.push_back(i);
  std::stable_sort(kept.begin(), kept.end(),
                   [&](size_t a, size_t b) { return reg_scores[a] > reg_scores[b]; });
  std::vector<PrecisionAtK> out;
  for (int k : ks) {
    if (k < 1)
      fail(ErrorKind::config, "precision_at_k: K must be positive");
    PrecisionAtK r;
    r.k = k;
    r.kept = static_cast<int>(kept.size());
    r.truncated = r.kept < k;
    if (!kept.empty()) {
      const size_t m = std::min(kept.size(), static_cast<size_t>(k));
      long tp = 0;
      for (size_t q = 0; q < m; ++q)
        tp += labels[kept[q]];
      r.fraction = double(tp) / double(m);
    }
    out.push_back(r);
  }
  return out;
}

const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  if (s == "train")
    return Split::train;
  if (s == "validation")
    return Split::validation;
  if (s == "test")
    return Split::test;
  fail(ErrorKind::validation, "unknown split '" + std::string(s) + "'");
}

SplitResult split_by_cluster(const std::vector<std::string>& cluster_ids,
                             std::array<double, 3> ratios, std::uint64_t seed) {
  double rsum = 0;
  for (double r : ratios) {
    if (!(r >= 0))
      fail(ErrorKind::config, "split ratios must be nonnegative");
    rsum += r;
  }
  if (std::abs(rsum - 1.0) > 1e-9)
    fail(ErrorKind::config, "split ratios must sum to 1");
  if (cluster_ids.empty())
    fail(ErrorKind::empty_set, "split_by_cluster: no records");

  std::map<std::string, std::vector<size_t>> members;
  for (size_t i = 0; i < cluster_ids.size(); ++i) {
    if (cluster_ids[i].empty())
      fail(ErrorKind::validation, "split_by_cluster: record " + std::to_string(i) +
                                      " has no cluster_id");
    members[cluster_ids[i]].push_back(i);
  }
  std::vector<const std::vector<size_t>*> order;
  for (const auto& [id, m] : members)
    order.push_back(&m);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  SplitResult res;
  res.degenerate = members.size() < 3;
  if (res.degenerate)
    log::warn("split_by_cluster: only " + std::to_string(members.size()) +
              " clusters, split is degenerate");
  res.tags.assign(cluster_ids.size(), Split::train);
  const double n = double(cluster_ids.size());
  std::array<long, 3> count{0, 0, 0};
  for (const auto* m : order) {
    int best = 0;
    double best_def = -1e300;
    for (int s = 0; s < 3; ++s) {
      const double def = ratios[s] * n - double(count[s]);
      if (def > best_def) {
        best_def = def;
        best = s;
      }
    }
    for (size_t i : *m)
      res.tags[i] = static_cast<Split>(best);
    count[best] += static_cast<long>(m->size());
  }
  for (int s = 0; s < 3; ++s)
    res.fractions[s] = double(count[s]) / n;
  return res;
}

std::string prediction_to_json(const Prediction& p) {
  nlohmann::ordered_json j;
  j["id"] = p.id;
  j["class_prob"] = p.class_prob ? nlohmann::ordered_json(*p.class_prob) : nullptr;
  j["reg_score"] = p.reg_score ? nlohmann::ordered_json(*p.reg_score) : nullptr;
  j["label"] = p.label ? nlohmann::ordered_json(*p.label) : nullptr;
  j["dockq"] = p.dockq ? nlohmann::ordered_json(*p.dockq) : nullptr;
  return j.dump();
}

Prediction prediction_from_json(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, std::string("prediction record: ") + e.what());
  }
  Prediction p;
  try {
    p.id = j.at("id").get<std::string>();
    auto opt = [&](const char* k) -> std::optional<double> {
      if (!j.contains(k) || j[k].is_null())
        return std::nullopt;
      return j[k].get<double>();
    };
    p.class_prob = opt("class_prob");
    p.reg_score = opt("reg_score");
    p.dockq = opt("dockq");
    if (j.contains("label") && !j["label"].is_null())
      p.label = j["label"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, std::string("prediction record: ") + e.what());
  }
  return p;
}

std::vector<Prediction> read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    fail(ErrorKind::io, "cannot open predictions " + path);
  std::vector<Prediction> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    try {
      out.push_back(prediction_from_json(line));
    } catch (const Error& e) {
      fail(e.kind(), path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_predictions(const std::string& path, const std::vector<Prediction>& preds) {
  std::ofstream out(path);
  if (!out)
    fail(ErrorKind::io, "cannot write predictions " + path);
  for (const auto& p : preds)
    out << prediction_to_json(p) << '\n';
}

EvalReport evaluate(const std::vector<Prediction>& preds, double fbeta_beta,
                    std::span<const int> ks, std::optional<double> fixed_threshold,
                    double dockq_positive) {
  if (preds.empty())
    fail(ErrorKind::empty_set, "evaluate: no predictions");
  std::vector<double> cls, reg, dq;
  std::vector<int> labels;
  bool have_dockq = true;
  for (const auto& p : preds) {
    if (!p.class_prob && !p.reg_score)
      fail(ErrorKind::data, "prediction " + p.id + " has neither class_prob nor reg_score");
    int l;
    if (p.label)
      l = *p.label;
    else if (p.dockq)
      l = label_from_dockq(*p.dockq, dockq_positive);
    else
      fail(ErrorKind::data, "prediction " + p.id + " has neither label nor dockq");
    labels.push_back(l);
    const double c = p.class_prob ? *p.class_prob : *p.reg_score;
    cls.push_back(c);
    reg.push_back(p.reg_score ? *p.reg_score : c);
    have_dockq = have_dockq && p.dockq.has_value();
    dq.push_back(p.dockq.value_or(0.0));
  }
  EvalReport r;
  r.n = static_cast<long>(preds.size());
  if (fixed_threshold) {
    r.threshold = *fixed_threshold;
    const Confusion c = confusion_metrics(cls, labels, r.threshold);
    r.fbeta_at_threshold = fbeta(c.precision, c.recall, fbeta_beta);
  } else {
    const Threshold t = select_threshold_fbeta(cls, labels, fbeta_beta);
    r.threshold = t.tau;
    r.fbeta_at_threshold = t.score;
    r.threshold_degenerate = t.degenerate;
  }
  const Confusion c = confusion_metrics(cls, labels, r.threshold);
  r.precision = c.precision;
  r.recall = c.recall;
  r.f1 = c.f1;
  r.counts = c.counts;
  const long n_pos = std::count(labels.begin(), labels.end(), 1);
  if (n_pos > 0 && n_pos < r.n)
    r.auc_roc = roc_auc(cls, labels);
  if (n_pos > 0)
    r.auc_pr = pr_auc(cls, labels);
  if (have_dockq) {
    try {
      r.pearson = pearson_r(reg, dq);
    } catch (const Error&) {
      r.pearson.reset();
    }
  }
  r.precision_at_k = precision_at_k(cls, reg, labels, r.threshold, ks);
  return r;
}

std::string report_to_json(const EvalReport& r) {
  using J = nlohmann::ordered_json;
  auto opt = [](const std::optional<double>& v) { return v ? J(*v) : J(nullptr); };
  J j;
  j["n"] = r.n;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["auc_roc"] = opt(r.auc_roc);
  j["auc_pr"] = opt(r.auc_pr);
  j["pearson_r"] = opt(r.pearson);
  j["threshold"] = r.threshold;
  j["fbeta_at_threshold"] = r.fbeta_at_threshold;
  j["threshold_degenerate"] = r.threshold_degenerate;
  J pk = J::object();
  for (const auto& p : r.precision_at_k)
    pk[std::to_string(p.k)] = {{"fraction", opt(p.fraction)}, {"kept", p.kept},
                               {"truncated", p.truncated}};
  j["precision_at_k"] = pk;
  j["counts"] = {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"tn", r.counts.tn},
                 {"fn", r.counts.fn}};
  return j.dump(2);
}

} // namespace igpose::evalkit
