// SPDX-License-Identifier: Apache-2.0
//
// Classification and ranking metrics, F-beta threshold selection, DockQ
// labeling, cluster-level dataset splits and the evaluation report.

#ifndef IGPOSE_EVALKIT_HPP_
#define IGPOSE_EVALKIT_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace igpose::evalkit {

inline constexpr double kPositiveDockq = 0.8;

int label_from_dockq(double dockq, double threshold = kPositiveDockq);

struct Counts {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  long total() const { return tp + fp + tn + fn; }
  bool operator==(const Counts&) const = default;
};

struct Confusion {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  Counts counts;
};

// Positive prediction iff score >= tau.
Confusion confusion_metrics(std::span<const double> scores, std::span<const int> labels,
                            double tau);

double fbeta(double precision, double recall, double beta);

// Pairwise concordance with ties counted one half.
double roc_auc(std::span<const double> scores, std::span<const int> labels);
// Average precision over descending score cuts, tied scores forming one cut.
double pr_auc(std::span<const double> scores, std::span<const int> labels);
double pearson_r(std::span<const double> pred, std::span<const double> target);

struct Threshold {
  double tau = 0;
  double score = 0;
  bool degenerate = false;  // no candidate reached a positive F-beta
};

// Candidates unique(scores) + {0, 1}; keeps the smallest maximizing tau.
Threshold select_threshold_fbeta(std::span<const double> scores, std::span<const int> labels,
                                 double beta = 0.25);

struct PrecisionAtK {
  int k = 0;
  std::optional<double> fraction;  // empty when nothing passes the filter
  int kept = 0;
  bool truncated = false;          // fewer kept items than k
};

std::vector<PrecisionAtK> precision_at_k(std::span<const double> class_probs,
                                         std::span<const double> reg_scores,
                                         std::span<const int> labels, double tau_filter,
                                         std::span<const int> ks);

enum class Split { train = 0, validation = 1, test = 2 };
const char* to_string(Split s);
Split parse_split(std::string_view s);

struct SplitResult {
  std::vector<Split> tags;              // one per record
  std::array<double, 3> fractions{};    // realized record fractions
  bool degenerate = false;              // fewer than 3 clusters
};

SplitResult split_by_cluster(const std::vector<std::string>& cluster_ids,
                             std::array<double, 3> ratios, std::uint64_t seed);

struct Prediction {
  std::string id;
  std::optional<double> class_prob;
  std::optional<double> reg_score;
  std::optional<int> label;
  std::optional<double> dockq;
};

std::string prediction_to_json(const Prediction& p);
Prediction prediction_from_json(std::string_view line);
std::vector<Prediction> read_predictions(const std::string& path);
void write_predictions(const std::string& path, const std::vector<Prediction>& preds);

struct EvalReport {
  long n = 0;
  double precision = 0, recall = 0, f1 = 0;
  std::optional<double> auc_roc, auc_pr, pearson;
  double threshold = 0;
  double fbeta_at_threshold = 0;
  bool threshold_degenerate = false;
  std::vector<PrecisionAtK> precision_at_k;
  Counts counts;
};

// Labels come from Prediction::label, else from dockq. A fixed threshold
// replaces the F-beta selection.
EvalReport evaluate(const std::vector<Prediction>& preds, double fbeta_beta,
                    std::span<const int> ks, std::optional<double> fixed_threshold = {},
                    double dockq_positive = kPositiveDockq);
std::string report_to_json(const EvalReport& r);

} // namespace igpose::evalkit

#endif
