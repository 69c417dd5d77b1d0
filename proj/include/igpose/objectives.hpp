// SPDX-License-Identifier: Apache-2.0
//
// Losses for the classifier (graph CE + node-type CE + batch Pearson term)
// and the regressor (negative Pearson + top-1 ListNet). Every loss can also
// return its gradient with respect to the network outputs.

#ifndef IGPOSE_OBJECTIVES_HPP_
#define IGPOSE_OBJECTIVES_HPP_

#include <span>
#include <vector>

#include <Eigen/Core>

#include "igpose/net.hpp"

namespace igpose::objectives {

struct LossWeights {
  double alpha = 1e-3;       // node-type cross-entropy
  double beta = 2e-3;        // batch Pearson term
  double fbeta_beta = 0.25;  // threshold selection

  void validate() const;
};

inline constexpr double kVarianceFloor = 1e-12;

// Mean of -log p[target] over rows of a probability matrix.
double cross_entropy(const Eigen::MatrixXd& probs, std::span<const int> targets);

// Same loss from logits (softmax per row); d_logits receives dL/dlogits.
double softmax_cross_entropy(const Eigen::MatrixXd& logits, std::span<const int> targets,
                             Eigen::MatrixXd* d_logits = nullptr);

// -Corr(pred, target) with population moments. Zero (and zero gradient) if
// either side has variance below kVarianceFloor or fewer than 2 items.
double neg_pearson(std::span<const double> pred, std::span<const double> target,
                   std::vector<double>* d_pred = nullptr);

// -sum softmax(target)_i log softmax(pred)_i
double listnet_loss(std::span<const double> pred, std::span<const double> target,
                    std::vector<double>* d_pred = nullptr);

struct ClassificationTerms {
  double graph_ce = 0;
  double node_ce = 0;
  double pearson = 0;  // -Corr(p_pos, dockq)
  double total = 0;
};

// Per graph: class label, per-node role labels (0 antigen, 1 heavy, 2 light)
// and a quality target for the Pearson term.
struct ClassificationTargets {
  std::vector<int> labels;
  std::vector<std::vector<int>> node_labels;
  std::vector<double> dockq;
};

template<typename S>
ClassificationTerms classification_terms(const std::vector<net::ForwardOutput<S>>& out,
                                         const ClassificationTargets& t,
                                         const LossWeights& w,
                                         std::vector<net::OutputGrad>* grads = nullptr);

template<typename S>
net::ObjectiveValue classification_objective(const std::vector<net::ForwardOutput<S>>& out,
                                             const ClassificationTargets& t,
                                             const LossWeights& w);

struct RegressionTerms {
  double pearson = 0;
  double listnet = 0;
  double total = 0;
};

template<typename S>
RegressionTerms regression_terms(const std::vector<net::ForwardOutput<S>>& out,
                                 std::span<const double> dockq,
                                 std::vector<net::OutputGrad>* grads = nullptr);

template<typename S>
net::ObjectiveValue regression_objective(const std::vector<net::ForwardOutput<S>>& out,
                                         std::span<const double> dockq);

} // namespace igpose::objectives

#endif
