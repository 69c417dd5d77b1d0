// SPDX-License-Identifier: Apache-2.0

#include "igpose/objectives.hpp"

#include <cmath>
#include <string>

#include "igpose/error.hpp"
#include "igpose/log.hpp"

namespace igpose::objectives {

namespace {

void check_targets(std::span<const int> targets, long rows, long classes) {
  if (static_cast<long>(targets.size()) != rows)
    fail(ErrorKind::dimension, "cross_entropy: " + std::to_string(rows) + " items but " +
                                   std::to_string(targets.size()) + " targets");
  if (rows == 0)
    fail(ErrorKind::empty_set, "cross_entropy: no items");
  for (int t : targets)
    if (t < 0 || t >= classes)
      fail(ErrorKind::validation, "cross_entropy: class index " + std::to_string(t) +
                                      " outside [0, " + std::to_string(classes) + ")");
}

Eigen::VectorXd softmax(std::span<const double> x) {
  double mx = x[0];
  for (double v : x)
    mx = std::max(mx, v);
  Eigen::VectorXd e(static_cast<long>(x.size()));
  for (size_t i = 0; i < x.size(); ++i)
    e[static_cast<long>(i)] = std::exp(x[i] - mx);
  return e / e.sum();
}

} // namespace

void LossWeights::validate() const {
  if (!(alpha >= 0) || !(beta >= 0))
    fail(ErrorKind::config, "loss weights alpha and beta must be >= 0");
  if (!(fbeta_beta > 0))
    fail(ErrorKind::config, "F-beta beta must be > 0");
}

double cross_entropy(const Eigen::MatrixXd& probs, std::span<const int> targets) {
  check_targets(targets, probs.rows(), probs.cols());
  double s = 0;
  for (long r = 0; r < probs.rows(); ++r) {
    const double p = probs(r, targets[r]);
    if (!(p >= 0 && p <= 1))
      fail(ErrorKind::data, "cross_entropy: probability outside [0, 1]");
    s -= std::log(p);
  }
  return s / double(probs.rows());
}

double softmax_cross_entropy(const Eigen::MatrixXd& logits, std::span<const int> targets,
                             Eigen::MatrixXd* d_logits) {
  check_targets(targets, logits.rows(), logits.cols());
  const double n = double(logits.rows());
  double s = 0;
  if (d_logits)
    d_logits->resize(logits.rows(), logits.cols());
  for (long r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(r).array() - mx).exp().matrix();
    const double z = e.sum();
    s += std::log(z) + mx - logits(r, targets[r]);
    if (d_logits) {
      d_logits->row(r) = e / (z * n);
      (*d_logits)(r, targets[r]) -= 1.0 / n;
    }
  }
  return s / n;
}

double neg_pearson(std::span<const double> pred, std::span<const double> target,
                   std::vector<double>* d_pred) {
  if (pred.size() != target.size())
    fail(ErrorKind::dimension, "neg_pearson: length mismatch " + std::to_string(pred.size()) +
                                   " vs " + std::to_string(target.size()));
  const size_t n = pred.size();
  if (d_pred)
    d_pred->assign(n, 0.0);
  if (n < 2) {
    log::debug("neg_pearson: fewer than 2 items, term skipped");
    return 0;
  }
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += pred[i];
    my += target[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxx = 0, syy = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = pred[i] - mx;
    const double dy = target[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx / double(n) < kVarianceFloor || syy / double(n) < kVarianceFloor)
    return 0;
  const double denom = std::sqrt(sxx * syy);
  const double r = sxy / denom;
  if (d_pred)
    for (size_t i = 0; i < n; ++i)
      (*d_pred)[i] = -((target[i] - my) / denom - r * (pred[i] - mx) / sxx);
  return -r;
}

double listnet_loss(std::span<const double> pred, std::span<const double> target,
                    std::vector<double>* d_pred) {
  if (pred.size() != target.size())
    fail(ErrorKind::dimension, "listnet_loss: length mismatch " +
                                   std::to_string(pred.size()) + " vs " +
                                   std::to_string(target.size()));
  if (pred.size() < 2)
    fail(ErrorKind::config, "listnet_loss: list needs at least 2 items");
  const Eigen::VectorXd pt = softmax(target);
  double mx = pred[0];
  for (double v : pred)
    mx = std::max(mx, v);
  double z = 0;
  for (double v : pred)
    z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  double loss = 0;
  for (size_t i = 0; i < pred.size(); ++i)
    loss -= pt[static_cast<long>(i)] * (pred[i] - lse);
  if (d_pred) {
    d_pred->resize(pred.size());
    for (size_t i = 0; i < pred.size(); ++i)
      (*d_pred)[i] = std::exp(pred[i] - lse) - pt[static_cast<long>(i)];
  }
  return loss;
}

template<typename S>
ClassificationTerms classification_terms(const std::vector<net::ForwardOutput<S>>& out,
                                         const ClassificationTargets& t,
                                         const LossWeights& w,
                                         std::vector<net::OutputGrad>* grads) {
  w.validate();
  const size_t b = out.size();
  if (b == 0)
    fail(ErrorKind::empty_set, "classification objective: empty batch");
  if (t.labels.size() != b || t.node_labels.size() != b || t.dockq.size() != b)
    fail(ErrorKind::dimension, "classification objective: targets not aligned with batch of " +
                                   std::to_string(b));
  if (grads)
    grads->assign(b, net::OutputGrad{});
  ClassificationTerms terms;

  Eigen::MatrixXd logits(static_cast<long>(b), 2);
  for (size_t k = 0; k < b; ++k) {
    logits(static_cast<long>(k), 0) = static_cast<double>(out[k].class_logits[0]);
    logits(static_cast<long>(k), 1) = static_cast<double>(out[k].class_logits[1]);
  }
  Eigen::MatrixXd d_logits;
  terms.graph_ce = softmax_cross_entropy(logits, t.labels, grads ? &d_logits : nullptr);

  for (size_t k = 0; k < b; ++k) {
    Eigen::MatrixXd nl = out[k].node_logits.template cast<double>();
    if (t.node_labels[k].size() != static_cast<size_t>(nl.rows()))
      fail(ErrorKind::dimension, "classification objective: graph " + std::to_string(k) +
                                     " has " + std::to_string(nl.rows()) + " nodes but " +
                                     std::to_string(t.node_labels[k].size()) + " node labels");
    Eigen::MatrixXd d_nl;
    terms.node_ce += softmax_cross_entropy(nl, t.node_labels[k], grads ? &d_nl : nullptr) /
                     double(b);
    if (grads)
      (*grads)[k].d_node_logits = d_nl * (w.alpha / double(b));
  }

  std::vector<double> p_pos(b);
  for (size_t k = 0; k < b; ++k)
    p_pos[k] = static_cast<double>(out[k].class_probs[1]);
  std::vector<double> d_p;
  terms.pearson = neg_pearson(p_pos, t.dockq, grads ? &d_p : nullptr);

  if (grads)
    for (size_t k = 0; k < b; ++k) {
      const double p1 = static_cast<double>(out[k].class_probs[1]);
      const double p0 = static_cast<double>(out[k].class_probs[0]);
      const double dp = w.beta * d_p[k] * p0 * p1;
      (*grads)[k].d_class_logits[0] = d_logits(static_cast<long>(k), 0) - dp;
      (*grads)[k].d_class_logits[1] = d_logits(static_cast<long>(k), 1) + dp;
    }
  terms.total = terms.graph_ce + w.alpha * terms.node_ce + w.beta * terms.pearson;
  return terms;
}

template<typename S>
net::ObjectiveValue classification_objective(const std::vector<net::ForwardOutput<S>>& out,
                                             const ClassificationTargets& t,
                                             const LossWeights& w) {
  net::ObjectiveValue v;
  v.loss = classification_terms(out, t, w, &v.grads).total;
  return v;
}

template<typename S>
RegressionTerms regression_terms(const std::vector<net::ForwardOutput<S>>& out,
                                 std::span<const double> dockq,
                                 std::vector<net::OutputGrad>* grads) {
  const size_t b = out.size();
  if (b < 2)
    fail(ErrorKind::config, "regression objective: ranking list needs a batch of >= 2, got " +
                                std::to_string(b));
  if (dockq.size() != b)
    fail(ErrorKind::dimension, "regression objective: targets not aligned with batch");
  std::vector<double> pred(b);
  for (size_t k = 0; k < b; ++k)
    pred[k] = static_cast<double>(out[k].reg_score);
  RegressionTerms terms;
  std::vector<double> d1, d2;
  terms.pearson = neg_pearson(pred, dockq, grads ? &d1 : nullptr);
  terms.listnet = listnet_loss(pred, dockq, grads ? &d2 : nullptr);
  terms.total = terms.pearson + terms.listnet;
  if (grads) {
    grads->assign(b, net::OutputGrad{});
    for (size_t k = 0; k < b; ++k)
      (*grads)[k].d_reg_score = d1[k] + d2[k];
  }
  return terms;
}

template<typename S>
net::ObjectiveValue regression_objective(const std::vector<net::ForwardOutput<S>>& out,
                                         std::span<const double> dockq) {
  net::ObjectiveValue v;
  v.loss = regression_terms(out, dockq, &v.grads).total;
  return v;
}

#define IGPOSE_INSTANTIATE(S)                                                               \
  template ClassificationTerms classification_terms<S>(                                     \
      const std::vector<net::ForwardOutput<S>>&, const ClassificationTargets&,              \
      const LossWeights&, std::vector<net::OutputGrad>*);                                   \
  template net::ObjectiveValue classification_objective<S>(                                 \
      const std::vector<net::ForwardOutput<S>>&, const ClassificationTargets&,              \
      const LossWeights&);                                                                  \
  template RegressionTerms regression_terms<S>(const std::vector<net::ForwardOutput<S>>&,   \
                                               std::span<const double>,                     \
                                               std::vector<net::OutputGrad>*);              \
  template net::ObjectiveValue regression_objective<S>(                                     \
      const std::vector<net::ForwardOutput<S>>&, std::span<const double>);

IGPOSE_INSTANTIATE(float)
IGPOSE_INSTANTIATE(double)
#undef IGPOSE_INSTANTIATE

} // namespace igpose::objectives
