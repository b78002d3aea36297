#include "slidr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace slidr {

namespace {

// row-wise softmax of logits, stable
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const Eigen::ArrayXd e = (logits.row(i).array() - m).exp();
    p.row(i) = (e / e.sum()).matrix();
  }
  return p;
}

}  // namespace

void ProbeConfig::validate() const {
  if (!(lr > 0.0)) fail("probe.lr must be positive");
  if (epochs < 0) fail("probe.epochs must be non-negative");
  if (num_classes < 2) fail("probe.num_classes must be at least 2");
}

ProbeResult linear_probe(const Eigen::MatrixXd& features,
                         const std::vector<int>& labels, const ProbeConfig& cfg,
                         std::uint64_t seed) {
  cfg.validate();
  const Eigen::Index n = features.rows();
  const Eigen::Index d = features.cols();
  if (static_cast<Eigen::Index>(labels.size()) != n)
    fail("feature and label counts disagree");

  std::vector<bool> seen(static_cast<std::size_t>(cfg.num_classes), false);
  for (int l : labels) {
    if (l < 0 || l >= cfg.num_classes) fail("label out of range");
    seen[static_cast<std::size_t>(l)] = true;
  }
  for (int c = 0; c < cfg.num_classes; ++c)
    if (!seen[static_cast<std::size_t>(c)])
      fail("class " + std::to_string(c) + " absent from training labels");

  ProbeResult result;
  {
    Rng rng(seed);
    const double a = 1.0 / std::sqrt(static_cast<double>(d));
    result.classifier.w.resize(d, cfg.num_classes);
    for (Eigen::Index r = 0; r < d; ++r)
      for (int c = 0; c < cfg.num_classes; ++c)
        result.classifier.w(r, c) = rng.uniform(-a, a);
    result.classifier.b = Eigen::VectorXd::Zero(cfg.num_classes);
  }

  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, cfg.num_classes);
  for (Eigen::Index i = 0; i < n; ++i)
    onehot(i, labels[static_cast<std::size_t>(i)]) = 1.0;

  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd probs;
  auto record = [&](int epoch) {
    const Eigen::MatrixXd logits =
        (features * result.classifier.w).rowwise() + result.classifier.b.transpose();
    probs = softmax_rows(logits);
    double loss = 0.0;
    std::vector<int> pred(static_cast<std::size_t>(n));
    Eigen::Index correct = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      loss -= std::log(std::max(probs(i, labels[static_cast<std::size_t>(i)]),
                                std::numeric_limits<double>::min()));
      Eigen::Index arg = 0;
      logits.row(i).maxCoeff(&arg);
      pred[static_cast<std::size_t>(i)] = static_cast<int>(arg);
      if (arg == labels[static_cast<std::size_t>(i)]) ++correct;
    }
    ProbeEpoch row;
    row.epoch = epoch;
    row.loss = loss * inv_n;
    row.accuracy = static_cast<double>(correct) * inv_n;
    row.miou = miou(pred, labels, cfg.num_classes).mean;
    result.history.push_back(row);
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    record(epoch);
    const Eigen::MatrixXd diff = (probs - onehot) * inv_n;
    result.classifier.w -= cfg.lr * (features.transpose() * diff);
    result.classifier.b -= cfg.lr * diff.colwise().sum().transpose();
  }
  record(cfg.epochs);  // final trained state
  return result;
}

std::vector<int> classify(const LinearClassifier& clf,
                          const Eigen::MatrixXd& features) {
  if (features.cols() != clf.w.rows()) fail("feature width mismatch");
  std::vector<int> pred(static_cast<std::size_t>(features.rows()));
  const Eigen::MatrixXd logits = (features * clf.w).rowwise() + clf.b.transpose();
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index arg = 0;
    logits.row(i).maxCoeff(&arg);
    pred[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return pred;
}

IouResult miou(const std::vector<int>& pred, const std::vector<int>& gt,
               int num_classes) {
  if (pred.size() != gt.size()) fail("prediction and ground truth sizes disagree");
  if (num_classes < 1) fail("num_classes must be positive");
  std::vector<std::int64_t> tp(static_cast<std::size_t>(num_classes), 0);
  std::vector<std::int64_t> fp(static_cast<std::size_t>(num_classes), 0);
  std::vector<std::int64_t> fn(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int p = pred[i], g = gt[i];
    if (p < 0 || p >= num_classes || g < 0 || g >= num_classes)
      fail("class id out of range");
    if (p == g)
      ++tp[static_cast<std::size_t>(p)];
    else {
      ++fp[static_cast<std::size_t>(p)];
      ++fn[static_cast<std::size_t>(g)];
    }
  }
  IouResult out;
  out.per_class.resize(static_cast<std::size_t>(num_classes));
  double sum = 0.0;
  int counted = 0;
  for (int c = 0; c < num_classes; ++c) {
    const std::int64_t denom = tp[static_cast<std::size_t>(c)] +
                               fp[static_cast<std::size_t>(c)] +
                               fn[static_cast<std::size_t>(c)];
    if (denom == 0) {
      out.per_class[static_cast<std::size_t>(c)] =
          std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double iou =
        static_cast<double>(tp[static_cast<std::size_t>(c)]) / static_cast<double>(denom);
    out.per_class[static_cast<std::size_t>(c)] = iou;
    sum += iou;
    ++counted;
  }
  out.mean = counted > 0 ? sum / counted : 0.0;
  return out;
}

Eigen::VectorXd knn_classify(const Eigen::MatrixXd& db_features,
                             const std::vector<int>& db_labels,
                             const Eigen::VectorXd& query, int k,
                             int num_classes) {
  const Eigen::Index n = db_features.rows();
  if (k < 1) fail("k must be positive");
  if (k > n) fail("k exceeds database size");
  if (static_cast<Eigen::Index>(db_labels.size()) != n)
    fail("database labels size mismatch");
  if (query.size() != db_features.cols()) fail("query width mismatch");

  const double qn = query.norm();
  if (qn < 1e-12) fail("zero-norm query");

  std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double rn = db_features.row(i).norm();
    if (rn < 1e-12) fail("zero-norm database row");
    const double cos = db_features.row(i).dot(query) / (rn * qn);
    dist[static_cast<std::size_t>(i)] = {1.0 - cos, i};
  }
  std::partial_sort(dist.begin(), dist.begin() + k, dist.end());

  Eigen::VectorXd votes = Eigen::VectorXd::Zero(num_classes);
  for (int i = 0; i < k; ++i) {
    const int label = db_labels[static_cast<std::size_t>(dist[static_cast<std::size_t>(i)].second)];
    if (label < 0 || label >= num_classes) fail("database label out of range");
    votes(label) += 1.0;
  }
  return votes / static_cast<double>(k);
}

Eigen::VectorXd similarity_map(const Eigen::VectorXd& query,
                               const Eigen::MatrixXd& targets) {
  if (query.size() != targets.cols()) fail("embedding widths disagree");
  if (std::abs(query.norm() - 1.0) > 1e-6) fail("query must be unit norm");
  for (Eigen::Index i = 0; i < targets.rows(); ++i)
    if (std::abs(targets.row(i).norm() - 1.0) > 1e-6)
      fail("targets must be unit norm");
  return targets * query;
}

}  // namespace slidr
