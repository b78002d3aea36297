#pragma once

#include <Eigen/Dense>
#include <vector>

#include "slidr/common.hpp"

namespace slidr {

struct ProbeConfig {
  double lr = 0.05;
  int epochs = 50;
  int num_classes = 0;
  void validate() const;
};

struct LinearClassifier {
  Eigen::MatrixXd w;  // D x num_classes
  Eigen::VectorXd b;  // num_classes
};

struct ProbeEpoch {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  double miou = 0.0;
};

struct ProbeResult {
  LinearClassifier classifier;
  std::vector<ProbeEpoch> history;
};

/// Full-batch softmax cross-entropy gradient descent on frozen features,
/// plain learning rate, seed-initialized weights. Every class in
/// [0, num_classes) must appear in the labels.
ProbeResult linear_probe(const Eigen::MatrixXd& features,
                         const std::vector<int>& labels, const ProbeConfig& cfg,
                         std::uint64_t seed);

std::vector<int> classify(const LinearClassifier& clf,
                          const Eigen::MatrixXd& features);

struct IouResult {
  std::vector<double> per_class;  // NaN for classes absent from both
  double mean = 0.0;
};
IouResult miou(const std::vector<int>& pred, const std::vector<int>& gt,
               int num_classes);

/// Cosine-distance k-NN vote fractions; distance ties break to the lower
/// database index.
Eigen::VectorXd knn_classify(const Eigen::MatrixXd& db_features,
                             const std::vector<int>& db_labels,
                             const Eigen::VectorXd& query, int k,
                             int num_classes);

/// Dot products of a unit query against unit target rows; values in [-1, 1].
Eigen::VectorXd similarity_map(const Eigen::VectorXd& query,
                               const Eigen::MatrixXd& targets);

}  // namespace slidr
