#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace emoid::model {

/// Cross-entropy against (1-eps)*onehot + eps/K. Writes softmax - target
/// into `dlogits` when it is non-empty.
double smoothed_cross_entropy(std::span<const double> logits, std::size_t label, double eps,
                              std::span<double> dlogits = {});

/// Supervised contrastive loss over unit-length rows of `embeddings`
/// ([labels.size(), dim]). Anchors without a same-label partner contribute
/// nothing and are excluded from the average; a batch with no such anchor
/// has loss 0. Fills dL/d(embeddings) when `grad` is non-empty.
double supcon_loss(std::span<const double> embeddings, std::span<const std::size_t> labels, std::size_t dim,
                   double tau, std::span<double> grad = {});

/// Row-wise L2 normalization and its backward.
std::vector<double> l2_normalize_rows(std::span<const double> x, std::size_t dim);
std::vector<double> l2_normalize_rows_backward(std::span<const double> x, std::span<const double> dy, std::size_t dim);

struct JointLossConfig {
  double contrastive_weight = 0.9;  // lambda
  double temperature = 0.3;         // tau
  double label_smoothing = 0.1;     // eps

  void validate() const;
};

struct JointLossResult {
  double loss = 0.0;
  double cross_entropy = 0.0;  // batch mean
  double contrastive = 0.0;
  std::vector<double> logits;    // [batch, classes]
  std::vector<double> d_head_w;  // [classes, dim]
  std::vector<double> d_head_b;  // [classes]
  std::vector<double> d_pooled;  // [batch, dim]
};

/// (1-lambda) * mean smoothed CE of the linear head on `pooled` +
/// lambda * SupCon on the L2-normalized pooled vectors.
JointLossResult joint_loss(std::span<const double> pooled, std::span<const std::size_t> labels, std::size_t dim,
                           std::span<const double> head_w, std::span<const double> head_b, std::size_t classes,
                           const JointLossConfig& cfg, bool want_grads);

}  // namespace emoid::model
