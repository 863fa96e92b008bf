#include "emoid/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "emoid/common.hpp"

namespace emoid::model {

double smoothed_cross_entropy(std::span<const double> logits, std::size_t label, double eps,
                              std::span<double> dlogits) {
  const std::size_t K = logits.size();
  if (label >= K) throw Error("label index out of range");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - mx);
  const double lse = mx + std::log(sum);
  double loss = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double target = (k == label ? 1.0 - eps : 0.0) + eps / static_cast<double>(K);
    loss -= target * (logits[k] - lse);
    if (!dlogits.empty()) dlogits[k] = std::exp(logits[k] - lse) - target;
  }
  return loss;
}

double supcon_loss(std::span<const double> z, std::span<const std::size_t> labels, std::size_t dim, double tau,
                   std::span<double> grad) {
  if (!(tau > 0.0)) throw Error("contrastive temperature must be positive");
  const std::size_t B = labels.size();
  if (z.size() != B * dim) throw Error("embedding matrix does not match the label count");
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  if (B < 2) return 0.0;

  std::vector<double> sim(B * B);
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t k = 0; k < B; ++k) {
      double dot = 0.0;
      for (std::size_t d = 0; d < dim; ++d) dot += z[i * dim + d] * z[k * dim + d];
      sim[i * B + k] = dot / tau;
    }
  }

  std::size_t anchors = 0;
  double total = 0.0;
  std::vector<double> g(B * B, 0.0);  // dL_i / d sim[i][k]
  for (std::size_t i = 0; i < B; ++i) {
    std::size_t positives = 0;
    for (std::size_t k = 0; k < B; ++k) positives += (k != i && labels[k] == labels[i]) ? 1 : 0;
    if (positives == 0) continue;
    ++anchors;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < B; ++k) {
      if (k != i) mx = std::max(mx, sim[i * B + k]);
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < B; ++k) {
      if (k != i) sum += std::exp(sim[i * B + k] - mx);
    }
    const double lse = mx + std::log(sum);
    const double inv_p = 1.0 / static_cast<double>(positives);
    for (std::size_t k = 0; k < B; ++k) {
      if (k == i) continue;
      const bool pos = labels[k] == labels[i];
      if (pos) total -= inv_p * (sim[i * B + k] - lse);
      g[i * B + k] = std::exp(sim[i * B + k] - lse) - (pos ? inv_p : 0.0);
    }
  }
  if (anchors == 0) return 0.0;
  const double scale = 1.0 / static_cast<double>(anchors);

  if (!grad.empty()) {
    for (std::size_t i = 0; i < B; ++i) {
      for (std::size_t k = 0; k < B; ++k) {
        const double w = g[i * B + k] * scale / tau;
        if (w == 0.0) continue;
        for (std::size_t d = 0; d < dim; ++d) {
          grad[i * dim + d] += w * z[k * dim + d];
          grad[k * dim + d] += w * z[i * dim + d];
        }
      }
    }
  }
  return total * scale;
}

std::vector<double> l2_normalize_rows(std::span<const double> x, std::size_t dim) {
  std::vector<double> y(x.begin(), x.end());
  for (std::size_t r = 0; r * dim < x.size(); ++r) {
    double norm = 0.0;
    for (std::size_t d = 0; d < dim; ++d) norm += x[r * dim + d] * x[r * dim + d];
    norm = std::sqrt(norm);
    if (norm == 0.0) throw Error("cannot normalize a zero vector");
    for (std::size_t d = 0; d < dim; ++d) y[r * dim + d] /= norm;
  }
  return y;
}

std::vector<double> l2_normalize_rows_backward(std::span<const double> x, std::span<const double> dy, std::size_t dim) {
  std::vector<double> dx(x.size());
  for (std::size_t r = 0; r * dim < x.size(); ++r) {
    double norm = 0.0;
    for (std::size_t d = 0; d < dim; ++d) norm += x[r * dim + d] * x[r * dim + d];
    norm = std::sqrt(norm);
    double dot = 0.0;
    for (std::size_t d = 0; d < dim; ++d) dot += x[r * dim + d] / norm * dy[r * dim + d];
    for (std::size_t d = 0; d < dim; ++d) dx[r * dim + d] = (dy[r * dim + d] - x[r * dim + d] / norm * dot) / norm;
  }
  return dx;
}

void JointLossConfig::validate() const {
  if (!(contrastive_weight >= 0.0 && contrastive_weight <= 1.0)) throw Error("contrastive weight must lie in [0,1]");
  if (!(temperature > 0.0)) throw Error("contrastive temperature must be positive");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) throw Error("label smoothing must lie in [0,1)");
}

JointLossResult joint_loss(std::span<const double> pooled, std::span<const std::size_t> labels, std::size_t dim,
                           std::span<const double> head_w, std::span<const double> head_b, std::size_t classes,
                           const JointLossConfig& cfg, bool want_grads) {
  cfg.validate();
  const std::size_t B = labels.size();
  if (B == 0) throw Error("joint loss needs a non-empty batch");
  if (pooled.size() != B * dim || head_w.size() != classes * dim || head_b.size() != classes)
    throw Error("joint loss: shape mismatch");

  JointLossResult r;
  r.logits.resize(B * classes);
  if (want_grads) {
    r.d_head_w.assign(classes * dim, 0.0);
    r.d_head_b.assign(classes, 0.0);
    r.d_pooled.assign(B * dim, 0.0);
  }
  const double lambda = cfg.contrastive_weight;
  const double ce_scale = (1.0 - lambda) / static_cast<double>(B);
  std::vector<double> dlogits(classes);
  for (std::size_t i = 0; i < B; ++i) {
    const double* p = pooled.data() + i * dim;
    double* z = r.logits.data() + i * classes;
    for (std::size_t c = 0; c < classes; ++c) {
      double acc = head_b[c];
      for (std::size_t d = 0; d < dim; ++d) acc += head_w[c * dim + d] * p[d];
      z[c] = acc;
    }
    r.cross_entropy += smoothed_cross_entropy(std::span<const double>(z, classes), labels[i], cfg.label_smoothing,
                                              want_grads ? std::span<double>(dlogits) : std::span<double>{});
    if (!want_grads) continue;
    for (std::size_t c = 0; c < classes; ++c) {
      const double g = dlogits[c] * ce_scale;
      r.d_head_b[c] += g;
      for (std::size_t d = 0; d < dim; ++d) {
        r.d_head_w[c * dim + d] += g * p[d];
        r.d_pooled[i * dim + d] += g * head_w[c * dim + d];
      }
    }
  }
  r.cross_entropy /= static_cast<double>(B);

  if (lambda > 0.0 && B >= 2) {
    const auto normed = l2_normalize_rows(pooled, dim);
    std::vector<double> dz(want_grads ? normed.size() : 0);
    r.contrastive = supcon_loss(normed, labels, dim, cfg.temperature, dz);
    if (want_grads) {
      for (auto& v : dz) v *= lambda;
      const auto dp = l2_normalize_rows_backward(pooled, dz, dim);
      for (std::size_t i = 0; i < dp.size(); ++i) r.d_pooled[i] += dp[i];
    }
  }
  r.loss = (1.0 - lambda) * r.cross_entropy + lambda * r.contrastive;
  return r;
}

}  // namespace emoid::model
