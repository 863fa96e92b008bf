#include "emoid/attribution.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "emoid/rng.hpp"
#include "emoid/text.hpp"

namespace emoid::attribution {

BatchScorer per_text(std::function<Probs(std::string_view)> fn) {
  return [fn = std::move(fn)](std::span<const std::string> texts) {
    std::vector<std::optional<Probs>> out(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
      try {
        out[i] = fn(texts[i]);
      } catch (const std::exception&) {
        out[i] = std::nullopt;
      }
    }
    return out;
  };
}

nlohmann::json Explanation::to_json() const {
  nlohmann::json conf = nlohmann::json::object();
  for (auto l : kAllLabels) conf[std::string(label_name(l))] = confidences[index_of(l)];
  nlohmann::json toks = nlohmann::json::array();
  for (std::size_t i = 0; i < tokens.size(); ++i) toks.push_back({{"token", tokens[i]}, {"weight", weights[i]}});
  return {{"target", label_name(target)}, {"tokens", toks},       {"intercept", intercept},
          {"confidences", conf},          {"n_samples", n_samples}, {"n_dropped", n_dropped},
          {"seed", seed}};
}

namespace {

bool usable(const std::optional<Probs>& p) {
  if (!p) return false;
  return std::all_of(p->begin(), p->end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

Explanation explain(const BatchScorer& scorer, std::string_view text, EmotionLabel target, const ExplainConfig& cfg) {
  Explanation ex;
  ex.target = target;
  ex.seed = cfg.seed;
  for (auto t : text::split_whitespace(text)) ex.tokens.emplace_back(t);
  const std::size_t d = ex.tokens.size();
  if (d == 0) throw Error("cannot explain an empty text");
  if (cfg.n_samples == 0) throw Error("explanation needs at least one sample");
  if (!(cfg.ridge_alpha >= 1e-6)) throw Error("ridge alpha must be at least 1e-6");
  const double kw = cfg.kernel_width.value_or(0.75 * std::sqrt(static_cast<double>(d)));
  if (!(kw > 0.0)) throw Error("kernel width must be positive");

  // Presence masks; row 0 is the unperturbed text.
  Rng rng(cfg.seed);
  std::vector<std::vector<std::uint8_t>> masks(cfg.n_samples, std::vector<std::uint8_t>(d, 1));
  for (std::size_t s = 1; s < cfg.n_samples; ++s) {
    auto& m = masks[s];
    if (d == 1) {
      m[0] = rng.bernoulli(0.5) ? 1 : 0;
      continue;
    }
    const std::size_t remove = 1 + rng.below(d - 1);
    const auto perm = rng.permutation(d);
    for (std::size_t k = 0; k < remove; ++k) m[perm[k]] = 0;
  }

  std::vector<std::optional<Probs>> scores;
  scores.reserve(cfg.n_samples);
  const std::size_t batch = std::max<std::size_t>(1, cfg.batch);
  for (std::size_t start = 0; start < cfg.n_samples; start += batch) {
    std::vector<std::string> texts;
    for (std::size_t s = start; s < std::min(cfg.n_samples, start + batch); ++s) {
      std::string t;
      for (std::size_t i = 0; i < d; ++i) {
        if (!masks[s][i]) continue;
        if (!t.empty()) t += ' ';
        t += ex.tokens[i];
      }
      texts.push_back(std::move(t));
    }
    auto part = scorer(texts);
    if (part.size() != texts.size()) throw Error("scorer returned the wrong number of results");
    for (auto& p : part) scores.push_back(std::move(p));
  }
  if (!usable(scores[0])) throw Error("model failed to score the unperturbed text");
  ex.confidences = *scores[0];
  double total = 0.0;
  for (double p : ex.confidences) total += p;
  if (std::abs(total - 1.0) > 1e-6) throw Error("model confidences do not sum to 1");

  std::vector<std::size_t> rows;
  for (std::size_t s = 0; s < scores.size(); ++s) {
    if (usable(scores[s])) {
      rows.push_back(s);
    } else {
      ++ex.n_dropped;
    }
  }
  ex.n_samples = rows.size();

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto D = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd Z(n, D);
  Eigen::VectorXd y(n), w(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto s = rows[static_cast<std::size_t>(r)];
    double present = 0.0;
    for (Eigen::Index c = 0; c < D; ++c) {
      Z(r, c) = masks[s][static_cast<std::size_t>(c)];
      present += Z(r, c);
    }
    const double cos_dist = present == 0.0 ? 1.0 : 1.0 - present / (std::sqrt(present) * std::sqrt(double(d)));
    w(r) = std::exp(-(cos_dist * cos_dist) / (kw * kw));
    y(r) = (*scores[s])[index_of(target)];
  }

  // Weighted ridge with an unpenalized intercept: center by weighted means.
  const double wsum = w.sum();
  const Eigen::RowVectorXd zbar = (w.transpose() * Z) / wsum;
  const double ybar = w.dot(y) / wsum;
  const Eigen::MatrixXd Zc = Z.rowwise() - zbar;
  const Eigen::VectorXd yc = y.array() - ybar;
  const Eigen::MatrixXd A =
      Zc.transpose() * w.asDiagonal() * Zc + cfg.ridge_alpha * Eigen::MatrixXd::Identity(D, D);
  const Eigen::VectorXd rhs = Zc.transpose() * (w.asDiagonal() * yc);
  const Eigen::VectorXd beta = A.ldlt().solve(rhs);
  ex.weights.assign(beta.data(), beta.data() + beta.size());
  ex.intercept = ybar - zbar.dot(beta);
  return ex;
}

}  // namespace emoid::attribution
