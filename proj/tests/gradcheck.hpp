#pragma once

// Central finite-difference check of the analytic batch gradient. Instances
// are drawn at random and redrawn until every hinge is away from its kink by
// more than the perturbation can move it, and at least one hinge is active.

#include <cmath>
#include <random>
#include <vector>

#include "c2f/model.hpp"
#include "support.hpp"

namespace c2f::testing {

enum class LossKind { global, local, coarse_global };

struct GradInstance {
  Taxonomy taxonomy;
  ProjectionHead head;
  Matrix bank;
  Matrix bases;
  std::vector<TrainingExample> batch;
  SimilarityConfig similarity;
  LossConfig loss;
};

inline GradInstance random_grad_instance(LossKind kind, Metric metric, std::mt19937_64& rng) {
  GradInstance g;
  const std::size_t coarse = 2 + rng() % 2;
  const std::size_t fine = 2 + rng() % 3;
  g.taxonomy = grid_taxonomy(coarse, fine);
  const std::size_t d = 2 + rng() % 15;
  const std::size_t hidden = 2 + rng() % 15;
  const HeadShape shape{d, hidden, d};
  g.head = ProjectionHead(shape, random_vector(shape.param_count(), rng, 0.5));
  g.bank = random_matrix(g.taxonomy.fine_count() + coarse, d, rng, true);
  g.similarity = SimilarityConfig{metric, 1 + rng() % std::min<std::size_t>(3, g.taxonomy.fine_count())};
  g.loss.gamma = 0.05 + 0.2 * std::uniform_real_distribution<double>(0, 1)(rng);
  g.loss.sigma = 0.05 + 0.2 * std::uniform_real_distribution<double>(0, 1)(rng);

  const std::size_t n = 1 + rng() % 4;
  g.bases = random_matrix(n, d, rng, true);
  for (std::size_t i = 0; i < n; ++i) {
    TrainingExample ex;
    ex.base = g.bases.row(i);
    ex.coarse = coarse_id(rng() % coarse);
    const auto positives = g.taxonomy.candidates(ex.coarse);
    const auto others = g.taxonomy.non_candidates(ex.coarse);
    switch (kind) {
      case LossKind::global:
        for (std::size_t j = 0; j < positives.size(); ++j) ex.negatives.push_back(others[rng() % others.size()]);
        break;
      case LossKind::local:
        ex.global = false;
        ex.local_label = positives[rng() % positives.size()];
        break;
      case LossKind::coarse_global: {
        const auto rivals = g.taxonomy.other_coarse(ex.coarse);
        ex.coarse_negative = rivals[rng() % rivals.size()];
        break;
      }
    }
    g.batch.push_back(std::move(ex));
  }
  return g;
}

struct GradCheck {
  double relative_error = 0.0;
  double analytic_norm = 0.0;
};

/// ||analytic - numeric||_2 / max(||analytic||_2, ||numeric||_2).
inline GradCheck check_gradient(const GradInstance& g, double h) {
  const BatchEvaluation eval = evaluate_batch(g.head, g.bank, g.taxonomy, g.batch, g.loss, g.similarity, true);
  ProjectionHead probe = g.head;
  auto params = probe.params();
  double diff2 = 0.0, an2 = 0.0, nu2 = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = evaluate_batch(probe, g.bank, g.taxonomy, g.batch, g.loss, g.similarity, false).objective;
    params[i] = saved - h;
    const double down = evaluate_batch(probe, g.bank, g.taxonomy, g.batch, g.loss, g.similarity, false).objective;
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    diff2 += (numeric - eval.gradient[i]) * (numeric - eval.gradient[i]);
    an2 += eval.gradient[i] * eval.gradient[i];
    nu2 += numeric * numeric;
  }
  GradCheck out;
  out.analytic_norm = std::sqrt(an2);
  const double denom = std::max(std::sqrt(an2), std::sqrt(nu2));
  out.relative_error = denom == 0.0 ? 0.0 : std::sqrt(diff2) / denom;
  return out;
}

/// Draws until the instance has an active hinge and no kink within `margin`.
inline GradInstance smooth_grad_instance(LossKind kind, Metric metric, std::mt19937_64& rng, double margin = 1e-3) {
  for (;;) {
    GradInstance g = random_grad_instance(kind, metric, rng);
    const BatchEvaluation e = evaluate_batch(g.head, g.bank, g.taxonomy, g.batch, g.loss, g.similarity, false);
    if (e.objective > 0.0 && e.min_kink_distance > margin) return g;
  }
}

}  // namespace c2f::testing
