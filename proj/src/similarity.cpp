#include "c2f/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "c2f/error.hpp"
#include "c2f/simd/kernels.hpp"

namespace c2f {
namespace {

void check_dims(std::span<const double> p, std::span<const double> l) {
  if (p.size() != l.size()) {
    throw Error("similarity", "dimension mismatch: " + std::to_string(p.size()) + " vs " + std::to_string(l.size()));
  }
}

double unit_similarity(Metric metric, std::span<const double> p, std::span<const double> l) {
  switch (metric) {
    case Metric::csls:
    case Metric::cosine:
      return simd::dot(p, l);
    case Metric::manhattan:
      return -simd::l1_distance(p, l);
    case Metric::euclidean:
      return -std::sqrt(simd::l2_squared(p, l));
  }
  return 0.0;
}

}  // namespace

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::csls:
      return "csls";
    case Metric::cosine:
      return "cosine";
    case Metric::manhattan:
      return "manhattan";
    case Metric::euclidean:
      return "euclidean";
  }
  return "unknown";
}

Metric parse_metric(std::string_view name) {
  if (name == "csls") return Metric::csls;
  if (name == "cosine") return Metric::cosine;
  if (name == "manhattan") return Metric::manhattan;
  if (name == "euclidean") return Metric::euclidean;
  throw Error("similarity", "unknown metric '" + std::string(name) + "'");
}

void SimilarityConfig::validate(std::size_t fine_count) const {
  if (k == 0) throw Error("similarity", "K must be at least 1");
  if (k > fine_count) {
    throw Error("similarity", "K=" + std::to_string(k) + " exceeds the number of fine prototypes (" +
                                  std::to_string(fine_count) + ")");
  }
}

double cosine(std::span<const double> p, std::span<const double> l) {
  check_dims(p, l);
  const double pp = simd::dot(p, p);
  const double ll = simd::dot(l, l);
  if (pp == 0.0 || ll == 0.0) throw Error("similarity", "cosine of a zero vector is undefined");
  const double c = simd::dot(p, l) / (std::sqrt(pp) * std::sqrt(ll));
  return std::clamp(c, -1.0, 1.0);
}

double base_similarity(Metric metric, std::span<const double> p, std::span<const double> l) {
  check_dims(p, l);
  switch (metric) {
    case Metric::csls:
    case Metric::cosine:
      return cosine(p, l);
    default:
      return unit_similarity(metric, p, l);
  }
}

std::vector<std::size_t> top_k_indices(std::span<const double> scores, std::size_t k) {
  if (k == 0 || k > scores.size()) {
    throw Error("similarity", "K=" + std::to_string(k) + " outside [1, " + std::to_string(scores.size()) + "]");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  order.resize(k);
  return order;
}

double knn_mean(std::span<const double> scores, std::size_t k) {
  double sum = 0.0;
  for (std::size_t i : top_k_indices(scores, k)) sum += scores[i];
  return sum / static_cast<double>(k);
}

double knn_mean(std::span<const double> p, const Matrix& fine_prototypes, std::size_t k) {
  std::vector<double> scores(fine_prototypes.rows());
  for (std::size_t r = 0; r < scores.size(); ++r) scores[r] = cosine(p, fine_prototypes.row(r));
  return knn_mean(scores, k);
}

PassageScores score_passage(std::span<const double> p, const Matrix& bank, std::size_t fine_rows,
                            const SimilarityConfig& config, VectorNorm norm) {
  if (fine_rows > bank.rows()) throw Error("similarity", "fine row count exceeds prototype bank");
  PassageScores out;
  out.base.resize(bank.rows());
  for (std::size_t r = 0; r < bank.rows(); ++r) {
    out.base[r] = norm == VectorNorm::unit ? unit_similarity(config.metric, p, bank.row(r))
                                           : base_similarity(config.metric, p, bank.row(r));
  }
  if (uses_knn_correction(config.metric)) {
    config.validate(fine_rows);
    const std::span<const double> fine_scores(out.base.data(), fine_rows);
    out.neighbors = top_k_indices(fine_scores, config.k);
    double sum = 0.0;
    for (std::size_t r : out.neighbors) sum += out.base[r];
    out.correction = sum / static_cast<double>(config.k);
  }
  return out;
}

double c_similarity(std::span<const double> p, std::span<const double> l, const Matrix& fine_prototypes,
                    const SimilarityConfig& config) {
  const double s = base_similarity(config.metric, p, l);
  if (!uses_knn_correction(config.metric)) return s;
  config.validate(fine_prototypes.rows());
  std::vector<double> scores(fine_prototypes.rows());
  for (std::size_t r = 0; r < scores.size(); ++r) scores[r] = base_similarity(config.metric, p, fine_prototypes.row(r));
  return s - knn_mean(scores, config.k);
}

std::vector<FineId> rank_candidates(std::span<const double> p, std::span<const FineId> candidates,
                                    const Matrix& fine_prototypes, const SimilarityConfig& config) {
  if (candidates.empty()) return {};
  const PassageScores scores = score_passage(p, fine_prototypes, fine_prototypes.rows(), config);
  std::vector<FineId> order(candidates.begin(), candidates.end());
  std::stable_sort(order.begin(), order.end(), [&](FineId a, FineId b) {
    const double ca = scores.c(index(a));
    const double cb = scores.c(index(b));
    if (ca != cb) return ca > cb;
    return index(a) < index(b);
  });
  return order;
}

}  // namespace c2f
