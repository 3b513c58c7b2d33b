#pragma once

// Passage-prototype similarity.
//
// c(p, l) = s(p, l) - knn(p), where s is the base similarity (cosine, or a
// negated L1/L2 distance for the distance variants) and knn(p) is the mean of
// the K largest s(p, l') over all fine prototypes. The `cosine` metric applies
// no correction. Because knn(p) does not depend on l, the correction never
// changes the ordering of labels for a fixed passage.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "c2f/matrix.hpp"
#include "c2f/taxonomy.hpp"

namespace c2f {

enum class Metric { csls, cosine, manhattan, euclidean };

std::string_view to_string(Metric metric);
Metric parse_metric(std::string_view name);

/// Metrics other than plain cosine subtract the KNN mean.
constexpr bool uses_knn_correction(Metric m) noexcept { return m != Metric::cosine; }

struct SimilarityConfig {
  Metric metric = Metric::csls;
  std::size_t k = 3;

  /// Throws unless 1 <= k <= fine_count.
  void validate(std::size_t fine_count) const;
};

double cosine(std::span<const double> p, std::span<const double> l);

/// s(p, l) for the metric. Cosine is computed with full normalization.
double base_similarity(Metric metric, std::span<const double> p, std::span<const double> l);

/// Mean of the k largest values. Throws when k is 0 or exceeds the count.
double knn_mean(std::span<const double> scores, std::size_t k);

/// Mean of the k largest cosines from p to the rows of `fine_prototypes`.
double knn_mean(std::span<const double> p, const Matrix& fine_prototypes, std::size_t k);

double c_similarity(std::span<const double> p, std::span<const double> l, const Matrix& fine_prototypes,
                    const SimilarityConfig& config);

/// Candidates sorted by c(p, .) descending; ties go to the smaller fine id.
/// Row i of `fine_prototypes` is the prototype of FineId i.
std::vector<FineId> rank_candidates(std::span<const double> p, std::span<const FineId> candidates,
                                    const Matrix& fine_prototypes, const SimilarityConfig& config);

enum class VectorNorm { unit, arbitrary };

/// Scores of one passage against every row of a prototype bank whose first
/// `fine_rows` rows are the fine prototypes (any further rows, e.g. coarse
/// prototypes, are scored but never enter the neighbourhood).
struct PassageScores {
  std::vector<double> base;
  /// Top-K fine rows by base score, best first. Empty for Metric::cosine.
  std::vector<std::size_t> neighbors;
  double correction = 0.0;

  double c(std::size_t row) const { return base[row] - correction; }
};

/// With VectorNorm::unit, rows and p are assumed L2-normalized and cosine is a dot product.
PassageScores score_passage(std::span<const double> p, const Matrix& bank, std::size_t fine_rows,
                            const SimilarityConfig& config, VectorNorm norm = VectorNorm::arbitrary);

/// Indices of the k largest scores, best first; ties go to the smaller index.
std::vector<std::size_t> top_k_indices(std::span<const double> scores, std::size_t k);

}  // namespace c2f
