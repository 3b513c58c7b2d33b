#pragma once

// Prediction and Micro/Macro-F1 reporting.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "c2f/matrix.hpp"
#include "c2f/model.hpp"
#include "c2f/taxonomy.hpp"

namespace c2f {

struct Prediction {
  FineId label{};
  double score = 0.0;  // cosine to the predicted prototype
};

/// argmax of cosine over the candidates; ties go to the smaller fine id.
/// Row i of `fine_reps` is the representation of FineId i.
Prediction predict(std::span<const double> passage_rep, std::span<const FineId> candidates, const Matrix& fine_reps);

/// Projects passages and fine prototypes through `head` and predicts each passage.
std::vector<Prediction> predict_all(const ProjectionHead& head, const Matrix& passage_base, const Matrix& bank,
                                    const Corpus& corpus, const Taxonomy& taxonomy);

struct ClassMetrics {
  FineId label{};
  std::size_t support = 0;    // gold count
  std::size_t predicted = 0;  // predicted count
  std::size_t true_positive = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct CoarseReport {
  CoarseId coarse{};
  std::size_t evaluated = 0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
};

using CountMatrix = std::vector<std::vector<std::size_t>>;

struct EvalReport {
  std::size_t evaluated = 0;
  double micro_f1 = 0.0;
  /// Mean F1 over classes with at least one gold instance.
  double macro_f1 = 0.0;
  std::vector<ClassMetrics> per_class;  // indexed by fine id
  CountMatrix confusion;                // [gold][predicted], |F| x |F|
  std::vector<CoarseReport> per_coarse;
};

/// Passages without a gold label are skipped; throws when none has one.
EvalReport evaluate(std::span<const FineId> predictions, const GoldLabels& gold, const Taxonomy& taxonomy);

/// Rows and columns restricted to the children of `coarse`, in id order.
CountMatrix confusion_by_coarse(const EvalReport& report, const Taxonomy& taxonomy, CoarseId coarse);

void write_report(std::ostream& out, const EvalReport& report, const Taxonomy& taxonomy);
/// Tab-separated count table with a header row of predicted labels and a
/// leading column of gold labels.
void write_confusion_table(std::ostream& out, const CountMatrix& counts, std::span<const FineId> labels,
                           const Taxonomy& taxonomy);

}  // namespace c2f
