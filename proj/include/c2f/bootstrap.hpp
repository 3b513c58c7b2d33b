#pragma once

// Training schedule: one warm-up epoch on the weak seeds, then alternating
// confident-set selection and finetuning.

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "c2f/evaluation.hpp"
#include "c2f/matrix.hpp"
#include "c2f/model.hpp"
#include "c2f/similarity.hpp"
#include "c2f/taxonomy.hpp"

namespace c2f {

// --- confident-set selection ----------------------------------------------------

/// c-scores of one passage over its fine candidates.
struct CandidateScores {
  std::size_t passage = 0;  // corpus index
  std::vector<FineId> labels;
  std::vector<double> scores;
};

struct ConfidentEntry {
  std::size_t passage = 0;
  FineId label{};
  double score = 0.0;
  double gap = 0.0;

  bool operator==(const ConfidentEntry&) const = default;
};

struct ConfidentSet {
  /// Sorted by score descending, then passage index ascending.
  std::vector<ConfidentEntry> entries;
  /// Threshold after this selection.
  double beta = -std::numeric_limits<double>::infinity();
  int r_percent = 0;
};

struct SelectionOutcome {
  ConfidentSet set;
  /// Passages whose pseudo label beat the runner-up by more than the incoming beta.
  std::size_t qualifying = 0;
  std::size_t capacity = 0;
};

/// ceil(r% of population).
std::size_t confident_capacity(std::size_t population, int r_percent);

/// Pseudo label = argmax score (ties to the smaller fine id); a passage
/// qualifies when it has at least two candidates and best - runner_up > beta.
/// The top `confident_capacity(population, r)` qualifying passages by score are
/// kept, plus any further passages tied with the cutoff score. beta becomes
/// the lowest score kept; an empty selection leaves beta unchanged.
SelectionOutcome select_confident(std::span<const CandidateScores> table, double beta, int r_percent,
                                  std::size_t population);

/// Scores every passage against its candidates with the current model.
std::vector<CandidateScores> score_candidates(const ProjectionHead& head, const Matrix& passage_base,
                                              const Matrix& bank, const Corpus& corpus, const Taxonomy& taxonomy,
                                              const SimilarityConfig& similarity);

/// Selected passages become Confident; previously Confident passages that were
/// not reselected revert to Unlabeled.
void apply_confident_set(Corpus& corpus, const ConfidentSet& set);

// --- schedule ------------------------------------------------------------------------

enum class CsLosses { local_and_global, local_only };
enum class BetaCheck { warn, error };

struct Schedule {
  std::size_t warmup_epochs = 1;
  std::size_t bootstrap_epochs = 4;
};

struct TrainConfig {
  LossConfig loss;
  SimilarityConfig similarity;
  Schedule schedule;
  int r_percent = 15;
  bool no_select = false;
  bool mapping_free = false;
  CsLosses cs_losses = CsLosses::local_and_global;
  BetaCheck beta_check = BetaCheck::warn;
  std::uint64_t seed = 0;
};

struct EpochLog {
  std::size_t epoch = 0;
  std::string phase;  // "warmup" or "bootstrap"
  LossTotals losses;
  std::size_t steps = 0;
  std::optional<std::size_t> cs_size;
  double beta = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> cs_per_coarse;
};

struct RunResult {
  std::vector<Prediction> predictions;
  std::vector<EpochLog> log;
  std::vector<double> beta_history;
};

class BootstrapEngine {
 public:
  /// `passage_base` rows align with the corpus; `bank` holds the fine
  /// prototypes (row = fine id) optionally followed by coarse prototypes.
  BootstrapEngine(const Taxonomy& taxonomy, Corpus& corpus, const Matrix& passage_base, const Matrix& bank,
                  TrainConfig config);

  /// WeakSeed passages get the global and local losses, all others the global loss.
  EpochLog warmup_epoch(ModelState& model, std::size_t epoch);

  /// Runs selection with the current model, updates beta and the corpus label states.
  SelectionOutcome select(const ModelState& model);

  /// Confident passages get the local loss (plus global unless cs_losses is
  /// local_only); every other passage gets the global loss.
  EpochLog bootstrap_epoch(ModelState& model, std::size_t epoch);

  /// Full schedule; final predictions come from the model after the last epoch.
  RunResult run(ModelState& model);

  double beta() const noexcept { return beta_; }
  const TrainConfig& config() const noexcept { return config_; }

 private:
  enum class Phase { warmup, bootstrap };
  EpochLog train_epoch(ModelState& model, std::size_t epoch, Phase phase);

  const Taxonomy& taxonomy_;
  Corpus& corpus_;
  const Matrix& passage_base_;
  const Matrix& bank_;
  TrainConfig config_;
  double beta_ = -std::numeric_limits<double>::infinity();
  std::optional<ConfidentSet> last_set_;
};

}  // namespace c2f
