#pragma once

// End-to-end run orchestration behind the command-line tool: configuration,
// input loading with provenance checks, the training schedule, and the
// artifacts written into the output directory.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "c2f/bootstrap.hpp"
#include "c2f/evaluation.hpp"
#include "c2f/matrix.hpp"
#include "c2f/similarity.hpp"
#include "c2f/taxonomy.hpp"

namespace c2f {

struct RunConfig {
  std::filesystem::path taxonomy;
  std::filesystem::path corpus;
  std::filesystem::path passages;
  std::filesystem::path prototypes;
  /// Surface-name-only prototypes; required when no_gloss is set.
  std::filesystem::path prototypes_no_gloss;
  std::filesystem::path output_dir;

  Metric metric = Metric::csls;
  std::size_t k = 3;
  double gamma = 0.05;
  double sigma = 0.05;
  double lr = 1e-3;
  double weight_decay = 0.01;
  std::size_t batch_size = 8;
  /// Confident-set percentage; empty means pick it from the seed ratios.
  std::optional<int> r;
  std::size_t warmup_epochs = 1;
  std::size_t bootstrap_epochs = 4;
  std::uint64_t seed = 13;

  bool mapping_free = false;
  bool no_select = false;
  bool no_bootstrap = false;
  bool no_gloss = false;
  CsLosses cs_losses = CsLosses::local_and_global;
  SignConvention sign = SignConvention::intent;
  ExclusiveScope exclusive_scope = ExclusiveScope::candidates;
  BetaCheck beta_check = BetaCheck::warn;
  bool emit_confusion = false;

  /// Rejects out-of-range hyperparameters and missing input files.
  void validate() const;
  /// Every field, as a JSON object.
  std::string to_json() const;

  std::filesystem::path prototype_path() const { return no_gloss ? prototypes_no_gloss : prototypes; }
  TrainConfig train_config(int r_percent) const;
};

/// Overlays the keys present in `text` (any subset of to_json's keys) onto `defaults`.
RunConfig run_config_from_json(std::string_view text, const RunConfig& defaults = RunConfig{});
RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& defaults = RunConfig{});

/// Default output root: $C2F_OUTPUT_ROOT when set, otherwise "runs".
std::filesystem::path default_output_root();

struct RunInputs {
  Taxonomy taxonomy;
  Corpus corpus;
  GoldLabels gold;
  Matrix passages;  // unit rows, aligned with corpus
  Matrix bank;      // unit rows: fine prototypes, then optional coarse prototypes
};

/// Loads and normalizes every input named by `config`. When an embedding file
/// has a manifest carrying id_hash, the hash must match the row keys implied
/// by the corpus or taxonomy.
RunInputs load_inputs(const RunConfig& config);

struct RunOutcome {
  int r_percent = 0;
  std::size_t seed_count = 0;
  RunResult result;
  ModelState model;
  std::optional<EvalReport> report;  // present when the corpus carries gold labels
};

/// Seeds, trains and predicts on `inputs` (whose corpus states are reset).
RunOutcome execute(const RunConfig& config, RunInputs& inputs);

/// Writes config.json, run_log.jsonl, checkpoint.c2fm, predictions.tsv and,
/// with gold labels, report.txt and confusion.tsv (plus per-coarse tables when
/// emit_confusion is set).
void write_outputs(const RunConfig& config, const RunInputs& inputs, const RunOutcome& outcome);

/// validate + load_inputs + execute + write_outputs.
RunOutcome run_pipeline(const RunConfig& config);

void write_predictions(std::ostream& out, const Corpus& corpus, std::span<const Prediction> predictions,
                       const Taxonomy& taxonomy);
/// Reads "id<TAB>fine<TAB>score" records; ids must follow corpus order.
std::vector<FineId> read_predictions(const std::filesystem::path& path, const Corpus& corpus,
                                     const Taxonomy& taxonomy);

// --- ablations -------------------------------------------------------------------

enum class Variant { fine, bootstrap, gloss, select, similarity, manhattan, euclidean };

Variant parse_variant(std::string_view name);
std::string_view to_string(Variant v);
/// Row label in the ablation table, e.g. "w/o bootstrap".
std::string_view variant_label(Variant v);
RunConfig apply_variant(RunConfig config, Variant v);

struct AblationRow {
  std::string label;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
};

struct AblationTable {
  AblationRow base;
  std::vector<AblationRow> variants;
};

/// Runs the base configuration and each variant with the same seed, each into
/// its own subdirectory of config.output_dir, and writes ablation.tsv.
AblationTable run_ablation(const RunConfig& config, std::span<const Variant> variants);
/// Scores in percent with signed deltas against the base row.
void write_ablation_table(std::ostream& out, const AblationTable& table);

}  // namespace c2f
