#pragma once

// Two-level label taxonomy (coarse -> fine partition) and the passage corpus
// with its label-state bookkeeping.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace c2f {

enum class FineId : std::uint32_t {};
enum class CoarseId : std::uint32_t {};

constexpr std::size_t index(FineId id) noexcept { return static_cast<std::size_t>(id); }
constexpr std::size_t index(CoarseId id) noexcept { return static_cast<std::size_t>(id); }
constexpr FineId fine_id(std::size_t i) noexcept { return static_cast<FineId>(i); }
constexpr CoarseId coarse_id(std::size_t i) noexcept { return static_cast<CoarseId>(i); }

struct FineLabel {
  FineId id{};
  std::string surface_name;
  std::optional<std::string> gloss;
  CoarseId parent{};
};

struct CoarseLabel {
  CoarseId id{};
  std::string surface_name;
  std::vector<FineId> children;
};

/// Coarse and fine labels with the surjective coarse-to-fine mapping.
/// Ids are dense and assigned in order of first appearance in the source file.
class Taxonomy {
 public:
  struct Record {
    std::string coarse;
    std::string fine;  // empty: declares the coarse label only
    std::optional<std::string> gloss;
  };

  /// Validates and builds the taxonomy. Throws c2f::Error on duplicate fine
  /// names, a fine label listed under two coarse labels, or a coarse label
  /// without children.
  static Taxonomy from_records(std::span<const Record> records);

  std::size_t fine_count() const noexcept { return fine_.size(); }
  std::size_t coarse_count() const noexcept { return coarse_.size(); }

  const FineLabel& fine(FineId id) const;
  const CoarseLabel& coarse(CoarseId id) const;
  std::span<const FineLabel> fine_labels() const noexcept { return fine_; }
  std::span<const CoarseLabel> coarse_labels() const noexcept { return coarse_; }

  /// Fine candidates of a coarse label (its children).
  std::span<const FineId> candidates(CoarseId c) const { return coarse(c).children; }
  /// Fine labels outside the coarse label's partition.
  std::vector<FineId> non_candidates(CoarseId c) const;
  /// Coarse labels other than `c`.
  std::vector<CoarseId> other_coarse(CoarseId c) const;

  std::optional<FineId> find_fine(std::string_view surface_name) const;
  std::optional<CoarseId> find_coarse(std::string_view surface_name) const;

 private:
  std::vector<FineLabel> fine_;
  std::vector<CoarseLabel> coarse_;
};

/// Tab-separated: `coarse<TAB>fine[<TAB>gloss]`, or a lone `coarse` to declare a
/// coarse label. Blank lines and lines starting with '#' are ignored.
Taxonomy parse_taxonomy(std::istream& in, const std::string& source = "<stream>");
Taxonomy load_taxonomy(const std::filesystem::path& path);
void write_taxonomy(std::ostream& out, const Taxonomy& taxonomy);

// Label state of a passage.
struct Unlabeled {
  bool operator==(const Unlabeled&) const = default;
};
struct WeakSeed {
  FineId label{};
  bool operator==(const WeakSeed&) const = default;
};
struct Confident {
  FineId label{};
  double score = 0.0;
  bool operator==(const Confident&) const = default;
};
struct Predicted {
  FineId label{};
  bool operator==(const Predicted&) const = default;
};
using LabelState = std::variant<Unlabeled, WeakSeed, Confident, Predicted>;

std::optional<FineId> state_label(const LabelState& state);

struct Passage {
  std::uint64_t id = 0;
  std::string text;
  CoarseId coarse{};
  LabelState state = Unlabeled{};
  /// Label found by weak seeding; kept after the state moves on so the
  /// seed set can be reused.
  std::optional<FineId> weak_seed;
};

using Corpus = std::vector<Passage>;

/// Gold fine labels, indexed like the corpus. Only the evaluation path reads these.
using GoldLabels = std::vector<std::optional<FineId>>;

struct LoadedCorpus {
  Corpus passages;
  GoldLabels gold;
};

/// Tab-separated: `id<TAB>coarse<TAB>text[<TAB>gold_fine]`. Coarse and gold
/// names must exist in the taxonomy; the gold label must be a child of the coarse label.
LoadedCorpus parse_corpus(std::istream& in, const Taxonomy& taxonomy, const std::string& source = "<stream>");
LoadedCorpus load_corpus(const std::filesystem::path& path, const Taxonomy& taxonomy);
void write_corpus(std::ostream& out, const Corpus& corpus, const GoldLabels& gold, const Taxonomy& taxonomy);

// --- weak supervision -------------------------------------------------------

enum class ExclusiveScope { candidates, all };

/// Lower-cased alphanumeric tokens; any other byte is a separator. Bytes >= 0x80
/// are kept inside tokens so UTF-8 words stay intact.
std::vector<std::string> tokenize(std::string_view text);

/// True when `phrase` occurs as a contiguous token run in `tokens`.
bool contains_phrase(std::span<const std::string> tokens, std::span<const std::string> phrase);

/// Marks passages whose text mentions exactly one candidate fine surface name
/// as WeakSeed. Returns the number of seeds. Passages must be Unlabeled or
/// WeakSeed; the operation is idempotent.
std::size_t seed_weak_supervision(Corpus& corpus, const Taxonomy& taxonomy,
                                  ExclusiveScope scope = ExclusiveScope::candidates);

struct SeedRatio {
  CoarseId coarse{};
  std::size_t seeds = 0;
  std::size_t total = 0;
  double value() const noexcept { return static_cast<double>(seeds) / static_cast<double>(total); }
};

/// Seed count over passage count for every coarse label. Throws when a coarse
/// label has no passages.
std::vector<SeedRatio> seed_ratios(const Corpus& corpus, const Taxonomy& taxonomy);

inline constexpr int kDefaultRCandidates[] = {1, 5, 10, 15, 20};

/// Candidate percentage closest to the smallest seed ratio (as a percentage);
/// ties go to the smaller candidate. Comparisons are exact on the integer counts.
int select_r(std::span<const SeedRatio> ratios, std::span<const int> candidates = kDefaultRCandidates);

}  // namespace c2f
