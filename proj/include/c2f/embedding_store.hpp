#pragma once

// C2FE embedding matrices: the interchange format with the encoder bridge.
//
// Layout (all little-endian):
//   bytes 0..3   magic "C2FE"
//   u32          format version (kEmbeddingFormatVersion)
//   u32          n_rows
//   u32          dim
//   f32[n_rows * dim]  row-major payload
//
// A sidecar manifest `<file>.manifest` (key=value lines) records provenance:
// encoder, template_id, gloss, kind, and id_hash (see id_hash()).

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "c2f/matrix.hpp"

namespace c2f {

inline constexpr char kEmbeddingMagic[4] = {'C', '2', 'F', 'E'};
inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;

enum class EmbeddingKind { passage, prototype };

struct EmbeddingMatrix {
  std::uint32_t n_rows = 0;
  std::uint32_t dim = 0;
  std::vector<float> data;
  EmbeddingKind kind = EmbeddingKind::passage;

  std::span<const float> row(std::size_t r) const { return {data.data() + r * dim, dim}; }
  std::span<float> row(std::size_t r) { return {data.data() + r * dim, dim}; }
};

EmbeddingMatrix read_embeddings(std::istream& in, const std::string& source = "<stream>",
                                EmbeddingKind kind = EmbeddingKind::passage);
EmbeddingMatrix read_embeddings(const std::filesystem::path& path, EmbeddingKind kind = EmbeddingKind::passage);
void write_embeddings(std::ostream& out, const EmbeddingMatrix& m);
void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m);

/// Rescales every row to unit L2 norm (norms accumulated in double).
/// Throws with the row index on a zero-norm row.
EmbeddingMatrix l2_normalize(EmbeddingMatrix m);

/// Widens to the compute matrix type.
Matrix to_matrix(const EmbeddingMatrix& m);

// --- manifest ----------------------------------------------------------------

struct EmbeddingManifest {
  std::map<std::string, std::string> fields;

  std::optional<std::string> get(const std::string& key) const;
};

std::filesystem::path manifest_path(const std::filesystem::path& embedding_path);
std::optional<EmbeddingManifest> read_manifest(const std::filesystem::path& embedding_path);
void write_manifest(const std::filesystem::path& embedding_path, const EmbeddingManifest& manifest);

/// "fnv1a64:<16 hex digits>" over the row keys, each followed by '\n'.
/// Row keys are passage ids (decimal) or prototype surface names.
std::string id_hash(std::span<const std::string> row_keys);

}  // namespace c2f
