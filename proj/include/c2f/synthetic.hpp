#pragma once

// Desk-scale stand-in for a real corpus: a hierarchical Gaussian mixture
// with coarse centroids far apart and fine centroids offset inside each
// coarse cluster, plus token texts carrying surface-name seeds.
//
// Units: every cluster has RMS radius 1 (isotropic noise with per-dimension
// standard deviation 1/sqrt(dim)); `separation` is the distance between
// sibling fine centroids in those units.

#include <cstdint>
#include <filesystem>

#include "c2f/embedding_store.hpp"
#include "c2f/taxonomy.hpp"

namespace c2f {

struct SyntheticSpec {
  std::size_t coarse = 3;
  std::size_t fine_per_coarse = 3;
  std::size_t passages_per_fine = 100;
  std::size_t dim = 64;
  double separation = 2.5;
  /// Distance between coarse centroids, as a multiple of `separation`.
  double coarse_separation = 3.0;
  /// Length of the component shared by every embedding (anisotropy).
  double shared_component = 3.0;
  /// Fraction of all passages placed in coarse label 0; 0 keeps coarse labels balanced.
  double skew = 0.0;
  /// Extra Gaussian spread along each unit direction toward a sibling centroid
  /// (standard deviation, in cluster-radius units); models topical overlap.
  double sibling_spread = 0.3;
  double seed_fraction = 0.05;
  /// Seed passages are shifted this fraction of the way from their centroid
  /// toward their label's gloss prototype (passages naming a label sit near it).
  double seed_bias = 0.5;
  /// Fraction of passages whose text names two sibling labels.
  double ambiguous_fraction = 0.01;
  /// Distance of a gloss-augmented prototype from its centroid, in `separation` units.
  double prototype_offset = 0.5;
  /// Same for the surface-name-only prototypes.
  double prototype_offset_no_gloss = 0.9;
  /// Share of each fine prototype's offset that points toward its sibling
  /// centroids (the rest is isotropic); 0 gives purely random offsets.
  double prototype_confusion = 0.8;
  /// Place the first fine prototype of coarse 0 near the global passage mean.
  bool hub = false;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SyntheticData {
  Taxonomy taxonomy;
  Corpus corpus;
  GoldLabels gold;
  EmbeddingMatrix passages;
  /// Fine prototypes (row = fine id) followed by coarse prototypes.
  EmbeddingMatrix prototypes;
  EmbeddingMatrix prototypes_no_gloss;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

struct SyntheticPaths {
  std::filesystem::path taxonomy;
  std::filesystem::path corpus;
  std::filesystem::path passages;
  std::filesystem::path prototypes;
  std::filesystem::path prototypes_no_gloss;
};

/// Writes taxonomy.tsv, corpus.tsv, passages.c2fe, prototypes.c2fe and
/// prototypes_nogloss.c2fe (with manifests) into `dir`.
SyntheticPaths write_synthetic(const SyntheticData& data, const std::filesystem::path& dir);

}  // namespace c2f
