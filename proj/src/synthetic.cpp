#include "c2f/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

#include "c2f/error.hpp"

namespace c2f {
namespace {

std::vector<double> random_unit(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> v(dim);
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (double& x : v) {
      x = gauss(rng);
      n2 += x * x;
    }
  } while (n2 == 0.0);
  const double inv = 1.0 / std::sqrt(n2);
  for (double& x : v) x *= inv;
  return v;
}

void add_scaled(std::vector<double>& acc, const std::vector<double>& v, double scale) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += scale * v[i];
}

void append_row(EmbeddingMatrix& m, const std::vector<double>& row) {
  for (double v : row) m.data.push_back(static_cast<float>(v));
  ++m.n_rows;
}

std::string filler_text(std::mt19937_64& rng, std::vector<std::string> inserts) {
  std::uniform_int_distribution<int> length(20, 40);
  std::uniform_int_distribution<int> word(0, 999);
  std::vector<std::string> tokens(static_cast<std::size_t>(length(rng)));
  for (std::string& t : tokens) t = "w" + std::to_string(word(rng));
  for (std::string& ins : inserts) {
    std::uniform_int_distribution<std::size_t> pos(0, tokens.size());
    tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(pos(rng)), std::move(ins));
  }
  std::string text;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) text += ' ';
    text += tokens[i];
  }
  return text + ".";
}

std::size_t rounded(double x) { return static_cast<std::size_t>(std::llround(x)); }

}  // namespace

void SyntheticSpec::validate() const {
  if (coarse == 0 || fine_per_coarse == 0 || passages_per_fine == 0 || dim == 0) {
    throw Error("synthetic", "coarse, fine_per_coarse, passages_per_fine and dim must be positive");
  }
  if (!(separation > 0.0) || !(coarse_separation > 0.0)) throw Error("synthetic", "separations must be positive");
  if (shared_component < 0.0) throw Error("synthetic", "shared_component must be nonnegative");
  if (skew < 0.0 || skew >= 1.0) throw Error("synthetic", "skew must lie in [0, 1)");
  if (skew > 0.0 && coarse < 2) throw Error("synthetic", "skew needs at least two coarse labels");
  if (seed_fraction < 0.0 || ambiguous_fraction < 0.0 || seed_fraction + ambiguous_fraction > 1.0) {
    throw Error("synthetic", "seed and ambiguous fractions must be nonnegative and sum to at most 1");
  }
  if (!(sibling_spread >= 0.0)) throw Error("synthetic", "sibling_spread must be nonnegative");
  if (seed_bias < 0.0 || seed_bias > 1.0) throw Error("synthetic", "seed_bias must lie in [0, 1]");
  if (prototype_confusion < 0.0 || prototype_confusion > 1.0) {
    throw Error("synthetic", "prototype_confusion must lie in [0, 1]");
  }
  if (prototype_offset < 0.0 || prototype_offset_no_gloss < 0.0) {
    throw Error("synthetic", "prototype offsets must be nonnegative");
  }
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const std::size_t dim = spec.dim;
  const std::size_t n_fine = spec.coarse * spec.fine_per_coarse;

  // Taxonomy.
  std::vector<Taxonomy::Record> records;
  for (std::size_t c = 0; c < spec.coarse; ++c) {
    for (std::size_t j = 0; j < spec.fine_per_coarse; ++j) {
      records.push_back({"coarse" + std::to_string(c), "c" + std::to_string(c) + "-f" + std::to_string(j), {}});
    }
  }
  SyntheticData out{Taxonomy::from_records(records), {}, {}, {}, {}, {}};
  const Taxonomy& tax = out.taxonomy;

  // Passage counts per fine label.
  std::vector<std::size_t> counts(n_fine, spec.passages_per_fine);
  if (spec.skew > 0.0) {
    const std::size_t total = n_fine * spec.passages_per_fine;
    const std::size_t first = rounded(spec.skew * static_cast<double>(total));
    const std::size_t rest = (total - first) / (spec.coarse - 1);
    for (std::size_t c = 0; c < spec.coarse; ++c) {
      const std::size_t in_coarse = c == 0 ? first : rest;
      for (std::size_t j = 0; j < spec.fine_per_coarse; ++j) {
        counts[c * spec.fine_per_coarse + j] =
            in_coarse / spec.fine_per_coarse + (j < in_coarse % spec.fine_per_coarse ? 1 : 0);
      }
    }
    for (std::size_t n : counts) {
      if (n == 0) throw Error("synthetic", "skew leaves a fine label without passages");
    }
  }

  // Geometry.
  const std::vector<double> shared = random_unit(dim, rng);
  const double coarse_radius = spec.coarse_separation * spec.separation / std::sqrt(2.0);
  const double fine_radius = spec.separation / std::sqrt(2.0);
  std::vector<std::vector<double>> coarse_centroid(spec.coarse);
  for (auto& mu : coarse_centroid) {
    mu.assign(dim, 0.0);
    add_scaled(mu, shared, spec.shared_component);
    add_scaled(mu, random_unit(dim, rng), coarse_radius);
  }
  std::vector<std::vector<double>> fine_centroid(n_fine);
  for (std::size_t f = 0; f < n_fine; ++f) {
    fine_centroid[f] = coarse_centroid[index(tax.fine(fine_id(f)).parent)];
    add_scaled(fine_centroid[f], random_unit(dim, rng), fine_radius);
  }

  // Gloss-prototype positions are drawn before the passages so seed passages
  // can lean toward them; both prototype files share offset directions so the
  // gloss switch only changes the distance.
  const FineId hub_label = tax.candidates(coarse_id(0)).front();
  // Unit direction mixing a random combination of sibling-centroid differences
  // (weight prototype_confusion) with an isotropic component.
  const auto offset_direction = [&](std::size_t f, std::mt19937_64& prng) {
    std::vector<double> iso = random_unit(dim, prng);
    const auto siblings = tax.candidates(tax.fine(fine_id(f)).parent);
    if (spec.prototype_confusion == 0.0 || siblings.size() < 2) return iso;
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> toward(dim, 0.0);
    for (FineId s : siblings) {
      if (index(s) == f) continue;
      const double w = std::abs(gauss(prng));
      for (std::size_t i = 0; i < dim; ++i) toward[i] += w * (fine_centroid[index(s)][i] - fine_centroid[f][i]);
    }
    double n2 = 0.0;
    for (double x : toward) n2 += x * x;
    std::vector<double> dir(dim, 0.0);
    add_scaled(dir, toward, spec.prototype_confusion / std::sqrt(n2));
    add_scaled(dir, iso, 1.0 - spec.prototype_confusion);
    double d2 = 0.0;
    for (double x : dir) d2 += x * x;
    for (double& x : dir) x /= std::sqrt(d2);
    return dir;
  };
  std::vector<std::vector<double>> fine_offset(n_fine);
  std::vector<std::vector<double>> coarse_offset(spec.coarse);
  {
    std::mt19937_64 prng(rng());
    for (std::size_t f = 0; f < n_fine; ++f) fine_offset[f] = offset_direction(f, prng);
    for (auto& o : coarse_offset) o = random_unit(dim, prng);
  }
  const std::vector<double> hub_jitter = random_unit(dim, rng);

  // Passages, generated per fine label then shuffled.
  struct Draft {
    FineId gold;
    std::vector<double> x;
    std::string text;
  };
  std::vector<Draft> drafts;
  std::normal_distribution<double> noise(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  for (std::size_t f = 0; f < n_fine; ++f) {
    const FineLabel& label = tax.fine(fine_id(f));
    const auto siblings = tax.candidates(label.parent);
    const std::size_t n = counts[f];
    const std::size_t n_seed = std::min(n, rounded(spec.seed_fraction * static_cast<double>(n)));
    const std::size_t n_ambiguous =
        siblings.size() < 2 ? 0 : std::min(n - n_seed, rounded(spec.ambiguous_fraction * static_cast<double>(n)));
    std::vector<std::vector<double>> toward;
    for (FineId s : siblings) {
      if (s == label.id) continue;
      std::vector<double> dir = fine_centroid[index(s)];
      add_scaled(dir, fine_centroid[f], -1.0);
      double n2 = 0.0;
      for (double x : dir) n2 += x * x;
      for (double& x : dir) x /= std::sqrt(n2);
      toward.push_back(std::move(dir));
    }
    std::normal_distribution<double> spread(0.0, spec.sibling_spread);
    for (std::size_t i = 0; i < n; ++i) {
      Draft d{label.id, fine_centroid[f], {}};
      if (i < n_seed) add_scaled(d.x, fine_offset[f], spec.seed_bias * spec.prototype_offset * spec.separation);
      for (double& v : d.x) v += noise(rng);
      if (spec.sibling_spread > 0.0) {
        for (const auto& dir : toward) add_scaled(d.x, dir, spread(rng));
      }
      std::vector<std::string> inserts;
      if (i < n_seed) {
        inserts.push_back(label.surface_name);
      } else if (i < n_seed + n_ambiguous) {
        inserts.push_back(label.surface_name);
        std::uniform_int_distribution<std::size_t> pick(0, siblings.size() - 2);
        std::size_t k = pick(rng);
        if (siblings[k] == label.id) k = siblings.size() - 1;
        inserts.push_back(tax.fine(siblings[k]).surface_name);
      }
      d.text = filler_text(rng, std::move(inserts));
      drafts.push_back(std::move(d));
    }
  }
  std::shuffle(drafts.begin(), drafts.end(), rng);

  out.passages.dim = static_cast<std::uint32_t>(dim);
  out.passages.kind = EmbeddingKind::passage;
  std::vector<double> mean(dim, 0.0);
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    Passage p;
    p.id = i;
    p.text = std::move(drafts[i].text);
    p.coarse = tax.fine(drafts[i].gold).parent;
    out.corpus.push_back(std::move(p));
    out.gold.push_back(drafts[i].gold);
    append_row(out.passages, drafts[i].x);
    add_scaled(mean, drafts[i].x, 1.0 / static_cast<double>(drafts.size()));
  }

  // Prototypes: fine rows, then coarse rows.
  const auto make_prototypes = [&](double offset) {
    EmbeddingMatrix m;
    m.dim = static_cast<std::uint32_t>(dim);
    m.kind = EmbeddingKind::prototype;
    for (std::size_t f = 0; f < n_fine; ++f) {
      std::vector<double> v = fine_centroid[f];
      if (spec.hub && fine_id(f) == hub_label) {
        v = mean;
        add_scaled(v, hub_jitter, 0.05 * spec.separation);
      } else {
        add_scaled(v, fine_offset[f], offset * spec.separation);
      }
      append_row(m, v);
    }
    for (std::size_t c = 0; c < spec.coarse; ++c) {
      std::vector<double> v = coarse_centroid[c];
      add_scaled(v, coarse_offset[c], offset * spec.separation);
      append_row(m, v);
    }
    return m;
  };
  out.prototypes = make_prototypes(spec.prototype_offset);
  out.prototypes_no_gloss = make_prototypes(spec.prototype_offset_no_gloss);
  return out;
}

SyntheticPaths write_synthetic(const SyntheticData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  SyntheticPaths paths{dir / "taxonomy.tsv", dir / "corpus.tsv", dir / "passages.c2fe", dir / "prototypes.c2fe",
                       dir / "prototypes_nogloss.c2fe"};
  {
    std::ofstream out(paths.taxonomy);
    if (!out) throw Error("synthetic", "cannot write " + paths.taxonomy.string());
    write_taxonomy(out, data.taxonomy);
  }
  {
    std::ofstream out(paths.corpus);
    if (!out) throw Error("synthetic", "cannot write " + paths.corpus.string());
    write_corpus(out, data.corpus, data.gold, data.taxonomy);
  }

  std::vector<std::string> passage_keys;
  for (const Passage& p : data.corpus) passage_keys.push_back(std::to_string(p.id));
  std::vector<std::string> prototype_keys;
  for (const FineLabel& f : data.taxonomy.fine_labels()) prototype_keys.push_back(f.surface_name);
  for (const CoarseLabel& c : data.taxonomy.coarse_labels()) prototype_keys.push_back(c.surface_name);

  const auto emit = [](const std::filesystem::path& path, const EmbeddingMatrix& m, const std::string& kind,
                       const std::string& gloss, const std::vector<std::string>& keys) {
    write_embeddings(path, m);
    EmbeddingManifest manifest;
    manifest.fields["encoder"] = "synthetic-gaussian-mixture";
    manifest.fields["template_id"] = "0";
    manifest.fields["gloss"] = gloss;
    manifest.fields["kind"] = kind;
    manifest.fields["id_hash"] = id_hash(keys);
    write_manifest(path, manifest);
  };
  emit(paths.passages, data.passages, "passage", "n/a", passage_keys);
  emit(paths.prototypes, data.prototypes, "prototype", "true", prototype_keys);
  emit(paths.prototypes_no_gloss, data.prototypes_no_gloss, "prototype", "false", prototype_keys);
  return paths;
}

}  // namespace c2f
