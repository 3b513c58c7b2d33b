#pragma once

// Independent reference implementations and fixtures shared by the unit
// tests and the acceptance runner. Nothing here calls into the library code
// under test except for plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <limits>
#include <stdexcept>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "c2f/bootstrap.hpp"
#include "c2f/matrix.hpp"
#include "c2f/taxonomy.hpp"

namespace c2f::testing {

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

inline std::vector<double> unit(std::vector<double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  s = std::sqrt(s);
  for (double& x : v) x /= s;
  return v;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, bool unit_rows) {
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    auto v = random_vector(cols, rng);
    if (unit_rows) v = unit(std::move(v));
    std::copy(v.begin(), v.end(), m.row(r).begin());
  }
  return m;
}

// --- similarity oracle: cosine minus the mean of the top-K cosines, by explicit sort ---

inline double oracle_cosine(std::span<const double> a, std::span<const double> b) {
  long double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<long double>(a[i]) * b[i];
    aa += static_cast<long double>(a[i]) * a[i];
    bb += static_cast<long double>(b[i]) * b[i];
  }
  return static_cast<double>(ab / std::sqrt(aa * bb));
}

inline double oracle_knn(std::vector<double> cosines, std::size_t k) {
  std::sort(cosines.begin(), cosines.end(), std::greater<>());
  long double sum = 0;
  for (std::size_t i = 0; i < k; ++i) sum += cosines[i];
  return static_cast<double>(sum / static_cast<long double>(k));
}

inline double oracle_csls(std::span<const double> p, std::size_t label, const Matrix& fine, std::size_t k) {
  std::vector<double> cos;
  for (std::size_t r = 0; r < fine.rows(); ++r) cos.push_back(oracle_cosine(p, fine.row(r)));
  return cos[label] - oracle_knn(cos, k);
}

// --- selection oracle: argmax label, gap threshold, top r% ---------------------------

struct OracleSelection {
  std::vector<std::size_t> passages;  // in selection order
  std::vector<FineId> labels;
  double beta = 0.0;
};

/// Pseudo label by argmax (smallest id on ties), keep
/// if best - second > beta, rank by score then passage, take ceil(r% of
/// population) plus everything tied with the last kept score.
inline OracleSelection oracle_select(std::span<const CandidateScores> table, double beta, int r,
                                     std::size_t population) {
  struct Row {
    std::size_t passage;
    FineId label;
    double score;
  };
  std::vector<Row> ok;
  for (const CandidateScores& t : table) {
    if (t.labels.size() < 2) continue;
    std::vector<std::size_t> order(t.labels.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (t.scores[a] != t.scores[b]) return t.scores[a] > t.scores[b];
      return index(t.labels[a]) < index(t.labels[b]);
    });
    const double best = t.scores[order[0]];
    const double second = t.scores[order[1]];
    if (best - second > beta) ok.push_back({t.passage, t.labels[order[0]], best});
  }
  std::sort(ok.begin(), ok.end(), [](const Row& a, const Row& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.passage < b.passage;
  });
  const std::size_t product = static_cast<std::size_t>(r) * population;
  const std::size_t cap = product / 100 + (product % 100 != 0 ? 1 : 0);
  std::size_t keep = std::min(cap, ok.size());
  while (keep > 0 && keep < ok.size() && ok[keep].score == ok[keep - 1].score) ++keep;
  OracleSelection out;
  out.beta = keep > 0 ? ok[keep - 1].score : beta;
  for (std::size_t i = 0; i < keep; ++i) {
    out.passages.push_back(ok[i].passage);
    out.labels.push_back(ok[i].label);
  }
  return out;
}

// --- F1 oracle: per-class counts straight from the pairs ------------------------------------

struct OracleF1 {
  double micro = 0.0;
  double macro = 0.0;
};

inline OracleF1 oracle_f1(const std::vector<int>& gold, const std::vector<int>& pred, int classes) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) correct += gold[i] == pred[i];
  OracleF1 o;
  o.micro = static_cast<double>(correct) / static_cast<double>(gold.size());
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < classes; ++c) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (gold[i] == c && pred[i] == c) ++tp;
      if (gold[i] != c && pred[i] == c) ++fp;
      if (gold[i] == c && pred[i] != c) ++fn;
    }
    if (tp + fn == 0) continue;
    // 2PR/(P+R) reduced over the common denominator: one rounding per class.
    sum += static_cast<double>(2 * tp) / static_cast<double>(2 * tp + fp + fn);
    ++present;
  }
  o.macro = sum / present;
  return o;
}

// --- fixtures ---------------------------------------------------------------------------------

/// `coarse` coarse labels with `fine` children each, named "c<i>" and "c<i>f<j>".
inline Taxonomy grid_taxonomy(std::size_t coarse, std::size_t fine) {
  std::vector<Taxonomy::Record> records;
  for (std::size_t c = 0; c < coarse; ++c) {
    for (std::size_t f = 0; f < fine; ++f) {
      records.push_back({"c" + std::to_string(c), "c" + std::to_string(c) + "f" + std::to_string(f), {}});
    }
  }
  return Taxonomy::from_records(records);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("c2f-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::filesystem::path data_dir() { return std::filesystem::path(C2F_SOURCE_DIR) / "data"; }

/// Reads "coarse<TAB>seeds<TAB>total" rows from data/seed_ratios/<name>.tsv.
inline std::vector<SeedRatio> load_seed_ratios(const std::string& name, const Taxonomy& taxonomy) {
  std::ifstream in(data_dir() / "seed_ratios" / (name + ".tsv"));
  if (!in) throw std::runtime_error("missing seed ratio table " + name);
  std::vector<SeedRatio> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string coarse;
    SeedRatio r;
    std::getline(row, coarse, '\t');
    row >> r.seeds >> r.total;
    const auto id = taxonomy.find_coarse(coarse);
    if (!id) throw std::runtime_error("unknown coarse label " + coarse);
    r.coarse = *id;
    out.push_back(r);
  }
  return out;
}

}  // namespace c2f::testing
