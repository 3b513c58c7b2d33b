#include <algorithm>
#include <string>

#include "c2f/bootstrap.hpp"
#include "c2f/error.hpp"
#include "c2f/log.hpp"

namespace c2f {

std::size_t confident_capacity(std::size_t population, int r_percent) {
  if (r_percent < 0 || r_percent > 100) {
    throw Error("bootstrap", "r must be a percentage in [0, 100], got " + std::to_string(r_percent));
  }
  return (static_cast<std::size_t>(r_percent) * population + 99) / 100;
}

SelectionOutcome select_confident(std::span<const CandidateScores> table, double beta, int r_percent,
                                  std::size_t population) {
  SelectionOutcome out;
  out.capacity = confident_capacity(population, r_percent);
  out.set.r_percent = r_percent;

  std::vector<ConfidentEntry> qualifying;
  for (const CandidateScores& row : table) {
    if (row.labels.size() != row.scores.size()) throw Error("bootstrap", "candidate labels and scores differ in length");
    if (row.labels.size() < 2) continue;
    std::size_t best = 0;
    for (std::size_t i = 1; i < row.labels.size(); ++i) {
      if (row.scores[i] > row.scores[best] ||
          (row.scores[i] == row.scores[best] && index(row.labels[i]) < index(row.labels[best]))) {
        best = i;
      }
    }
    double runner_up = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < row.labels.size(); ++i) {
      if (i != best) runner_up = std::max(runner_up, row.scores[i]);
    }
    const double gap = row.scores[best] - runner_up;
    if (gap > beta) qualifying.push_back(ConfidentEntry{row.passage, row.labels[best], row.scores[best], gap});
  }
  out.qualifying = qualifying.size();

  std::sort(qualifying.begin(), qualifying.end(), [](const ConfidentEntry& a, const ConfidentEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.passage < b.passage;
  });

  std::size_t keep = std::min(out.capacity, qualifying.size());
  if (keep > 0) {
    const double cutoff = qualifying[keep - 1].score;
    while (keep < qualifying.size() && qualifying[keep].score == cutoff) ++keep;
  }
  qualifying.resize(keep);
  out.set.entries = std::move(qualifying);

  if (out.set.entries.empty()) {
    out.set.beta = beta;
    log::warn("confident set is empty (" + std::to_string(out.qualifying) + " qualifying passages, capacity " +
              std::to_string(out.capacity) + "); beta unchanged");
  } else {
    out.set.beta = out.set.entries.back().score;
  }
  return out;
}

std::vector<CandidateScores> score_candidates(const ProjectionHead& head, const Matrix& passage_base,
                                              const Matrix& bank, const Corpus& corpus, const Taxonomy& taxonomy,
                                              const SimilarityConfig& similarity) {
  if (passage_base.rows() != corpus.size()) throw Error("bootstrap", "passage embeddings do not align with the corpus");
  const Matrix zbank = head.project_all(bank);
  std::vector<CandidateScores> table(corpus.size());
  ProjectionHead::Activation act;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    head.forward(passage_base.row(i), act);
    const PassageScores s = score_passage(act.z, zbank, taxonomy.fine_count(), similarity, VectorNorm::unit);
    CandidateScores& row = table[i];
    row.passage = i;
    for (FineId f : taxonomy.candidates(corpus[i].coarse)) {
      row.labels.push_back(f);
      row.scores.push_back(s.c(index(f)));
    }
  }
  return table;
}

void apply_confident_set(Corpus& corpus, const ConfidentSet& set) {
  for (Passage& p : corpus) {
    if (std::holds_alternative<Confident>(p.state)) p.state = Unlabeled{};
  }
  for (const ConfidentEntry& e : set.entries) {
    corpus.at(e.passage).state = Confident{e.label, e.score};
  }
}

}  // namespace c2f
