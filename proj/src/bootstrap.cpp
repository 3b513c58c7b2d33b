#include "c2f/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "c2f/error.hpp"
#include "c2f/log.hpp"

namespace c2f {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::vector<FineId> draw_negatives(std::span<const FineId> pool, std::size_t count, std::mt19937_64& rng) {
  std::vector<FineId> out;
  if (pool.empty()) return out;
  out.reserve(count);
  if (pool.size() >= count) {
    std::vector<FineId> scratch(pool.begin(), pool.end());
    for (std::size_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, scratch.size() - 1);
      std::swap(scratch[i], scratch[pick(rng)]);
      out.push_back(scratch[i]);
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (std::size_t i = 0; i < count; ++i) out.push_back(pool[pick(rng)]);
  }
  return out;
}

}  // namespace

BootstrapEngine::BootstrapEngine(const Taxonomy& taxonomy, Corpus& corpus, const Matrix& passage_base,
                                 const Matrix& bank, TrainConfig config)
    : taxonomy_(taxonomy), corpus_(corpus), passage_base_(passage_base), bank_(bank), config_(std::move(config)) {
  config_.loss.validate();
  config_.similarity.validate(taxonomy_.fine_count());
  confident_capacity(corpus_.size(), config_.r_percent);
  if (passage_base_.rows() != corpus_.size()) {
    throw Error("bootstrap", "passage embedding rows (" + std::to_string(passage_base_.rows()) +
                                 ") do not match corpus size (" + std::to_string(corpus_.size()) + ")");
  }
  if (bank_.rows() < taxonomy_.fine_count()) {
    throw Error("bootstrap", "prototype bank has fewer rows than fine labels");
  }
  if (bank_.cols() != passage_base_.cols()) {
    throw Error("bootstrap", "prototype and passage embeddings differ in dimension");
  }
  if (config_.mapping_free) {
    if (taxonomy_.coarse_count() < 2) throw Error("bootstrap", "mapping-free mode needs at least two coarse labels");
    if (bank_.rows() < taxonomy_.fine_count() + taxonomy_.coarse_count()) {
      throw Error("bootstrap", "mapping-free mode needs coarse prototype rows after the fine prototypes");
    }
  }
}

EpochLog BootstrapEngine::train_epoch(ModelState& model, std::size_t epoch, Phase phase) {
  std::mt19937_64 rng(splitmix64(config_.seed ^ splitmix64(epoch + 1)));

  std::vector<std::size_t> order(corpus_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  // Negatives are re-drawn every epoch, in corpus order so the draw does not
  // depend on the shuffle.
  std::vector<std::vector<FineId>> negatives(corpus_.size());
  std::vector<std::optional<CoarseId>> coarse_negatives(corpus_.size());
  bool warned_single = false;
  for (std::size_t i = 0; i < corpus_.size(); ++i) {
    const CoarseId c = corpus_[i].coarse;
    if (config_.mapping_free) {
      const auto others = taxonomy_.other_coarse(c);
      std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
      coarse_negatives[i] = others[pick(rng)];
    } else {
      const auto pool = taxonomy_.non_candidates(c);
      if (pool.empty() && !warned_single) {
        log::warn("no fine labels outside the coarse partition; global loss is 0");
        warned_single = true;
      }
      negatives[i] = draw_negatives(pool, taxonomy_.candidates(c).size(), rng);
    }
  }

  EpochLog log;
  log.epoch = epoch;
  log.phase = phase == Phase::warmup ? "warmup" : "bootstrap";

  std::vector<TrainingExample> batch;
  batch.reserve(config_.loss.batch_size);
  const auto flush = [&] {
    if (batch.empty()) return;
    const BatchEvaluation eval = evaluate_batch(model.head, bank_, taxonomy_, batch, config_.loss,
                                                config_.similarity, true);
    adamw_step(model.head.params(), eval.gradient, model.optimizer, config_.loss.optimizer);
    log.losses += eval.totals;
    ++log.steps;
    batch.clear();
  };

  for (std::size_t i : order) {
    const Passage& p = corpus_[i];
    TrainingExample ex;
    ex.base = passage_base_.row(i);
    ex.coarse = p.coarse;
    if (phase == Phase::warmup) {
      if (std::holds_alternative<WeakSeed>(p.state)) ex.local_label = std::get<WeakSeed>(p.state).label;
    } else if (const auto* conf = std::get_if<Confident>(&p.state)) {
      ex.local_label = conf->label;
      ex.global = config_.cs_losses == CsLosses::local_and_global;
    }
    if (ex.global) {
      if (config_.mapping_free) {
        ex.coarse_negative = coarse_negatives[i];
      } else {
        ex.negatives = std::move(negatives[i]);
      }
    }
    batch.push_back(std::move(ex));
    if (batch.size() == config_.loss.batch_size) flush();
  }
  flush();
  return log;
}

EpochLog BootstrapEngine::warmup_epoch(ModelState& model, std::size_t epoch) {
  return train_epoch(model, epoch, Phase::warmup);
}

EpochLog BootstrapEngine::bootstrap_epoch(ModelState& model, std::size_t epoch) {
  EpochLog log = train_epoch(model, epoch, Phase::bootstrap);
  if (last_set_) {
    log.cs_size = last_set_->entries.size();
    log.beta = last_set_->beta;
    log.cs_per_coarse.assign(taxonomy_.coarse_count(), 0);
    for (const ConfidentEntry& e : last_set_->entries) ++log.cs_per_coarse[index(corpus_[e.passage].coarse)];
  }
  return log;
}

SelectionOutcome BootstrapEngine::select(const ModelState& model) {
  const auto table = score_candidates(model.head, passage_base_, bank_, corpus_, taxonomy_, config_.similarity);

  SelectionOutcome outcome;
  if (config_.no_select) {
    // The seed set stands in for the confident set; beta is left alone.
    for (const CandidateScores& row : table) {
      const auto& seed = corpus_[row.passage].weak_seed;
      if (!seed) continue;
      double score = 0.0;
      double runner_up = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < row.labels.size(); ++i) {
        if (row.labels[i] == *seed) {
          score = row.scores[i];
        } else {
          runner_up = std::max(runner_up, row.scores[i]);
        }
      }
      outcome.set.entries.push_back(ConfidentEntry{row.passage, *seed, score, score - runner_up});
    }
    std::sort(outcome.set.entries.begin(), outcome.set.entries.end(),
              [](const ConfidentEntry& a, const ConfidentEntry& b) {
                if (a.score != b.score) return a.score > b.score;
                return a.passage < b.passage;
              });
    outcome.set.beta = beta_;
    outcome.set.r_percent = config_.r_percent;
    outcome.qualifying = outcome.set.entries.size();
    outcome.capacity = outcome.set.entries.size();
  } else {
    outcome = select_confident(table, beta_, config_.r_percent, corpus_.size());
    if (!outcome.set.entries.empty() && std::isfinite(beta_) && outcome.set.beta < beta_) {
      std::ostringstream msg;
      msg << "beta decreased from " << beta_ << " to " << outcome.set.beta;
      if (config_.beta_check == BetaCheck::error) throw Error("bootstrap", msg.str());
      log::warn(msg.str());
    }
  }

  for (const ConfidentEntry& e : outcome.set.entries) {
    const auto candidates = taxonomy_.candidates(corpus_[e.passage].coarse);
    if (std::find(candidates.begin(), candidates.end(), e.label) == candidates.end()) {
      throw Error("bootstrap", "confident label outside the passage's candidate set");
    }
  }
  beta_ = outcome.set.beta;
  apply_confident_set(corpus_, outcome.set);
  last_set_ = outcome.set;
  return outcome;
}

RunResult BootstrapEngine::run(ModelState& model) {
  RunResult result;
  std::size_t epoch = 0;
  for (std::size_t i = 0; i < config_.schedule.warmup_epochs; ++i) {
    result.log.push_back(warmup_epoch(model, epoch++));
  }
  for (std::size_t i = 0; i < config_.schedule.bootstrap_epochs; ++i) {
    select(model);
    result.beta_history.push_back(beta_);
    result.log.push_back(bootstrap_epoch(model, epoch++));
  }
  result.predictions = predict_all(model.head, passage_base_, bank_, corpus_, taxonomy_);
  for (std::size_t i = 0; i < corpus_.size(); ++i) corpus_[i].state = Predicted{result.predictions[i].label};
  return result;
}

}  // namespace c2f
