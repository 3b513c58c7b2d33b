#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "c2f/bootstrap.hpp"
#include "c2f/error.hpp"
#include "c2f/log.hpp"
#include "support.hpp"

using namespace c2f;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

CandidateScores row(std::size_t passage, std::vector<double> scores, std::size_t first_label = 0) {
  CandidateScores r;
  r.passage = passage;
  for (std::size_t i = 0; i < scores.size(); ++i) r.labels.push_back(fine_id(first_label + i));
  r.scores = std::move(scores);
  return r;
}

std::vector<CandidateScores> random_table(std::mt19937_64& rng) {
  const std::size_t n = 1 + rng() % 60;
  // Coarse quantization forces score ties and equal gaps.
  const double step = (rng() % 2 == 0) ? 0.05 : 1e-9;
  std::uniform_int_distribution<int> q(-20, 20);
  std::vector<CandidateScores> table;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = 1 + rng() % 4;
    std::vector<double> s(k);
    for (double& x : s) x = q(rng) * step;
    CandidateScores r = row(i, s, rng() % 3);
    std::shuffle(r.labels.begin(), r.labels.end(), rng);
    table.push_back(std::move(r));
  }
  std::shuffle(table.begin(), table.end(), rng);
  return table;
}

struct QuietWarnings {
  log::Sink previous;
  std::vector<std::string> seen;
  QuietWarnings() {
    previous = log::set_warning_sink([this](const std::string& m) { seen.push_back(m); });
  }
  ~QuietWarnings() { log::set_warning_sink(previous); }
};

}  // namespace

TEST_CASE("capacity is the ceiling of r percent") {
  CHECK(confident_capacity(10, 20) == 2);
  CHECK(confident_capacity(11, 20) == 3);
  CHECK(confident_capacity(900, 15) == 135);
  CHECK(confident_capacity(901, 1) == 10);
  CHECK(confident_capacity(0, 50) == 0);
  CHECK(confident_capacity(7, 100) == 7);
  CHECK_THROWS_AS(confident_capacity(10, 101), Error);
  CHECK_THROWS_AS(confident_capacity(10, -1), Error);
}

TEST_CASE("ten passages at r = 20 keep two and set beta to the second score") {
  QuietWarnings quiet;
  std::vector<CandidateScores> table;
  const double best[] = {0.91, 0.42, 0.77, 0.15, 0.66, 0.83, 0.30, 0.58, 0.05, 0.49};
  for (std::size_t i = 0; i < 10; ++i) table.push_back(row(i, {best[i], best[i] - 0.1}));
  const auto out = select_confident(table, 0.0, 20, 10);
  REQUIRE(out.set.entries.size() == 2);
  CHECK(out.set.entries[0].passage == 0);
  CHECK(out.set.entries[1].passage == 5);
  CHECK(out.set.beta == 0.83);
  CHECK(out.qualifying == 10);
  CHECK(out.capacity == 2);
  CHECK(out.set.entries[0].gap == doctest::Approx(0.1));
}

TEST_CASE("beta of minus infinity and r = 100 keeps every multi-candidate passage") {
  QuietWarnings quiet;
  std::vector<CandidateScores> table = {row(0, {0.1, 0.1}), row(1, {0.5}), row(2, {-0.3, 0.2, 0.0}),
                                        row(3, {0.9, -0.9})};
  const auto out = select_confident(table, kNegInf, 100, table.size());
  REQUIRE(out.set.entries.size() == 3);
  CHECK(out.set.entries[0].passage == 3);
  CHECK(out.set.entries[1].passage == 2);
  CHECK(out.set.entries[1].label == fine_id(1));
  CHECK(out.set.entries[2].passage == 0);
  CHECK(out.set.entries[2].label == fine_id(0));  // tie goes to the smaller id
  CHECK(out.set.beta == 0.1);
}

TEST_CASE("the gap must exceed beta strictly") {
  QuietWarnings quiet;
  std::vector<CandidateScores> table = {row(0, {0.5, 0.25}), row(1, {0.5, 0.2})};
  const auto out = select_confident(table, 0.25, 100, 2);
  REQUIRE(out.set.entries.size() == 1);
  CHECK(out.set.entries[0].passage == 1);
}

TEST_CASE("entries tied with the cutoff are kept") {
  QuietWarnings quiet;
  std::vector<CandidateScores> table = {row(0, {0.7, 0.0}), row(1, {0.6, 0.0}), row(2, {0.6, 0.0}),
                                        row(3, {0.6, 0.0}), row(4, {0.2, 0.0})};
  const auto out = select_confident(table, kNegInf, 20, 10);  // capacity 2
  CHECK(out.set.entries.size() == 4);
  CHECK(out.set.beta == 0.6);
}

TEST_CASE("empty selection keeps beta and warns") {
  QuietWarnings quiet;
  std::vector<CandidateScores> table = {row(0, {0.5, 0.45}), row(1, {0.3})};
  const auto out = select_confident(table, 0.2, 50, 2);
  CHECK(out.set.entries.empty());
  CHECK(out.set.beta == 0.2);
  REQUIRE(quiet.seen.size() == 1);
  CHECK(quiet.seen[0].find("empty") != std::string::npos);
}

TEST_CASE("selection equals the brute-force oracle") {
  QuietWarnings quiet;
  std::mt19937_64 rng(31337);
  const int rs[] = {0, 1, 5, 10, 15, 20, 50, 100};
  for (int trial = 0; trial < 500; ++trial) {
    const auto table = random_table(rng);
    const int r = rs[rng() % 8];
    const double beta = (rng() % 3 == 0) ? kNegInf : 0.05 * static_cast<double>(rng() % 8);
    const std::size_t population = table.size() + rng() % 20;
    const auto got = select_confident(table, beta, r, population);
    const auto want = testing::oracle_select(table, beta, r, population);
    REQUIRE(got.set.entries.size() == want.passages.size());
    for (std::size_t i = 0; i < want.passages.size(); ++i) {
      CHECK(got.set.entries[i].passage == want.passages[i]);
      CHECK(got.set.entries[i].label == want.labels[i]);
    }
    CHECK(got.set.beta == want.beta);
  }
}

TEST_CASE("applying a set replaces earlier confident labels only") {
  Corpus corpus(4);
  corpus[0].state = Confident{fine_id(1), 0.4};
  corpus[1].state = WeakSeed{fine_id(0)};
  corpus[2].state = Confident{fine_id(2), 0.3};
  ConfidentSet set;
  set.entries = {ConfidentEntry{2, fine_id(0), 0.9, 0.5}, ConfidentEntry{3, fine_id(1), 0.8, 0.2}};
  apply_confident_set(corpus, set);
  CHECK(std::holds_alternative<Unlabeled>(corpus[0].state));
  CHECK(corpus[1].state == LabelState{WeakSeed{fine_id(0)}});
  CHECK(corpus[2].state == LabelState{Confident{fine_id(0), 0.9}});
  CHECK(corpus[3].state == LabelState{Confident{fine_id(1), 0.8}});
}

TEST_CASE("rows with mismatched lengths are rejected") {
  CandidateScores bad = row(0, {0.1, 0.2});
  bad.scores.pop_back();
  const std::vector<CandidateScores> table = {bad};
  CHECK_THROWS_AS(select_confident(table, 0.0, 10, 1), Error);
}
