#include <doctest.h>

#include <cmath>
#include <fstream>

#include "c2f/error.hpp"
#include "c2f/model.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace c2f;

TEST_CASE("scalar losses on hand values") {
  CHECK(pair_hinge(0.3, 0.2, 0.05, SignConvention::intent) == 0.0);
  CHECK(pair_hinge(0.3, 0.28, 0.05, SignConvention::intent) == doctest::Approx(0.03));
  CHECK(pair_hinge(0.3, 0.2, 0.05, SignConvention::paper_literal) == doctest::Approx(0.15));

  const std::vector<double> pos = {0.3, 0.1};
  const std::vector<double> neg = {0.28, 0.2};
  // (0.03 + 0.15) / 2
  CHECK(loss_global(pos, neg, 0.05) == doctest::Approx(0.09));
  CHECK(loss_global(pos, std::vector<double>{}, 0.05) == 0.0);
  CHECK_THROWS_AS(loss_global(pos, std::vector<double>{0.1}, 0.05), Error);

  CHECK(loss_local(0.4, std::vector<double>{0.42, 0.1}, 0.05) == doctest::Approx(0.07));
  CHECK(loss_local(0.5, std::vector<double>{0.42, 0.1}, 0.05) == 0.0);
  CHECK(loss_local(0.5, std::vector<double>{}, 0.05) == 0.0);
  CHECK(loss_coarse_global(0.1, 0.2, 0.05) == doctest::Approx(0.15));
}

TEST_CASE("vector losses score through the knn-corrected similarity") {
  // KNN cancels in every difference, so csls and cosine give the same losses.
  std::mt19937_64 rng(3);
  const Taxonomy t = testing::grid_taxonomy(2, 3);
  const Matrix bank = testing::random_matrix(t.fine_count() + t.coarse_count(), 6, rng, true);
  const auto p = testing::unit(testing::random_vector(6, rng));
  LossConfig loss;
  loss.gamma = 0.3;
  loss.sigma = 0.3;
  const std::vector<FineId> negatives = {fine_id(3), fine_id(4), fine_id(5)};
  const SimilarityConfig csls{Metric::csls, 3};
  const SimilarityConfig cos{Metric::cosine, 3};
  CHECK(loss_global(p, coarse_id(0), negatives, bank, t, loss, csls) ==
        doctest::Approx(loss_global(p, coarse_id(0), negatives, bank, t, loss, cos)));
  CHECK(loss_local(p, fine_id(1), bank, t, loss, csls) == doctest::Approx(loss_local(p, fine_id(1), bank, t, loss, cos)));
  CHECK(loss_coarse_global(p, coarse_id(0), coarse_id(1), bank, t, loss, csls) ==
        doctest::Approx(loss_coarse_global(p, coarse_id(0), coarse_id(1), bank, t, loss, cos)));

  double want = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    want += std::max(testing::oracle_cosine(p, bank.row(3 + i)) - testing::oracle_cosine(p, bank.row(i)) + 0.3, 0.0);
  }
  CHECK(loss_global(p, coarse_id(0), negatives, bank, t, loss, csls) == doctest::Approx(want / 3));
}

TEST_CASE("identity initialization") {
  const ProjectionHead head = ProjectionHead::identity_init(3);
  const std::vector<double> x = {0.5, -1.0, 2.0};
  const auto z = head.project(x);
  std::vector<double> want = {std::tanh(0.5), std::tanh(-1.0), std::tanh(2.0)};
  want = testing::unit(want);
  for (std::size_t i = 0; i < 3; ++i) CHECK(z[i] == doctest::Approx(want[i]).epsilon(1e-12));
  CHECK(head.shape().param_count() == 9 + 3 + 9 + 3);
  CHECK(head.w2_row(1)[1] == doctest::Approx(0.99));
  CHECK_THROWS_AS(ProjectionHead(HeadShape{2, 2, 2}, std::vector<double>(3)), Error);
}

TEST_CASE("analytic gradient matches central differences") {
  std::mt19937_64 rng(11);
  for (auto kind : {testing::LossKind::global, testing::LossKind::local, testing::LossKind::coarse_global}) {
    for (Metric m : {Metric::csls, Metric::cosine, Metric::manhattan, Metric::euclidean}) {
      CAPTURE(static_cast<int>(kind));
      CAPTURE(to_string(m));
      for (int trial = 0; trial < 10; ++trial) {
        const auto g = testing::smooth_grad_instance(kind, m, rng);
        const auto r = testing::check_gradient(g, 1e-4);
        CHECK(r.relative_error < 1e-4);
        CHECK(r.analytic_norm > 0.0);
      }
    }
  }
}

TEST_CASE("AdamW update follows the decoupled rule") {
  std::vector<double> params = {1.0};
  AdamWState state;
  const AdamWConfig cfg{0.1, 0.9, 0.999, 1e-8, 0.1};
  adamw_step(params, std::vector<double>{0.5}, state, cfg);
  // decay 1 - 0.1 * 0.1; m_hat = 0.5, v_hat = 0.25, step = 0.1 * 0.5 / (0.5 + eps)
  const double first = 0.99 - 0.05 / (0.5 + 1e-8);
  CHECK(params[0] == doctest::Approx(first).epsilon(1e-12));
  adamw_step(params, std::vector<double>{-0.5}, state, cfg);
  // m_hat = -0.005 / 0.19, v_hat = 0.25
  CHECK(params[0] == doctest::Approx(first * 0.99 + 0.1 * (0.005 / 0.19) / (0.5 + 1e-8)).epsilon(1e-12));
  CHECK(state.step == 2);
  CHECK_THROWS_AS(adamw_step(params, std::vector<double>{1.0, 2.0}, state, cfg), Error);
}

TEST_CASE("zero gradient still applies weight decay") {
  std::vector<double> params = {2.0, -4.0};
  AdamWState state;
  adamw_step(params, std::vector<double>{0.0, 0.0}, state, AdamWConfig{});
  CHECK(params[0] == doctest::Approx(2.0 * (1 - 1e-5)));
  CHECK(params[1] == doctest::Approx(-4.0 * (1 - 1e-5)));
}

TEST_CASE("batch evaluation is deterministic and reports prototype gradients") {
  std::mt19937_64 rng(8);
  const auto g = testing::smooth_grad_instance(testing::LossKind::global, Metric::csls, rng);
  const auto a = evaluate_batch(g.head, g.bank, g.taxonomy, g.batch, g.loss, g.similarity, true);
  const auto b = evaluate_batch(g.head, g.bank, g.taxonomy, g.batch, g.loss, g.similarity, true);
  CHECK(a.gradient == b.gradient);
  CHECK(a.objective == b.objective);
  REQUIRE(a.prototype_grad_norm.size() == g.bank.rows());
  double total = 0.0;
  for (double n : a.prototype_grad_norm) total += n;
  CHECK(total > 0.0);
  CHECK_THROWS_AS(evaluate_batch(g.head, g.bank, g.taxonomy, {}, g.loss, g.similarity, true), Error);
}

TEST_CASE("mapping-free examples need coarse prototype rows") {
  std::mt19937_64 rng(9);
  auto g = testing::random_grad_instance(testing::LossKind::coarse_global, Metric::cosine, rng);
  const Matrix fine_only = testing::random_matrix(g.taxonomy.fine_count(), g.bank.cols(), rng, true);
  CHECK_THROWS_AS(evaluate_batch(g.head, fine_only, g.taxonomy, g.batch, g.loss, g.similarity, false), Error);
}

TEST_CASE("checkpoint round-trip") {
  const auto dir = testing::scratch_dir("checkpoint");
  ModelState state = ModelState::initial(5, 42, 0.99, 0.1);
  state.optimizer.step = 17;
  write_checkpoint(dir / "m.c2fm", state, R"({"seed":42})");
  const Checkpoint cp = read_checkpoint(dir / "m.c2fm");
  CHECK(cp.shape == state.head.shape());
  CHECK(cp.step == 17);
  CHECK(cp.config_json == R"({"seed":42})");
  REQUIRE(cp.params.size() == state.head.params().size());
  for (std::size_t i = 0; i < cp.params.size(); ++i) CHECK(cp.params[i] == static_cast<float>(state.head.params()[i]));

  {
    std::fstream f(dir / "m.c2fm", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('X');
  }
  CHECK_THROWS_AS(read_checkpoint(dir / "m.c2fm"), Error);
  CHECK_THROWS_AS(read_checkpoint(dir / "absent.c2fm"), Error);
}

TEST_CASE("loss config validation") {
  LossConfig ok;
  CHECK_NOTHROW(ok.validate());
  LossConfig bad = ok;
  bad.gamma = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = ok;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = ok;
  bad.optimizer.lr = -1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("worked loss instances") {
  // Positives {0.8, 0.6} against negatives {0.3, 0.1}: every margin is satisfied.
  CHECK(loss_global(std::vector<double>{0.8, 0.6}, std::vector<double>{0.3, 0.1}, 0.05) == 0.0);
  CHECK(loss_global(std::vector<double>{0.4}, std::vector<double>{0.4}, 0.05) == doctest::Approx(0.05));
  CHECK(loss_local(0.5, std::vector<double>{0.48, 0.2, 0.1}, 0.05) == doctest::Approx(0.03));
  CHECK(loss_local(0.9, std::vector<double>{0.7}, 0.05) == 0.0);
  CHECK(loss_local(0.6, std::vector<double>{0.6}, 0.05) == doctest::Approx(0.05));
}

TEST_CASE("zero gradient and zero decay leave parameters unchanged") {
  std::vector<double> params = {0.25, -3.0};
  AdamWState state;
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  adamw_step(params, std::vector<double>{0.0, 0.0}, state, cfg);
  CHECK(params == std::vector<double>{0.25, -3.0});
}

TEST_CASE("a zero-loss batch has a zero gradient") {
  const Taxonomy t = testing::grid_taxonomy(2, 2);
  Matrix bank(6, 4);
  for (std::size_t r = 0; r < 4; ++r) bank(r, r) = 1.0;
  bank(4, 0) = 1.0;
  bank(5, 2) = 1.0;
  const ProjectionHead head = ProjectionHead::identity_init(4);
  const std::vector<double> x = {3.0, 3.0, 0.0, 0.0};
  TrainingExample ex;
  ex.base = x;
  ex.coarse = coarse_id(0);
  ex.negatives = {fine_id(2), fine_id(3)};
  const std::vector<TrainingExample> batch = {ex};
  const auto e = evaluate_batch(head, bank, t, batch, LossConfig{}, SimilarityConfig{Metric::csls, 2}, true);
  CHECK(e.objective == 0.0);
  for (double g : e.gradient) CHECK(g == 0.0);
}

TEST_CASE("under cosine only the paired prototypes receive gradient") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = testing::smooth_grad_instance(testing::LossKind::global, Metric::cosine, rng);
    const auto e = evaluate_batch(g.head, g.bank, g.taxonomy, g.batch, g.loss, g.similarity, true);
    std::vector<bool> touched(g.bank.rows(), false);
    for (const TrainingExample& ex : g.batch) {
      for (FineId f : g.taxonomy.candidates(ex.coarse)) touched[index(f)] = true;
      for (FineId f : ex.negatives) touched[index(f)] = true;
    }
    for (std::size_t r = 0; r < g.bank.rows(); ++r) {
      if (!touched[r]) CHECK(e.prototype_grad_norm[r] == 0.0);
    }
  }
}

TEST_CASE("fifty AdamW steps shrink the loss of a separable batch by 90%") {
  std::mt19937_64 rng(4);
  const Taxonomy t = testing::grid_taxonomy(2, 2);
  const std::size_t dim = 8;
  const Matrix centers = testing::random_matrix(4, dim, rng, true);
  Matrix bank = testing::random_matrix(6, dim, rng, true);
  Matrix bases(16, dim);
  std::vector<TrainingExample> batch;
  for (std::size_t i = 0; i < 16; ++i) {
    const std::size_t f = i % 4;
    const auto noise = testing::random_vector(dim, rng, 0.05);
    for (std::size_t j = 0; j < dim; ++j) bases(i, j) = centers(f, j) + noise[j];
    TrainingExample ex;
    ex.base = bases.row(i);
    ex.coarse = coarse_id(f / 2);
    ex.global = false;
    ex.local_label = fine_id(f);
    batch.push_back(ex);
  }
  LossConfig loss;
  loss.optimizer.lr = 0.01;
  const SimilarityConfig sim{Metric::csls, 2};
  ModelState state = ModelState::initial(dim, 1);
  const double before = evaluate_batch(state.head, bank, t, batch, loss, sim, false).objective;
  REQUIRE(before > 0.0);
  for (int step = 0; step < 50; ++step) {
    const auto e = evaluate_batch(state.head, bank, t, batch, loss, sim, true);
    adamw_step(state.head.params(), e.gradient, state.optimizer, loss.optimizer);
  }
  const double after = evaluate_batch(state.head, bank, t, batch, loss, sim, false).objective;
  CHECK(after <= 0.1 * before);
}
