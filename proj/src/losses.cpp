#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "c2f/error.hpp"
#include "c2f/model.hpp"
#include "c2f/simd/kernels.hpp"

namespace c2f {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double hinge_argument(double c_positive, double c_negative, double margin, SignConvention sign) {
  return sign == SignConvention::intent ? c_negative - c_positive + margin : c_positive - c_negative + margin;
}

// Accumulates dObjective/dz for the passage and every bank row, given
// per-row coefficients dObjective/dc(p, row).
void scatter_score_gradient(Metric metric, std::span<const double> zp, const Matrix& zbank,
                            const PassageScores& scores, std::span<const double> coef, double coef_total,
                            std::span<double> grad_p, Matrix& grad_bank, std::size_t k) {
  const std::size_t dim = zp.size();
  std::vector<double> diff(dim);

  const auto add_base = [&](std::size_t row, double w) {
    if (w == 0.0) return;
    const auto zl = zbank.row(row);
    auto gl = grad_bank.row(row);
    switch (metric) {
      case Metric::csls:
      case Metric::cosine:
        simd::axpy(w, zl, grad_p);
        simd::axpy(w, zp, gl);
        break;
      case Metric::manhattan:
        for (std::size_t j = 0; j < dim; ++j) {
          const double d = zp[j] - zl[j];
          const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
          grad_p[j] -= w * s;
          gl[j] += w * s;
        }
        break;
      case Metric::euclidean: {
        for (std::size_t j = 0; j < dim; ++j) diff[j] = zp[j] - zl[j];
        const double norm = std::sqrt(simd::dot(diff, diff));
        if (norm == 0.0) break;
        simd::axpy(-w / norm, diff, grad_p);
        simd::axpy(w / norm, diff, gl);
        break;
      }
    }
  };

  for (std::size_t row = 0; row < coef.size(); ++row) add_base(row, coef[row]);
  // c = s - knn, so every coefficient also acts on the neighbourhood with weight -1/K.
  if (uses_knn_correction(metric) && coef_total != 0.0) {
    const double w = -coef_total / static_cast<double>(k);
    for (std::size_t row : scores.neighbors) add_base(row, w);
  }
}

double gap_between_ranks(std::vector<double> values, std::size_t k) {
  // Distance between the k-th and (k+1)-th largest values.
  if (k == 0 || k >= values.size()) return kInf;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end(), std::greater<>());
  const double next = values[k];
  const double kth = *std::min_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k));
  return kth - next;
}

}  // namespace

void LossConfig::validate() const {
  if (!(gamma > 0.0)) throw Error("model", "gamma must be positive");
  if (!(sigma > 0.0)) throw Error("model", "sigma must be positive");
  if (batch_size == 0) throw Error("model", "batch size must be positive");
  if (!(optimizer.lr > 0.0)) throw Error("model", "learning rate must be positive");
  if (optimizer.weight_decay < 0.0) throw Error("model", "weight decay must be nonnegative");
}

LossTotals& LossTotals::operator+=(const LossTotals& o) noexcept {
  global += o.global;
  local += o.local;
  coarse_global += o.coarse_global;
  examples += o.examples;
  return *this;
}

double pair_hinge(double c_positive, double c_negative, double margin, SignConvention sign) {
  return std::max(hinge_argument(c_positive, c_negative, margin, sign), 0.0);
}

double loss_global(std::span<const double> c_positives, std::span<const double> c_negatives, double gamma,
                   SignConvention sign) {
  if (c_negatives.empty()) return 0.0;
  if (c_negatives.size() != c_positives.size()) throw Error("model", "one negative is required per positive");
  double sum = 0.0;
  for (std::size_t i = 0; i < c_positives.size(); ++i) sum += pair_hinge(c_positives[i], c_negatives[i], gamma, sign);
  return sum / static_cast<double>(c_positives.size());
}

double loss_local(double c_assigned, std::span<const double> c_others, double sigma) {
  if (c_others.empty()) return 0.0;
  const double sec_max = *std::max_element(c_others.begin(), c_others.end());
  return std::max(sec_max - c_assigned + sigma, 0.0);
}

double loss_coarse_global(double c_coarse_positive, double c_coarse_negative, double gamma, SignConvention sign) {
  return pair_hinge(c_coarse_positive, c_coarse_negative, gamma, sign);
}

double loss_global(std::span<const double> p, CoarseId coarse, std::span<const FineId> negatives,
                   const Matrix& bank, const Taxonomy& taxonomy, const LossConfig& loss,
                   const SimilarityConfig& similarity) {
  const auto positives = taxonomy.candidates(coarse);
  if (negatives.empty()) return 0.0;
  const PassageScores s = score_passage(p, bank, taxonomy.fine_count(), similarity);
  std::vector<double> cp, cn;
  for (FineId f : positives) cp.push_back(s.c(index(f)));
  for (FineId f : negatives) cn.push_back(s.c(index(f)));
  return loss_global(cp, cn, loss.gamma, loss.sign);
}

double loss_local(std::span<const double> p, FineId assigned, const Matrix& bank, const Taxonomy& taxonomy,
                  const LossConfig& loss, const SimilarityConfig& similarity) {
  const PassageScores s = score_passage(p, bank, taxonomy.fine_count(), similarity);
  std::vector<double> others;
  for (FineId f : taxonomy.candidates(taxonomy.fine(assigned).parent)) {
    if (f != assigned) others.push_back(s.c(index(f)));
  }
  return loss_local(s.c(index(assigned)), others, loss.sigma);
}

double loss_coarse_global(std::span<const double> p, CoarseId coarse, CoarseId negative, const Matrix& bank,
                          const Taxonomy& taxonomy, const LossConfig& loss, const SimilarityConfig& similarity) {
  if (taxonomy.coarse_count() < 2) throw Error("model", "coarse global loss needs at least two coarse labels");
  if (bank.rows() < taxonomy.fine_count() + taxonomy.coarse_count()) {
    throw Error("model", "prototype bank has no coarse prototype rows");
  }
  const PassageScores s = score_passage(p, bank, taxonomy.fine_count(), similarity);
  const std::size_t base = taxonomy.fine_count();
  return loss_coarse_global(s.c(base + index(coarse)), s.c(base + index(negative)), loss.gamma, loss.sign);
}

BatchEvaluation evaluate_batch(const ProjectionHead& head, const Matrix& bank, const Taxonomy& taxonomy,
                               std::span<const TrainingExample> batch, const LossConfig& loss,
                               const SimilarityConfig& similarity, bool with_gradient) {
  if (batch.empty()) throw Error("model", "empty batch");
  const std::size_t fine_rows = taxonomy.fine_count();
  const std::size_t coarse_base = fine_rows;
  if (uses_knn_correction(similarity.metric)) similarity.validate(fine_rows);

  // Project the whole prototype bank once per batch.
  std::vector<ProjectionHead::Activation> bank_act(bank.rows());
  Matrix zbank(bank.rows(), head.shape().out_dim);
  for (std::size_t r = 0; r < bank.rows(); ++r) {
    head.forward(bank.row(r), bank_act[r]);
    std::copy(bank_act[r].z.begin(), bank_act[r].z.end(), zbank.row(r).begin());
  }

  BatchEvaluation out;
  out.min_kink_distance = kInf;
  const double scale = 1.0 / static_cast<double>(batch.size());
  Matrix grad_bank;
  if (with_gradient) {
    out.gradient.assign(head.params().size(), 0.0);
    grad_bank = Matrix(bank.rows(), head.shape().out_dim);
  }

  ProjectionHead::Activation act;
  std::vector<double> coef(bank.rows());
  std::vector<double> grad_p(head.shape().out_dim);
  const auto note_kink = [&](double d) { out.min_kink_distance = std::min(out.min_kink_distance, std::fabs(d)); };

  for (const TrainingExample& ex : batch) {
    head.forward(ex.base, act);
    const PassageScores scores = score_passage(act.z, zbank, fine_rows, similarity, VectorNorm::unit);
    if (uses_knn_correction(similarity.metric)) {
      note_kink(gap_between_ranks(std::vector<double>(scores.base.begin(), scores.base.begin() + fine_rows),
                                  similarity.k));
    }
    std::fill(coef.begin(), coef.end(), 0.0);
    const auto positives = taxonomy.candidates(ex.coarse);

    if (ex.coarse_negative) {
      if (bank.rows() < coarse_base + taxonomy.coarse_count()) {
        throw Error("model", "mapping-free mode needs coarse prototype rows in the prototype bank");
      }
      const std::size_t pos = coarse_base + index(ex.coarse);
      const std::size_t neg = coarse_base + index(*ex.coarse_negative);
      const double arg = hinge_argument(scores.c(pos), scores.c(neg), loss.gamma, loss.sign);
      note_kink(arg);
      if (arg > 0.0) {
        out.totals.coarse_global += arg;
        const double w = loss.sign == SignConvention::intent ? 1.0 : -1.0;
        coef[neg] += w * scale;
        coef[pos] -= w * scale;
      }
    } else if (ex.global && !ex.negatives.empty()) {
      if (ex.negatives.size() != positives.size()) throw Error("model", "one negative is required per positive");
      const double per = 1.0 / static_cast<double>(positives.size());
      const double w = loss.sign == SignConvention::intent ? 1.0 : -1.0;
      for (std::size_t i = 0; i < positives.size(); ++i) {
        const std::size_t pos = index(positives[i]);
        const std::size_t neg = index(ex.negatives[i]);
        const double arg = hinge_argument(scores.c(pos), scores.c(neg), loss.gamma, loss.sign);
        note_kink(arg);
        if (arg > 0.0) {
          out.totals.global += arg * per;
          coef[neg] += w * per * scale;
          coef[pos] -= w * per * scale;
        }
      }
    }

    if (ex.local_label && positives.size() >= 2) {
      const std::size_t assigned = index(*ex.local_label);
      std::size_t runner_up = bank.rows();
      double best = -kInf;
      double second = -kInf;
      for (FineId f : positives) {
        if (index(f) == assigned) continue;
        const double c = scores.c(index(f));
        if (c > best) {
          second = best;
          best = c;
          runner_up = index(f);
        } else if (c > second) {
          second = c;
        }
      }
      if (positives.size() >= 3) note_kink(best - second);
      const double arg = best - scores.c(assigned) + loss.sigma;
      note_kink(arg);
      if (arg > 0.0) {
        out.totals.local += arg;
        coef[runner_up] += scale;
        coef[assigned] -= scale;
      }
    }
    ++out.totals.examples;

    if (with_gradient) {
      double coef_total = 0.0;
      bool any = false;
      for (double c : coef) {
        coef_total += c;
        any = any || c != 0.0;
      }
      if (!any) continue;
      std::fill(grad_p.begin(), grad_p.end(), 0.0);
      scatter_score_gradient(similarity.metric, act.z, zbank, scores, coef, coef_total, grad_p, grad_bank,
                             similarity.k);
      head.backward(ex.base, act, grad_p, out.gradient);
    }
  }

  out.objective = out.totals.total() * scale;

  if (with_gradient) {
    out.prototype_grad_norm.assign(bank.rows(), 0.0);
    for (std::size_t r = 0; r < bank.rows(); ++r) {
      const auto g = grad_bank.row(r);
      const double n2 = simd::dot(g, g);
      out.prototype_grad_norm[r] = std::sqrt(n2);
      if (n2 == 0.0) continue;
      head.backward(bank.row(r), bank_act[r], g, out.gradient);
    }
    for (std::size_t i = 0; i < out.gradient.size(); ++i) {
      if (!std::isfinite(out.gradient[i])) {
        throw Error("model", "non-finite gradient at parameter " + std::to_string(i) + " (objective " +
                                 std::to_string(out.objective) + ")");
      }
    }
  }
  return out;
}

}  // namespace c2f
