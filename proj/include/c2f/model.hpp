#pragma once

// Trainable representation model: a two-layer projection head shared by
// passages and prototypes, the margin-ranking losses, their analytic
// gradients, and the AdamW update.
//
//   z(x) = normalize(W2 * tanh(W1 * x + b1) + b2)
//
// Both passages and prototypes are frozen base embeddings pushed through the
// same head, so prototype representations move together with passages.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "c2f/matrix.hpp"
#include "c2f/similarity.hpp"
#include "c2f/taxonomy.hpp"

namespace c2f {

struct HeadShape {
  std::size_t in_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t out_dim = 0;

  std::size_t param_count() const noexcept {
    return hidden_dim * in_dim + hidden_dim + out_dim * hidden_dim + out_dim;
  }
  bool operator==(const HeadShape&) const = default;
};

class ProjectionHead {
 public:
  /// Per-input forward state kept for the backward pass.
  struct Activation {
    std::vector<double> hidden;  // tanh(W1 x + b1)
    std::vector<double> out;     // W2 h + b2
    double out_norm = 0.0;
    std::vector<double> z;  // out / |out|
  };

  ProjectionHead() = default;
  ProjectionHead(HeadShape shape, std::vector<double> params);

  /// W1 = I, W2 = w2_scale * I, biases zero; `noise` adds N(0, noise^2) to the weights.
  static ProjectionHead identity_init(std::size_t dim, double w2_scale = 0.99, double noise = 0.0,
                                      std::uint64_t seed = 0);

  const HeadShape& shape() const noexcept { return shape_; }
  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }

  std::span<const double> w1_row(std::size_t i) const { return {params_.data() + i * shape_.in_dim, shape_.in_dim}; }
  std::span<const double> b1() const { return {params_.data() + w1_size(), shape_.hidden_dim}; }
  std::span<const double> w2_row(std::size_t i) const {
    return {params_.data() + w2_offset() + i * shape_.hidden_dim, shape_.hidden_dim};
  }
  std::span<const double> b2() const { return {params_.data() + b2_offset(), shape_.out_dim}; }

  void forward(std::span<const double> x, Activation& act) const;
  std::vector<double> project(std::span<const double> x) const;
  /// Projects every row of `base`.
  Matrix project_all(const Matrix& base) const;

  /// Accumulates dL/dparams into `grad` given dL/dz.
  void backward(std::span<const double> x, const Activation& act, std::span<const double> grad_z,
                std::span<double> grad) const;

 private:
  std::size_t w1_size() const noexcept { return shape_.hidden_dim * shape_.in_dim; }
  std::size_t w2_offset() const noexcept { return w1_size() + shape_.hidden_dim; }
  std::size_t b2_offset() const noexcept { return w2_offset() + shape_.out_dim * shape_.hidden_dim; }

  HeadShape shape_;
  std::vector<double> params_;
};

// --- optimizer ---------------------------------------------------------------

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamWState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

/// Decoupled weight decay followed by the bias-corrected Adam update.
void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state,
                const AdamWConfig& config);

struct ModelState {
  ProjectionHead head;
  AdamWState optimizer;
  std::uint64_t seed = 0;

  static ModelState initial(std::size_t dim, std::uint64_t seed, double w2_scale = 0.99, double init_noise = 0.0);
};

// --- losses --------------------------------------------------------------------

/// `intent`: the hinge pushes positives above negatives,
///   max{c(p,l') - c(p,l) + margin, 0}.
/// `paper_literal`: the orientation max{c(p,l) - c(p,l') + margin, 0}.
enum class SignConvention { intent, paper_literal };

struct LossConfig {
  double gamma = 0.05;
  double sigma = 0.05;
  std::size_t batch_size = 8;
  SignConvention sign = SignConvention::intent;
  AdamWConfig optimizer;

  void validate() const;
};

/// Pairwise hinge for one (positive, negative) pair under the sign convention.
double pair_hinge(double c_positive, double c_negative, double margin, SignConvention sign);

/// Mean over positives of the pair hinge; positive i is paired with negative i.
/// Empty negatives (no fine label outside the coarse partition) give 0.
double loss_global(std::span<const double> c_positives, std::span<const double> c_negatives, double gamma,
                   SignConvention sign = SignConvention::intent);

/// max{sec_max - c_assigned + sigma, 0}; 0 when there are no other candidates.
double loss_local(double c_assigned, std::span<const double> c_others, double sigma);

double loss_coarse_global(double c_coarse_positive, double c_coarse_negative, double gamma,
                          SignConvention sign = SignConvention::intent);

/// Vector-level forms: scores are computed with `c_similarity` against `bank`,
/// whose first taxonomy.fine_count() rows are fine prototypes followed by the
/// coarse prototypes (rows fine_count + coarse id).
double loss_global(std::span<const double> p, CoarseId coarse, std::span<const FineId> negatives,
                   const Matrix& bank, const Taxonomy& taxonomy, const LossConfig& loss,
                   const SimilarityConfig& similarity);
double loss_local(std::span<const double> p, FineId assigned, const Matrix& bank, const Taxonomy& taxonomy,
                  const LossConfig& loss, const SimilarityConfig& similarity);
double loss_coarse_global(std::span<const double> p, CoarseId coarse, CoarseId negative, const Matrix& bank,
                          const Taxonomy& taxonomy, const LossConfig& loss, const SimilarityConfig& similarity);

// --- batch objective and gradient --------------------------------------------------

struct TrainingExample {
  std::span<const double> base;  // frozen base embedding
  CoarseId coarse{};
  bool global = true;
  /// Paired with taxonomy.candidates(coarse) in order.
  std::vector<FineId> negatives;
  std::optional<FineId> local_label;
  /// Set in mapping-free mode; replaces the fine global loss.
  std::optional<CoarseId> coarse_negative;
};

struct LossTotals {
  double global = 0.0;
  double local = 0.0;
  double coarse_global = 0.0;
  std::size_t examples = 0;

  double total() const noexcept { return global + local + coarse_global; }
  LossTotals& operator+=(const LossTotals& o) noexcept;
};

struct BatchEvaluation {
  LossTotals totals;
  /// Objective: totals.total() / examples.
  double objective = 0.0;
  /// dObjective/dparams (empty unless requested).
  std::vector<double> gradient;
  /// L2 norm of dObjective/dz for each prototype bank row (empty unless requested).
  std::vector<double> prototype_grad_norm;
  /// Smallest distance of any hinge argument, neighbourhood boundary or
  /// runner-up choice from a switching point. Finite differences are only
  /// meaningful when this exceeds the step size.
  double min_kink_distance = 0.0;
};

/// Evaluates the batch objective; with `with_gradient`, also the analytic
/// gradient. The KNN neighbourhood of each passage is treated as fixed.
/// Throws c2f::Error on a non-finite gradient.
BatchEvaluation evaluate_batch(const ProjectionHead& head, const Matrix& bank, const Taxonomy& taxonomy,
                               std::span<const TrainingExample> batch, const LossConfig& loss,
                               const SimilarityConfig& similarity, bool with_gradient);

// --- checkpoint ------------------------------------------------------------------

inline constexpr char kCheckpointMagic[4] = {'C', '2', 'F', 'M'};
inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

struct Checkpoint {
  HeadShape shape;
  std::vector<float> params;  // W1, b1, W2, b2 as float32
  std::uint64_t step = 0;
  std::string config_json;
};

/// "C2FM", u32 version, u32 in/hidden/out dims, u64 step, then four tensors each
/// as (u32 rows, u32 cols, f32[rows*cols]) in W1, b1, W2, b2 order, then
/// u32 length + UTF-8 run config JSON.
void write_checkpoint(const std::filesystem::path& path, const ModelState& state, const std::string& config_json);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace c2f
