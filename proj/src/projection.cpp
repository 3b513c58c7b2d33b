#include <cmath>
#include <random>
#include <string>

#include "c2f/error.hpp"
#include "c2f/model.hpp"
#include "c2f/simd/kernels.hpp"

namespace c2f {

ProjectionHead::ProjectionHead(HeadShape shape, std::vector<double> params)
    : shape_(shape), params_(std::move(params)) {
  if (shape_.in_dim == 0 || shape_.hidden_dim == 0 || shape_.out_dim == 0) {
    throw Error("model", "projection head dimensions must be positive");
  }
  if (params_.size() != shape_.param_count()) {
    throw Error("model", "projection head expects " + std::to_string(shape_.param_count()) + " parameters, got " +
                             std::to_string(params_.size()));
  }
}

ProjectionHead ProjectionHead::identity_init(std::size_t dim, double w2_scale, double noise, std::uint64_t seed) {
  const HeadShape shape{dim, dim, dim};
  std::vector<double> params(shape.param_count(), 0.0);
  const std::size_t w2_offset = dim * dim + dim;
  for (std::size_t i = 0; i < dim; ++i) {
    params[i * dim + i] = 1.0;
    params[w2_offset + i * dim + i] = w2_scale;
  }
  if (noise > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, noise);
    for (std::size_t i = 0; i < dim * dim; ++i) {
      params[i] += gauss(rng);
      params[w2_offset + i] += gauss(rng);
    }
  }
  return ProjectionHead(shape, std::move(params));
}

void ProjectionHead::forward(std::span<const double> x, Activation& act) const {
  if (x.size() != shape_.in_dim) {
    throw Error("model", "input dim " + std::to_string(x.size()) + " does not match head input dim " +
                             std::to_string(shape_.in_dim));
  }
  act.hidden.resize(shape_.hidden_dim);
  const auto bias1 = b1();
  for (std::size_t i = 0; i < shape_.hidden_dim; ++i) {
    act.hidden[i] = std::tanh(simd::dot(w1_row(i), x) + bias1[i]);
  }
  act.out.resize(shape_.out_dim);
  const auto bias2 = b2();
  for (std::size_t i = 0; i < shape_.out_dim; ++i) {
    act.out[i] = simd::dot(w2_row(i), act.hidden) + bias2[i];
  }
  act.out_norm = std::sqrt(simd::dot(act.out, act.out));
  if (!(act.out_norm > 0.0) || !std::isfinite(act.out_norm)) {
    throw Error("model", "projection collapsed to a zero or non-finite vector");
  }
  act.z.resize(shape_.out_dim);
  const double inv = 1.0 / act.out_norm;
  for (std::size_t i = 0; i < shape_.out_dim; ++i) act.z[i] = act.out[i] * inv;
}

std::vector<double> ProjectionHead::project(std::span<const double> x) const {
  Activation act;
  forward(x, act);
  return std::move(act.z);
}

Matrix ProjectionHead::project_all(const Matrix& base) const {
  Matrix out(base.rows(), shape_.out_dim);
  Activation act;
  for (std::size_t r = 0; r < base.rows(); ++r) {
    forward(base.row(r), act);
    std::copy(act.z.begin(), act.z.end(), out.row(r).begin());
  }
  return out;
}

void ProjectionHead::backward(std::span<const double> x, const Activation& act, std::span<const double> grad_z,
                              std::span<double> grad) const {
  const std::size_t H = shape_.hidden_dim;
  const std::size_t O = shape_.out_dim;
  const std::size_t D = shape_.in_dim;

  // Through the normalization: dz/dy = (I - z z^T) / |y|.
  const double zg = simd::dot(act.z, grad_z);
  std::vector<double> grad_out(O);
  for (std::size_t i = 0; i < O; ++i) grad_out[i] = (grad_z[i] - act.z[i] * zg) / act.out_norm;

  std::vector<double> grad_hidden(H, 0.0);
  const std::size_t w2_off = w2_offset();
  const std::size_t b2_off = b2_offset();
  for (std::size_t i = 0; i < O; ++i) {
    const double g = grad_out[i];
    if (g == 0.0) continue;
    simd::axpy(g, act.hidden, grad.subspan(w2_off + i * H, H));
    grad[b2_off + i] += g;
    simd::axpy(g, w2_row(i), grad_hidden);
  }

  const std::size_t b1_off = w1_size();
  for (std::size_t i = 0; i < H; ++i) {
    const double h = act.hidden[i];
    const double g = grad_hidden[i] * (1.0 - h * h);
    if (g == 0.0) continue;
    simd::axpy(g, x, grad.subspan(i * D, D));
    grad[b1_off + i] += g;
  }
}

ModelState ModelState::initial(std::size_t dim, std::uint64_t seed, double w2_scale, double init_noise) {
  ModelState s;
  s.head = ProjectionHead::identity_init(dim, w2_scale, init_noise, seed);
  s.optimizer.m.assign(s.head.params().size(), 0.0);
  s.optimizer.v.assign(s.head.params().size(), 0.0);
  s.seed = seed;
  return s;
}

}  // namespace c2f
