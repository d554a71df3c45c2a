#include "sdrl/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "sdrl/kernels.hpp"

namespace sdrl {

std::size_t MaskedParameter::active_count() const {
  std::size_t n = 0;
  for (real m : mask.data) n += (m != 0);
  return n;
}

void MaskedParameter::zero_grad() {
  grad.fill(0);
  dense_grad.fill(0);
}

void MaskedParameter::apply_mask() {
  for (std::size_t i = 0; i < weight.size(); ++i) {
    if (mask.data[i] == 0) {
      weight.data[i] = 0;
      m1.data[i] = 0;
      m2.data[i] = 0;
    }
  }
}

real MaskedParameter::masked_weight_violation() const {
  real worst = 0;
  for (std::size_t i = 0; i < weight.size(); ++i)
    if (mask.data[i] == 0) worst = std::max(worst, std::abs(weight.data[i]));
  return worst;
}

Tensor2 linear_forward(const Tensor2& x, const MaskedParameter& p,
                       const std::vector<real>& bias) {
  check_shape(x.cols == p.weight.cols, "linear_forward input dim");
  check_shape(bias.size() == p.weight.rows, "linear_forward bias dim");
  Tensor2 y;
  kernels::gemm_nt(y, x, p.weight);
  for (std::size_t i = 0; i < y.rows; ++i)
    for (std::size_t j = 0; j < y.cols; ++j) y(i, j) += bias[j];
  return y;
}

Tensor2 layer_norm_forward(const Tensor2& x, const std::vector<real>& gain,
                           const std::vector<real>& shift, real eps) {
  check_shape(gain.size() == x.cols && shift.size() == x.cols,
              "layer_norm gain/shift dim");
  Tensor2 y(x.rows, x.cols);
  const real n = static_cast<real>(x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    real mean = 0;
    for (std::size_t j = 0; j < x.cols; ++j) mean += x(i, j);
    mean /= n;
    real var = 0;
    for (std::size_t j = 0; j < x.cols; ++j) {
      real d = x(i, j) - mean;
      var += d * d;
    }
    var /= n;
    const real inv = real(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < x.cols; ++j)
      y(i, j) = gain[j] * (x(i, j) - mean) * inv + shift[j];
  }
  return y;
}

real activation_scalar(real x, Activation kind) {
  if (kind == Activation::relu) return x > 0 ? x : real(0);
  return x > 0 ? x : std::expm1(x);
}

real activation_grad_scalar(real x, Activation kind) {
  if (kind == Activation::relu) return x > 0 ? real(1) : real(0);
  return x > 0 ? real(1) : std::exp(x);
}

Tensor2 activation_forward(const Tensor2& x, Activation kind) {
  Tensor2 y(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i)
    y.data[i] = activation_scalar(x.data[i], kind);
  return y;
}

void adamw_step(MaskedParameter& p, const OptimizerConfig& cfg) {
  for (real g : p.grad.data)
    if (!std::isfinite(g))
      throw std::runtime_error("non-finite gradient in parameter " + p.name);
  p.step_count += 1;
  const real t = static_cast<real>(p.step_count);
  const real bc1 = real(1) - std::pow(cfg.beta1, t);
  const real bc2 = real(1) - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < p.weight.size(); ++i) {
    if (p.mask.data[i] == 0) continue;
    const real g = p.grad.data[i];
    p.m1.data[i] = cfg.beta1 * p.m1.data[i] + (real(1) - cfg.beta1) * g;
    p.m2.data[i] = cfg.beta2 * p.m2.data[i] + (real(1) - cfg.beta2) * g * g;
    const real mhat = p.m1.data[i] / bc1;
    const real vhat = p.m2.data[i] / bc2;
    p.weight.data[i] -=
        cfg.learning_rate * (mhat / (std::sqrt(vhat) + cfg.epsilon) +
                             cfg.weight_decay * p.weight.data[i]);
  }
  p.apply_mask();
}

real clip_grad_norm(const std::vector<MaskedParameter*>& params,
                    real max_norm) {
  real sq = 0;
  for (const MaskedParameter* p : params)
    for (real g : p->grad.data) sq += g * g;
  const real norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    const real scale = max_norm / norm;
    for (MaskedParameter* p : params) {
      for (real& g : p->grad.data) g *= scale;
      for (real& g : p->dense_grad.data) g *= scale;
    }
  }
  return norm;
}

void xavier_uniform_init(Tensor2& w, Rng& rng) {
  const double b =
      std::sqrt(6.0 / static_cast<double>(w.rows + w.cols));
  for (real& v : w.data) v = static_cast<real>(rng.uniform(-b, b));
}

}  // namespace sdrl
