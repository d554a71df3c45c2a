#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sdrl/rng.hpp"
#include "sdrl/tensor.hpp"

namespace sdrl {

enum class Activation { relu, elu };

struct OptimizerConfig {
  real learning_rate = 3e-4;
  real weight_decay = 0;
  real beta1 = 0.9;
  real beta2 = 0.999;
  real epsilon = 1e-8;
  std::optional<real> grad_clip_norm;
};

// Weight matrix plus its binary mask and AdamW moments. Biases and layer-norm
// gains/shifts reuse the type with an all-ones mask and sparsifiable=false.
// Invariants maintained by adamw_step / topology updates:
//   weight, m1, m2 are exactly 0 wherever mask is 0.
struct MaskedParameter {
  std::string name;
  Tensor2 weight;
  Tensor2 mask;        // entries in {0,1}
  Tensor2 grad;        // masked gradient
  Tensor2 dense_grad;  // unmasked gradient, consumed by topology growth
  Tensor2 m1, m2;
  std::uint64_t step_count = 0;
  bool sparsifiable = false;

  MaskedParameter() = default;
  MaskedParameter(std::string n, std::size_t rows, std::size_t cols,
                  bool sparse = false)
      : name(std::move(n)),
        weight(rows, cols),
        mask(rows, cols, 1),
        grad(rows, cols),
        dense_grad(rows, cols),
        m1(rows, cols),
        m2(rows, cols),
        sparsifiable(sparse) {}

  std::size_t size() const { return weight.size(); }
  std::size_t active_count() const;
  void zero_grad();
  // Re-applies the mask to weight and moments.
  void apply_mask();
  // max |weight| over masked-out entries; 0 means the invariant holds.
  real masked_weight_violation() const;
};

// y = x * (mask .* weight)^T + bias, bias broadcast over rows. Assumes the
// weight already satisfies the mask invariant, so weight is used directly.
Tensor2 linear_forward(const Tensor2& x, const MaskedParameter& p,
                       const std::vector<real>& bias);

// Per-row normalization with 1/cols variance, then gain/shift.
Tensor2 layer_norm_forward(const Tensor2& x, const std::vector<real>& gain,
                           const std::vector<real>& shift, real eps);

Tensor2 activation_forward(const Tensor2& x, Activation kind);
real activation_scalar(real x, Activation kind);
real activation_grad_scalar(real x, Activation kind);  // elu'(0) = 1

// AdamW with bias correction and decoupled weight decay, applied to active
// entries only; reapplies the mask afterwards. Throws on non-finite gradients.
void adamw_step(MaskedParameter& p, const OptimizerConfig& cfg);

// Global L2-norm clip over the masked gradients of all given parameters.
// Returns the pre-clip norm.
real clip_grad_norm(const std::vector<MaskedParameter*>& params, real max_norm);

// Entries i.i.d. uniform on [-b, b], b = sqrt(6 / (fan_in + fan_out)) with
// fan_out = rows, fan_in = cols.
void xavier_uniform_init(Tensor2& w, Rng& rng);

}  // namespace sdrl
