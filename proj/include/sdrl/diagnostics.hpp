#pragma once

#include <vector>

#include "sdrl/nn.hpp"
#include "sdrl/tensor.hpp"

namespace sdrl {

// Singular values of a (one-sided Jacobi), descending.
std::vector<real> singular_values(const Tensor2& a);

// Smallest k such that the top-k singular values hold >= 1 - delta of the
// total singular-value mass. All-zero input returns 0 with a warning.
std::size_t srank(const Tensor2& features, real delta = 0.01);

// Fraction of neurons whose batch-mean |activation|, normalized by the layer
// mean, is <= tau. A zero layer mean counts every neuron as dormant.
real dormant_ratio(const Tensor2& activations, real tau = 0.025);

struct SparsityReport {
  std::vector<real> per_layer;
  real global_sparsity = 0;
};

SparsityReport sparsity_report(const std::vector<const MaskedParameter*>& layers);

}  // namespace sdrl
