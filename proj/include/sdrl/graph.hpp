#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "sdrl/nn.hpp"
#include "sdrl/tensor.hpp"

namespace sdrl {

// Tape-style reverse-mode autodiff over the fixed operation set used by the
// networks and losses. Build a graph per update, call backward once on a
// scalar node, read parameter gradients out of the MaskedParameters.
//
// Parameter-touching ops accumulate into MaskedParameter::grad (masked) and
// ::dense_grad (raw), in the same pass. Ops taking train=false propagate
// gradients to their tensor inputs but leave the parameters untouched.
class Graph {
 public:
  int input(Tensor2 v);

  int linear(int x, MaskedParameter& w, MaskedParameter& b, bool train = true);
  int layer_norm(int x, MaskedParameter& gain, MaskedParameter& shift, real eps,
                 bool train = true);
  int activation_op(int x, Activation kind);
  int tanh_op(int x);
  int add(int a, int b);
  // y = x .* scale + shift, columnwise constants
  int affine_const(int x, std::vector<real> scale, std::vector<real> shift);
  int concat_cols(int a, int b);
  int slice_cols(int x, std::size_t begin, std::size_t len);

  // Scalar (1x1) losses. row_w weights each batch row (horizon masking);
  // all are divided by the row count.
  int mse_loss(int pred, Tensor2 target, std::vector<real> row_w);
  int softmax_cross_entropy(int logits, Tensor2 target, std::vector<real> row_w);
  int huber_loss(int pred, Tensor2 target, real delta, std::vector<real> row_w);
  int mean_square(int x);  // mean over all entries of x^2
  int mean_all(int x);
  // sum_i coeff_i * scalar_node_i
  int scalar_combine(std::vector<std::pair<real, int>> terms);

  const Tensor2& value(int id) const { return nodes_[id].value; }
  const Tensor2& grad(int id) const { return nodes_[id].grad; }

  // Reverse pass from a scalar node. Callable once per graph.
  void backward(int loss);

 private:
  struct Node {
    Tensor2 value;
    Tensor2 grad;
    std::function<void()> back;  // empty for leaves
  };
  int push(Tensor2 v, std::function<void()> back = {});
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace sdrl
