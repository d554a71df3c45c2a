#pragma once

#include <string>
#include <vector>

#include "sdrl/graph.hpp"
#include "sdrl/nn.hpp"
#include "sdrl/rng.hpp"

namespace sdrl {

enum class ResidualPlacement { pre_layer, post_layer };

// One of the six architecture types:
//   1: no LN, ReLU, no residual     2: no LN, ELU, no residual
//   3: LN, ReLU, no residual        4: LN, ELU, no residual
//   5: LN, ReLU, residual           6: LN, ELU, residual
struct ArchConfig {
  bool use_layer_norm = true;
  Activation activation = Activation::elu;
  bool use_residual = false;
  ResidualPlacement residual_placement = ResidualPlacement::pre_layer;
  int arch_type = 4;

  static ArchConfig from_type(
      int type, ResidualPlacement placement = ResidualPlacement::pre_layer);
  void validate() const;  // arch_type must match the flags
};

struct NetworkShape {
  std::size_t input_dim = 1;
  std::size_t hidden_dim = 64;
  std::size_t output_dim = 1;
  std::size_t num_blocks = 1;
  std::size_t scale = 1;
  // Optional independent factors; 0 means "use scale".
  std::size_t width_scale = 0;
  std::size_t depth_scale = 0;

  std::size_t effective_hidden() const {
    return hidden_dim * (width_scale ? width_scale : scale);
  }
  std::size_t effective_blocks() const {
    return num_blocks * (depth_scale ? depth_scale : scale);
  }
};

// Residual MLP following the BaseMLPBlock/BlockMLP dataflow:
//   x <- proj(x)
//   per block: y = LN?+act(x); y = LN?+act(linear1(y)); y = linear2(y);
//              x = y + x (if residual) else y
//   x <- LN?+act(x); return out(x)
// Post-layer placement instead sources the residual from the
// post-normalization tensor: x = linear2(...) + LN?+act(x).
struct BlockMLP {
  struct Block {
    MaskedParameter linear1_w, linear1_b;
    MaskedParameter linear2_w, linear2_b;
    MaskedParameter ln1_gain, ln1_shift;  // present only with layer norm
    MaskedParameter ln2_gain, ln2_shift;
  };

  NetworkShape shape;
  ArchConfig config;
  real ln_eps = 1e-5;
  MaskedParameter proj_w, proj_b;
  std::vector<Block> blocks;
  MaskedParameter final_ln_gain, final_ln_shift;
  MaskedParameter out_w, out_b;

  static BlockMLP build(const NetworkShape& shape, const ArchConfig& cfg,
                        Rng& rng, const std::string& name_prefix);

  // Graph forward; penultimate (optional) receives the node id of the tensor
  // feeding the output layer (post final LN/activation).
  int forward(Graph& g, int x, bool train = true,
              int* penultimate = nullptr) const;

  // Tape-free forward for targets, action selection and probes.
  Tensor2 forward_plain(const Tensor2& x, Tensor2* penultimate = nullptr) const;

  std::vector<MaskedParameter*> parameters();
  std::vector<const MaskedParameter*> parameters() const;
  // Weight matrices eligible for sparsification, in layer order.
  std::vector<MaskedParameter*> sparsifiable_layers(bool exempt_io = false);

  std::size_t parameter_count() const;
  // Closed-form count for a shape/config pair.
  static std::size_t expected_parameter_count(const NetworkShape& shape,
                                              const ArchConfig& cfg);
};

}  // namespace sdrl
