#include "sdrl/arch.hpp"

#include <stdexcept>

namespace sdrl {

ArchConfig ArchConfig::from_type(int type, ResidualPlacement placement) {
  if (type < 1 || type > 6)
    throw std::invalid_argument("arch_type must be in 1..6");
  ArchConfig c;
  c.arch_type = type;
  c.use_layer_norm = type >= 3;
  c.activation = (type % 2 == 0) ? Activation::elu : Activation::relu;
  c.use_residual = type >= 5;
  c.residual_placement = placement;
  return c;
}

void ArchConfig::validate() const {
  const ArchConfig ref = from_type(arch_type, residual_placement);
  if (ref.use_layer_norm != use_layer_norm || ref.activation != activation ||
      ref.use_residual != use_residual)
    throw std::invalid_argument("arch flags do not match arch_type " +
                                std::to_string(arch_type));
}

namespace {

MaskedParameter make_weight(const std::string& name, std::size_t rows,
                            std::size_t cols, Rng& rng) {
  MaskedParameter p(name, rows, cols, /*sparse=*/true);
  xavier_uniform_init(p.weight, rng);
  return p;
}

MaskedParameter make_vector(const std::string& name, std::size_t n, real fill) {
  MaskedParameter p(name, 1, n, /*sparse=*/false);
  p.weight.fill(fill);
  return p;
}

}  // namespace

BlockMLP BlockMLP::build(const NetworkShape& shape, const ArchConfig& cfg,
                         Rng& rng, const std::string& prefix) {
  cfg.validate();
  if (shape.input_dim == 0 || shape.hidden_dim == 0 || shape.output_dim == 0)
    throw std::invalid_argument("network dims must be positive");
  BlockMLP net;
  net.shape = shape;
  net.config = cfg;
  const std::size_t h = shape.effective_hidden();
  const std::size_t nb = shape.effective_blocks();
  net.proj_w = make_weight(prefix + ".proj.w", h, shape.input_dim, rng);
  net.proj_b = make_vector(prefix + ".proj.b", h, 0);
  for (std::size_t b = 0; b < nb; ++b) {
    Block blk;
    const std::string bp = prefix + ".block" + std::to_string(b);
    if (cfg.use_layer_norm) {
      blk.ln1_gain = make_vector(bp + ".ln1.gain", h, 1);
      blk.ln1_shift = make_vector(bp + ".ln1.shift", h, 0);
    }
    blk.linear1_w = make_weight(bp + ".linear1.w", h, h, rng);
    blk.linear1_b = make_vector(bp + ".linear1.b", h, 0);
    if (cfg.use_layer_norm) {
      blk.ln2_gain = make_vector(bp + ".ln2.gain", h, 1);
      blk.ln2_shift = make_vector(bp + ".ln2.shift", h, 0);
    }
    blk.linear2_w = make_weight(bp + ".linear2.w", h, h, rng);
    blk.linear2_b = make_vector(bp + ".linear2.b", h, 0);
    net.blocks.push_back(std::move(blk));
  }
  if (cfg.use_layer_norm) {
    net.final_ln_gain = make_vector(prefix + ".final_ln.gain", h, 1);
    net.final_ln_shift = make_vector(prefix + ".final_ln.shift", h, 0);
  }
  net.out_w = make_weight(prefix + ".out.w", shape.output_dim, h, rng);
  net.out_b = make_vector(prefix + ".out.b", shape.output_dim, 0);
  return net;
}

int BlockMLP::forward(Graph& g, int x, bool train, int* penultimate) const {
  auto& self = const_cast<BlockMLP&>(*this);
  x = g.linear(x, self.proj_w, self.proj_b, train);
  for (auto& blk : self.blocks) {
    int block_input = x;
    int y = x;
    if (config.use_layer_norm)
      y = g.layer_norm(y, blk.ln1_gain, blk.ln1_shift, ln_eps, train);
    y = g.activation_op(y, config.activation);
    int post_norm = y;  // F'(x) for post-layer placement
    y = g.linear(y, blk.linear1_w, blk.linear1_b, train);
    if (config.use_layer_norm)
      y = g.layer_norm(y, blk.ln2_gain, blk.ln2_shift, ln_eps, train);
    y = g.activation_op(y, config.activation);
    y = g.linear(y, blk.linear2_w, blk.linear2_b, train);
    if (config.use_residual) {
      const int src =
          config.residual_placement == ResidualPlacement::pre_layer
              ? block_input
              : post_norm;
      x = g.add(y, src);
    } else {
      x = y;
    }
  }
  if (config.use_layer_norm)
    x = g.layer_norm(x, self.final_ln_gain, self.final_ln_shift, ln_eps, train);
  x = g.activation_op(x, config.activation);
  if (penultimate) *penultimate = x;
  return g.linear(x, self.out_w, self.out_b, train);
}

Tensor2 BlockMLP::forward_plain(const Tensor2& x0, Tensor2* penultimate) const {
  auto bias_of = [](const MaskedParameter& b) {
    return std::vector<real>(b.weight.data.begin(), b.weight.data.end());
  };
  auto ln = [&](const Tensor2& t, const MaskedParameter& gain,
                const MaskedParameter& shift) {
    return layer_norm_forward(
        t, std::vector<real>(gain.weight.data.begin(), gain.weight.data.end()),
        std::vector<real>(shift.weight.data.begin(), shift.weight.data.end()),
        ln_eps);
  };
  Tensor2 x = linear_forward(x0, proj_w, bias_of(proj_b));
  for (const auto& blk : blocks) {
    Tensor2 block_input = x;
    Tensor2 y = x;
    if (config.use_layer_norm) y = ln(y, blk.ln1_gain, blk.ln1_shift);
    y = activation_forward(y, config.activation);
    Tensor2 post_norm = y;
    y = linear_forward(y, blk.linear1_w, bias_of(blk.linear1_b));
    if (config.use_layer_norm) y = ln(y, blk.ln2_gain, blk.ln2_shift);
    y = activation_forward(y, config.activation);
    y = linear_forward(y, blk.linear2_w, bias_of(blk.linear2_b));
    if (config.use_residual) {
      const Tensor2& src =
          config.residual_placement == ResidualPlacement::pre_layer
              ? block_input
              : post_norm;
      for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += src.data[i];
    }
    x = std::move(y);
  }
  if (config.use_layer_norm) x = ln(x, final_ln_gain, final_ln_shift);
  x = activation_forward(x, config.activation);
  if (penultimate) *penultimate = x;
  return linear_forward(x, out_w, bias_of(out_b));
}

std::vector<MaskedParameter*> BlockMLP::parameters() {
  std::vector<MaskedParameter*> out{&proj_w, &proj_b};
  for (auto& blk : blocks) {
    if (config.use_layer_norm) {
      out.push_back(&blk.ln1_gain);
      out.push_back(&blk.ln1_shift);
    }
    out.push_back(&blk.linear1_w);
    out.push_back(&blk.linear1_b);
    if (config.use_layer_norm) {
      out.push_back(&blk.ln2_gain);
      out.push_back(&blk.ln2_shift);
    }
    out.push_back(&blk.linear2_w);
    out.push_back(&blk.linear2_b);
  }
  if (config.use_layer_norm) {
    out.push_back(&final_ln_gain);
    out.push_back(&final_ln_shift);
  }
  out.push_back(&out_w);
  out.push_back(&out_b);
  return out;
}

std::vector<const MaskedParameter*> BlockMLP::parameters() const {
  auto ps = const_cast<BlockMLP*>(this)->parameters();
  return std::vector<const MaskedParameter*>(ps.begin(), ps.end());
}

std::vector<MaskedParameter*> BlockMLP::sparsifiable_layers(bool exempt_io) {
  std::vector<MaskedParameter*> out;
  if (!exempt_io) out.push_back(&proj_w);
  for (auto& blk : blocks) {
    out.push_back(&blk.linear1_w);
    out.push_back(&blk.linear2_w);
  }
  if (!exempt_io) out.push_back(&out_w);
  return out;
}

std::size_t BlockMLP::parameter_count() const {
  std::size_t n = 0;
  for (const MaskedParameter* p : parameters()) n += p->size();
  return n;
}

std::size_t BlockMLP::expected_parameter_count(const NetworkShape& shape,
                                               const ArchConfig& cfg) {
  const std::size_t h = shape.effective_hidden();
  const std::size_t nb = shape.effective_blocks();
  std::size_t n = (shape.input_dim + 1) * h;          // projection
  n += nb * 2 * (h * h + h);                          // block linears
  n += (h + 1) * shape.output_dim;                    // output
  if (cfg.use_layer_norm) n += (2 * nb + 1) * 2 * h;  // LN gains/shifts
  return n;
}

}  // namespace sdrl
