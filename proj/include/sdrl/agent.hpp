#pragma once

#include <cstdint>
#include <istream>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "sdrl/arch.hpp"
#include "sdrl/diagnostics.hpp"
#include "sdrl/env.hpp"
#include "sdrl/replay.hpp"
#include "sdrl/topology.hpp"

namespace sdrl {

struct LossWeights {
  real lambda_dynamics = 1;
  real lambda_reward = 0.1;
  real lambda_terminal = 0.1;
  real lambda_pre_activ = 1e-5;
  std::size_t horizon_enc = 5;
  std::size_t horizon_q = 3;
  real gamma = 0.99;
};

// Symlog two-hot over 65 bins with centers spanning [-10, 10].
std::vector<real> two_hot_encode(real r);
constexpr std::size_t kRewardBins = 65;
constexpr real kRewardRange = 10;

// Running mean-|reward| normalizer for TD targets; the target copy is frozen
// between target syncs.
struct RewardScale {
  real r_bar = 1;
  real r_bar_target = 1;
  real floor = 1e-8;
};

struct ModuleSpec {
  ArchConfig arch;
  std::size_t hidden_dim = 64;
  std::size_t num_blocks = 1;
  OptimizerConfig opt;
  RegimeConfig regime;
};

struct AgentConfig {
  ModuleSpec encoder;  // governs f, g, action embed, predictor
  ModuleSpec critic;   // twin Q networks
  ModuleSpec actor;
  std::size_t zs_dim = 64;
  std::size_t zsa_dim = 64;
  std::size_t za_dim = 32;
  std::size_t scale = 1;         // applied to all modules
  std::size_t critic_scale = 0;  // optional per-module override (0 = scale)
  LossWeights loss;
  std::size_t batch_size = 32;
  std::size_t buffer_capacity = 1'000'000;
  std::size_t reward_window = 100'000;
  std::uint64_t warmup_steps = 10'000;
  std::uint64_t target_update_freq = 250;
  real exploration_noise = 0.2;
  real target_policy_noise = 0.2;
  real target_noise_clip = 0.3;
  real priority_exponent = 0.4;
  real min_priority = 1;
  real huber_delta = 1;
  std::uint64_t total_steps = 100'000;  // fixes the topology schedules

  static AgentConfig desk_default();  // Type 6 / Type 6 / Type 5, MST regimes
};

enum class ActMode { warmup, explore, eval };

struct LossStats {
  real enc_total = 0, enc_dynamics = 0, enc_reward = 0, enc_terminal = 0;
  real critic = 0, actor = 0;
  real critic_grad_norm = 0;
  real r_bar = 1;
};

struct DiagnosticsProbe {
  std::size_t srank_zsa = 0;
  real dormant_encoder = 0, dormant_critic = 0, dormant_actor = 0;
  real param_l2 = 0;
};

// Encoder bundle: state encoder f, action embed, state-action encoder g and
// the latent/reward/terminal predictor head.
struct EncoderNets {
  BlockMLP f;
  MaskedParameter embed_w, embed_b;
  BlockMLP g;
  MaskedParameter pred_w, pred_b;

  std::vector<MaskedParameter*> parameters();
  std::vector<MaskedParameter*> sparsifiable_layers(bool exempt_io);
};

class Agent {
 public:
  Agent(const AgentConfig& cfg, const EnvSpec& env_spec, std::uint64_t seed);

  std::vector<real> act(const std::vector<real>& obs, ActMode mode);
  void observe(Transition t) { buffer_.push(std::move(t)); }

  // One gradient update per module plus target/topology bookkeeping.
  // t is the environment-step index; cfg.total_steps fixes the schedules.
  LossStats train_step(std::uint64_t t);

  DiagnosticsProbe probe(const Tensor2& states, const Tensor2& actions);

  SparsityReport module_sparsity(const std::string& module);
  real parameter_l2() const;
  real masked_weight_violation() const;  // max over all parameters

  ReplayBuffer& buffer() { return buffer_; }
  Rng& rng() { return rng_; }
  const AgentConfig& config() const { return cfg_; }
  const RewardScale& reward_scale() const { return rscale_; }
  std::vector<MaskedParameter*> all_parameters();

  void save(std::ostream& os);
  void load(std::istream& is);

  // Exposed for tests.
  LossStats encoder_update(const std::vector<Window>& windows);
  LossStats critic_update(const std::vector<Window>& windows);
  LossStats actor_update(const std::vector<Window>& windows);
  void sync_targets();
  void update_reward_scale();

  EncoderNets enc, enc_target;
  BlockMLP q1, q2, q1_target, q2_target;
  BlockMLP actor_net, actor_target;
  TopologyState topo_encoder, topo_critic, topo_actor;

 private:
  Tensor2 encode_zs_plain(const Tensor2& states, bool target) const;
  Tensor2 encode_zsa_plain(const Tensor2& zs, const Tensor2& actions,
                           bool target, Tensor2* penultimate = nullptr) const;
  std::vector<real> policy_action(const std::vector<real>& obs) const;

  AgentConfig cfg_;
  EnvSpec env_spec_;
  RewardScale rscale_;
  bool rbar_target_initialized_ = false;
  ReplayBuffer buffer_;
  Rng rng_;
};

}  // namespace sdrl
