#include "sdrl/agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "sdrl/checkpoint.hpp"
#include "sdrl/diagnostics.hpp"
#include "sdrl/graph.hpp"

namespace sdrl {

std::vector<real> two_hot_encode(real r) {
  std::vector<real> v(kRewardBins, 0);
  const real u0 = (r < 0 ? real(-1) : real(1)) * std::log1p(std::abs(r));
  const real u = std::clamp(u0, -kRewardRange, kRewardRange);
  const real spacing = 2 * kRewardRange / real(kRewardBins - 1);
  const real pos = (u + kRewardRange) / spacing;
  const std::size_t i = static_cast<std::size_t>(std::floor(pos));
  if (i >= kRewardBins - 1) {
    v[kRewardBins - 1] = 1;
    return v;
  }
  const real frac = pos - real(i);
  v[i] = 1 - frac;
  v[i + 1] = frac;
  return v;
}

AgentConfig AgentConfig::desk_default() {
  AgentConfig c;
  c.encoder.arch = ArchConfig::from_type(6);
  c.encoder.opt.learning_rate = 1e-4;
  c.encoder.opt.weight_decay = 1e-4;
  c.encoder.regime.kind = RegimeKind::dense;

  c.critic.arch = ArchConfig::from_type(6);
  c.critic.opt.learning_rate = 3e-4;
  c.critic.opt.grad_clip_norm = 20;
  c.critic.regime.kind = RegimeKind::dst;
  c.critic.regime.global_sparsity = 0.6;

  c.actor.arch = ArchConfig::from_type(5);
  c.actor.opt.learning_rate = 3e-4;
  c.actor.regime.kind = RegimeKind::sst;
  c.actor.regime.global_sparsity = 0.6;
  return c;
}

std::vector<MaskedParameter*> EncoderNets::parameters() {
  std::vector<MaskedParameter*> out = f.parameters();
  out.push_back(&embed_w);
  out.push_back(&embed_b);
  for (MaskedParameter* p : g.parameters()) out.push_back(p);
  out.push_back(&pred_w);
  out.push_back(&pred_b);
  return out;
}

std::vector<MaskedParameter*> EncoderNets::sparsifiable_layers(bool exempt_io) {
  std::vector<MaskedParameter*> out = f.sparsifiable_layers(exempt_io);
  if (!exempt_io) out.push_back(&embed_w);
  for (MaskedParameter* p : g.sparsifiable_layers(exempt_io)) out.push_back(p);
  if (!exempt_io) out.push_back(&pred_w);
  return out;
}

namespace {

std::vector<real> bias_vec(const MaskedParameter& b) {
  return std::vector<real>(b.weight.data.begin(), b.weight.data.end());
}

void suffix_names(std::vector<MaskedParameter*> params, const char* suffix) {
  for (MaskedParameter* p : params) p->name += suffix;
}

std::vector<MaskedParameter*> concat(std::vector<MaskedParameter*> a,
                                     const std::vector<MaskedParameter*>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

Agent::Agent(const AgentConfig& cfg, const EnvSpec& env_spec,
             std::uint64_t seed)
    : cfg_(cfg),
      env_spec_(env_spec),
      buffer_(cfg.buffer_capacity, cfg.reward_window),
      rng_(seed) {
  if (env_spec.obs_dim == 0 || env_spec.act_dim == 0)
    throw std::invalid_argument("agent needs a populated env spec");
  const std::size_t sc = cfg.scale ? cfg.scale : 1;
  const std::size_t csc = cfg.critic_scale ? cfg.critic_scale : sc;
  const std::size_t zs_eff = cfg.zs_dim * sc;
  const std::size_t zsa_eff = cfg.zsa_dim * sc;

  NetworkShape fs{env_spec.obs_dim, cfg.encoder.hidden_dim, zs_eff,
                  cfg.encoder.num_blocks, sc};
  enc.f = BlockMLP::build(fs, cfg.encoder.arch, rng_, "encoder.f");
  enc.embed_w =
      MaskedParameter("encoder.embed.w", cfg.za_dim, env_spec.act_dim, true);
  xavier_uniform_init(enc.embed_w.weight, rng_);
  enc.embed_b = MaskedParameter("encoder.embed.b", 1, cfg.za_dim);
  NetworkShape gs{zs_eff + cfg.za_dim, cfg.encoder.hidden_dim, zsa_eff,
                  cfg.encoder.num_blocks, sc};
  enc.g = BlockMLP::build(gs, cfg.encoder.arch, rng_, "encoder.g");
  enc.pred_w = MaskedParameter("encoder.pred.w", zs_eff + kRewardBins + 1,
                               zsa_eff, true);
  xavier_uniform_init(enc.pred_w.weight, rng_);
  enc.pred_b = MaskedParameter("encoder.pred.b", 1, zs_eff + kRewardBins + 1);

  NetworkShape qs{zsa_eff, cfg.critic.hidden_dim, 1, cfg.critic.num_blocks,
                  csc};
  q1 = BlockMLP::build(qs, cfg.critic.arch, rng_, "critic.q1");
  q2 = BlockMLP::build(qs, cfg.critic.arch, rng_, "critic.q2");

  NetworkShape as{zs_eff, cfg.actor.hidden_dim, env_spec.act_dim,
                  cfg.actor.num_blocks, sc};
  actor_net = BlockMLP::build(as, cfg.actor.arch, rng_, "actor");

  topo_encoder.init(enc.sparsifiable_layers(cfg.encoder.regime.exempt_io_layers),
                    cfg.encoder.regime, cfg.total_steps, rng_);
  topo_critic.init(
      concat(q1.sparsifiable_layers(cfg.critic.regime.exempt_io_layers),
             q2.sparsifiable_layers(cfg.critic.regime.exempt_io_layers)),
      cfg.critic.regime, cfg.total_steps, rng_);
  topo_actor.init(actor_net.sparsifiable_layers(cfg.actor.regime.exempt_io_layers),
                  cfg.actor.regime, cfg.total_steps, rng_);

  sync_targets();
}

void Agent::sync_targets() {
  enc_target = enc;
  q1_target = q1;
  q2_target = q2;
  actor_target = actor_net;
  suffix_names(enc_target.parameters(), "#target");
  suffix_names(q1_target.parameters(), "#target");
  suffix_names(q2_target.parameters(), "#target");
  suffix_names(actor_target.parameters(), "#target");
}

void Agent::update_reward_scale() {
  const real m = buffer_.mean_abs_reward();
  rscale_.r_bar = std::max(m, rscale_.floor);
}

Tensor2 Agent::encode_zs_plain(const Tensor2& states, bool target) const {
  return (target ? enc_target : enc).f.forward_plain(states);
}

Tensor2 Agent::encode_zsa_plain(const Tensor2& zs, const Tensor2& actions,
                                bool target, Tensor2* penultimate) const {
  const EncoderNets& e = target ? enc_target : enc;
  Tensor2 za = linear_forward(actions, e.embed_w, bias_vec(e.embed_b));
  Tensor2 cat(zs.rows, zs.cols + za.cols);
  for (std::size_t r = 0; r < zs.rows; ++r) {
    for (std::size_t c = 0; c < zs.cols; ++c) cat(r, c) = zs(r, c);
    for (std::size_t c = 0; c < za.cols; ++c) cat(r, zs.cols + c) = za(r, c);
  }
  return e.g.forward_plain(cat, penultimate);
}

std::vector<real> Agent::policy_action(const std::vector<real>& obs) const {
  Tensor2 s(1, obs.size());
  s.data = obs;
  const Tensor2 zs = enc.f.forward_plain(s);
  const Tensor2 pre = actor_net.forward_plain(zs);
  std::vector<real> a(env_spec_.act_dim);
  for (std::size_t j = 0; j < a.size(); ++j) {
    const real half = (env_spec_.act_high[j] - env_spec_.act_low[j]) / 2;
    const real center = (env_spec_.act_high[j] + env_spec_.act_low[j]) / 2;
    a[j] = std::tanh(pre(0, j)) * half + center;
  }
  return a;
}

std::vector<real> Agent::act(const std::vector<real>& obs, ActMode mode) {
  if (obs.size() != env_spec_.obs_dim)
    throw std::invalid_argument("observation dim mismatch");
  if (mode == ActMode::warmup) {
    std::vector<real> a(env_spec_.act_dim);
    for (std::size_t j = 0; j < a.size(); ++j)
      a[j] = static_cast<real>(
          rng_.uniform(env_spec_.act_low[j], env_spec_.act_high[j]));
    return a;
  }
  std::vector<real> a = policy_action(obs);
  if (mode == ActMode::explore) {
    for (std::size_t j = 0; j < a.size(); ++j) {
      const real half = (env_spec_.act_high[j] - env_spec_.act_low[j]) / 2;
      a[j] += static_cast<real>(rng_.normal(0, cfg_.exploration_noise)) * half;
      a[j] = std::clamp(a[j], env_spec_.act_low[j], env_spec_.act_high[j]);
    }
  }
  return a;
}

LossStats Agent::encoder_update(const std::vector<Window>& windows) {
  const std::size_t B = windows.size();
  const std::size_t H = cfg_.loss.horizon_enc;
  const std::size_t obs = env_spec_.obs_dim, act = env_spec_.act_dim;
  const std::size_t zs_eff = enc.f.shape.output_dim;

  for (MaskedParameter* p : enc.parameters()) p->zero_grad();

  Tensor2 s0(B, obs);
  for (std::size_t b = 0; b < B; ++b) {
    const Transition& tr = buffer_.at(windows[b].start);
    for (std::size_t c = 0; c < obs; ++c) s0(b, c) = tr.state[c];
  }

  Graph g;
  int zs = enc.f.forward(g, g.input(std::move(s0)));
  std::vector<std::pair<real, int>> terms;
  LossStats st;
  for (std::size_t t = 0; t < H; ++t) {
    Tensor2 at(B, act), rt(B, kRewardBins), dt(B, 1), zn(B, zs_eff);
    Tensor2 sn(B, obs);
    std::vector<real> roww(B, 0);
    for (std::size_t b = 0; b < B; ++b) {
      if (t >= windows[b].length) continue;
      const Transition& tr = buffer_.at(windows[b].start + t);
      roww[b] = 1;
      for (std::size_t c = 0; c < act; ++c) at(b, c) = tr.action[c];
      const std::vector<real> th = two_hot_encode(tr.reward);
      for (std::size_t c = 0; c < kRewardBins; ++c) rt(b, c) = th[c];
      dt(b, 0) = tr.terminal ? 1 : 0;
      for (std::size_t c = 0; c < obs; ++c) sn(b, c) = tr.next_state[c];
    }
    const Tensor2 zn_t = enc_target.f.forward_plain(sn);
    int za = g.linear(g.input(std::move(at)), enc.embed_w, enc.embed_b);
    int zsa = enc.g.forward(g, g.concat_cols(zs, za));
    int out = g.linear(zsa, enc.pred_w, enc.pred_b);
    int z_pred = g.slice_cols(out, 0, zs_eff);
    int r_logits = g.slice_cols(out, zs_eff, kRewardBins);
    int d_pred = g.slice_cols(out, zs_eff + kRewardBins, 1);
    int l_dyn = g.mse_loss(z_pred, zn_t, roww);
    int l_rwd = g.softmax_cross_entropy(r_logits, std::move(rt), roww);
    int l_tmn = g.mse_loss(d_pred, std::move(dt), roww);
    st.enc_dynamics += g.value(l_dyn)(0, 0);
    st.enc_reward += g.value(l_rwd)(0, 0);
    st.enc_terminal += g.value(l_tmn)(0, 0);
    terms.push_back({cfg_.loss.lambda_dynamics, l_dyn});
    terms.push_back({cfg_.loss.lambda_reward, l_rwd});
    terms.push_back({cfg_.loss.lambda_terminal, l_tmn});
    zs = z_pred;  // latent unroll
  }
  int loss = g.scalar_combine(std::move(terms));
  st.enc_total = g.value(loss)(0, 0);
  g.backward(loss);
  for (MaskedParameter* p : enc.parameters()) adamw_step(*p, cfg_.encoder.opt);
  return st;
}

LossStats Agent::critic_update(const std::vector<Window>& windows) {
  const std::size_t B = windows.size();
  const std::size_t Hq = cfg_.loss.horizon_q;
  const real gamma = cfg_.loss.gamma;
  const std::size_t obs = env_spec_.obs_dim, act = env_spec_.act_dim;

  auto critic_params = concat(q1.parameters(), q2.parameters());
  for (MaskedParameter* p : critic_params) p->zero_grad();

  Tensor2 s0(B, obs), a0(B, act), sH(B, obs);
  std::vector<real> rsum(B, 0), boot(B, 0);
  for (std::size_t b = 0; b < B; ++b) {
    const Window& w = windows[b];
    const Transition& tr0 = buffer_.at(w.start);
    for (std::size_t c = 0; c < obs; ++c) s0(b, c) = tr0.state[c];
    for (std::size_t c = 0; c < act; ++c) a0(b, c) = tr0.action[c];
    const std::size_t L = std::min<std::size_t>(w.length, Hq);
    real disc = 1;
    for (std::size_t i = 0; i < L; ++i) {
      rsum[b] += disc * buffer_.at(w.start + i).reward;
      disc *= gamma;
    }
    const bool terminal_inside = w.terminal_within && w.length <= Hq;
    boot[b] = terminal_inside ? 0 : disc;  // disc == gamma^L here
    const Transition& trL = buffer_.at(w.start + L - 1);
    for (std::size_t c = 0; c < obs; ++c) sH(b, c) = trL.next_state[c];
  }

  const Tensor2 zs0 = encode_zs_plain(s0, false);
  const Tensor2 zsa0 = encode_zsa_plain(zs0, a0, false);

  const Tensor2 zsH = encode_zs_plain(sH, true);
  const Tensor2 preH = actor_target.forward_plain(zsH);
  Tensor2 aH(B, act);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t j = 0; j < act; ++j) {
      const real half = (env_spec_.act_high[j] - env_spec_.act_low[j]) / 2;
      const real center = (env_spec_.act_high[j] + env_spec_.act_low[j]) / 2;
      const real noise =
          std::clamp(static_cast<real>(
                         rng_.normal(0, cfg_.target_policy_noise)),
                     -cfg_.target_noise_clip, cfg_.target_noise_clip) *
          half;
      aH(b, j) = std::clamp(std::tanh(preH(b, j)) * half + center + noise,
                            env_spec_.act_low[j], env_spec_.act_high[j]);
    }
  }
  const Tensor2 zsaH = encode_zsa_plain(zsH, aH, true);
  const Tensor2 qt1 = q1_target.forward_plain(zsaH);
  const Tensor2 qt2 = q2_target.forward_plain(zsaH);

  Tensor2 y(B, 1);
  for (std::size_t b = 0; b < B; ++b) {
    const real qmin = std::min(qt1(b, 0), qt2(b, 0));
    y(b, 0) = (rsum[b] + boot[b] * rscale_.r_bar_target * qmin) / rscale_.r_bar;
  }

  Graph g;
  const int in = g.input(zsa0);
  const int n1 = q1.forward(g, in);
  const int n2 = q2.forward(g, in);
  std::vector<real> ones(B, 1);
  const int l1 = g.huber_loss(n1, y, cfg_.huber_delta, ones);
  const int l2 = g.huber_loss(n2, y, cfg_.huber_delta, ones);
  const int loss = g.scalar_combine({{1, l1}, {1, l2}});
  LossStats st;
  st.critic = g.value(loss)(0, 0);
  g.backward(loss);
  const real max_norm = cfg_.critic.opt.grad_clip_norm
                            ? *cfg_.critic.opt.grad_clip_norm
                            : std::numeric_limits<real>::infinity();
  st.critic_grad_norm = clip_grad_norm(critic_params, max_norm);
  for (MaskedParameter* p : critic_params) adamw_step(*p, cfg_.critic.opt);

  for (std::size_t b = 0; b < B; ++b) {
    const real td = std::abs(g.value(n1)(b, 0) - y(b, 0));
    const real pr =
        std::max(std::pow(td, cfg_.priority_exponent), cfg_.min_priority);
    buffer_.update_priority(windows[b].start, pr);
  }
  return st;
}

LossStats Agent::actor_update(const std::vector<Window>& windows) {
  const std::size_t B = windows.size();
  const std::size_t obs = env_spec_.obs_dim, act = env_spec_.act_dim;

  for (MaskedParameter* p : actor_net.parameters()) p->zero_grad();

  Tensor2 s0(B, obs);
  for (std::size_t b = 0; b < B; ++b) {
    const Transition& tr = buffer_.at(windows[b].start);
    for (std::size_t c = 0; c < obs; ++c) s0(b, c) = tr.state[c];
  }
  const Tensor2 zs0 = encode_zs_plain(s0, false);

  std::vector<real> half(act), center(act);
  for (std::size_t j = 0; j < act; ++j) {
    half[j] = (env_spec_.act_high[j] - env_spec_.act_low[j]) / 2;
    center[j] = (env_spec_.act_high[j] + env_spec_.act_low[j]) / 2;
  }

  Graph g;
  const int zn = g.input(zs0);
  const int pre = actor_net.forward(g, zn, /*train=*/true);
  const int a = g.affine_const(g.tanh_op(pre), half, center);
  const int za = g.linear(a, enc.embed_w, enc.embed_b, /*train=*/false);
  const int zsa = enc.g.forward(g, g.concat_cols(zn, za), /*train=*/false);
  const int nq1 = q1.forward(g, zsa, /*train=*/false);
  const int nq2 = q2.forward(g, zsa, /*train=*/false);
  const int loss = g.scalar_combine({{-0.5, g.mean_all(nq1)},
                                     {-0.5, g.mean_all(nq2)},
                                     {cfg_.loss.lambda_pre_activ,
                                      g.mean_square(pre)}});
  LossStats st;
  st.actor = g.value(loss)(0, 0);
  g.backward(loss);
  for (MaskedParameter* p : actor_net.parameters())
    adamw_step(*p, cfg_.actor.opt);
  return st;
}

LossStats Agent::train_step(std::uint64_t t) {
  update_reward_scale();
  if (!rbar_target_initialized_) {
    rscale_.r_bar_target = rscale_.r_bar;
    rbar_target_initialized_ = true;
  }
  const std::vector<Window> windows =
      buffer_.sample_windows(cfg_.batch_size, cfg_.loss.horizon_enc, rng_);

  LossStats st = encoder_update(windows);
  const LossStats sc = critic_update(windows);
  st.critic = sc.critic;
  st.critic_grad_norm = sc.critic_grad_norm;
  st.actor = actor_update(windows).actor;
  st.r_bar = rscale_.r_bar;

  if (cfg_.target_update_freq && t % cfg_.target_update_freq == 0) {
    sync_targets();
    rscale_.r_bar_target = rscale_.r_bar;
  }

  auto maybe_topo = [&](TopologyState& topo,
                        const std::vector<MaskedParameter*>& layers) {
    const auto& rc = topo.regime;
    if (rc.kind == RegimeKind::dense || rc.kind == RegimeKind::sst) return;
    if (rc.update_interval == 0 || t % rc.update_interval != 0) return;
    if (rc.kind == RegimeKind::dst && t >= topo.total_steps) return;
    regime_step(topo, layers, t);
  };
  maybe_topo(topo_encoder,
             enc.sparsifiable_layers(cfg_.encoder.regime.exempt_io_layers));
  maybe_topo(topo_critic,
             concat(q1.sparsifiable_layers(cfg_.critic.regime.exempt_io_layers),
                    q2.sparsifiable_layers(cfg_.critic.regime.exempt_io_layers)));
  maybe_topo(topo_actor,
             actor_net.sparsifiable_layers(cfg_.actor.regime.exempt_io_layers));
  return st;
}

DiagnosticsProbe Agent::probe(const Tensor2& states, const Tensor2& actions) {
  DiagnosticsProbe p;
  Tensor2 pen_f;
  const Tensor2 zs = enc.f.forward_plain(states, &pen_f);
  const Tensor2 zsa = encode_zsa_plain(zs, actions, false);
  Tensor2 pen_q;
  q1.forward_plain(zsa, &pen_q);
  Tensor2 pen_a;
  actor_net.forward_plain(zs, &pen_a);
  p.srank_zsa = srank(zsa);
  p.dormant_encoder = dormant_ratio(pen_f);
  p.dormant_critic = dormant_ratio(pen_q);
  p.dormant_actor = dormant_ratio(pen_a);
  p.param_l2 = parameter_l2();
  return p;
}

SparsityReport Agent::module_sparsity(const std::string& module) {
  std::vector<MaskedParameter*> layers;
  if (module == "encoder") {
    layers = enc.sparsifiable_layers(cfg_.encoder.regime.exempt_io_layers);
  } else if (module == "critic") {
    layers = concat(q1.sparsifiable_layers(cfg_.critic.regime.exempt_io_layers),
                    q2.sparsifiable_layers(cfg_.critic.regime.exempt_io_layers));
  } else if (module == "actor") {
    layers = actor_net.sparsifiable_layers(cfg_.actor.regime.exempt_io_layers);
  } else {
    throw std::invalid_argument("unknown module: " + module);
  }
  std::vector<const MaskedParameter*> cl(layers.begin(), layers.end());
  return sparsity_report(cl);
}

std::vector<MaskedParameter*> Agent::all_parameters() {
  return concat(concat(concat(enc.parameters(), q1.parameters()),
                       q2.parameters()),
                actor_net.parameters());
}

real Agent::parameter_l2() const {
  double sum = 0;
  for (const MaskedParameter* p : const_cast<Agent*>(this)->all_parameters())
    for (real v : p->weight.data) sum += double(v) * double(v);
  return static_cast<real>(std::sqrt(sum));
}

real Agent::masked_weight_violation() const {
  Agent& self = const_cast<Agent&>(*this);
  real worst = 0;
  auto scan = [&](std::vector<MaskedParameter*> ps) {
    for (MaskedParameter* p : ps)
      worst = std::max(worst, p->masked_weight_violation());
  };
  scan(self.all_parameters());
  scan(self.enc_target.parameters());
  scan(self.q1_target.parameters());
  scan(self.q2_target.parameters());
  scan(self.actor_target.parameters());
  return worst;
}

namespace {

void save_topology(std::ostream& os, const TopologyState& t) {
  auto w64 = [&](std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
  };
  auto wreal = [&](real v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
  };
  w64(static_cast<std::uint64_t>(t.regime.kind));
  wreal(t.regime.global_sparsity);
  w64(static_cast<std::uint64_t>(t.regime.allocation));
  wreal(t.regime.zeta_initial);
  wreal(t.regime.zeta_final);
  w64(t.regime.update_interval);
  wreal(t.regime.schedule.s_i);
  wreal(t.regime.schedule.s_f);
  w64(t.regime.schedule.t_start);
  w64(t.regime.schedule.t_end);
  wreal(t.regime.schedule.lambda);
  w64(t.regime.exempt_io_layers ? 1 : 0);
  w64(t.regime.growth_includes_dropped ? 1 : 0);
  w64(t.total_steps);
  w64(t.plan.sparsity.size());
  for (real v : t.plan.sparsity) wreal(v);
  for (std::size_t v : t.plan.param_count) w64(v);
  for (std::size_t v : t.plan.prune_count) w64(v);
  w64(t.cumulative_dropped);
  w64(t.cumulative_grown);
}

void load_topology(std::istream& is, TopologyState& t) {
  auto r64 = [&]() {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  };
  auto rreal = [&]() {
    real v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  };
  t.regime.kind = static_cast<RegimeKind>(r64());
  t.regime.global_sparsity = rreal();
  t.regime.allocation = static_cast<Allocation>(r64());
  t.regime.zeta_initial = rreal();
  t.regime.zeta_final = rreal();
  t.regime.update_interval = r64();
  t.regime.schedule.s_i = rreal();
  t.regime.schedule.s_f = rreal();
  t.regime.schedule.t_start = r64();
  t.regime.schedule.t_end = r64();
  t.regime.schedule.lambda = rreal();
  t.regime.exempt_io_layers = r64() != 0;
  t.regime.growth_includes_dropped = r64() != 0;
  t.total_steps = r64();
  const std::size_t n = r64();
  t.plan.sparsity.resize(n);
  t.plan.param_count.resize(n);
  t.plan.prune_count.resize(n);
  for (real& v : t.plan.sparsity) v = rreal();
  for (std::size_t& v : t.plan.param_count) v = r64();
  for (std::size_t& v : t.plan.prune_count) v = r64();
  t.cumulative_dropped = r64();
  t.cumulative_grown = r64();
}

}  // namespace

void Agent::save(std::ostream& os) {
  auto w64 = [&](std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
  };
  auto write_group = [&](std::vector<MaskedParameter*> ps) {
    w64(ps.size());
    for (const MaskedParameter* p : ps) write_param_fragment(os, *p);
  };
  write_group(all_parameters());
  write_group(enc_target.parameters());
  write_group(q1_target.parameters());
  write_group(q2_target.parameters());
  write_group(actor_target.parameters());

  os.write(reinterpret_cast<const char*>(&rscale_.r_bar), sizeof(real));
  os.write(reinterpret_cast<const char*>(&rscale_.r_bar_target), sizeof(real));
  w64(rbar_target_initialized_ ? 1 : 0);
  save_topology(os, topo_encoder);
  save_topology(os, topo_critic);
  save_topology(os, topo_actor);
  buffer_.save(os);
  std::ostringstream rs;
  rng_.save(rs);
  const std::string blob = rs.str();
  w64(blob.size());
  os.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

void Agent::load(std::istream& is) {
  auto r64 = [&]() {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  };
  auto read_group = [&](std::vector<MaskedParameter*> ps) {
    const std::uint64_t n = r64();
    if (n != ps.size())
      throw std::runtime_error("checkpoint parameter count mismatch");
    for (MaskedParameter* p : ps) read_param_fragment_into(is, *p);
  };
  read_group(all_parameters());
  read_group(enc_target.parameters());
  read_group(q1_target.parameters());
  read_group(q2_target.parameters());
  read_group(actor_target.parameters());

  is.read(reinterpret_cast<char*>(&rscale_.r_bar), sizeof(real));
  is.read(reinterpret_cast<char*>(&rscale_.r_bar_target), sizeof(real));
  rbar_target_initialized_ = r64() != 0;
  load_topology(is, topo_encoder);
  load_topology(is, topo_critic);
  load_topology(is, topo_actor);
  buffer_.load(is);
  const std::uint64_t len = r64();
  std::string blob(len, '\0');
  is.read(blob.data(), static_cast<std::streamsize>(len));
  std::istringstream rs(blob);
  rng_.load(rs);
  if (!is) throw std::runtime_error("truncated agent checkpoint");
}

}  // namespace sdrl
