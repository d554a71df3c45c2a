#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "sdrl/agent.hpp"
#include "sdrl/env.hpp"

using namespace sdrl;

namespace {

AgentConfig tiny_cfg() {
  AgentConfig c = AgentConfig::desk_default();
  c.encoder.hidden_dim = c.critic.hidden_dim = c.actor.hidden_dim = 16;
  c.zs_dim = 16;
  c.zsa_dim = 16;
  c.za_dim = 8;
  c.batch_size = 8;
  c.buffer_capacity = 4096;
  c.reward_window = 4096;
  c.total_steps = 1000;
  return c;
}

void fill_buffer(Agent& agent, Env& env, std::size_t n, Rng& rng) {
  std::vector<real> obs = env.reset(rng);
  std::uint64_t ep = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<real> a = agent.act(obs, ActMode::warmup);
    const StepResult r = env.step(a);
    agent.observe({obs, a, r.reward, r.obs, r.terminal, r.truncated, ep});
    obs = r.obs;
    if (r.terminal || r.truncated) {
      ep += 1;
      obs = env.reset(rng);
    }
  }
}

Tensor2 zsa_of(const EncoderNets& e, const Tensor2& s, const Tensor2& a) {
  const Tensor2 zs = e.f.forward_plain(s);
  const std::vector<real> bias(e.embed_b.weight.data.begin(),
                               e.embed_b.weight.data.end());
  const Tensor2 za = linear_forward(a, e.embed_w, bias);
  Tensor2 cat(zs.rows, zs.cols + za.cols);
  for (std::size_t r = 0; r < zs.rows; ++r) {
    for (std::size_t c = 0; c < zs.cols; ++c) cat(r, c) = zs(r, c);
    for (std::size_t c = 0; c < za.cols; ++c) cat(r, zs.cols + c) = za(r, c);
  }
  return e.g.forward_plain(cat);
}

double decode_two_hot(const std::vector<real>& v) {
  double u = 0;
  for (std::size_t i = 0; i < v.size(); ++i)
    u += double(v[i]) * (-10.0 + double(i) * 0.3125);
  return (u < 0 ? -1.0 : 1.0) * std::expm1(std::abs(u));
}

}  // namespace

TEST_CASE("two-hot encoding") {
  SUBCASE("zero reward lands on the center bin") {
    const std::vector<real> v = two_hot_encode(0);
    CHECK(v[32] == 1);
    real sum = 0;
    for (real x : v) sum += x;
    CHECK(std::abs(sum - 1) <= 1e-12);
  }
  SUBCASE("reward 1 splits between bins 34 and 35") {
    const std::vector<real> v = two_hot_encode(1);
    CHECK(double(v[34]) == doctest::Approx(0.78193).epsilon(1e-4));
    CHECK(double(v[35]) == doctest::Approx(0.21807).epsilon(1e-4));
    for (std::size_t i = 0; i < v.size(); ++i)
      if (i != 34 && i != 35) CHECK(v[i] == 0);
  }
  SUBCASE("extreme rewards clamp to the edge bins") {
    CHECK(two_hot_encode(real(1e9)).back() == 1);
    CHECK(two_hot_encode(real(-1e9)).front() == 1);
  }
  SUBCASE("negation mirrors the bins") {
    for (real r : {real(0.5), real(2.3), real(7)}) {
      const std::vector<real> p = two_hot_encode(r);
      const std::vector<real> n = two_hot_encode(-r);
      for (std::size_t i = 0; i < kRewardBins; ++i)
        CHECK(double(n[i]) ==
              doctest::Approx(double(p[kRewardBins - 1 - i])).epsilon(1e-9));
    }
  }
  SUBCASE("mass sums to one and decodes back to the reward") {
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
      const real r = static_cast<real>(rng.uniform(-50, 50));
      const std::vector<real> v = two_hot_encode(r);
      real sum = 0;
      for (real x : v) sum += x;
      CHECK(std::abs(sum - 1) <= 1e-12);
      CHECK(decode_two_hot(v) ==
            doctest::Approx(double(r)).epsilon(1e-6).scale(1));
    }
  }
}

TEST_CASE("reward scale tracks mean absolute reward with a floor") {
  Agent agent(tiny_cfg(), Pendulum().spec(), 3);
  agent.update_reward_scale();
  CHECK(agent.reward_scale().r_bar == doctest::Approx(1e-8));
  auto push_r = [&](real r) {
    Transition t;
    t.state = {0, 0, 0};
    t.action = {0};
    t.reward = r;
    t.next_state = {0, 0, 0};
    agent.observe(std::move(t));
  };
  push_r(1);
  push_r(-3);
  push_r(2);
  agent.update_reward_scale();
  CHECK(double(agent.reward_scale().r_bar) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("encoder loss decomposes by its lambda weights") {
  Pendulum env;
  Rng rng(11);
  SUBCASE("zeroing reward/terminal lambdas leaves the dynamics term") {
    AgentConfig cfg = tiny_cfg();
    cfg.loss.lambda_reward = 0;
    cfg.loss.lambda_terminal = 0;
    Agent agent(cfg, env.spec(), 5);
    fill_buffer(agent, env, 64, rng);
    const std::vector<Window> ws =
        agent.buffer().sample_windows(8, 5, agent.rng());
    const LossStats st = agent.encoder_update(ws);
    CHECK(double(st.enc_total) ==
          doctest::Approx(double(st.enc_dynamics)).epsilon(1e-9));
  }
  SUBCASE("default weights combine the three heads") {
    Agent agent(tiny_cfg(), env.spec(), 5);
    fill_buffer(agent, env, 64, rng);
    const std::vector<Window> ws =
        agent.buffer().sample_windows(8, 5, agent.rng());
    const LossStats st = agent.encoder_update(ws);
    CHECK(double(st.enc_total) ==
          doctest::Approx(1.0 * st.enc_dynamics + 0.1 * st.enc_reward +
                          0.1 * st.enc_terminal)
              .epsilon(1e-9));
    CHECK(st.enc_reward > 0);
  }
}

TEST_CASE("repeated encoder updates reduce the loss") {
  Pendulum env;
  Rng rng(21);
  Agent agent(tiny_cfg(), env.spec(), 7);
  fill_buffer(agent, env, 64, rng);
  const std::vector<Window> ws =
      agent.buffer().sample_windows(8, 5, agent.rng());
  const real first = agent.encoder_update(ws).enc_total;
  real last = first;
  for (int i = 0; i < 60; ++i) last = agent.encoder_update(ws).enc_total;
  CHECK(last < first);
}

TEST_CASE("critic targets and priorities match a hand computation") {
  AgentConfig cfg = tiny_cfg();
  cfg.target_policy_noise = 0;  // makes the TD target deterministic
  Pendulum env;
  Agent agent(cfg, env.spec(), 13);
  Rng rng(31);
  // synthetic two-episode buffer with a terminal at index 2
  const std::vector<real> rewards = {0.5, -1.0, 2.0, 0.3, 0.7, -0.2, 0.1, 0.0};
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    Transition t;
    t.state = {static_cast<real>(rng.uniform(-1, 1)),
               static_cast<real>(rng.uniform(-1, 1)),
               static_cast<real>(rng.uniform(-1, 1))};
    t.action = {static_cast<real>(rng.uniform(-2, 2))};
    t.reward = rewards[i];
    t.next_state = {static_cast<real>(rng.uniform(-1, 1)),
                    static_cast<real>(rng.uniform(-1, 1)),
                    static_cast<real>(rng.uniform(-1, 1))};
    t.terminal = i == 2;
    t.episode_id = i <= 2 ? 0 : 1;
    agent.observe(std::move(t));
  }
  const std::vector<Window> ws = {{0, 3, true},   // terminal inside
                                  {1, 2, true},   // shortened by the terminal
                                  {3, 5, false},  // open, capped at horizon 3
                                  {4, 4, false}};
  const real gamma = cfg.loss.gamma;
  const std::size_t Hq = cfg.loss.horizon_q;

  std::vector<double> expect_y, expect_q1;
  for (const Window& w : ws) {
    const std::size_t L = std::min<std::size_t>(w.length, Hq);
    double rsum = 0, disc = 1;
    for (std::size_t i = 0; i < L; ++i) {
      rsum += disc * double(agent.buffer().at(w.start + i).reward);
      disc *= gamma;
    }
    const double boot = w.terminal_within && w.length <= Hq ? 0 : disc;

    Tensor2 s0(1, 3), a0(1, 1), sH(1, 3);
    const Transition& tr0 = agent.buffer().at(w.start);
    for (std::size_t c = 0; c < 3; ++c) s0(0, c) = tr0.state[c];
    a0(0, 0) = tr0.action[0];
    const Transition& trL = agent.buffer().at(w.start + L - 1);
    for (std::size_t c = 0; c < 3; ++c) sH(0, c) = trL.next_state[c];

    const Tensor2 zsH = agent.enc_target.f.forward_plain(sH);
    const Tensor2 preH = agent.actor_target.forward_plain(zsH);
    Tensor2 aH(1, 1);
    aH(0, 0) = std::clamp(real(std::tanh(preH(0, 0)) * 2), real(-2), real(2));
    const Tensor2 zsaH = zsa_of(agent.enc_target, sH, aH);
    const double qmin = std::min(agent.q1_target.forward_plain(zsaH)(0, 0),
                                 agent.q2_target.forward_plain(zsaH)(0, 0));
    expect_y.push_back(rsum + boot * qmin);  // r_bar = r_bar_target = 1

    const Tensor2 zsa0 = zsa_of(agent.enc, s0, a0);
    expect_q1.push_back(double(agent.q1.forward_plain(zsa0)(0, 0)));
  }
  // expected loss uses the pre-update critic forwards
  std::vector<double> expect_q2;
  for (const Window& w : ws) {
    Tensor2 s0(1, 3), a0(1, 1);
    const Transition& tr0 = agent.buffer().at(w.start);
    for (std::size_t c = 0; c < 3; ++c) s0(0, c) = tr0.state[c];
    a0(0, 0) = tr0.action[0];
    const Tensor2 zsa0 = zsa_of(agent.enc, s0, a0);
    expect_q2.push_back(double(agent.q2.forward_plain(zsa0)(0, 0)));
  }
  auto huber = [](double e) {
    e = std::abs(e);
    return e <= 1 ? 0.5 * e * e : e - 0.5;
  };
  double expect_loss = 0;
  for (std::size_t b = 0; b < ws.size(); ++b)
    expect_loss += (huber(expect_q1[b] - expect_y[b]) +
                    huber(expect_q2[b] - expect_y[b])) /
                   double(ws.size());

  const LossStats st = agent.critic_update(ws);
  CHECK(double(st.critic) == doctest::Approx(expect_loss).epsilon(1e-6));
  for (std::size_t b = 0; b < ws.size(); ++b) {
    const double td = std::abs(expect_q1[b] - expect_y[b]);
    const double pr = std::max(std::pow(td, 0.4), 1.0);
    CHECK(double(agent.buffer().priority_at(ws[b].start)) ==
          doctest::Approx(pr).epsilon(1e-6));
  }
}

TEST_CASE("actor loss against a constant critic") {
  AgentConfig cfg = tiny_cfg();
  cfg.loss.lambda_pre_activ = 0;
  Pendulum env;
  Agent agent(cfg, env.spec(), 17);
  Rng rng(41);
  fill_buffer(agent, env, 32, rng);
  const real c = 2.5;
  for (BlockMLP* q : {&agent.q1, &agent.q2}) {
    for (MaskedParameter* p : q->parameters()) p->weight.fill(0);
    q->out_b.weight(0, 0) = c;
  }
  std::vector<Tensor2> before;
  for (MaskedParameter* p : agent.actor_net.parameters())
    before.push_back(p->weight);
  const std::vector<Window> ws =
      agent.buffer().sample_windows(8, 5, agent.rng());
  const LossStats st = agent.actor_update(ws);
  CHECK(double(st.actor) == doctest::Approx(-double(c)).epsilon(1e-9));
  // a constant critic offers no gradient, so the actor must not move
  std::size_t k = 0;
  for (MaskedParameter* p : agent.actor_net.parameters()) {
    for (std::size_t i = 0; i < p->weight.size(); ++i)
      CHECK(p->weight.data[i] == before[k].data[i]);
    ++k;
  }
}

TEST_CASE("actor update trains only the actor") {
  Pendulum env;
  Agent agent(tiny_cfg(), env.spec(), 19);
  Rng rng(43);
  fill_buffer(agent, env, 32, rng);
  std::vector<Tensor2> frozen;
  for (MaskedParameter* p : agent.enc.parameters()) frozen.push_back(p->weight);
  for (MaskedParameter* p : agent.q1.parameters()) frozen.push_back(p->weight);
  for (MaskedParameter* p : agent.q2.parameters()) frozen.push_back(p->weight);
  const std::vector<Window> ws =
      agent.buffer().sample_windows(8, 5, agent.rng());
  agent.actor_update(ws);
  std::size_t k = 0;
  auto check_same = [&](std::vector<MaskedParameter*> ps) {
    for (MaskedParameter* p : ps) {
      for (std::size_t i = 0; i < p->weight.size(); ++i)
        CHECK(p->weight.data[i] == frozen[k].data[i]);
      ++k;
    }
  };
  check_same(agent.enc.parameters());
  check_same(agent.q1.parameters());
  check_same(agent.q2.parameters());
  // and the actor itself did move
  bool moved = false;
  agent.actor_update(ws);
  CHECK(agent.masked_weight_violation() == 0);
  std::vector<Tensor2> a0;
  for (MaskedParameter* p : agent.actor_net.parameters())
    a0.push_back(p->weight);
  agent.actor_update(ws);
  k = 0;
  for (MaskedParameter* p : agent.actor_net.parameters()) {
    for (std::size_t i = 0; i < p->weight.size(); ++i)
      moved = moved || p->weight.data[i] != a0[k].data[i];
    ++k;
  }
  CHECK(moved);
}

TEST_CASE("action modes") {
  Pendulum env;
  Agent agent(tiny_cfg(), env.spec(), 23);
  const std::vector<real> obs = {real(0.8), real(-0.6), real(0.5)};
  SUBCASE("eval is deterministic and leaves the training stream alone") {
    std::ostringstream s_before;
    agent.rng().save(s_before);
    const std::vector<real> a1 = agent.act(obs, ActMode::eval);
    const std::vector<real> a2 = agent.act(obs, ActMode::eval);
    CHECK(a1 == a2);
    CHECK(std::abs(a1[0]) <= 2);
    std::ostringstream s_after;
    agent.rng().save(s_after);
    CHECK(s_before.str() == s_after.str());
  }
  SUBCASE("explore averages to the deterministic action") {
    const real det = agent.act(obs, ActMode::eval)[0];
    double sum = 0;
    const int n = 4000;
    for (int i = 0; i < n; ++i) {
      const real a = agent.act(obs, ActMode::explore)[0];
      CHECK(std::abs(a) <= 2);
      sum += a;
    }
    // noise std is 0.2 * half-range = 0.4; the mean of 4000 draws sits well
    // within 3 sigma/sqrt(n) of the deterministic action
    CHECK(std::abs(sum / n - double(det)) < 3 * 0.4 / std::sqrt(double(n)) + 0.01);
  }
  SUBCASE("warmup is uniform over the action box") {
    const int n = 1000;
    std::vector<double> xs;
    for (int i = 0; i < n; ++i) {
      const real a = agent.act(obs, ActMode::warmup)[0];
      CHECK(a >= -2);
      CHECK(a <= 2);
      xs.push_back(double(a));
    }
    std::sort(xs.begin(), xs.end());
    double d = 0;
    for (int i = 0; i < n; ++i) {
      const double cdf = (xs[i] + 2) / 4;
      d = std::max(d, std::abs(cdf - double(i + 1) / n));
      d = std::max(d, std::abs(cdf - double(i) / n));
    }
    CHECK(d < 1.63 / std::sqrt(double(n)));  // KS 1% critical value
  }
}

TEST_CASE("mixed-topology training keeps every regime invariant") {
  AgentConfig cfg = tiny_cfg();
  cfg.critic.regime.update_interval = 10;
  Pendulum env;
  Agent agent(cfg, env.spec(), 29);
  Rng rng(47);
  fill_buffer(agent, env, 300, rng);

  // dense encoder: every mask entry is one, before and after training
  for (MaskedParameter* p : agent.enc.parameters())
    for (real m : p->mask.data) CHECK(m == 1);

  std::vector<Tensor2> actor_masks;
  for (MaskedParameter* p : agent.actor_net.sparsifiable_layers())
    actor_masks.push_back(p->mask);
  const real critic_sparsity0 = agent.module_sparsity("critic").global_sparsity;
  CHECK(double(critic_sparsity0) == doctest::Approx(0.6).epsilon(0.01));
  CHECK(double(agent.module_sparsity("actor").global_sparsity) ==
        doctest::Approx(0.6).epsilon(0.01));
  CHECK(agent.module_sparsity("encoder").global_sparsity == 0);

  for (std::uint64_t t = 1; t <= 30; ++t) {
    const LossStats st = agent.train_step(t);
    CHECK(std::isfinite(st.enc_total));
    CHECK(std::isfinite(st.critic));
    CHECK(std::isfinite(st.actor));
    CHECK(agent.masked_weight_violation() == 0);
    // the DST exchange preserves the critic's active counts exactly
    CHECK(agent.module_sparsity("critic").global_sparsity == critic_sparsity0);
  }
  CHECK(agent.topo_critic.cumulative_dropped > 0);
  CHECK(agent.topo_critic.cumulative_dropped ==
        agent.topo_critic.cumulative_grown);

  // static sparse actor: masks are frozen for the whole run
  std::size_t k = 0;
  for (MaskedParameter* p : agent.actor_net.sparsifiable_layers()) {
    for (std::size_t i = 0; i < p->mask.size(); ++i)
      CHECK(p->mask.data[i] == actor_masks[k].data[i]);
    ++k;
  }
  for (MaskedParameter* p : agent.enc.parameters())
    for (real m : p->mask.data) CHECK(m == 1);
}

TEST_CASE("same seed and data give bit-identical training") {
  Pendulum env_a, env_b;
  Agent a(tiny_cfg(), env_a.spec(), 51);
  Agent b(tiny_cfg(), env_b.spec(), 51);
  Rng ra(61), rb(61);
  fill_buffer(a, env_a, 100, ra);
  fill_buffer(b, env_b, 100, rb);
  for (std::uint64_t t = 1; t <= 10; ++t) {
    const LossStats sa = a.train_step(t);
    const LossStats sb = b.train_step(t);
    CHECK(sa.enc_total == sb.enc_total);
    CHECK(sa.critic == sb.critic);
    CHECK(sa.actor == sb.actor);
    CHECK(sa.critic_grad_norm == sb.critic_grad_norm);
  }
  std::ostringstream oa(std::ios::binary), ob(std::ios::binary);
  a.save(oa);
  b.save(ob);
  CHECK(oa.str() == ob.str());
}

TEST_CASE("agent save/load resumes bit-identically") {
  Pendulum env_a, env_b;
  Agent a(tiny_cfg(), env_a.spec(), 53);
  Rng ra(67);
  fill_buffer(a, env_a, 100, ra);
  for (std::uint64_t t = 1; t <= 5; ++t) a.train_step(t);
  std::ostringstream os(std::ios::binary);
  a.save(os);

  Agent b(tiny_cfg(), env_b.spec(), 999);  // different seed, state overwritten
  std::istringstream is(os.str(), std::ios::binary);
  b.load(is);
  for (std::uint64_t t = 6; t <= 12; ++t) {
    const LossStats sa = a.train_step(t);
    const LossStats sb = b.train_step(t);
    CHECK(sa.enc_total == sb.enc_total);
    CHECK(sa.critic == sb.critic);
    CHECK(sa.actor == sb.actor);
  }
  std::ostringstream oa(std::ios::binary), ob(std::ios::binary);
  a.save(oa);
  b.save(ob);
  CHECK(oa.str() == ob.str());
}
