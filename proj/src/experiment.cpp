#include "sdrl/experiment.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "sdrl/checkpoint.hpp"

namespace sdrl {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

EvalResult evaluate_policy(Agent& agent, const std::string& task,
                           std::uint64_t seed, std::size_t episodes) {
  EvalResult out;
  auto env = make_env(task);
  Rng rng(seed);
  for (std::size_t e = 0; e < episodes; ++e) {
    std::vector<real> obs = env->reset(rng);
    real ret = 0;
    while (true) {
      const StepResult sr = env->step(agent.act(obs, ActMode::eval));
      ret += sr.reward;
      if (sr.terminal || sr.truncated) break;
      obs = sr.obs;
    }
    out.returns.push_back(ret);
  }
  for (real r : out.returns) out.mean_return += r;
  out.mean_return /= real(out.returns.size());
  return out;
}

namespace {

std::uint64_t eval_seed(std::uint64_t seed, std::uint64_t t) {
  return seed ^ (0x9e3779b97f4a7c15ull * (t + 1));
}

struct RunState {
  std::uint64_t t = 0;
  std::uint64_t episode_id = 0;
  std::uint64_t completed_episodes = 0;
  real ep_return = 0;
  std::uint64_t ep_len = 0;
  std::vector<real> obs;
  real last_ep_return = 0;
  real last_eval = 0;
  std::uint64_t last_srank = 0;
  real dormant_encoder = 0, dormant_critic = 0, dormant_actor = 0;
  real param_l2 = 0;
};

void w64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
std::uint64_t r64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
void wreal(std::ostream& os, real v) {
  const double d = static_cast<double>(v);
  os.write(reinterpret_cast<const char*>(&d), sizeof(d));
}
real rreal(std::istream& is) {
  double d = 0;
  is.read(reinterpret_cast<char*>(&d), sizeof(d));
  return static_cast<real>(d);
}

void save_run_state(std::ostream& os, const RunState& s) {
  w64(os, s.t);
  w64(os, s.episode_id);
  w64(os, s.completed_episodes);
  wreal(os, s.ep_return);
  w64(os, s.ep_len);
  w64(os, s.obs.size());
  for (real v : s.obs) wreal(os, v);
  wreal(os, s.last_ep_return);
  wreal(os, s.last_eval);
  w64(os, s.last_srank);
  wreal(os, s.dormant_encoder);
  wreal(os, s.dormant_critic);
  wreal(os, s.dormant_actor);
  wreal(os, s.param_l2);
}

RunState load_run_state(std::istream& is) {
  RunState s;
  s.t = r64(is);
  s.episode_id = r64(is);
  s.completed_episodes = r64(is);
  s.ep_return = rreal(is);
  s.ep_len = r64(is);
  s.obs.resize(r64(is));
  for (real& v : s.obs) v = rreal(is);
  s.last_ep_return = rreal(is);
  s.last_eval = rreal(is);
  s.last_srank = r64(is);
  s.dormant_encoder = rreal(is);
  s.dormant_critic = rreal(is);
  s.dormant_actor = rreal(is);
  s.param_l2 = rreal(is);
  return s;
}

void write_run_checkpoint(const std::string& path, const RunConfig& cfg,
                          const RunState& state, const Env& env, Agent& agent) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
  write_checkpoint_header(os, {1, cfg.hash(), state.t});
  save_run_state(os, state);
  std::ostringstream env_blob;
  env.save(env_blob);
  const std::string blob = env_blob.str();
  w64(os, blob.size());
  os.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  agent.save(os);
  if (!os) throw std::runtime_error("failed writing checkpoint: " + path);
}

RunState read_run_checkpoint(const std::string& path, const RunConfig& cfg,
                             Env& env, Agent& agent) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  const CheckpointHeader h = read_checkpoint_header(is);
  if (h.config_hash != cfg.hash())
    throw std::runtime_error("checkpoint was produced by a different config");
  RunState s = load_run_state(is);
  std::string blob(r64(is), '\0');
  is.read(blob.data(), static_cast<std::streamsize>(blob.size()));
  std::istringstream env_blob(blob);
  env.load(env_blob);
  agent.load(is);
  return s;
}

}  // namespace

RunOutcome run_experiment(const RunConfig& cfg, const std::string& resume_from) {
  AgentConfig acfg = cfg.agent;
  acfg.total_steps = cfg.steps;

  auto env = make_env(cfg.task);
  Agent agent(acfg, env->spec(), cfg.seed);

  fs::create_directories(cfg.out_dir);
  {
    std::ofstream cf(fs::path(cfg.out_dir) / "config.txt");
    cf << cfg.canonical();
  }

  RunState state;
  if (!resume_from.empty()) {
    state = read_run_checkpoint(resume_from, cfg, *env, agent);
  } else {
    state.obs = env->reset(agent.rng());
  }

  std::ofstream metrics(fs::path(cfg.out_dir) / "metrics.jsonl",
                        resume_from.empty() ? std::ios::trunc : std::ios::app);
  const auto wall_start = std::chrono::steady_clock::now();

  auto probe_ready = [&]() {
    return agent.buffer().size() >= cfg.probe_batch && cfg.probe_batch > 0;
  };
  auto run_probe = [&]() {
    const std::size_t n = cfg.probe_batch;
    Tensor2 states(n, env->spec().obs_dim), actions(n, env->spec().act_dim);
    for (std::size_t i = 0; i < n; ++i) {
      const Transition& tr = agent.buffer().at(i);
      for (std::size_t c = 0; c < states.cols; ++c) states(i, c) = tr.state[c];
      for (std::size_t c = 0; c < actions.cols; ++c)
        actions(i, c) = tr.action[c];
    }
    const DiagnosticsProbe p = agent.probe(states, actions);
    state.last_srank = p.srank_zsa;
    state.dormant_encoder = p.dormant_encoder;
    state.dormant_critic = p.dormant_critic;
    state.dormant_actor = p.dormant_actor;
    state.param_l2 = p.param_l2;
  };

  RunOutcome outcome;
  LossStats last_losses;
  bool have_losses = false;

  auto emit_metrics = [&]() {
    ordered_json j;
    j["step"] = state.t;
    j["episode"] = state.completed_episodes;
    j["episode_return"] = state.last_ep_return;
    j["enc_total"] = last_losses.enc_total;
    j["enc_dynamics"] = last_losses.enc_dynamics;
    j["enc_reward"] = last_losses.enc_reward;
    j["enc_terminal"] = last_losses.enc_terminal;
    j["critic"] = last_losses.critic;
    j["actor"] = last_losses.actor;
    j["critic_grad_norm"] = last_losses.critic_grad_norm;
    j["r_bar"] = last_losses.r_bar;
    j["sparsity_encoder"] = agent.module_sparsity("encoder").global_sparsity;
    j["sparsity_critic"] = agent.module_sparsity("critic").global_sparsity;
    j["sparsity_actor"] = agent.module_sparsity("actor").global_sparsity;
    j["eval_return"] = state.last_eval;
    j["srank_zsa"] = state.last_srank;
    j["dormant_encoder"] = state.dormant_encoder;
    j["dormant_critic"] = state.dormant_critic;
    j["dormant_actor"] = state.dormant_actor;
    j["param_l2"] = state.param_l2;
    j["wall_time"] = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - wall_start)
                         .count();
    metrics << j.dump() << "\n";
    metrics.flush();
  };

  for (std::uint64_t t = state.t + 1; t <= cfg.steps; ++t) {
    state.t = t;
    const ActMode mode =
        t <= acfg.warmup_steps ? ActMode::warmup : ActMode::explore;
    const std::vector<real> action = agent.act(state.obs, mode);
    const StepResult sr = env->step(action);
    agent.observe(Transition{state.obs, action, sr.reward, sr.obs, sr.terminal,
                             sr.truncated, state.episode_id});
    state.ep_return += sr.reward;
    state.ep_len += 1;
    if (sr.terminal || sr.truncated) {
      state.last_ep_return = state.ep_return;
      state.completed_episodes += 1;
      state.episode_id += 1;
      state.ep_return = 0;
      state.ep_len = 0;
      state.obs = env->reset(agent.rng());
    } else {
      state.obs = sr.obs;
    }

    if (t > acfg.warmup_steps) {
      bool blew_up = false;
      try {
        last_losses = agent.train_step(t);
      } catch (const std::runtime_error& e) {
        // non-finite gradients abort the optimizer step
        std::cerr << "[run] step " << t << ": " << e.what() << "\n";
        blew_up = true;
      }
      have_losses = true;
      if (blew_up || !std::isfinite(last_losses.enc_total) ||
          !std::isfinite(last_losses.critic) ||
          !std::isfinite(last_losses.actor)) {
        outcome.diverged = true;
        outcome.steps_done = t;
        emit_metrics();
        return outcome;
      }
    }

    if (cfg.probe_interval && t % cfg.probe_interval == 0 && probe_ready())
      run_probe();
    if (cfg.eval_interval && t % cfg.eval_interval == 0)
      state.last_eval = evaluate_policy(agent, cfg.task,
                                        eval_seed(cfg.seed, t),
                                        cfg.eval_episodes)
                            .mean_return;
    if (cfg.metrics_interval && t % cfg.metrics_interval == 0) emit_metrics();
    if (cfg.checkpoint_interval && t % cfg.checkpoint_interval == 0 &&
        t < cfg.steps) {
      const fs::path p = fs::path(cfg.out_dir) /
                         ("checkpoint_" + std::to_string(t) + ".bin");
      write_run_checkpoint(p.string(), cfg, state, *env, agent);
    }
  }

  if (cfg.eval_interval == 0 || cfg.steps % cfg.eval_interval != 0)
    state.last_eval = evaluate_policy(agent, cfg.task,
                                      eval_seed(cfg.seed, cfg.steps),
                                      cfg.eval_episodes)
                          .mean_return;
  (void)have_losses;

  outcome.steps_done = cfg.steps;
  outcome.final_eval = state.last_eval;
  outcome.sparsity_encoder = agent.module_sparsity("encoder").global_sparsity;
  outcome.sparsity_critic = agent.module_sparsity("critic").global_sparsity;
  outcome.sparsity_actor = agent.module_sparsity("actor").global_sparsity;
  for (const MaskedParameter* p : agent.all_parameters())
    outcome.param_count += p->size();

  const fs::path ckpt = fs::path(cfg.out_dir) / "checkpoint.bin";
  write_run_checkpoint(ckpt.string(), cfg, state, *env, agent);
  outcome.checkpoint_path = ckpt.string();
  return outcome;
}

void run_sweep(const RunConfig& base, const SweepSpec& spec) {
  if (spec.seeds.empty())
    throw std::invalid_argument("sweep needs at least one seed");
  if (spec.values.empty())
    throw std::invalid_argument("sweep needs at least one axis value");
  fs::create_directories(base.out_dir);
  std::ofstream summary(fs::path(base.out_dir) / "summary.csv");
  summary << "axis,value,seeds,steps,mean_final_eval,diverged,"
             "sparsity_encoder,sparsity_critic,sparsity_actor,param_count\n";
  for (const std::string& value : spec.values) {
    double eval_sum = 0;
    bool any_diverged = false;
    RunOutcome last;
    for (std::uint64_t seed : spec.seeds) {
      RunConfig cfg = base;
      cfg.seed = seed;
      cfg.out_dir = (fs::path(base.out_dir) /
                     (spec.axis + "-" + value + "-seed" + std::to_string(seed)))
                        .string();
      if (spec.axis == "regime") {
        cfg.set("critic.regime.kind", value);
        cfg.set("actor.regime.kind", value);
        if (value == "dense") {
          cfg.set("critic.regime.sparsity", "0");
          cfg.set("actor.regime.sparsity", "0");
        }
      } else if (spec.axis == "arch") {
        cfg.set("encoder.arch_type", value);
        cfg.set("critic.arch_type", value);
        cfg.set("actor.arch_type", value);
      } else if (spec.axis == "scale") {
        cfg.set("agent.scale", value);
      } else {
        throw std::invalid_argument("unknown sweep axis: " + spec.axis);
      }
      last = run_experiment(cfg);
      eval_sum += last.final_eval;
      any_diverged = any_diverged || last.diverged;
    }
    summary << spec.axis << ',' << value << ',' << spec.seeds.size() << ','
            << last.steps_done << ',' << std::setprecision(17)
            << eval_sum / double(spec.seeds.size()) << ','
            << (any_diverged ? 1 : 0) << ',' << last.sparsity_encoder << ','
            << last.sparsity_critic << ',' << last.sparsity_actor << ','
            << last.param_count << "\n";
    summary.flush();
  }
}

void plot_metrics(const std::string& metrics_path, const std::string& field,
                  const std::string& out_svg) {
  std::ifstream in(metrics_path);
  if (!in) throw std::runtime_error("cannot open metrics: " + metrics_path);
  std::vector<double> xs, ys;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const ordered_json j = ordered_json::parse(line);
    if (!j.contains(field)) continue;
    xs.push_back(j.at("step").get<double>());
    ys.push_back(j.at(field).get<double>());
  }
  if (xs.empty()) throw std::runtime_error("no data for field: " + field);

  const double w = 800, h = 400, ml = 70, mr = 20, mt = 30, mb = 50;
  double xmin = xs.front(), xmax = xs.front(), ymin = ys.front(),
         ymax = ys.front();
  for (double v : xs) { xmin = std::min(xmin, v); xmax = std::max(xmax, v); }
  for (double v : ys) { ymin = std::min(ymin, v); ymax = std::max(ymax, v); }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  auto X = [&](double v) { return ml + (v - xmin) / (xmax - xmin) * (w - ml - mr); };
  auto Y = [&](double v) { return h - mb - (v - ymin) / (ymax - ymin) * (h - mt - mb); };

  std::ofstream out(out_svg);
  if (!out) throw std::runtime_error("cannot write: " + out_svg);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w
      << "' height='" << h << "'>\n"
      << "<rect width='100%' height='100%' fill='white'/>\n"
      << "<line x1='" << ml << "' y1='" << h - mb << "' x2='" << w - mr
      << "' y2='" << h - mb << "' stroke='black'/>\n"
      << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='"
      << h - mb << "' stroke='black'/>\n"
      << "<text x='" << w / 2 << "' y='" << h - 12
      << "' text-anchor='middle' font-size='14'>step</text>\n"
      << "<text x='" << w / 2 << "' y='18' text-anchor='middle' "
      << "font-size='14'>" << field << "</text>\n"
      << "<text x='" << ml << "' y='" << h - mb + 18
      << "' text-anchor='middle' font-size='11'>" << xmin << "</text>\n"
      << "<text x='" << w - mr << "' y='" << h - mb + 18
      << "' text-anchor='middle' font-size='11'>" << xmax << "</text>\n"
      << "<text x='" << ml - 6 << "' y='" << h - mb
      << "' text-anchor='end' font-size='11'>" << ymin << "</text>\n"
      << "<text x='" << ml - 6 << "' y='" << mt + 4
      << "' text-anchor='end' font-size='11'>" << ymax << "</text>\n"
      << "<polyline fill='none' stroke='steelblue' stroke-width='1.5' points='";
  for (std::size_t i = 0; i < xs.size(); ++i)
    out << X(xs[i]) << ',' << Y(ys[i]) << ' ';
  out << "'/>\n</svg>\n";
}

void inspect_checkpoint(const std::string& path, std::ostream& os) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  const CheckpointHeader h = read_checkpoint_header(is);
  os << "version " << h.version << "\n";
  os << "config_hash " << std::hex << h.config_hash << std::dec << "\n";
  os << "step " << h.step << "\n";
  load_run_state(is);
  std::string env_blob(r64(is), '\0');
  is.read(env_blob.data(), static_cast<std::streamsize>(env_blob.size()));

  os << "name rows cols active total sparsity step_count\n";
  std::size_t total = 0, active = 0;
  for (int group = 0; group < 5; ++group) {
    const std::uint64_t n = r64(is);
    for (std::uint64_t i = 0; i < n; ++i) {
      const MaskedParameter p = read_param_fragment(is);
      const std::size_t a = p.active_count();
      os << p.name << ' ' << p.weight.rows << ' ' << p.weight.cols << ' ' << a
         << ' ' << p.size() << ' ' << std::setprecision(6)
         << (p.size() ? 1.0 - double(a) / double(p.size()) : 0.0) << ' '
         << p.step_count << "\n";
      total += p.size();
      active += a;
    }
  }
  os << "total_parameters " << total << "\n";
  os << "global_sparsity " << std::setprecision(6)
     << (total ? 1.0 - double(active) / double(total) : 0.0) << "\n";
}

}  // namespace sdrl
