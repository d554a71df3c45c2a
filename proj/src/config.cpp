#include "sdrl/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace sdrl {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string kind_name(RegimeKind k) {
  switch (k) {
    case RegimeKind::dense: return "dense";
    case RegimeKind::sst: return "sst";
    case RegimeKind::dst: return "dst";
    case RegimeKind::s2d: return "s2d";
    case RegimeKind::d2s: return "d2s";
  }
  return "dense";
}

RegimeKind kind_from(const std::string& s) {
  if (s == "dense") return RegimeKind::dense;
  if (s == "sst") return RegimeKind::sst;
  if (s == "dst") return RegimeKind::dst;
  if (s == "s2d") return RegimeKind::s2d;
  if (s == "d2s") return RegimeKind::d2s;
  throw std::invalid_argument("unknown regime: " + s);
}

std::string fmt_real(real v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

RunConfig RunConfig::preset(const std::string& name) {
  RunConfig c;
  if (name == "mst") {
    c.agent = AgentConfig::desk_default();
  } else if (name == "dense-all") {
    c.agent = AgentConfig::desk_default();
    c.agent.encoder.regime = RegimeConfig{};
    c.agent.critic.regime = RegimeConfig{};
    c.agent.actor.regime = RegimeConfig{};
  } else if (name == "paper-default") {
    c.agent = AgentConfig::desk_default();
    c.agent.encoder.arch = ArchConfig::from_type(4);
    c.agent.critic.arch = ArchConfig::from_type(4);
    c.agent.actor.arch = ArchConfig::from_type(3);
    c.agent.encoder.regime = RegimeConfig{};
    c.agent.critic.regime = RegimeConfig{};
    c.agent.actor.regime = RegimeConfig{};
    c.agent.encoder.hidden_dim = 512;
    c.agent.critic.hidden_dim = 512;
    c.agent.actor.hidden_dim = 512;
    c.agent.zs_dim = 512;
    c.agent.zsa_dim = 512;
    c.agent.za_dim = 256;
    c.agent.batch_size = 256;
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
  return c;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto as_u64 = [&]() { return std::stoull(value); };
  auto as_real = [&]() { return static_cast<real>(std::stod(value)); };
  auto as_bool = [&]() {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw std::invalid_argument("bad bool for " + key + ": " + value);
  };

  auto module_of = [&](const std::string& prefix) -> ModuleSpec* {
    if (prefix == "encoder") return &agent.encoder;
    if (prefix == "critic") return &agent.critic;
    if (prefix == "actor") return &agent.actor;
    return nullptr;
  };

  if (key == "task") { task = value; return; }
  if (key == "seed") { seed = as_u64(); return; }
  if (key == "steps") { steps = as_u64(); return; }
  if (key == "out") { out_dir = value; return; }
  if (key == "eval.interval") { eval_interval = as_u64(); return; }
  if (key == "eval.episodes") { eval_episodes = as_u64(); return; }
  if (key == "metrics.interval") { metrics_interval = as_u64(); return; }
  if (key == "probe.interval") { probe_interval = as_u64(); return; }
  if (key == "probe.batch") { probe_batch = as_u64(); return; }
  if (key == "checkpoint.interval") { checkpoint_interval = as_u64(); return; }

  if (key == "agent.scale") { agent.scale = as_u64(); return; }
  if (key == "agent.critic_scale") { agent.critic_scale = as_u64(); return; }
  if (key == "agent.zs_dim") { agent.zs_dim = as_u64(); return; }
  if (key == "agent.zsa_dim") { agent.zsa_dim = as_u64(); return; }
  if (key == "agent.za_dim") { agent.za_dim = as_u64(); return; }
  if (key == "agent.batch_size") { agent.batch_size = as_u64(); return; }
  if (key == "agent.buffer_capacity") { agent.buffer_capacity = as_u64(); return; }
  if (key == "agent.reward_window") { agent.reward_window = as_u64(); return; }
  if (key == "agent.warmup_steps") { agent.warmup_steps = as_u64(); return; }
  if (key == "agent.target_update_freq") { agent.target_update_freq = as_u64(); return; }
  if (key == "agent.exploration_noise") { agent.exploration_noise = as_real(); return; }
  if (key == "agent.target_policy_noise") { agent.target_policy_noise = as_real(); return; }
  if (key == "agent.target_noise_clip") { agent.target_noise_clip = as_real(); return; }
  if (key == "agent.priority_exponent") { agent.priority_exponent = as_real(); return; }
  if (key == "agent.min_priority") { agent.min_priority = as_real(); return; }
  if (key == "agent.huber_delta") { agent.huber_delta = as_real(); return; }

  if (key == "agent.loss.gamma") { agent.loss.gamma = as_real(); return; }
  if (key == "agent.loss.horizon_enc") { agent.loss.horizon_enc = as_u64(); return; }
  if (key == "agent.loss.horizon_q") { agent.loss.horizon_q = as_u64(); return; }
  if (key == "agent.loss.lambda_dynamics") { agent.loss.lambda_dynamics = as_real(); return; }
  if (key == "agent.loss.lambda_reward") { agent.loss.lambda_reward = as_real(); return; }
  if (key == "agent.loss.lambda_terminal") { agent.loss.lambda_terminal = as_real(); return; }
  if (key == "agent.loss.lambda_pre_activ") { agent.loss.lambda_pre_activ = as_real(); return; }

  const auto dot = key.find('.');
  if (dot != std::string::npos) {
    ModuleSpec* m = module_of(key.substr(0, dot));
    if (m) {
      const std::string sub = key.substr(dot + 1);
      if (sub == "arch_type") {
        m->arch = ArchConfig::from_type(static_cast<int>(as_u64()),
                                        m->arch.residual_placement);
        return;
      }
      if (sub == "residual_placement") {
        if (value != "pre_layer" && value != "post_layer")
          throw std::invalid_argument("bad residual_placement: " + value);
        m->arch.residual_placement = value == "post_layer"
                                         ? ResidualPlacement::post_layer
                                         : ResidualPlacement::pre_layer;
        return;
      }
      if (sub == "hidden_dim") { m->hidden_dim = as_u64(); return; }
      if (sub == "num_blocks") { m->num_blocks = as_u64(); return; }
      if (sub == "opt.learning_rate") { m->opt.learning_rate = as_real(); return; }
      if (sub == "opt.weight_decay") { m->opt.weight_decay = as_real(); return; }
      if (sub == "opt.grad_clip_norm") {
        if (value == "none") m->opt.grad_clip_norm.reset();
        else m->opt.grad_clip_norm = as_real();
        return;
      }
      if (sub == "regime.kind") { m->regime.kind = kind_from(value); return; }
      if (sub == "regime.sparsity") { m->regime.global_sparsity = as_real(); return; }
      if (sub == "regime.allocation") {
        if (value == "er") m->regime.allocation = Allocation::er;
        else if (value == "uniform") m->regime.allocation = Allocation::uniform;
        else throw std::invalid_argument("bad allocation: " + value);
        return;
      }
      if (sub == "regime.zeta_initial") { m->regime.zeta_initial = as_real(); return; }
      if (sub == "regime.zeta_final") { m->regime.zeta_final = as_real(); return; }
      if (sub == "regime.update_interval") { m->regime.update_interval = as_u64(); return; }
      if (sub == "regime.exempt_io") { m->regime.exempt_io_layers = as_bool(); return; }
      if (sub == "regime.growth_includes_dropped") {
        m->regime.growth_includes_dropped = as_bool();
        return;
      }
      if (sub == "regime.t_start") { m->regime.schedule.t_start = as_u64(); return; }
      if (sub == "regime.t_end") { m->regime.schedule.t_end = as_u64(); return; }
      if (sub == "regime.lambda") { m->regime.schedule.lambda = as_real(); return; }
    }
  }
  throw std::invalid_argument("unknown config key: " + key);
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    lineno += 1;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected key = value");
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

std::map<std::string, std::string> RunConfig::dump() const {
  std::map<std::string, std::string> kv;
  kv["task"] = task;
  kv["seed"] = std::to_string(seed);
  kv["steps"] = std::to_string(steps);
  kv["out"] = out_dir;
  kv["eval.interval"] = std::to_string(eval_interval);
  kv["eval.episodes"] = std::to_string(eval_episodes);
  kv["metrics.interval"] = std::to_string(metrics_interval);
  kv["probe.interval"] = std::to_string(probe_interval);
  kv["probe.batch"] = std::to_string(probe_batch);
  kv["agent.scale"] = std::to_string(agent.scale);
  kv["agent.critic_scale"] = std::to_string(agent.critic_scale);
  kv["agent.zs_dim"] = std::to_string(agent.zs_dim);
  kv["agent.zsa_dim"] = std::to_string(agent.zsa_dim);
  kv["agent.za_dim"] = std::to_string(agent.za_dim);
  kv["agent.batch_size"] = std::to_string(agent.batch_size);
  kv["agent.buffer_capacity"] = std::to_string(agent.buffer_capacity);
  kv["agent.reward_window"] = std::to_string(agent.reward_window);
  kv["agent.warmup_steps"] = std::to_string(agent.warmup_steps);
  kv["agent.target_update_freq"] = std::to_string(agent.target_update_freq);
  kv["agent.exploration_noise"] = fmt_real(agent.exploration_noise);
  kv["agent.target_policy_noise"] = fmt_real(agent.target_policy_noise);
  kv["agent.target_noise_clip"] = fmt_real(agent.target_noise_clip);
  kv["agent.priority_exponent"] = fmt_real(agent.priority_exponent);
  kv["agent.min_priority"] = fmt_real(agent.min_priority);
  kv["agent.huber_delta"] = fmt_real(agent.huber_delta);
  kv["agent.loss.gamma"] = fmt_real(agent.loss.gamma);
  kv["agent.loss.horizon_enc"] = std::to_string(agent.loss.horizon_enc);
  kv["agent.loss.horizon_q"] = std::to_string(agent.loss.horizon_q);
  kv["agent.loss.lambda_dynamics"] = fmt_real(agent.loss.lambda_dynamics);
  kv["agent.loss.lambda_reward"] = fmt_real(agent.loss.lambda_reward);
  kv["agent.loss.lambda_terminal"] = fmt_real(agent.loss.lambda_terminal);
  kv["agent.loss.lambda_pre_activ"] = fmt_real(agent.loss.lambda_pre_activ);
  auto dump_module = [&](const std::string& p, const ModuleSpec& m) {
    kv[p + ".arch_type"] = std::to_string(m.arch.arch_type);
    kv[p + ".residual_placement"] =
        m.arch.residual_placement == ResidualPlacement::post_layer
            ? "post_layer"
            : "pre_layer";
    kv[p + ".hidden_dim"] = std::to_string(m.hidden_dim);
    kv[p + ".num_blocks"] = std::to_string(m.num_blocks);
    kv[p + ".opt.learning_rate"] = fmt_real(m.opt.learning_rate);
    kv[p + ".opt.weight_decay"] = fmt_real(m.opt.weight_decay);
    kv[p + ".opt.grad_clip_norm"] =
        m.opt.grad_clip_norm ? fmt_real(*m.opt.grad_clip_norm) : "none";
    kv[p + ".regime.kind"] = kind_name(m.regime.kind);
    kv[p + ".regime.sparsity"] = fmt_real(m.regime.global_sparsity);
    kv[p + ".regime.allocation"] =
        m.regime.allocation == Allocation::er ? "er" : "uniform";
    kv[p + ".regime.zeta_initial"] = fmt_real(m.regime.zeta_initial);
    kv[p + ".regime.zeta_final"] = fmt_real(m.regime.zeta_final);
    kv[p + ".regime.update_interval"] = std::to_string(m.regime.update_interval);
    kv[p + ".regime.exempt_io"] = m.regime.exempt_io_layers ? "true" : "false";
    kv[p + ".regime.growth_includes_dropped"] =
        m.regime.growth_includes_dropped ? "true" : "false";
    kv[p + ".regime.t_start"] = std::to_string(m.regime.schedule.t_start);
    kv[p + ".regime.t_end"] = std::to_string(m.regime.schedule.t_end);
    kv[p + ".regime.lambda"] = fmt_real(m.regime.schedule.lambda);
  };
  dump_module("encoder", agent.encoder);
  dump_module("critic", agent.critic);
  dump_module("actor", agent.actor);
  return kv;
}

std::string RunConfig::canonical() const {
  std::ostringstream os;
  // The output directory and checkpoint cadence do not affect training
  // behaviour, so they stay out of the canonical form (and the hash);
  // resumed runs may write elsewhere. checkpoint.interval is never dumped.
  for (const auto& [k, v] : dump())
    if (k != "out") os << k << " = " << v << "\n";
  return os.str();
}

std::uint64_t RunConfig::hash() const {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64
  for (char c : canonical()) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace sdrl
