#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "sdrl/agent.hpp"
#include "sdrl/config.hpp"
#include "sdrl/env.hpp"

namespace sdrl {

struct EvalResult {
  real mean_return = 0;
  std::vector<real> returns;
};

// Deterministic rollouts with noise-free actions on a fresh environment;
// does not touch the agent's RNG stream.
EvalResult evaluate_policy(Agent& agent, const std::string& task,
                           std::uint64_t seed, std::size_t episodes);

struct RunOutcome {
  std::uint64_t steps_done = 0;
  real final_eval = 0;
  bool diverged = false;
  std::string checkpoint_path;
  real sparsity_encoder = 0, sparsity_critic = 0, sparsity_actor = 0;
  std::size_t param_count = 0;
};

// Full training run: writes config.txt, metrics.jsonl and checkpoint.bin under
// cfg.out_dir. resume_from continues an earlier run bit-identically.
RunOutcome run_experiment(const RunConfig& cfg,
                          const std::string& resume_from = "");

struct SweepSpec {
  std::string axis;  // "regime" | "arch" | "scale"
  std::vector<std::string> values;
  std::vector<std::uint64_t> seeds;
};

// One run per (axis value, seed) under cfg.out_dir/<axis>-<value>-seed<k>;
// writes summary.csv with one row per value, averaged over seeds.
void run_sweep(const RunConfig& base, const SweepSpec& spec);

// Line chart of one metrics field over steps, written as SVG.
void plot_metrics(const std::string& metrics_path, const std::string& field,
                  const std::string& out_svg);

// Prints header info and a per-parameter table for a run checkpoint.
void inspect_checkpoint(const std::string& path, std::ostream& os);

}  // namespace sdrl
