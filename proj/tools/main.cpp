#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sdrl/experiment.hpp"

namespace {

struct CommonFlags {
  std::string task;
  std::string preset;
  std::string config_file;
  std::string out;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::uint64_t steps = 0;
  bool steps_set = false;
  std::size_t scale = 0;
  bool scale_set = false;
  double sparsity = -1;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--task", f.task, "Environment: pendulum or pointmass");
  cmd->add_option("--preset", f.preset,
                  "Config preset: mst, dense-all or paper-default");
  cmd->add_option("--config", f.config_file, "Config file (key = value lines)");
  cmd->add_option("--seed", f.seed, "Random seed")
      ->each([&](const std::string&) { f.seed_set = true; });
  cmd->add_option("--steps", f.steps, "Environment steps")
      ->each([&](const std::string&) { f.steps_set = true; });
  cmd->add_option("--scale", f.scale, "Width/depth scale factor")
      ->each([&](const std::string&) { f.scale_set = true; });
  cmd->add_option("--sparsity", f.sparsity,
                  "Global sparsity for the non-dense modules");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--set", f.overrides, "Extra key=value overrides")
      ->take_all();
}

sdrl::RunConfig build_config(const CommonFlags& f) {
  sdrl::RunConfig cfg = f.preset.empty() ? sdrl::RunConfig::preset("mst")
                                         : sdrl::RunConfig::preset(f.preset);
  if (!f.config_file.empty()) cfg.load_file(f.config_file);
  if (!f.task.empty()) cfg.task = f.task;
  if (f.seed_set) cfg.seed = f.seed;
  if (f.steps_set) cfg.steps = f.steps;
  if (f.scale_set) cfg.agent.scale = f.scale;
  if (f.sparsity >= 0) {
    auto apply = [&](sdrl::ModuleSpec& m) {
      if (m.regime.kind != sdrl::RegimeKind::dense)
        m.regime.global_sparsity = static_cast<sdrl::real>(f.sparsity);
    };
    apply(cfg.agent.encoder);
    apply(cfg.agent.critic);
    apply(cfg.agent.actor);
  }
  if (!f.out.empty()) cfg.out_dir = f.out;
  for (const std::string& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("--set expects key=value, got " + kv);
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic-sparse actor-critic experiment runner"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  std::string resume_from;
  CLI::App* run = app.add_subcommand("run", "Train one agent");
  add_common(run, run_flags);
  run->add_option("--resume", resume_from, "Checkpoint to continue from");

  CommonFlags sweep_flags;
  std::string axis = "regime";
  std::vector<std::string> values;
  std::vector<std::uint64_t> seeds;
  CLI::App* sweep = app.add_subcommand("sweep", "Grid over one config axis");
  add_common(sweep, sweep_flags);
  sweep->add_option("--axis", axis, "Sweep axis: regime, arch or scale");
  sweep->add_option("--values", values, "Axis values")->required()->take_all();
  sweep->add_option("--seeds", seeds, "Seeds, one run per (value, seed)")
      ->required()
      ->take_all();

  std::string metrics_path, field = "eval_return", svg_out = "plot.svg";
  CLI::App* plot = app.add_subcommand("plot", "Render a metrics field as SVG");
  plot->add_option("--metrics", metrics_path, "metrics.jsonl path")->required();
  plot->add_option("--field", field, "Field to plot");
  plot->add_option("--out", svg_out, "Output SVG path");

  std::string ckpt_path;
  CLI::App* inspect =
      app.add_subcommand("inspect-checkpoint", "Summarize a checkpoint");
  inspect->add_option("checkpoint", ckpt_path, "Checkpoint file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const sdrl::RunConfig cfg = build_config(run_flags);
      const sdrl::RunOutcome o = sdrl::run_experiment(cfg, resume_from);
      if (o.diverged) {
        std::fprintf(stderr, "non-finite loss at step %llu\n",
                     static_cast<unsigned long long>(o.steps_done));
        return 2;
      }
      std::printf("steps %llu final_eval %.6f checkpoint %s\n",
                  static_cast<unsigned long long>(o.steps_done),
                  static_cast<double>(o.final_eval),
                  o.checkpoint_path.c_str());
    } else if (*sweep) {
      const sdrl::RunConfig cfg = build_config(sweep_flags);
      sdrl::run_sweep(cfg, {axis, values, seeds});
      std::printf("summary %s/summary.csv\n", cfg.out_dir.c_str());
    } else if (*plot) {
      sdrl::plot_metrics(metrics_path, field, svg_out);
      std::printf("wrote %s\n", svg_out.c_str());
    } else if (*inspect) {
      sdrl::inspect_checkpoint(ckpt_path, std::cout);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
