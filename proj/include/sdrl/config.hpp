#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "sdrl/agent.hpp"

namespace sdrl {

// Flat dotted-key run configuration. Files hold one `key = value` per line
// (# comments); the same keys are accepted as CLI overrides.
struct RunConfig {
  std::string task = "pendulum";
  std::uint64_t seed = 0;
  std::uint64_t steps = 100'000;
  std::string out_dir = "out";
  std::uint64_t eval_interval = 5'000;
  std::size_t eval_episodes = 5;
  std::uint64_t metrics_interval = 500;
  std::uint64_t probe_interval = 5'000;
  std::size_t probe_batch = 256;
  std::uint64_t checkpoint_interval = 0;  // 0 = final checkpoint only
  AgentConfig agent;

  static RunConfig preset(const std::string& name);

  void set(const std::string& key, const std::string& value);
  void load_file(const std::string& path);

  // Sorted key=value dump; identical configs serialize identically.
  std::string canonical() const;
  std::uint64_t hash() const;  // FNV-1a over canonical()

 private:
  std::map<std::string, std::string> dump() const;
};

}  // namespace sdrl
