#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <vector>

#include "sdrl/rng.hpp"
#include "sdrl/tensor.hpp"

namespace sdrl {

struct Transition {
  std::vector<real> state;
  std::vector<real> action;
  real reward = 0;
  std::vector<real> next_state;
  bool terminal = false;
  bool truncated = false;
  std::uint64_t episode_id = 0;
};

// Binary tree over priorities for O(log n) proportional sampling with a fixed
// floating-point summation order.
class SumTree {
 public:
  void resize(std::size_t n);
  void set(std::size_t i, real v);
  real get(std::size_t i) const;
  real total() const;
  std::size_t sample(real u) const;  // u in [0, total)
  std::size_t size() const { return n_; }

 private:
  std::size_t n_ = 0, base_ = 1;
  std::vector<real> tree_;
};

// Multi-step window into the buffer: transitions start .. start+length-1 all
// belong to one episode; terminal_within marks a terminal at the last slot.
struct Window {
  std::size_t start = 0;       // logical index, 0 = oldest
  std::size_t length = 0;      // <= requested horizon
  bool terminal_within = false;
};

// Priority ring buffer with horizon-window sampling. Priorities are stored
// already smoothed (caller applies |td|^alpha and the floor of 1).
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 1'000'000,
                        std::size_t reward_window = 100'000);

  void push(Transition t);
  std::size_t size() const { return count_; }

  const Transition& at(std::size_t logical) const;
  // Priority is addressed by the same logical index used in windows.
  void update_priority(std::size_t logical, real priority);
  real priority_at(std::size_t logical) const;

  // Prioritized draw of window start points. Windows crossing a truncation
  // boundary are rejected and redrawn. Throws if size() < batch.
  std::vector<Window> sample_windows(std::size_t batch, std::size_t horizon,
                                     Rng& rng);

  // Mean |reward| over the most recent reward_window transitions.
  real mean_abs_reward() const;
  real max_priority() const { return max_priority_; }

  void save(std::ostream& os) const;
  void load(std::istream& is);

 private:
  std::size_t physical(std::size_t logical) const;
  Window classify(std::size_t start, std::size_t horizon) const;

  std::size_t capacity_, reward_window_;
  std::vector<Transition> data_;
  std::size_t head_ = 0;   // next physical write slot
  std::size_t count_ = 0;
  SumTree priorities_;     // indexed by physical slot
  real max_priority_ = 1;
  double abs_reward_sum_ = 0;
  std::size_t reward_count_ = 0;
};

}  // namespace sdrl
