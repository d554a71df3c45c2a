#include "sdrl/replay.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sdrl {

void SumTree::resize(std::size_t n) {
  n_ = n;
  base_ = 1;
  while (base_ < n) base_ <<= 1;
  tree_.assign(2 * base_, 0);
}

void SumTree::set(std::size_t i, real v) {
  std::size_t node = base_ + i;
  tree_[node] = v;
  node >>= 1;
  while (node >= 1) {
    tree_[node] = tree_[2 * node] + tree_[2 * node + 1];
    if (node == 1) break;
    node >>= 1;
  }
}

real SumTree::get(std::size_t i) const { return tree_[base_ + i]; }

real SumTree::total() const { return tree_.size() > 1 ? tree_[1] : 0; }

std::size_t SumTree::sample(real u) const {
  std::size_t node = 1;
  while (node < base_) {
    const real left = tree_[2 * node];
    if (u < left) {
      node = 2 * node;
    } else {
      u -= left;
      node = 2 * node + 1;
    }
  }
  return std::min(node - base_, n_ ? n_ - 1 : 0);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::size_t reward_window)
    : capacity_(capacity),
      reward_window_(std::min(reward_window, capacity)),
      data_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be > 0");
  priorities_.resize(capacity);
}

std::size_t ReplayBuffer::physical(std::size_t logical) const {
  return (head_ + capacity_ - count_ + logical) % capacity_;
}

void ReplayBuffer::push(Transition t) {
  if (reward_count_ == reward_window_)
    abs_reward_sum_ -= std::abs(at(count_ - reward_window_).reward);
  else
    reward_count_ += 1;
  abs_reward_sum_ += std::abs(t.reward);

  data_[head_] = std::move(t);
  priorities_.set(head_, max_priority_);
  head_ = (head_ + 1) % capacity_;
  if (count_ < capacity_) count_ += 1;
}

const Transition& ReplayBuffer::at(std::size_t logical) const {
  if (logical >= count_) throw std::out_of_range("replay index");
  return data_[physical(logical)];
}

void ReplayBuffer::update_priority(std::size_t logical, real priority) {
  priorities_.set(physical(logical), priority);
  max_priority_ = std::max(max_priority_, priority);
}

real ReplayBuffer::priority_at(std::size_t logical) const {
  return priorities_.get(physical(logical));
}

Window ReplayBuffer::classify(std::size_t start, std::size_t horizon) const {
  Window w;
  w.start = start;
  const std::uint64_t ep = at(start).episode_id;
  for (std::size_t i = 0; i < horizon; ++i) {
    if (start + i >= count_) return {};  // runs off the newest edge
    const Transition& t = at(start + i);
    if (t.episode_id != ep) return {};  // crossed a truncation boundary
    if (t.terminal) {
      w.length = i + 1;
      w.terminal_within = true;
      return w;
    }
    if (t.truncated && i + 1 < horizon) return {};  // next slot is a new episode
  }
  w.length = horizon;
  return w;
}

std::vector<Window> ReplayBuffer::sample_windows(std::size_t batch,
                                                 std::size_t horizon,
                                                 Rng& rng) {
  if (count_ < batch)
    throw std::runtime_error("replay buffer smaller than batch");
  const std::size_t oldest = (head_ + capacity_ - count_) % capacity_;
  std::vector<Window> out;
  out.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    Window w;
    for (int attempt = 0; attempt < 256; ++attempt) {
      const real u =
          static_cast<real>(rng.uniform01()) * priorities_.total();
      const std::size_t phys = priorities_.sample(u);
      const std::size_t logical = (phys + capacity_ - oldest) % capacity_;
      if (logical >= count_) continue;
      w = classify(logical, horizon);
      if (w.length > 0) break;
    }
    if (w.length == 0) {
      // Deterministic fallback: walk back from the newest full window.
      for (std::size_t s = count_ - std::min(count_, horizon);; --s) {
        w = classify(s, horizon);
        if (w.length > 0) break;
        if (s == 0) throw std::runtime_error("no valid replay window");
      }
    }
    out.push_back(w);
  }
  return out;
}

real ReplayBuffer::mean_abs_reward() const {
  if (reward_count_ == 0) return 0;
  return static_cast<real>(abs_reward_sum_ /
                           static_cast<double>(reward_count_));
}

namespace {

void write_vec(std::ostream& os, const std::vector<real>& v) {
  const std::uint64_t n = v.size();
  os.write(reinterpret_cast<const char*>(&n), sizeof(n));
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(n * sizeof(real)));
}

std::vector<real> read_vec(std::istream& is) {
  std::uint64_t n = 0;
  is.read(reinterpret_cast<char*>(&n), sizeof(n));
  std::vector<real> v(n);
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(n * sizeof(real)));
  return v;
}

}  // namespace

void ReplayBuffer::save(std::ostream& os) const {
  auto w64 = [&](std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
  };
  w64(capacity_);
  w64(reward_window_);
  w64(head_);
  w64(count_);
  os.write(reinterpret_cast<const char*>(&max_priority_),
           sizeof(max_priority_));
  os.write(reinterpret_cast<const char*>(&abs_reward_sum_),
           sizeof(abs_reward_sum_));
  w64(reward_count_);
  for (std::size_t l = 0; l < count_; ++l) {
    const Transition& t = at(l);
    write_vec(os, t.state);
    write_vec(os, t.action);
    os.write(reinterpret_cast<const char*>(&t.reward), sizeof(t.reward));
    write_vec(os, t.next_state);
    const std::uint8_t flags =
        (t.terminal ? 1 : 0) | (t.truncated ? 2 : 0);
    os.write(reinterpret_cast<const char*>(&flags), sizeof(flags));
    w64(t.episode_id);
    const real pr = priority_at(l);
    os.write(reinterpret_cast<const char*>(&pr), sizeof(pr));
  }
}

void ReplayBuffer::load(std::istream& is) {
  auto r64 = [&]() {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  };
  capacity_ = r64();
  reward_window_ = r64();
  const std::size_t head = r64();
  const std::size_t count = r64();
  is.read(reinterpret_cast<char*>(&max_priority_), sizeof(max_priority_));
  is.read(reinterpret_cast<char*>(&abs_reward_sum_), sizeof(abs_reward_sum_));
  const std::size_t reward_count = r64();
  data_.assign(capacity_, {});
  priorities_.resize(capacity_);
  head_ = head;
  count_ = count;
  reward_count_ = reward_count;
  const std::size_t oldest = (head_ + capacity_ - count_) % capacity_;
  for (std::size_t l = 0; l < count_; ++l) {
    Transition t;
    t.state = read_vec(is);
    t.action = read_vec(is);
    is.read(reinterpret_cast<char*>(&t.reward), sizeof(t.reward));
    t.next_state = read_vec(is);
    std::uint8_t flags = 0;
    is.read(reinterpret_cast<char*>(&flags), sizeof(flags));
    t.terminal = flags & 1;
    t.truncated = flags & 2;
    t.episode_id = r64();
    real pr = 0;
    is.read(reinterpret_cast<char*>(&pr), sizeof(pr));
    const std::size_t phys = (oldest + l) % capacity_;
    data_[phys] = std::move(t);
    priorities_.set(phys, pr);
  }
}

}  // namespace sdrl
