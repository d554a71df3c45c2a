#pragma once

#include <istream>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "sdrl/rng.hpp"
#include "sdrl/tensor.hpp"

namespace sdrl {

struct EnvSpec {
  std::size_t obs_dim = 0;
  std::size_t act_dim = 0;
  std::vector<real> act_low, act_high;
  std::uint64_t max_episode_steps = 200;
  real dt = 0.05;
};

struct StepResult {
  std::vector<real> obs;
  real reward = 0;
  bool terminal = false;
  bool truncated = false;
};

class Env {
 public:
  virtual ~Env() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual std::vector<real> reset(Rng& rng) = 0;
  // Actions outside the bounds are clamped.
  virtual StepResult step(const std::vector<real>& action) = 0;
  virtual void save(std::ostream& os) const = 0;
  virtual void load(std::istream& is) = 0;
};

// Torque-limited swing-up: state (theta, theta_dot), theta = 0 upright,
// semi-implicit Euler, reward -(wrap(theta)^2 + 0.1 theta_dot^2 + 0.001 a^2).
// Never terminates; truncates at max_episode_steps.
class Pendulum final : public Env {
 public:
  Pendulum();
  const EnvSpec& spec() const override { return spec_; }
  std::vector<real> reset(Rng& rng) override;
  StepResult step(const std::vector<real>& action) override;
  void save(std::ostream& os) const override;
  void load(std::istream& is) override;

  real theta() const { return theta_; }
  real theta_dot() const { return theta_dot_; }

 private:
  std::vector<real> observation() const;
  EnvSpec spec_;
  real theta_ = 0, theta_dot_ = 0;
  std::uint64_t steps_ = 0;
};

// Double integrator on the plane steering to a goal; reward -dist^2,
// terminal when dist < 0.05.
class PointMass final : public Env {
 public:
  PointMass();
  const EnvSpec& spec() const override { return spec_; }
  std::vector<real> reset(Rng& rng) override;
  StepResult step(const std::vector<real>& action) override;
  void save(std::ostream& os) const override;
  void load(std::istream& is) override;

 private:
  std::vector<real> observation() const;
  EnvSpec spec_;
  real x_ = 0, y_ = 0, vx_ = 0, vy_ = 0, gx_ = 0, gy_ = 0;
  std::uint64_t steps_ = 0;
};

std::unique_ptr<Env> make_env(const std::string& task);

}  // namespace sdrl
