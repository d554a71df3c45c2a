#include "sdrl/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sdrl {

namespace {

constexpr real kPi = 3.14159265358979323846;

real wrap_angle(real th) {
  // wrap to [-pi, pi]
  th = std::fmod(th + kPi, 2 * kPi);
  if (th < 0) th += 2 * kPi;
  return th - kPi;
}

real clamp_action(real a, real lo, real hi) { return std::clamp(a, lo, hi); }

}  // namespace

Pendulum::Pendulum() {
  spec_.obs_dim = 3;
  spec_.act_dim = 1;
  spec_.act_low = {-2};
  spec_.act_high = {2};
  spec_.max_episode_steps = 200;
  spec_.dt = 0.05;
}

std::vector<real> Pendulum::observation() const {
  const real th = wrap_angle(theta_);
  return {std::cos(th), std::sin(th), theta_dot_};
}

std::vector<real> Pendulum::reset(Rng& rng) {
  theta_ = static_cast<real>(rng.uniform(-kPi, kPi));
  theta_dot_ = static_cast<real>(rng.uniform(-1, 1));
  steps_ = 0;
  return observation();
}

StepResult Pendulum::step(const std::vector<real>& action) {
  if (action.size() != 1) throw std::invalid_argument("pendulum action dim");
  const real g = 10, m = 1, l = 1;
  const real a = clamp_action(action[0], -2, 2);
  const real th = wrap_angle(theta_);
  StepResult r;
  r.reward = -(th * th + real(0.1) * theta_dot_ * theta_dot_ +
               real(0.001) * a * a);
  // semi-implicit Euler
  theta_dot_ += (real(3) * g / (2 * l) * std::sin(th) +
                 real(3) / (m * l * l) * a) *
                spec_.dt;
  theta_dot_ = std::clamp(theta_dot_, real(-8), real(8));
  theta_ = th + theta_dot_ * spec_.dt;
  steps_ += 1;
  r.obs = observation();
  r.terminal = false;
  r.truncated = steps_ >= spec_.max_episode_steps;
  return r;
}

void Pendulum::save(std::ostream& os) const {
  os.write(reinterpret_cast<const char*>(&theta_), sizeof(theta_));
  os.write(reinterpret_cast<const char*>(&theta_dot_), sizeof(theta_dot_));
  os.write(reinterpret_cast<const char*>(&steps_), sizeof(steps_));
}

void Pendulum::load(std::istream& is) {
  is.read(reinterpret_cast<char*>(&theta_), sizeof(theta_));
  is.read(reinterpret_cast<char*>(&theta_dot_), sizeof(theta_dot_));
  is.read(reinterpret_cast<char*>(&steps_), sizeof(steps_));
}

PointMass::PointMass() {
  spec_.obs_dim = 6;
  spec_.act_dim = 2;
  spec_.act_low = {-1, -1};
  spec_.act_high = {1, 1};
  spec_.max_episode_steps = 200;
  spec_.dt = 0.05;
}

std::vector<real> PointMass::observation() const {
  return {x_, y_, vx_, vy_, gx_, gy_};
}

std::vector<real> PointMass::reset(Rng& rng) {
  x_ = static_cast<real>(rng.uniform(-1, 1));
  y_ = static_cast<real>(rng.uniform(-1, 1));
  vx_ = vy_ = 0;
  gx_ = static_cast<real>(rng.uniform(-1, 1));
  gy_ = static_cast<real>(rng.uniform(-1, 1));
  steps_ = 0;
  return observation();
}

StepResult PointMass::step(const std::vector<real>& action) {
  if (action.size() != 2) throw std::invalid_argument("pointmass action dim");
  const real ax = clamp_action(action[0], -1, 1);
  const real ay = clamp_action(action[1], -1, 1);
  vx_ = std::clamp(vx_ + ax * spec_.dt, real(-2), real(2));
  vy_ = std::clamp(vy_ + ay * spec_.dt, real(-2), real(2));
  x_ = std::clamp(x_ + vx_ * spec_.dt, real(-2), real(2));
  y_ = std::clamp(y_ + vy_ * spec_.dt, real(-2), real(2));
  steps_ += 1;
  const real dx = x_ - gx_, dy = y_ - gy_;
  const real dist2 = dx * dx + dy * dy;
  StepResult r;
  r.obs = observation();
  r.reward = -dist2;
  r.terminal = std::sqrt(dist2) < real(0.05);
  r.truncated = !r.terminal && steps_ >= spec_.max_episode_steps;
  return r;
}

void PointMass::save(std::ostream& os) const {
  for (const real* v : {&x_, &y_, &vx_, &vy_, &gx_, &gy_})
    os.write(reinterpret_cast<const char*>(v), sizeof(real));
  os.write(reinterpret_cast<const char*>(&steps_), sizeof(steps_));
}

void PointMass::load(std::istream& is) {
  for (real* v : {&x_, &y_, &vx_, &vy_, &gx_, &gy_})
    is.read(reinterpret_cast<char*>(v), sizeof(real));
  is.read(reinterpret_cast<char*>(&steps_), sizeof(steps_));
}

std::unique_ptr<Env> make_env(const std::string& task) {
  if (task == "pendulum") return std::make_unique<Pendulum>();
  if (task == "pointmass") return std::make_unique<PointMass>();
  throw std::invalid_argument("unknown task: " + task);
}

}  // namespace sdrl
