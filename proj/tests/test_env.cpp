#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "sdrl/env.hpp"

using namespace sdrl;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Builds the pendulum state blob directly so tests can inject exact states.
std::string pendulum_blob(real theta, real theta_dot, std::uint64_t steps = 0) {
  std::ostringstream os(std::ios::binary);
  os.write(reinterpret_cast<const char*>(&theta), sizeof(theta));
  os.write(reinterpret_cast<const char*>(&theta_dot), sizeof(theta_dot));
  os.write(reinterpret_cast<const char*>(&steps), sizeof(steps));
  return os.str();
}

std::string pointmass_blob(real x, real y, real vx, real vy, real gx, real gy,
                           std::uint64_t steps = 0) {
  std::ostringstream os(std::ios::binary);
  for (real v : {x, y, vx, vy, gx, gy})
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
  os.write(reinterpret_cast<const char*>(&steps), sizeof(steps));
  return os.str();
}

void inject(Env& env, const std::string& blob) {
  std::istringstream is(blob, std::ios::binary);
  env.load(is);
}

}  // namespace

TEST_CASE("make_env dispatch") {
  CHECK(make_env("pendulum")->spec().obs_dim == 3);
  CHECK(make_env("pointmass")->spec().obs_dim == 6);
  CHECK_THROWS(make_env("cartpole"));
}

TEST_CASE("same seed gives identical trajectories") {
  for (const char* task : {"pendulum", "pointmass"}) {
    auto a = make_env(task);
    auto b = make_env(task);
    Rng ra(99), rb(99);
    CHECK(a->reset(ra) == b->reset(rb));
    std::vector<real> act(a->spec().act_dim, real(0.3));
    for (int i = 0; i < 50; ++i) {
      const StepResult sa = a->step(act);
      const StepResult sb = b->step(act);
      CHECK(sa.obs == sb.obs);
      CHECK(sa.reward == sb.reward);
      CHECK(sa.terminal == sb.terminal);
      CHECK(sa.truncated == sb.truncated);
    }
  }
}

TEST_CASE("pendulum observation lies on the unit circle") {
  auto env = make_env("pendulum");
  Rng rng(5);
  std::vector<real> obs = env->reset(rng);
  for (int i = 0; i < 300; ++i) {
    CHECK(double(obs[0]) * obs[0] + double(obs[1]) * obs[1] ==
          doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::abs(obs[2]) <= 8 + 1e-12);
    obs = env->step({real(std::sin(i * 0.37)) * 2}).obs;
  }
}

TEST_CASE("pendulum reset angle is uniform over [-pi, pi]") {
  Pendulum env;
  Rng rng(31);
  const std::size_t n = 1000;
  std::vector<double> thetas;
  for (std::size_t i = 0; i < n; ++i) {
    env.reset(rng);
    thetas.push_back(double(env.theta()));
    CHECK(std::abs(env.theta()) <= kPi);
    CHECK(std::abs(env.theta_dot()) <= 1);
  }
  std::sort(thetas.begin(), thetas.end());
  // Kolmogorov-Smirnov against U(-pi, pi); 1.63/sqrt(n) is the 1% critical
  // value, far above anything a correct uniform draw produces here.
  double d = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double cdf = (thetas[i] + kPi) / (2 * kPi);
    d = std::max(d, std::abs(cdf - double(i + 1) / n));
    d = std::max(d, std::abs(cdf - double(i) / n));
  }
  CHECK(d < 1.63 / std::sqrt(double(n)));
}

TEST_CASE("pendulum reward: upright at rest with no torque is zero") {
  Pendulum env;
  inject(env, pendulum_blob(0, 0));
  const StepResult r = env.step({0});
  CHECK(r.reward == 0);
  // and the pendulum stays upright: sin(0) = 0, no torque
  CHECK(r.obs[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pendulum reward: hanging down costs pi^2") {
  Pendulum env;
  inject(env, pendulum_blob(real(-kPi), 0));
  const StepResult r = env.step({0});
  CHECK(double(r.reward) == doctest::Approx(-kPi * kPi).epsilon(1e-6));
}

TEST_CASE("pendulum reward includes velocity and action costs") {
  Pendulum env;
  inject(env, pendulum_blob(0, 2));
  const StepResult r = env.step({real(1.5)});
  CHECK(double(r.reward) ==
        doctest::Approx(-(0.1 * 4 + 0.001 * 2.25)).epsilon(1e-6));
}

TEST_CASE("pendulum actions are clamped to [-2, 2]") {
  Pendulum a, b;
  inject(a, pendulum_blob(real(0.5), 0));
  inject(b, pendulum_blob(real(0.5), 0));
  const StepResult ra = a.step({100});
  const StepResult rb = b.step({2});
  CHECK(ra.obs == rb.obs);
  CHECK(ra.reward == rb.reward);
}

TEST_CASE("pendulum truncates at 200 steps and never terminates") {
  auto env = make_env("pendulum");
  Rng rng(7);
  env->reset(rng);
  for (int i = 0; i < 199; ++i) {
    const StepResult r = env->step({0});
    CHECK(!r.terminal);
    CHECK(!r.truncated);
  }
  const StepResult last = env->step({0});
  CHECK(!last.terminal);
  CHECK(last.truncated);
}

TEST_CASE("pendulum semi-implicit Euler: one hand-computed step") {
  Pendulum env;
  const double th = 0.3, thd = -0.4, a = 1.0;
  inject(env, pendulum_blob(real(th), real(thd)));
  const StepResult r = env.step({real(a)});
  const double thd_next = thd + (15.0 * std::sin(th) + 3.0 * a) * 0.05;
  const double th_next = th + thd_next * 0.05;
  CHECK(double(r.obs[2]) == doctest::Approx(thd_next).epsilon(1e-6));
  CHECK(double(r.obs[0]) == doctest::Approx(std::cos(th_next)).epsilon(1e-6));
  CHECK(double(r.obs[1]) == doctest::Approx(std::sin(th_next)).epsilon(1e-6));
  CHECK(double(r.reward) ==
        doctest::Approx(-(th * th + 0.1 * thd * thd + 0.001 * a * a))
            .epsilon(1e-6));
}

TEST_CASE("pendulum wrong action dimension throws") {
  Pendulum env;
  CHECK_THROWS_AS(env.step({1, 2}), std::invalid_argument);
}

TEST_CASE("point mass at the goal terminates with near-zero reward") {
  PointMass env;
  inject(env, pointmass_blob(0.3f, -0.2f, 0, 0, 0.3f, -0.2f));
  const StepResult r = env.step({0, 0});
  CHECK(r.terminal);
  CHECK(std::abs(r.reward) < 1e-6);
}

TEST_CASE("point mass reward is the negative squared distance") {
  PointMass env;
  inject(env, pointmass_blob(0, 0, 0, 0, 0.6f, -0.8f));
  const StepResult r = env.step({0, 0});
  CHECK(double(r.reward) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(!r.terminal);
}

TEST_CASE("point mass double-integrator dynamics: one hand-computed step") {
  PointMass env;
  inject(env, pointmass_blob(0.1f, -0.1f, 0.5f, -0.5f, 1, 1));
  const StepResult r = env.step({1, real(-0.5)});
  const double vx = 0.5 + 1 * 0.05, vy = -0.5 + -0.5 * 0.05;
  const double x = 0.1 + vx * 0.05, y = -0.1 + vy * 0.05;
  CHECK(double(r.obs[0]) == doctest::Approx(x).epsilon(1e-6));
  CHECK(double(r.obs[1]) == doctest::Approx(y).epsilon(1e-6));
  CHECK(double(r.obs[2]) == doctest::Approx(vx).epsilon(1e-6));
  CHECK(double(r.obs[3]) == doctest::Approx(vy).epsilon(1e-6));
  const double dx = x - 1, dy = y - 1;
  CHECK(double(r.reward) == doctest::Approx(-(dx * dx + dy * dy)).epsilon(1e-6));
}

TEST_CASE("point mass truncates when the goal is never reached") {
  PointMass env;
  inject(env, pointmass_blob(-1, -1, 0, 0, 1, 1));
  StepResult r;
  for (int i = 0; i < 200; ++i) r = env.step({0, 0});
  CHECK(!r.terminal);
  CHECK(r.truncated);
}

TEST_CASE("env save/load round trip preserves the trajectory") {
  for (const char* task : {"pendulum", "pointmass"}) {
    auto a = make_env(task);
    Rng rng(13);
    a->reset(rng);
    std::vector<real> act(a->spec().act_dim, real(-0.7));
    for (int i = 0; i < 17; ++i) a->step(act);
    std::ostringstream os(std::ios::binary);
    a->save(os);
    auto b = make_env(task);
    std::istringstream is(os.str(), std::ios::binary);
    b->load(is);
    for (int i = 0; i < 50; ++i) {
      const StepResult sa = a->step(act);
      const StepResult sb = b->step(act);
      CHECK(sa.obs == sb.obs);
      CHECK(sa.reward == sb.reward);
      CHECK(sa.truncated == sb.truncated);
    }
  }
}
