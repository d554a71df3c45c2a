#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "sdrl/replay.hpp"
#include "sdrl/rng.hpp"

using namespace sdrl;

namespace {

Transition make_tr(std::uint64_t episode, real reward = 0,
                   bool terminal = false, bool truncated = false) {
  Transition t;
  t.state = {real(episode), reward};
  t.action = {0.5};
  t.reward = reward;
  t.next_state = {real(episode), reward + 1};
  t.terminal = terminal;
  t.truncated = truncated;
  t.episode_id = episode;
  return t;
}

}  // namespace

TEST_CASE("sum tree stores and totals priorities") {
  SumTree tree;
  tree.resize(5);
  tree.set(0, 1);
  tree.set(2, 3);
  tree.set(4, 0.5);
  CHECK(tree.get(0) == 1);
  CHECK(tree.get(1) == 0);
  CHECK(tree.get(2) == 3);
  CHECK(tree.total() == doctest::Approx(4.5).epsilon(1e-12));
  tree.set(2, 1);
  CHECK(tree.total() == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("sum tree sampling respects cumulative boundaries") {
  SumTree tree;
  tree.resize(4);
  tree.set(0, 1);
  tree.set(1, 2);
  tree.set(2, 0);
  tree.set(3, 1);
  CHECK(tree.sample(0) == 0);
  CHECK(tree.sample(0.999) == 0);
  CHECK(tree.sample(1.0) == 1);
  CHECK(tree.sample(2.999) == 1);
  CHECK(tree.sample(3.0) == 3);  // zero-mass slot is skipped
  CHECK(tree.sample(3.999) == 3);
}

TEST_CASE("sum tree proportional sampling: 1:3 ratio within 2%") {
  SumTree tree;
  tree.resize(2);
  tree.set(0, 1);
  tree.set(1, 3);
  Rng rng(7);
  std::size_t hits0 = 0;
  const std::size_t n = 100'000;
  for (std::size_t i = 0; i < n; ++i) {
    const real u = static_cast<real>(rng.uniform01()) * tree.total();
    if (tree.sample(u) == 0) ++hits0;
  }
  CHECK(std::abs(double(hits0) / n - 0.25) < 0.02);
}

TEST_CASE("uniform priorities sample uniformly (chi-squared)") {
  SumTree tree;
  const std::size_t k = 10;
  tree.resize(k);
  for (std::size_t i = 0; i < k; ++i) tree.set(i, 1);
  Rng rng(11);
  std::vector<std::size_t> hits(k, 0);
  const std::size_t n = 100'000;
  for (std::size_t i = 0; i < n; ++i) {
    const real u = static_cast<real>(rng.uniform01()) * tree.total();
    hits[tree.sample(u)] += 1;
  }
  double chi2 = 0;
  const double expect = double(n) / k;
  for (std::size_t c : hits) chi2 += (c - expect) * (c - expect) / expect;
  // 9 degrees of freedom, 99.9th percentile is 27.88
  CHECK(chi2 < 27.88);
}

TEST_CASE("sampling a buffer smaller than the batch throws") {
  ReplayBuffer buf(64, 64);
  for (int i = 0; i < 3; ++i) buf.push(make_tr(0));
  Rng rng(1);
  CHECK_THROWS_AS(buf.sample_windows(4, 2, rng), std::runtime_error);
}

TEST_CASE("window classification") {
  ReplayBuffer buf(64, 64);
  // episode 0: 3 steps ending in terminal; episode 1: 2 steps then truncated;
  // episode 2: 3 open steps
  buf.push(make_tr(0));
  buf.push(make_tr(0));
  buf.push(make_tr(0, 0, /*terminal=*/true));
  buf.push(make_tr(1));
  buf.push(make_tr(1, 0, false, /*truncated=*/true));
  buf.push(make_tr(2));
  buf.push(make_tr(2));
  buf.push(make_tr(2));
  Rng rng(3);
  // horizon 3 from every start; verify through repeated draws that only valid
  // windows ever come back, with the expected shapes
  std::map<std::size_t, Window> seen;
  for (int i = 0; i < 400; ++i)
    for (const Window& w : buf.sample_windows(4, 3, rng)) {
      CHECK(w.length > 0);
      CHECK(w.length <= 3);
      seen[w.start] = w;
    }
  REQUIRE(seen.count(0) == 1);
  CHECK(seen[0].length == 3);
  CHECK(seen[0].terminal_within);
  REQUIRE(seen.count(1) == 1);  // shortened by the terminal
  CHECK(seen[1].length == 2);
  CHECK(seen[1].terminal_within);
  REQUIRE(seen.count(2) == 1);
  CHECK(seen[2].length == 1);
  CHECK(seen[2].terminal_within);
  // starts 3 and 4 cross the truncation boundary; start 4 would need the next
  // episode's slot, start 3's window hits truncation mid-way
  CHECK(seen.count(3) == 0);
  CHECK(seen.count(4) == 0);
  REQUIRE(seen.count(5) == 1);  // the only full open window of episode 2
  CHECK(seen[5].length == 3);
  CHECK(!seen[5].terminal_within);
  // starts 6 and 7 would run off the newest edge
  CHECK(seen.count(6) == 0);
  CHECK(seen.count(7) == 0);
}

TEST_CASE("a truncated transition at the window end is allowed") {
  ReplayBuffer buf(16, 16);
  buf.push(make_tr(0));
  buf.push(make_tr(0, 0, false, /*truncated=*/true));
  Rng rng(5);
  const std::vector<Window> ws = buf.sample_windows(2, 2, rng);
  for (const Window& w : ws) {
    CHECK(w.start == 0);
    CHECK(w.length == 2);
    CHECK(!w.terminal_within);
  }
}

TEST_CASE("priority updates bias sampling and respect logical indexing") {
  ReplayBuffer buf(8, 8);  // small capacity to force wraparound
  for (int i = 0; i < 12; ++i) buf.push(make_tr(std::uint64_t(i)));
  CHECK(buf.size() == 8);
  // logical 0 is the oldest remaining transition, which is episode 4
  CHECK(buf.at(0).episode_id == 4);
  CHECK(buf.at(7).episode_id == 11);
  for (std::size_t l = 0; l < 8; ++l) buf.update_priority(l, 1e-6f);
  buf.update_priority(3, 1000);
  CHECK(buf.priority_at(3) == 1000);
  CHECK(buf.max_priority() == 1000);
  Rng rng(9);
  std::size_t hits = 0, draws = 0;
  for (int i = 0; i < 200; ++i)
    for (const Window& w : buf.sample_windows(4, 1, rng)) {
      ++draws;
      if (w.start == 3) ++hits;
    }
  CHECK(double(hits) / double(draws) > 0.99);
}

TEST_CASE("new transitions enter at the running max priority") {
  ReplayBuffer buf(8, 8);
  buf.push(make_tr(0));
  buf.update_priority(0, 5);
  buf.push(make_tr(0));
  CHECK(buf.priority_at(1) == 5);
}

TEST_CASE("mean absolute reward over the recent window") {
  ReplayBuffer buf(16, 4);
  buf.push(make_tr(0, 100));  // will age out of the window
  buf.push(make_tr(0, 1));
  buf.push(make_tr(0, -3));
  buf.push(make_tr(0, 2));
  buf.push(make_tr(0, 0));
  CHECK(buf.mean_abs_reward() == doctest::Approx(1.5).epsilon(1e-12));
  ReplayBuffer empty(4, 4);
  CHECK(empty.mean_abs_reward() == 0);
}

TEST_CASE("save/load round trip is bit-exact") {
  ReplayBuffer buf(8, 8);
  Rng rng(17);
  for (int i = 0; i < 11; ++i) {
    Transition t = make_tr(std::uint64_t(i / 3),
                           static_cast<real>(rng.uniform(-2, 2)), i % 3 == 2);
    buf.push(std::move(t));
  }
  buf.update_priority(2, 7.25);
  buf.update_priority(5, 0.5);
  std::ostringstream os(std::ios::binary);
  buf.save(os);
  ReplayBuffer loaded(1, 1);
  std::istringstream is(os.str(), std::ios::binary);
  loaded.load(is);
  REQUIRE(loaded.size() == buf.size());
  for (std::size_t l = 0; l < buf.size(); ++l) {
    const Transition& a = buf.at(l);
    const Transition& b = loaded.at(l);
    CHECK(a.state == b.state);
    CHECK(a.action == b.action);
    CHECK(a.reward == b.reward);
    CHECK(a.next_state == b.next_state);
    CHECK(a.terminal == b.terminal);
    CHECK(a.truncated == b.truncated);
    CHECK(a.episode_id == b.episode_id);
    CHECK(loaded.priority_at(l) == buf.priority_at(l));
  }
  CHECK(loaded.max_priority() == buf.max_priority());
  CHECK(loaded.mean_abs_reward() == buf.mean_abs_reward());
  // identical draws after reload
  Rng ra(23), rb(23);
  const std::vector<Window> wa = buf.sample_windows(4, 2, ra);
  const std::vector<Window> wb = loaded.sample_windows(4, 2, rb);
  for (std::size_t i = 0; i < wa.size(); ++i) {
    CHECK(wa[i].start == wb[i].start);
    CHECK(wa[i].length == wb[i].length);
  }
}
