#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "sdrl/diagnostics.hpp"
#include "sdrl/rng.hpp"
#include "sdrl/topology.hpp"

using namespace sdrl;

namespace {

// Independent oracle: symmetric Jacobi eigensolve of the Gram matrix A^T A,
// singular values are the square roots of its eigenvalues.
std::vector<double> singular_values_gram(const Tensor2& a) {
  const std::size_t n = a.cols;
  std::vector<double> g(n * n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0;
      for (std::size_t r = 0; r < a.rows; ++r)
        s += double(a(r, i)) * double(a(r, j));
      g[i * n + j] = s;
    }
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += g[p * n + q] * g[p * n + q];
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = g[p * n + q];
        if (std::abs(apq) < 1e-300) continue;
        const double app = g[p * n + p], aqq = g[q * n + q];
        const double theta = (aqq - app) / (2 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const double gip = g[i * n + p], giq = g[i * n + q];
          g[i * n + p] = c * gip - s * giq;
          g[i * n + q] = s * gip + c * giq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double gpi = g[p * n + i], gqi = g[q * n + i];
          g[p * n + i] = c * gpi - s * gqi;
          g[q * n + i] = s * gpi + c * gqi;
        }
      }
  }
  std::vector<double> sv;
  for (std::size_t i = 0; i < n; ++i)
    sv.push_back(std::sqrt(std::max(0.0, g[i * n + i])));
  std::sort(sv.rbegin(), sv.rend());
  return sv;
}

std::size_t srank_oracle(const Tensor2& a, double delta) {
  const std::vector<double> sv = singular_values_gram(a);
  double total = 0;
  for (double v : sv) total += v;
  if (total == 0) return 0;
  double cum = 0;
  for (std::size_t k = 0; k < sv.size(); ++k) {
    cum += sv[k];
    if (cum / total >= 1 - delta) return k + 1;
  }
  return sv.size();
}

Tensor2 random_tensor(std::size_t r, std::size_t c, Rng& rng) {
  Tensor2 t(r, c);
  for (real& v : t.data) v = static_cast<real>(rng.normal());
  return t;
}

}  // namespace

TEST_CASE("rank-1 matrix has srank 1") {
  Rng rng(1);
  Tensor2 a(16, 8);
  std::vector<real> u(16), v(8);
  for (real& x : u) x = static_cast<real>(rng.normal());
  for (real& x : v) x = static_cast<real>(rng.normal());
  for (std::size_t i = 0; i < 16; ++i)
    for (std::size_t j = 0; j < 8; ++j) a(i, j) = u[i] * v[j];
  CHECK(srank(a) == 1);
}

TEST_CASE("identity matrix srank is ceil((1-delta) n)") {
  Tensor2 eye(100, 100);
  for (std::size_t i = 0; i < 100; ++i) eye(i, i) = 1;
  CHECK(srank(eye, 0.01) == 99);
}

TEST_CASE("srank matches the Gram-matrix oracle on random matrices") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t r = 8 + rng.uniform_index(56);
    const std::size_t c = 4 + rng.uniform_index(28);
    const Tensor2 a = random_tensor(r, c, rng);
    CHECK(srank(a, 0.01) == srank_oracle(a, 0.01));
    CHECK(srank(a, 0.1) == srank_oracle(a, 0.1));
  }
  // the documented 64x32 case
  const Tensor2 a = random_tensor(64, 32, rng);
  CHECK(srank(a) == srank_oracle(a, 0.01));
}

TEST_CASE("singular values match the oracle numerically") {
  Rng rng(3);
  const Tensor2 a = random_tensor(20, 12, rng);
  const std::vector<real> sv = singular_values(a);
  const std::vector<double> expect = singular_values_gram(a);
  REQUIRE(sv.size() == expect.size());
  for (std::size_t i = 0; i < sv.size(); ++i)
    CHECK(double(sv[i]) == doctest::Approx(expect[i]).epsilon(1e-8));
}

TEST_CASE("srank is invariant to scaling and column permutation") {
  Rng rng(4);
  Tensor2 a = random_tensor(24, 10, rng);
  const std::size_t base = srank(a);
  Tensor2 scaled = a;
  for (real& v : scaled.data) v *= 7.5;
  CHECK(srank(scaled) == base);
  Tensor2 perm(24, 10);
  for (std::size_t i = 0; i < 24; ++i)
    for (std::size_t j = 0; j < 10; ++j) perm(i, j) = a(i, (j + 3) % 10);
  CHECK(srank(perm) == base);
}

TEST_CASE("all-zero features give srank 0") {
  CHECK(srank(Tensor2(8, 8)) == 0);
}

TEST_CASE("srank rejects bad delta") {
  Tensor2 a(4, 4, 1);
  CHECK_THROWS(srank(a, 0));
  CHECK_THROWS(srank(a, 1));
  CHECK_THROWS(srank(a, -0.5));
}

TEST_CASE("dormant ratio: hand case") {
  // batch-mean |h| per neuron: 0, 0.1, 1, 3 -> layer mean 1.025
  Tensor2 h(2, 4);
  h(0, 0) = 0; h(1, 0) = 0;
  h(0, 1) = 0.1; h(1, 1) = -0.1;
  h(0, 2) = 1; h(1, 2) = 1;
  h(0, 3) = 3; h(1, 3) = -3;
  CHECK(dormant_ratio(h, 0.025) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("dormant ratio: an always-zero neuron is dormant for any tau") {
  Rng rng(5);
  Tensor2 h = random_tensor(16, 6, rng);
  for (std::size_t i = 0; i < 16; ++i) h(i, 2) = 0;
  CHECK(dormant_ratio(h, 0) >= doctest::Approx(1.0 / 6).epsilon(1e-12));
  CHECK(dormant_ratio(h, 0.025) >= doctest::Approx(1.0 / 6).epsilon(1e-12));
}

TEST_CASE("dormant ratio: identical nonzero neurons are never dormant") {
  Tensor2 h(4, 5, 0.7);
  CHECK(dormant_ratio(h, 0.025) == 0);
  CHECK(dormant_ratio(h, 0.9) == 0);
}

TEST_CASE("dormant ratio: zero layer counts everything dormant") {
  CHECK(dormant_ratio(Tensor2(3, 7), 0.025) == 1);
}

TEST_CASE("sparsity report") {
  MaskedParameter a("a", 4, 4, true);
  MaskedParameter b("b", 2, 2, true);
  SUBCASE("all-ones masks report zero") {
    const SparsityReport rep = sparsity_report({&a, &b});
    CHECK(rep.global_sparsity == 0);
    CHECK(rep.per_layer[0] == 0);
    CHECK(rep.per_layer[1] == 0);
  }
  SUBCASE("one-shot pruning at 0.6 lands within one parameter") {
    Rng rng(6);
    MaskedParameter big("big", 20, 20, true);
    xavier_uniform_init(big.weight, rng);
    const LayerSparsityPlan plan = make_plan({{20, 20}}, 0.6, Allocation::er);
    one_shot_random_prune({&big}, plan, rng);
    const SparsityReport rep = sparsity_report({&big});
    CHECK(std::abs(rep.global_sparsity - 0.6) <= 1.0 / 400 + 1e-12);
  }
}
