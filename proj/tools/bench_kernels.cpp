// Times the serial reference kernels against the OpenMP ones and checks that
// both produce bit-identical output.
#include <chrono>
#include <cstdio>
#include <cstring>

#include "sdrl/kernels.hpp"
#include "sdrl/rng.hpp"

using namespace sdrl;

namespace {

Tensor2 random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Tensor2 t(r, c);
  for (real& v : t.data) v = static_cast<real>(rng.uniform(-1, 1));
  return t;
}

template <typename F>
double time_ms(F&& f, int reps) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) f();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

bool bit_equal(const Tensor2& a, const Tensor2& b) {
  return a.rows == b.rows && a.cols == b.cols &&
         std::memcmp(a.data.data(), b.data.data(),
                     a.data.size() * sizeof(real)) == 0;
}

}  // namespace

int main() {
  Rng rng(7);
  const std::size_t sizes[][3] = {
      {64, 128, 128}, {256, 256, 256}, {512, 512, 512}};
  std::printf("%-24s %12s %12s %8s %s\n", "kernel", "serial(ms)", "omp(ms)",
              "speedup", "bit_equal");
  bool all_equal = true;
  for (const auto& s : sizes) {
    const std::size_t m = s[0], k = s[1], n = s[2];
    const Tensor2 a = random_matrix(m, k, rng);
    const Tensor2 bt = random_matrix(n, k, rng);   // for C = A * B^T
    const Tensor2 b = random_matrix(k, n, rng);    // for C = A * B
    const Tensor2 at = random_matrix(k, m, rng);   // for C = A^T * B
    const int reps = m <= 64 ? 50 : (m <= 256 ? 10 : 3);

    using Kernel = void (*)(Tensor2&, const Tensor2&, const Tensor2&);
    struct Case {
      const char* name;
      Kernel serial;
      Kernel omp;
      const Tensor2 *x, *y;
      std::size_t rows, cols;
    } cases[] = {
        {"gemm_nt", kernels::gemm_nt_serial, kernels::gemm_nt_omp, &a, &bt, m, n},
        {"gemm_nn", kernels::gemm_nn_serial, kernels::gemm_nn_omp, &a, &b, m, n},
        {"gemm_tn", kernels::gemm_tn_serial, kernels::gemm_tn_omp, &at, &b, m, n},
    };
    for (const Case& c : cases) {
      Tensor2 rs(c.rows, c.cols), ro(c.rows, c.cols);
      const double ts = time_ms([&] { c.serial(rs, *c.x, *c.y); }, reps);
      const double to = time_ms([&] { c.omp(ro, *c.x, *c.y); }, reps);
      const bool eq = bit_equal(rs, ro);
      all_equal = all_equal && eq;
      char label[64];
      std::snprintf(label, sizeof(label), "%s %zux%zux%zu", c.name, m, k, n);
      std::printf("%-24s %12.3f %12.3f %8.2f %s\n", label, ts, to,
                  to > 0 ? ts / to : 0.0, eq ? "yes" : "NO");
    }
  }
  if (!all_equal) {
    std::fprintf(stderr, "serial and OpenMP kernels disagree\n");
    return 1;
  }
  return 0;
}
