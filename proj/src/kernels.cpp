#include "sdrl/kernels.hpp"

#include <atomic>

namespace sdrl::kernels {

namespace {

std::atomic<bool> g_parallel{true};

// One output row of C = A * B^T. Both operand rows are contiguous.
inline void nt_row(real* crow, const real* arow, const Tensor2& b,
                   std::size_t k, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    const real* brow = b.data.data() + j * k;
    real acc = 0;
    for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
    crow[j] = acc;
  }
}

// One output row of C = A * B, accumulated in ikj order so the j-loop
// vectorizes.
inline void nn_row(real* crow, const real* arow, const Tensor2& b,
                   std::size_t k, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) crow[j] = 0;
  for (std::size_t p = 0; p < k; ++p) {
    const real av = arow[p];
    const real* brow = b.data.data() + p * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

// One output row i of C = A^T * B: C[i, :] = sum_p A[p, i] * B[p, :].
inline void tn_row(real* crow, std::size_t i, const Tensor2& a,
                   const Tensor2& b, std::size_t k, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) crow[j] = 0;
  for (std::size_t p = 0; p < k; ++p) {
    const real av = a.data[p * a.cols + i];
    const real* brow = b.data.data() + p * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

}  // namespace

void set_parallel(bool enabled) { g_parallel.store(enabled); }
bool parallel_enabled() { return g_parallel.load(); }

void gemm_nt_serial(Tensor2& c, const Tensor2& a, const Tensor2& b) {
  check_shape(a.cols == b.cols, "gemm_nt inner dim");
  c = Tensor2(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    nt_row(c.data.data() + i * c.cols, a.data.data() + i * a.cols, b, a.cols,
           b.rows);
}

void gemm_nt_omp(Tensor2& c, const Tensor2& a, const Tensor2& b) {
  check_shape(a.cols == b.cols, "gemm_nt inner dim");
  c = Tensor2(a.rows, b.rows);
  const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(a.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < m; ++i)
    nt_row(c.data.data() + i * c.cols, a.data.data() + i * a.cols, b, a.cols,
           b.rows);
}

void gemm_nn_serial(Tensor2& c, const Tensor2& a, const Tensor2& b) {
  check_shape(a.cols == b.rows, "gemm_nn inner dim");
  c = Tensor2(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    nn_row(c.data.data() + i * c.cols, a.data.data() + i * a.cols, b, a.cols,
           b.cols);
}

void gemm_nn_omp(Tensor2& c, const Tensor2& a, const Tensor2& b) {
  check_shape(a.cols == b.rows, "gemm_nn inner dim");
  c = Tensor2(a.rows, b.cols);
  const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(a.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < m; ++i)
    nn_row(c.data.data() + i * c.cols, a.data.data() + i * a.cols, b, a.cols,
           b.cols);
}

void gemm_tn_serial(Tensor2& c, const Tensor2& a, const Tensor2& b) {
  check_shape(a.rows == b.rows, "gemm_tn inner dim");
  c = Tensor2(a.cols, b.cols);
  for (std::size_t i = 0; i < a.cols; ++i)
    tn_row(c.data.data() + i * c.cols, i, a, b, a.rows, b.cols);
}

void gemm_tn_omp(Tensor2& c, const Tensor2& a, const Tensor2& b) {
  check_shape(a.rows == b.rows, "gemm_tn inner dim");
  c = Tensor2(a.cols, b.cols);
  const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(a.cols);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < m; ++i)
    tn_row(c.data.data() + i * c.cols, static_cast<std::size_t>(i), a, b,
           a.rows, b.cols);
}

void gemm_nt(Tensor2& c, const Tensor2& a, const Tensor2& b) {
  if (g_parallel.load())
    gemm_nt_omp(c, a, b);
  else
    gemm_nt_serial(c, a, b);
}

void gemm_nn(Tensor2& c, const Tensor2& a, const Tensor2& b) {
  if (g_parallel.load())
    gemm_nn_omp(c, a, b);
  else
    gemm_nn_serial(c, a, b);
}

void gemm_tn(Tensor2& c, const Tensor2& a, const Tensor2& b) {
  if (g_parallel.load())
    gemm_tn_omp(c, a, b);
  else
    gemm_tn_serial(c, a, b);
}

}  // namespace sdrl::kernels
