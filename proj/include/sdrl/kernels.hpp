#pragma once

#include "sdrl/tensor.hpp"

// Matrix kernels used by every forward/backward pass. Each kernel exists in a
// serial reference flavor and an OpenMP flavor. The OpenMP flavor parallelizes
// over output rows only; the per-row reduction order is identical to the
// serial flavor, so results are bit-equal and independent of thread count.
namespace sdrl::kernels {

// Global switch between the serial and OpenMP flavors.
void set_parallel(bool enabled);
bool parallel_enabled();

// C[m x n] = A[m x k] * B[n x k]^T
void gemm_nt_serial(Tensor2& c, const Tensor2& a, const Tensor2& b);
void gemm_nt_omp(Tensor2& c, const Tensor2& a, const Tensor2& b);

// C[m x n] = A[m x k] * B[k x n]
void gemm_nn_serial(Tensor2& c, const Tensor2& a, const Tensor2& b);
void gemm_nn_omp(Tensor2& c, const Tensor2& a, const Tensor2& b);

// C[m x n] = A[k x m]^T * B[k x n]
void gemm_tn_serial(Tensor2& c, const Tensor2& a, const Tensor2& b);
void gemm_tn_omp(Tensor2& c, const Tensor2& a, const Tensor2& b);

// Dispatch through the global switch.
void gemm_nt(Tensor2& c, const Tensor2& a, const Tensor2& b);
void gemm_nn(Tensor2& c, const Tensor2& a, const Tensor2& b);
void gemm_tn(Tensor2& c, const Tensor2& a, const Tensor2& b);

}  // namespace sdrl::kernels
