#include "sdrl/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace sdrl {

// One-sided Jacobi on the columns of A (transposed first if cols > rows).
std::vector<real> singular_values(const Tensor2& a) {
  Tensor2 m = a;
  if (m.cols > m.rows) {
    Tensor2 t(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
      for (std::size_t j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
    m = std::move(t);
  }
  const std::size_t rows = m.rows, cols = m.cols;
  auto col_dot = [&](std::size_t p, std::size_t q) {
    real s = 0;
    for (std::size_t i = 0; i < rows; ++i) s += m(i, p) * m(i, q);
    return s;
  };
  const real tol = 1e-14;
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool converged = true;
    for (std::size_t p = 0; p + 1 < cols; ++p) {
      for (std::size_t q = p + 1; q < cols; ++q) {
        const real alpha = col_dot(p, p);
        const real beta = col_dot(q, q);
        const real gamma = col_dot(p, q);
        if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        converged = false;
        const real zeta = (beta - alpha) / (2 * gamma);
        const real t = (zeta >= 0 ? real(1) : real(-1)) /
                       (std::abs(zeta) + std::sqrt(1 + zeta * zeta));
        const real c = real(1) / std::sqrt(1 + t * t);
        const real s = c * t;
        for (std::size_t i = 0; i < rows; ++i) {
          const real vp = m(i, p), vq = m(i, q);
          m(i, p) = c * vp - s * vq;
          m(i, q) = s * vp + c * vq;
        }
      }
    }
    if (converged) break;
  }
  std::vector<real> sv(cols);
  for (std::size_t j = 0; j < cols; ++j)
    sv[j] = std::sqrt(std::max(real(0), col_dot(j, j)));
  std::sort(sv.begin(), sv.end(), std::greater<real>());
  return sv;
}

std::size_t srank(const Tensor2& features, real delta) {
  if (delta <= 0 || delta >= 1)
    throw std::invalid_argument("srank delta must be in (0,1)");
  const std::vector<real> sv = singular_values(features);
  real total = 0;
  for (real s : sv) total += s;
  if (total == 0) {
    std::fprintf(stderr, "[diagnostics] srank of all-zero matrix\n");
    return 0;
  }
  real acc = 0;
  for (std::size_t k = 0; k < sv.size(); ++k) {
    acc += sv[k];
    if (acc / total >= real(1) - delta) return k + 1;
  }
  return sv.size();
}

real dormant_ratio(const Tensor2& activations, real tau) {
  const std::size_t batch = activations.rows, H = activations.cols;
  if (H == 0) throw std::invalid_argument("dormant_ratio on empty matrix");
  std::vector<real> mean_abs(H, 0);
  for (std::size_t i = 0; i < batch; ++i)
    for (std::size_t j = 0; j < H; ++j)
      mean_abs[j] += std::abs(activations(i, j));
  real layer_mean = 0;
  for (std::size_t j = 0; j < H; ++j) {
    mean_abs[j] /= static_cast<real>(batch);
    layer_mean += mean_abs[j];
  }
  layer_mean /= static_cast<real>(H);
  if (layer_mean == 0) return 1;
  std::size_t dormant = 0;
  for (std::size_t j = 0; j < H; ++j)
    if (mean_abs[j] / layer_mean <= tau) ++dormant;
  return static_cast<real>(dormant) / static_cast<real>(H);
}

SparsityReport sparsity_report(
    const std::vector<const MaskedParameter*>& layers) {
  SparsityReport rep;
  std::size_t zeros = 0, total = 0;
  for (const MaskedParameter* p : layers) {
    const std::size_t n = p->size();
    const std::size_t z = n - p->active_count();
    rep.per_layer.push_back(n ? static_cast<real>(z) / static_cast<real>(n)
                              : 0);
    zeros += z;
    total += n;
  }
  rep.global_sparsity =
      total ? static_cast<real>(zeros) / static_cast<real>(total) : 0;
  return rep;
}

}  // namespace sdrl
