#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdrl {

#ifdef SDRL_FAST
using real = float;
#else
using real = double;
#endif

// Dense row-major 2-D array. Vectors are represented as 1xN tensors where
// convenient.
struct Tensor2 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<real> data;

  Tensor2() = default;
  Tensor2(std::size_t r, std::size_t c, real fill = 0)
      : rows(r), cols(c), data(r * c, fill) {}

  real& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  real operator()(std::size_t i, std::size_t j) const {
    return data[i * cols + j];
  }

  std::size_t size() const { return rows * cols; }
  bool same_shape(const Tensor2& o) const {
    return rows == o.rows && cols == o.cols;
  }

  void fill(real v) { std::fill(data.begin(), data.end(), v); }

  bool all_finite() const {
    for (real v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline void check_shape(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("shape mismatch: " + what);
}

}  // namespace sdrl
