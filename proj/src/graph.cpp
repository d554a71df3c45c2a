#include "sdrl/graph.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "sdrl/kernels.hpp"

namespace sdrl {

int Graph::push(Tensor2 v, std::function<void()> back) {
  Node n;
  n.grad = Tensor2(v.rows, v.cols);
  n.value = std::move(v);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Graph::input(Tensor2 v) { return push(std::move(v)); }

int Graph::linear(int x, MaskedParameter& w, MaskedParameter& b, bool train) {
  const Tensor2& xv = nodes_[x].value;
  check_shape(xv.cols == w.weight.cols, "linear input dim");
  check_shape(b.weight.rows == 1 && b.weight.cols == w.weight.rows,
              "linear bias dim");
  Tensor2 y;
  kernels::gemm_nt(y, xv, w.weight);
  for (std::size_t i = 0; i < y.rows; ++i)
    for (std::size_t j = 0; j < y.cols; ++j) y(i, j) += b.weight(0, j);
  int id = push(std::move(y));
  MaskedParameter* wp = &w;
  MaskedParameter* bp = &b;
  nodes_[id].back = [this, id, x, wp, bp, train]() {
    const Tensor2& gy = nodes_[id].grad;
    Tensor2 gx;
    kernels::gemm_nn(gx, gy, wp->weight);
    for (std::size_t i = 0; i < gx.size(); ++i)
      nodes_[x].grad.data[i] += gx.data[i];
    if (train) {
      Tensor2 gw;
      kernels::gemm_tn(gw, gy, nodes_[x].value);
      for (std::size_t i = 0; i < gw.size(); ++i) {
        wp->dense_grad.data[i] += gw.data[i];
        wp->grad.data[i] += gw.data[i] * wp->mask.data[i];
      }
      for (std::size_t i = 0; i < gy.rows; ++i)
        for (std::size_t j = 0; j < gy.cols; ++j) {
          bp->grad(0, j) += gy(i, j);
          bp->dense_grad(0, j) += gy(i, j);
        }
    }
  };
  return id;
}

int Graph::layer_norm(int x, MaskedParameter& gain, MaskedParameter& shift,
                      real eps, bool train) {
  const Tensor2& xv = nodes_[x].value;
  check_shape(gain.weight.cols == xv.cols && shift.weight.cols == xv.cols,
              "layer_norm gain/shift dim");
  const std::size_t rows = xv.rows, cols = xv.cols;
  const real n = static_cast<real>(cols);
  auto xhat = std::make_shared<Tensor2>(rows, cols);
  auto inv = std::make_shared<std::vector<real>>(rows);
  Tensor2 y(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    real mean = 0;
    for (std::size_t j = 0; j < cols; ++j) mean += xv(i, j);
    mean /= n;
    real var = 0;
    for (std::size_t j = 0; j < cols; ++j) {
      real d = xv(i, j) - mean;
      var += d * d;
    }
    var /= n;
    (*inv)[i] = real(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < cols; ++j) {
      (*xhat)(i, j) = (xv(i, j) - mean) * (*inv)[i];
      y(i, j) = gain.weight(0, j) * (*xhat)(i, j) + shift.weight(0, j);
    }
  }
  int id = push(std::move(y));
  MaskedParameter* gp = &gain;
  MaskedParameter* sp = &shift;
  nodes_[id].back = [this, id, x, gp, sp, xhat, inv, train, rows, cols, n]() {
    const Tensor2& gy = nodes_[id].grad;
    for (std::size_t i = 0; i < rows; ++i) {
      real mh = 0, mhx = 0;
      for (std::size_t j = 0; j < cols; ++j) {
        const real h = gp->weight(0, j) * gy(i, j);
        mh += h;
        mhx += h * (*xhat)(i, j);
      }
      mh /= n;
      mhx /= n;
      for (std::size_t j = 0; j < cols; ++j) {
        const real h = gp->weight(0, j) * gy(i, j);
        nodes_[x].grad(i, j) += (*inv)[i] * (h - mh - (*xhat)(i, j) * mhx);
        if (train) {
          gp->grad(0, j) += gy(i, j) * (*xhat)(i, j);
          gp->dense_grad(0, j) += gy(i, j) * (*xhat)(i, j);
          sp->grad(0, j) += gy(i, j);
          sp->dense_grad(0, j) += gy(i, j);
        }
      }
    }
  };
  return id;
}

int Graph::activation_op(int x, Activation kind) {
  const Tensor2& xv = nodes_[x].value;
  Tensor2 y(xv.rows, xv.cols);
  for (std::size_t i = 0; i < xv.size(); ++i)
    y.data[i] = activation_scalar(xv.data[i], kind);
  int id = push(std::move(y));
  nodes_[id].back = [this, id, x, kind]() {
    const Tensor2& gy = nodes_[id].grad;
    const Tensor2& xv = nodes_[x].value;
    for (std::size_t i = 0; i < gy.size(); ++i)
      nodes_[x].grad.data[i] +=
          gy.data[i] * activation_grad_scalar(xv.data[i], kind);
  };
  return id;
}

int Graph::tanh_op(int x) {
  const Tensor2& xv = nodes_[x].value;
  Tensor2 y(xv.rows, xv.cols);
  for (std::size_t i = 0; i < xv.size(); ++i) y.data[i] = std::tanh(xv.data[i]);
  int id = push(std::move(y));
  nodes_[id].back = [this, id, x]() {
    const Tensor2& gy = nodes_[id].grad;
    const Tensor2& yv = nodes_[id].value;
    for (std::size_t i = 0; i < gy.size(); ++i)
      nodes_[x].grad.data[i] +=
          gy.data[i] * (real(1) - yv.data[i] * yv.data[i]);
  };
  return id;
}

int Graph::add(int a, int b) {
  const Tensor2& av = nodes_[a].value;
  const Tensor2& bv = nodes_[b].value;
  check_shape(av.same_shape(bv), "add operands");
  Tensor2 y(av.rows, av.cols);
  for (std::size_t i = 0; i < av.size(); ++i)
    y.data[i] = av.data[i] + bv.data[i];
  int id = push(std::move(y));
  nodes_[id].back = [this, id, a, b]() {
    const Tensor2& gy = nodes_[id].grad;
    for (std::size_t i = 0; i < gy.size(); ++i) {
      nodes_[a].grad.data[i] += gy.data[i];
      nodes_[b].grad.data[i] += gy.data[i];
    }
  };
  return id;
}

int Graph::affine_const(int x, std::vector<real> scale,
                        std::vector<real> shift) {
  const Tensor2& xv = nodes_[x].value;
  check_shape(scale.size() == xv.cols && shift.size() == xv.cols,
              "affine_const dims");
  Tensor2 y(xv.rows, xv.cols);
  for (std::size_t i = 0; i < xv.rows; ++i)
    for (std::size_t j = 0; j < xv.cols; ++j)
      y(i, j) = xv(i, j) * scale[j] + shift[j];
  int id = push(std::move(y));
  auto sc = std::make_shared<std::vector<real>>(std::move(scale));
  nodes_[id].back = [this, id, x, sc]() {
    const Tensor2& gy = nodes_[id].grad;
    for (std::size_t i = 0; i < gy.rows; ++i)
      for (std::size_t j = 0; j < gy.cols; ++j)
        nodes_[x].grad(i, j) += gy(i, j) * (*sc)[j];
  };
  return id;
}

int Graph::concat_cols(int a, int b) {
  const Tensor2& av = nodes_[a].value;
  const Tensor2& bv = nodes_[b].value;
  check_shape(av.rows == bv.rows, "concat_cols rows");
  Tensor2 y(av.rows, av.cols + bv.cols);
  for (std::size_t i = 0; i < av.rows; ++i) {
    for (std::size_t j = 0; j < av.cols; ++j) y(i, j) = av(i, j);
    for (std::size_t j = 0; j < bv.cols; ++j) y(i, av.cols + j) = bv(i, j);
  }
  int id = push(std::move(y));
  nodes_[id].back = [this, id, a, b]() {
    const Tensor2& gy = nodes_[id].grad;
    const std::size_t ac = nodes_[a].value.cols;
    const std::size_t bc = nodes_[b].value.cols;
    for (std::size_t i = 0; i < gy.rows; ++i) {
      for (std::size_t j = 0; j < ac; ++j) nodes_[a].grad(i, j) += gy(i, j);
      for (std::size_t j = 0; j < bc; ++j)
        nodes_[b].grad(i, j) += gy(i, ac + j);
    }
  };
  return id;
}

int Graph::slice_cols(int x, std::size_t begin, std::size_t len) {
  const Tensor2& xv = nodes_[x].value;
  check_shape(begin + len <= xv.cols, "slice_cols range");
  Tensor2 y(xv.rows, len);
  for (std::size_t i = 0; i < xv.rows; ++i)
    for (std::size_t j = 0; j < len; ++j) y(i, j) = xv(i, begin + j);
  int id = push(std::move(y));
  nodes_[id].back = [this, id, x, begin, len]() {
    const Tensor2& gy = nodes_[id].grad;
    for (std::size_t i = 0; i < gy.rows; ++i)
      for (std::size_t j = 0; j < len; ++j)
        nodes_[x].grad(i, begin + j) += gy(i, j);
  };
  return id;
}

int Graph::mse_loss(int pred, Tensor2 target, std::vector<real> row_w) {
  const Tensor2& pv = nodes_[pred].value;
  check_shape(pv.same_shape(target), "mse_loss target");
  check_shape(row_w.size() == pv.rows, "mse_loss row weights");
  const real rows = static_cast<real>(pv.rows);
  const real cols = static_cast<real>(pv.cols);
  real loss = 0;
  for (std::size_t i = 0; i < pv.rows; ++i) {
    real s = 0;
    for (std::size_t j = 0; j < pv.cols; ++j) {
      const real e = pv(i, j) - target(i, j);
      s += e * e;
    }
    loss += row_w[i] * s / cols;
  }
  int id = push(Tensor2(1, 1, loss / rows));
  auto tg = std::make_shared<Tensor2>(std::move(target));
  auto rw = std::make_shared<std::vector<real>>(std::move(row_w));
  nodes_[id].back = [this, id, pred, tg, rw, rows, cols]() {
    const real gl = nodes_[id].grad(0, 0);
    const Tensor2& pv = nodes_[pred].value;
    for (std::size_t i = 0; i < pv.rows; ++i) {
      const real c = gl * (*rw)[i] * real(2) / (rows * cols);
      for (std::size_t j = 0; j < pv.cols; ++j)
        nodes_[pred].grad(i, j) += c * (pv(i, j) - (*tg)(i, j));
    }
  };
  return id;
}

int Graph::softmax_cross_entropy(int logits, Tensor2 target,
                                 std::vector<real> row_w) {
  const Tensor2& lv = nodes_[logits].value;
  check_shape(lv.same_shape(target), "softmax_xent target");
  check_shape(row_w.size() == lv.rows, "softmax_xent row weights");
  const real rows = static_cast<real>(lv.rows);
  auto q = std::make_shared<Tensor2>(lv.rows, lv.cols);
  real loss = 0;
  for (std::size_t i = 0; i < lv.rows; ++i) {
    real mx = lv(i, 0);
    for (std::size_t j = 1; j < lv.cols; ++j) mx = std::max(mx, lv(i, j));
    real se = 0;
    for (std::size_t j = 0; j < lv.cols; ++j) se += std::exp(lv(i, j) - mx);
    const real lse = mx + std::log(se);
    real dot = 0;
    for (std::size_t j = 0; j < lv.cols; ++j) {
      (*q)(i, j) = std::exp(lv(i, j) - lse);
      dot += target(i, j) * lv(i, j);
    }
    loss += row_w[i] * (lse - dot);
  }
  int id = push(Tensor2(1, 1, loss / rows));
  auto tg = std::make_shared<Tensor2>(std::move(target));
  auto rw = std::make_shared<std::vector<real>>(std::move(row_w));
  nodes_[id].back = [this, id, logits, q, tg, rw, rows]() {
    const real gl = nodes_[id].grad(0, 0);
    for (std::size_t i = 0; i < q->rows; ++i) {
      const real c = gl * (*rw)[i] / rows;
      for (std::size_t j = 0; j < q->cols; ++j)
        nodes_[logits].grad(i, j) += c * ((*q)(i, j) - (*tg)(i, j));
    }
  };
  return id;
}

int Graph::huber_loss(int pred, Tensor2 target, real delta,
                      std::vector<real> row_w) {
  const Tensor2& pv = nodes_[pred].value;
  check_shape(pv.same_shape(target), "huber target");
  check_shape(row_w.size() == pv.rows, "huber row weights");
  const real rows = static_cast<real>(pv.rows);
  real loss = 0;
  for (std::size_t i = 0; i < pv.rows; ++i) {
    real s = 0;
    for (std::size_t j = 0; j < pv.cols; ++j) {
      const real e = std::abs(pv(i, j) - target(i, j));
      s += e <= delta ? real(0.5) * e * e : delta * (e - real(0.5) * delta);
    }
    loss += row_w[i] * s;
  }
  int id = push(Tensor2(1, 1, loss / rows));
  auto tg = std::make_shared<Tensor2>(std::move(target));
  auto rw = std::make_shared<std::vector<real>>(std::move(row_w));
  nodes_[id].back = [this, id, pred, tg, rw, rows, delta]() {
    const real gl = nodes_[id].grad(0, 0);
    const Tensor2& pv = nodes_[pred].value;
    for (std::size_t i = 0; i < pv.rows; ++i) {
      const real c = gl * (*rw)[i] / rows;
      for (std::size_t j = 0; j < pv.cols; ++j) {
        real e = pv(i, j) - (*tg)(i, j);
        if (e > delta) e = delta;
        if (e < -delta) e = -delta;
        nodes_[pred].grad(i, j) += c * e;
      }
    }
  };
  return id;
}

int Graph::mean_square(int x) {
  const Tensor2& xv = nodes_[x].value;
  const real n = static_cast<real>(xv.size());
  real s = 0;
  for (real v : xv.data) s += v * v;
  int id = push(Tensor2(1, 1, s / n));
  nodes_[id].back = [this, id, x, n]() {
    const real gl = nodes_[id].grad(0, 0);
    const Tensor2& xv = nodes_[x].value;
    for (std::size_t i = 0; i < xv.size(); ++i)
      nodes_[x].grad.data[i] += gl * real(2) * xv.data[i] / n;
  };
  return id;
}

int Graph::mean_all(int x) {
  const Tensor2& xv = nodes_[x].value;
  const real n = static_cast<real>(xv.size());
  real s = 0;
  for (real v : xv.data) s += v;
  int id = push(Tensor2(1, 1, s / n));
  nodes_[id].back = [this, id, x, n]() {
    const real gl = nodes_[id].grad(0, 0);
    for (real& g : nodes_[x].grad.data) g += gl / n;
  };
  return id;
}

int Graph::scalar_combine(std::vector<std::pair<real, int>> terms) {
  real s = 0;
  for (auto& [c, n] : terms) {
    check_shape(nodes_[n].value.size() == 1, "scalar_combine operand");
    s += c * nodes_[n].value(0, 0);
  }
  int id = push(Tensor2(1, 1, s));
  auto tm = std::make_shared<std::vector<std::pair<real, int>>>(std::move(terms));
  nodes_[id].back = [this, id, tm]() {
    const real gl = nodes_[id].grad(0, 0);
    for (auto& [c, n] : *tm) nodes_[n].grad(0, 0) += c * gl;
  };
  return id;
}

void Graph::backward(int loss) {
  if (backward_done_)
    throw std::logic_error("backward called twice on the same graph");
  if (nodes_.empty() || loss < 0 || loss >= static_cast<int>(nodes_.size()))
    throw std::logic_error("backward called before forward");
  if (nodes_[loss].value.size() != 1)
    throw std::logic_error("backward requires a scalar loss node");
  backward_done_ = true;
  nodes_[loss].grad(0, 0) = 1;
  for (int i = loss; i >= 0; --i)
    if (nodes_[i].back) nodes_[i].back();
}

}  // namespace sdrl
