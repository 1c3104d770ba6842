#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <vector>

#include "ctxvec/tensor.hpp"

namespace ctxvec {

namespace detail {

template <typename T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Eigen::Map<EMat<T>> emap(std::vector<T>& v, std::size_t r, std::size_t c) {
  return Eigen::Map<EMat<T>>(v.data(), static_cast<Eigen::Index>(r),
                             static_cast<Eigen::Index>(c));
}

template <typename T>
Eigen::Map<const EMat<T>> emap(const std::vector<T>& v, std::size_t r, std::size_t c) {
  return Eigen::Map<const EMat<T>>(v.data(), static_cast<Eigen::Index>(r),
                                   static_cast<Eigen::Index>(c));
}

template <typename T>
void require_2d(const Tensor<T>& t, const char* who) {
  if (t.rank() != 2) throw DimError(std::string(who) + ": expected 2-D tensor, got " + shape_str(t.shape()));
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* who) {
  if (a.shape() != b.shape())
    throw DimError(std::string(who) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                   shape_str(b.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Matrix products

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_2d(a, "matmul");
  detail::require_2d(b, "matmul");
  if (a.cols() != b.rows())
    throw DimError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " x " +
                   shape_str(b.shape()));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<T> out(m * n);
  {
    auto av = detail::emap(a.data(), m, k);
    auto bv = detail::emap(b.data(), k, n);
    auto cv = detail::emap(out, m, n);
    // One row-vector product per output row: a row's value must not depend on
    // how many rows share the call, or causally masked prefixes would pick up
    // rounding noise from batch shape when a suffix is dropped. Full-matrix
    // kernels choose shape-dependent summation orders; this form does not.
    for (std::size_t i = 0; i < m; ++i)
      cv.row(Eigen::Index(i)).noalias() = av.row(Eigen::Index(i)) * bv;
  }
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op_result<T>(
      {m, n}, std::move(out), {a, b}, [an, bn, m, k, n](detail::TensorNode<T>& self) {
        auto gc = detail::emap(self.grad, m, n);
        if (an->requires_grad) {
          an->ensure_grad();
          detail::emap(an->grad, m, k).noalias() += gc * detail::emap(bn->data, k, n).transpose();
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          detail::emap(bn->grad, k, n).noalias() += detail::emap(an->data, m, k).transpose() * gc;
        }
      });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  detail::require_2d(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<T> out(m * n);
  detail::emap(out, n, m) = detail::emap(a.data(), m, n).transpose();
  auto an = a.node();
  return detail::make_op_result<T>(
      {n, m}, std::move(out), {a}, [an, m, n](detail::TensorNode<T>& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        detail::emap(an->grad, m, n) += detail::emap(self.grad, n, m).transpose();
      });
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op_result<T>(
      a.shape(), std::move(out), {a, b}, [an, bn](detail::TensorNode<T>& self) {
        for (auto* p : {an.get(), bn.get()}) {
          if (!p->requires_grad) continue;
          p->ensure_grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
        }
      });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op_result<T>(
      a.shape(), std::move(out), {a, b}, [an, bn](detail::TensorNode<T>& self) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] -= self.grad[i];
        }
      });
}

// Hadamard product.
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op_result<T>(
      a.shape(), std::move(out), {a, b}, [an, bn](detail::TensorNode<T>& self) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            an->grad[i] += self.grad[i] * bn->data[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            bn->grad[i] += self.grad[i] * an->data[i];
        }
      });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * c;
  auto an = a.node();
  return detail::make_op_result<T>(a.shape(), std::move(out), {a},
                                   [an, c](detail::TensorNode<T>& self) {
                                     if (!an->requires_grad) return;
                                     an->ensure_grad();
                                     for (std::size_t i = 0; i < self.grad.size(); ++i)
                                       an->grad[i] += self.grad[i] * c;
                                   });
}

// Adds a bias row to every row of x. The only broadcast the library permits.
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  detail::require_2d(x, "add_bias");
  if (bias.rank() != 2 || bias.rows() != 1 || bias.cols() != x.cols())
    throw DimError("add_bias: bias " + shape_str(bias.shape()) + " does not match rows of " +
                   shape_str(x.shape()));
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<T> out(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = x.at(i, j) + bias.data()[j];
  auto xn = x.node();
  auto bn = bias.node();
  return detail::make_op_result<T>(
      {n, d}, std::move(out), {x, bias}, [xn, bn, n, d](detail::TensorNode<T>& self) {
        if (xn->requires_grad) {
          xn->ensure_grad();
          for (std::size_t i = 0; i < n * d; ++i) xn->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) bn->grad[j] += self.grad[i * d + j];
        }
      });
}

// ---------------------------------------------------------------------------
// Nonlinearities and normalizations

namespace detail {

template <typename T>
T norm_cdf(T x) {
  return T(0.5) * std::erfc(-x / std::sqrt(T(2)));
}

template <typename T>
T norm_pdf(T x) {
  constexpr double inv_sqrt_2pi = 0.3989422804014326779;
  return static_cast<T>(inv_sqrt_2pi * std::exp(-0.5 * double(x) * double(x)));
}

}  // namespace detail

// Exact erf-based GELU: x * Phi(x).
template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = x.data()[i];
    out[i] = v * detail::norm_cdf(v);
  }
  auto xn = x.node();
  return detail::make_op_result<T>(
      x.shape(), std::move(out), {x}, [xn](detail::TensorNode<T>& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          const T v = xn->data[i];
          xn->grad[i] += self.grad[i] * (detail::norm_cdf(v) + v * detail::norm_pdf(v));
        }
      });
}

namespace detail {

// Shared softmax kernel over contiguous or strided slices.
template <typename T>
void softmax_slice(const T* in, T* out, std::size_t n, std::size_t stride) {
  T mx = in[0];
  for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, in[j * stride]);
  T z = T(0);
  for (std::size_t j = 0; j < n; ++j) {
    const T e = std::exp(in[j * stride] - mx);
    out[j * stride] = e;
    z += e;
  }
  for (std::size_t j = 0; j < n; ++j) out[j * stride] /= z;
}

template <typename T>
void softmax_backward_slice(const T* y, const T* dy, T* dx, std::size_t n, std::size_t stride) {
  T s = T(0);
  for (std::size_t j = 0; j < n; ++j) s += dy[j * stride] * y[j * stride];
  for (std::size_t j = 0; j < n; ++j)
    dx[j * stride] += y[j * stride] * (dy[j * stride] - s);
}

}  // namespace detail

// Max-subtracted softmax along `axis` of a 2-D tensor (1-D tensors use axis 0).
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis = -1) {
  Shape shp = x.shape();
  std::size_t rows, cols;
  if (x.rank() == 1) {
    rows = 1;
    cols = shp[0];
    if (axis == -1) axis = 1;  // treated as a single row
    else if (axis != 0) throw DimError("softmax: axis out of range for 1-D tensor");
    if (axis == 0) { axis = 1; }
  } else if (x.rank() == 2) {
    rows = shp[0];
    cols = shp[1];
    if (axis == -1) axis = 1;
    if (axis != 0 && axis != 1) throw DimError("softmax: axis must be 0 or 1");
  } else {
    throw DimError("softmax: expected 1-D or 2-D tensor, got " + shape_str(shp));
  }

  std::vector<T> out(x.numel());
  if (axis == 1) {
    for (std::size_t i = 0; i < rows; ++i)
      detail::softmax_slice(x.data().data() + i * cols, out.data() + i * cols, cols, 1);
  } else {
    for (std::size_t j = 0; j < cols; ++j)
      detail::softmax_slice(x.data().data() + j, out.data() + j, rows, cols);
  }
  auto xn = x.node();
  return detail::make_op_result<T>(
      shp, std::move(out), {x}, [xn, rows, cols, axis](detail::TensorNode<T>& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        if (axis == 1) {
          for (std::size_t i = 0; i < rows; ++i)
            detail::softmax_backward_slice(self.data.data() + i * cols,
                                           self.grad.data() + i * cols,
                                           xn->grad.data() + i * cols, cols, 1);
        } else {
          for (std::size_t j = 0; j < cols; ++j)
            detail::softmax_backward_slice(self.data.data() + j, self.grad.data() + j,
                                           xn->grad.data() + j, rows, cols);
        }
      });
}

// Row-wise softmax over the lower triangle of a square score matrix; entries
// above the diagonal come out exactly zero.
template <typename T>
Tensor<T> causal_softmax(const Tensor<T>& x) {
  detail::require_2d(x, "causal_softmax");
  if (x.rows() != x.cols())
    throw DimError("causal_softmax: expected square scores, got " + shape_str(x.shape()));
  const std::size_t n = x.rows();
  std::vector<T> out(n * n, T(0));
  for (std::size_t i = 0; i < n; ++i)
    detail::softmax_slice(x.data().data() + i * n, out.data() + i * n, i + 1, 1);
  auto xn = x.node();
  return detail::make_op_result<T>(
      {n, n}, std::move(out), {x}, [xn, n](detail::TensorNode<T>& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < n; ++i)
          detail::softmax_backward_slice(self.data.data() + i * n, self.grad.data() + i * n,
                                         xn->grad.data() + i * n, i + 1, 1);
      });
}

// Per-row standardization followed by the affine map gain * xhat + bias.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     T eps = T(1e-5)) {
  detail::require_2d(x, "layer_norm");
  const std::size_t n = x.rows(), d = x.cols();
  auto check_param = [&](const Tensor<T>& p, const char* name) {
    if (p.rank() != 2 || p.rows() != 1 || p.cols() != d)
      throw DimError(std::string("layer_norm: ") + name + " " + shape_str(p.shape()) +
                     " does not match last dimension of " + shape_str(x.shape()));
  };
  check_param(gain, "gain");
  check_param(bias, "bias");

  std::vector<T> out(n * d);
  std::vector<T> xhat(n * d);
  std::vector<T> inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = x.data().data() + i * d;
    T mu = T(0);
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= T(d);
    T var = T(0);
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= T(d);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[i] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const T xh = (row[j] - mu) * is;
      xhat[i * d + j] = xh;
      out[i * d + j] = gain.data()[j] * xh + bias.data()[j];
    }
  }
  auto xn = x.node();
  auto gn = gain.node();
  auto bn = bias.node();
  return detail::make_op_result<T>(
      {n, d}, std::move(out), {x, gain, bias},
      [xn, gn, bn, n, d, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](detail::TensorNode<T>& self) {
        for (std::size_t i = 0; i < n; ++i) {
          const T* dy = self.grad.data() + i * d;
          const T* xh = xhat.data() + i * d;
          if (xn->requires_grad) {
            xn->ensure_grad();
            T m1 = T(0), m2 = T(0);
            for (std::size_t j = 0; j < d; ++j) {
              const T dxh = dy[j] * gn->data[j];
              m1 += dxh;
              m2 += dxh * xh[j];
            }
            m1 /= T(d);
            m2 /= T(d);
            for (std::size_t j = 0; j < d; ++j) {
              const T dxh = dy[j] * gn->data[j];
              xn->grad[i * d + j] += (dxh - m1 - xh[j] * m2) * inv_std[i];
            }
          }
          if (gn->requires_grad) {
            gn->ensure_grad();
            for (std::size_t j = 0; j < d; ++j) gn->grad[j] += dy[j] * xh[j];
          }
          if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t j = 0; j < d; ++j) bn->grad[j] += dy[j];
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Reductions and pooling

// Arithmetic mean over rows whose mask entry is true.
template <typename T>
Tensor<T> mean_pool(const Tensor<T>& x, const std::vector<std::uint8_t>& mask) {
  detail::require_2d(x, "mean_pool");
  const std::size_t n = x.rows(), d = x.cols();
  if (mask.size() != n)
    throw DimError("mean_pool: mask length " + std::to_string(mask.size()) +
                   " does not match rows of " + shape_str(x.shape()));
  std::size_t kept = 0;
  for (auto m : mask) kept += m ? 1 : 0;
  if (kept == 0) throw ContractError("mean_pool: all rows masked, nothing to pool");

  std::vector<T> out(d, T(0));
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    for (std::size_t j = 0; j < d; ++j) out[j] += x.at(i, j);
  }
  for (std::size_t j = 0; j < d; ++j) out[j] /= T(kept);
  auto xn = x.node();
  return detail::make_op_result<T>(
      {1, d}, std::move(out), {x}, [xn, mask, n, d, kept](detail::TensorNode<T>& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
          if (!mask[i]) continue;
          for (std::size_t j = 0; j < d; ++j) xn->grad[i * d + j] += self.grad[j] / T(kept);
        }
      });
}

template <typename T>
Tensor<T> mean_rows(const Tensor<T>& x) {
  return mean_pool(x, std::vector<std::uint8_t>(x.rows(), 1));
}

// y = sum_i w_i * row_i with constant weights.
template <typename T>
Tensor<T> weighted_mean_rows(const Tensor<T>& x, const std::vector<T>& weights) {
  detail::require_2d(x, "weighted_mean_rows");
  const std::size_t n = x.rows(), d = x.cols();
  if (weights.size() != n)
    throw DimError("weighted_mean_rows: " + std::to_string(weights.size()) + " weights for " +
                   shape_str(x.shape()));
  std::vector<T> out(d, T(0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[j] += weights[i] * x.at(i, j);
  auto xn = x.node();
  return detail::make_op_result<T>(
      {1, d}, std::move(out), {x}, [xn, weights, n, d](detail::TensorNode<T>& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < d; ++j) xn->grad[i * d + j] += weights[i] * self.grad[j];
      });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T s = T(0);
  for (T v : x.data()) s += v;
  auto xn = x.node();
  return detail::make_op_result<T>({1}, {s}, {x}, [xn](detail::TensorNode<T>& self) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (auto& g : xn->grad) g += self.grad[0];
  });
}

template <typename T>
Tensor<T> dot(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "dot");
  T s = T(0);
  for (std::size_t i = 0; i < a.numel(); ++i) s += a.data()[i] * b.data()[i];
  auto an = a.node();
  auto bn = b.node();
  return detail::make_op_result<T>({1}, {s}, {a, b}, [an, bn](detail::TensorNode<T>& self) {
    const T g = self.grad[0];
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < an->data.size(); ++i) an->grad[i] += g * bn->data[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < bn->data.size(); ++i) bn->grad[i] += g * an->data[i];
    }
  });
}

// Numerically stable log(sum(exp(x))) of a row vector; returns a scalar.
template <typename T>
Tensor<T> logsumexp_row(const Tensor<T>& x) {
  if (x.rank() != 2 || x.rows() != 1)
    throw DimError("logsumexp_row: expected 1xN tensor, got " + shape_str(x.shape()));
  const std::size_t n = x.cols();
  T mx = x.data()[0];
  for (T v : x.data()) mx = std::max(mx, v);
  T z = T(0);
  for (T v : x.data()) z += std::exp(v - mx);
  const T lse = mx + std::log(z);
  auto xn = x.node();
  return detail::make_op_result<T>({1}, {lse}, {x}, [xn, n, lse](detail::TensorNode<T>& self) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    const T g = self.grad[0];
    for (std::size_t j = 0; j < n; ++j) xn->grad[j] += g * std::exp(xn->data[j] - lse);
  });
}

// ---------------------------------------------------------------------------
// Shape surgery

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  detail::require_2d(x, "slice_rows");
  const std::size_t n = x.rows(), d = x.cols();
  if (begin > end || end > n)
    throw IndexError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of " + std::to_string(n) + " rows");
  const std::size_t m = end - begin;
  std::vector<T> out(x.data().begin() + begin * d, x.data().begin() + end * d);
  auto xn = x.node();
  return detail::make_op_result<T>(
      {m, d}, std::move(out), {x}, [xn, begin, m, d](detail::TensorNode<T>& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < m * d; ++i) xn->grad[begin * d + i] += self.grad[i];
      });
}

template <typename T>
Tensor<T> row_at(const Tensor<T>& x, std::size_t i) {
  if (x.rank() != 2 || i >= x.rows())
    throw IndexError("row_at: index " + std::to_string(i) + " out of range for " +
                     shape_str(x.shape()));
  return slice_rows(x, i, i + 1);
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  detail::require_2d(x, "slice_cols");
  const std::size_t n = x.rows(), d = x.cols();
  if (begin > end || end > d)
    throw IndexError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of " + std::to_string(d) + " columns");
  const std::size_t m = end - begin;
  std::vector<T> out(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = x.at(i, begin + j);
  auto xn = x.node();
  return detail::make_op_result<T>(
      {n, m}, std::move(out), {x}, [xn, begin, n, m, d](detail::TensorNode<T>& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < m; ++j)
            xn->grad[i * d + begin + j] += self.grad[i * m + j];
      });
}

template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no parts");
  const std::size_t d = parts.front().cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    detail::require_2d(p, "concat_rows");
    if (p.cols() != d)
      throw DimError("concat_rows: column mismatch " + shape_str(p.shape()) + " vs " +
                     shape_str(parts.front().shape()));
    total += p.rows();
  }
  std::vector<T> out;
  out.reserve(total * d);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  std::vector<std::shared_ptr<detail::TensorNode<T>>> nodes;
  std::vector<std::size_t> row_counts;
  for (const auto& p : parts) {
    nodes.push_back(p.node());
    row_counts.push_back(p.rows());
  }
  return detail::make_op_result<T>(
      {total, d}, std::move(out), parts,
      [nodes, row_counts, d](detail::TensorNode<T>& self) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < nodes.size(); ++k) {
          const std::size_t cnt = row_counts[k] * d;
          if (nodes[k]->requires_grad) {
            nodes[k]->ensure_grad();
            for (std::size_t i = 0; i < cnt; ++i) nodes[k]->grad[i] += self.grad[off + i];
          }
          off += cnt;
        }
      });
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no parts");
  const std::size_t n = parts.front().rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    detail::require_2d(p, "concat_cols");
    if (p.rows() != n)
      throw DimError("concat_cols: row mismatch " + shape_str(p.shape()) + " vs " +
                     shape_str(parts.front().shape()));
    total += p.cols();
  }
  std::vector<T> out(n * total);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t m = p.cols();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) out[i * total + off + j] = p.at(i, j);
    off += m;
  }
  std::vector<std::shared_ptr<detail::TensorNode<T>>> nodes;
  std::vector<std::size_t> col_counts;
  for (const auto& p : parts) {
    nodes.push_back(p.node());
    col_counts.push_back(p.cols());
  }
  return detail::make_op_result<T>(
      {n, total}, std::move(out), parts,
      [nodes, col_counts, n, total](detail::TensorNode<T>& self) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < nodes.size(); ++k) {
          const std::size_t m = col_counts[k];
          if (nodes[k]->requires_grad) {
            nodes[k]->ensure_grad();
            for (std::size_t i = 0; i < n; ++i)
              for (std::size_t j = 0; j < m; ++j)
                nodes[k]->grad[i * m + j] += self.grad[i * total + off + j];
          }
          off += m;
        }
      });
}

// Packs scalar tensors into a 1xN row.
template <typename T>
Tensor<T> stack_scalars(const std::vector<Tensor<T>>& scalars) {
  if (scalars.empty()) throw ContractError("stack_scalars: no inputs");
  std::vector<T> out;
  out.reserve(scalars.size());
  std::vector<std::shared_ptr<detail::TensorNode<T>>> nodes;
  for (const auto& s : scalars) {
    if (s.numel() != 1)
      throw DimError("stack_scalars: non-scalar input " + shape_str(s.shape()));
    out.push_back(s.data()[0]);
    nodes.push_back(s.node());
  }
  return detail::make_op_result<T>(
      {1, scalars.size()}, std::move(out), scalars, [nodes](detail::TensorNode<T>& self) {
        for (std::size_t j = 0; j < nodes.size(); ++j) {
          if (!nodes[j]->requires_grad) continue;
          nodes[j]->ensure_grad();
          nodes[j]->grad[0] += self.grad[j];
        }
      });
}

template <typename T>
Tensor<T> value_at(const Tensor<T>& x, std::size_t r, std::size_t c) {
  detail::require_2d(x, "value_at");
  if (r >= x.rows() || c >= x.cols())
    throw IndexError("value_at: (" + std::to_string(r) + "," + std::to_string(c) +
                     ") out of range for " + shape_str(x.shape()));
  const std::size_t idx = r * x.cols() + c;
  auto xn = x.node();
  return detail::make_op_result<T>({1}, {x.data()[idx]}, {x},
                                   [xn, idx](detail::TensorNode<T>& self) {
                                     if (!xn->requires_grad) return;
                                     xn->ensure_grad();
                                     xn->grad[idx] += self.grad[0];
                                   });
}

// Gathers embedding rows for a list of token ids; gradients scatter-add back
// into the table.
template <typename T>
Tensor<T> embed_rows(const Tensor<T>& table, const std::vector<std::int32_t>& ids) {
  detail::require_2d(table, "embed_rows");
  const std::size_t v = table.rows(), d = table.cols(), n = ids.size();
  for (auto id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= v)
      throw IndexError("embed_rows: token id " + std::to_string(id) + " outside table " +
                       shape_str(table.shape()));
  std::vector<T> out(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const T* src = table.data().data() + static_cast<std::size_t>(ids[i]) * d;
    std::copy(src, src + d, out.begin() + i * d);
  }
  auto tn = table.node();
  return detail::make_op_result<T>(
      {n, d}, std::move(out), {table}, [tn, ids, d](detail::TensorNode<T>& self) {
        if (!tn->requires_grad) return;
        tn->ensure_grad();
        for (std::size_t i = 0; i < ids.size(); ++i) {
          T* dst = tn->grad.data() + static_cast<std::size_t>(ids[i]) * d;
          const T* src = self.grad.data() + i * d;
          for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
        }
      });
}

// ---------------------------------------------------------------------------
// Vector geometry

template <typename T>
T l2_norm_value(const Tensor<T>& x) {
  double s = 0;
  for (T v : x.data()) s += double(v) * double(v);
  return static_cast<T>(std::sqrt(s));
}

// Normalizes a row vector to unit length. Inputs are expected non-degenerate;
// norms below `floor` are clamped to keep the result finite.
template <typename T>
Tensor<T> l2_normalize_row(const Tensor<T>& x, T floor = T(1e-12)) {
  if (x.rank() != 2 || x.rows() != 1)
    throw DimError("l2_normalize_row: expected 1xN tensor, got " + shape_str(x.shape()));
  const std::size_t n = x.cols();
  T nrm = l2_norm_value(x);
  nrm = std::max(nrm, floor);
  std::vector<T> out(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = x.data()[j] / nrm;
  auto xn = x.node();
  return detail::make_op_result<T>(
      {1, n}, std::move(out), {x}, [xn, n, nrm](detail::TensorNode<T>& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        T s = T(0);
        for (std::size_t j = 0; j < n; ++j) s += self.grad[j] * self.data[j];
        for (std::size_t j = 0; j < n; ++j)
          xn->grad[j] += (self.grad[j] - self.data[j] * s) / nrm;
      });
}

}  // namespace ctxvec
