// Copyright 2026 The ctxnet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ctxn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

#include "gemm.hpp"

namespace ctxn {

namespace {

template <typename T>
bool any_requires_grad(std::span<const Tensor<T>* const> inputs) {
  if (!NoGradGuard::grad_enabled()) return false;
  for (const auto* t : inputs)
    if (t->defined() && t->requires_grad()) return true;
  return false;
}

// Creates the output tensor and, when any input participates in the graph,
// attaches a node whose closure pushes the output gradient upstream.
template <typename T, typename Fn>
Tensor<T> make_result(Shape shape, std::vector<T> values, std::span<const Tensor<T>* const> inputs,
                      Fn&& propagate) {
  auto out = Tensor<T>::from(std::move(shape), std::move(values));
  if (any_requires_grad<T>(inputs)) {
    auto node = std::make_shared<Node<T>>();
    for (const auto* t : inputs)
      if (t->defined()) node->inputs.push_back(t->handle());
    node->propagate = std::forward<Fn>(propagate);
    out.impl().node = std::move(node);
    out.set_requires_grad(true);
  }
  return out;
}

template <typename T, typename Fn>
Tensor<T> make_result(Shape shape, std::vector<T> values, std::initializer_list<const Tensor<T>*> inputs,
                      Fn&& propagate) {
  return make_result<T>(std::move(shape), std::move(values), std::span(inputs.begin(), inputs.size()),
                        std::forward<Fn>(propagate));
}

// Input gradient buffer, or nullptr when that input does not need one.
template <typename T>
T* grad_of(TensorImpl<T>* impl) {
  return impl->requires_grad ? impl->grad.data() : nullptr;
}

void require(bool condition, const std::string& message) {
  if (!condition) throw ShapeError(message);
}

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* op, const char* arg) {
  require(t.defined(), std::string(op) + ": " + arg + " is undefined");
  require(t.rank() == rank, std::string(op) + ": " + arg + " must have rank " + std::to_string(rank) +
                                ", got shape " + shape_str(t.shape()));
}

template <typename T>
void im2col(const T* x, std::size_t channels, std::size_t height, std::size_t width, std::size_t k,
            std::size_t stride, std::size_t pad, std::size_t out_h, std::size_t out_w, T* col) {
  const std::size_t plane = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        T* dst = col + ((c * k + ky) * k + kx) * plane;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
          T* row = dst + oy * out_w;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) {
            std::fill(row, row + out_w, T(0));
            continue;
          }
          const T* src = x + (c * height + static_cast<std::size_t>(iy)) * width;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
            row[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(width)) ? T(0) : src[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, std::size_t channels, std::size_t height, std::size_t width, std::size_t k,
            std::size_t stride, std::size_t pad, std::size_t out_h, std::size_t out_w, T* x) {
  const std::size_t plane = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const T* src = col + ((c * k + ky) * k + kx) * plane;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) continue;
          T* dst = x + (c * height + static_cast<std::size_t>(iy)) * width;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(width)) dst[ix] += src[oy * out_w + ox];
          }
        }
      }
    }
  }
}

}  // namespace

// --- conv2d -----------------------------------------------------------------

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, std::size_t stride,
                 std::size_t padding) {
  require_rank(input, 4, "conv2d", "input");
  require_rank(weight, 4, "conv2d", "weight");
  const std::size_t n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t cout = weight.dim(0), k = weight.dim(2);
  require(weight.dim(1) == cin, "conv2d: weight C_in (dim 1) is " + std::to_string(weight.dim(1)) +
                                    " but input has " + std::to_string(cin) + " channels");
  require(weight.dim(3) == k, "conv2d: kernel must be square, got " + shape_str(weight.shape()));
  require(k >= 1 && stride >= 1, "conv2d: kernel size and stride must be >= 1");
  require(h + 2 * padding >= k && w + 2 * padding >= k, "conv2d: kernel larger than padded input");
  require(bias.defined() && bias.numel() == cout,
          "conv2d: bias must have C_out = " + std::to_string(cout) + " entries");

  const std::size_t oh = (h + 2 * padding - k) / stride + 1;
  const std::size_t ow = (w + 2 * padding - k) / stride + 1;
  const std::size_t plane = oh * ow, kk = cin * k * k;
  const bool direct = (k == 1 && stride == 1 && padding == 0);

  std::vector<T> out(n * cout * plane);
  std::vector<T> col(direct ? 0 : kk * plane);
  const T* x = input.data().data();
  const T* wt = weight.data().data();
  const T* bs = bias.data().data();
  for (std::size_t b = 0; b < n; ++b) {
    const T* xb = x + b * cin * h * w;
    const T* cols = xb;
    if (!direct) {
      im2col(xb, cin, h, w, k, stride, padding, oh, ow, col.data());
      cols = col.data();
    }
    T* yb = out.data() + b * cout * plane;
    for (std::size_t o = 0; o < cout; ++o) std::fill(yb + o * plane, yb + (o + 1) * plane, bs[o]);
    detail::gemm_acc(cout, plane, kk, wt, kk, cols, plane, yb, plane);
  }

  auto* xi = input.handle().get();
  auto* wi = weight.handle().get();
  auto* bi = bias.handle().get();
  return make_result<T>(
      Shape{n, cout, oh, ow}, std::move(out), {&input, &weight, &bias},
      [=](TensorImpl<T>& res) {
        const T* dy = res.grad.data();
        T* dx = grad_of(xi);
        T* dw = grad_of(wi);
        T* db = grad_of(bi);
        std::vector<T> colbuf(direct ? 0 : kk * plane), colt(dw ? kk * plane : 0), dcol(dx && !direct ? kk * plane : 0);
        std::vector<T> wt_t(dx ? kk * cout : 0);
        if (dx) detail::transpose_into(cout, kk, wi->data.data(), wt_t.data());
        for (std::size_t b = 0; b < n; ++b) {
          const T* dyb = dy + b * cout * plane;
          if (db) {
            for (std::size_t o = 0; o < cout; ++o) {
              T s = 0;
              for (std::size_t p = 0; p < plane; ++p) s += dyb[o * plane + p];
              db[o] += s;
            }
          }
          if (dw) {
            const T* xb = xi->data.data() + b * cin * h * w;
            const T* cols = xb;
            if (!direct) {
              im2col(xb, cin, h, w, k, stride, padding, oh, ow, colbuf.data());
              cols = colbuf.data();
            }
            detail::transpose_into(kk, plane, cols, colt.data());
            detail::gemm_acc(cout, kk, plane, dyb, plane, colt.data(), kk, dw, kk);
          }
          if (dx) {
            T* dxb = dx + b * cin * h * w;
            if (direct) {
              detail::gemm_acc(kk, plane, cout, wt_t.data(), cout, dyb, plane, dxb, plane);
            } else {
              std::fill(dcol.begin(), dcol.end(), T(0));
              detail::gemm_acc(kk, plane, cout, wt_t.data(), cout, dyb, plane, dcol.data(), plane);
              col2im(dcol.data(), cin, h, w, k, stride, padding, oh, ow, dxb);
            }
          }
        }
      });
}

// --- maxpool2 ---------------------------------------------------------------

template <typename T>
Tensor<T> maxpool2(const Tensor<T>& input) {
  require_rank(input, 4, "maxpool2", "input");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  require(h % 2 == 0, "maxpool2: height (dim 2) must be even, got " + std::to_string(h));
  require(w % 2 == 0, "maxpool2: width (dim 3) must be even, got " + std::to_string(w));
  const std::size_t oh = h / 2, ow = w / 2;
  std::vector<T> out(n * c * oh * ow);
  std::vector<std::size_t> argmax(out.size());
  const T* x = input.data().data();
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const T* xp = x + plane * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (2 * oy) * w + 2 * ox;
        const std::size_t cand[3] = {best + 1, best + w, best + w + 1};
        for (std::size_t idx : cand)
          if (xp[idx] > xp[best]) best = idx;
        const std::size_t o = (plane * oh + oy) * ow + ox;
        out[o] = xp[best];
        argmax[o] = plane * h * w + best;
      }
    }
  }
  auto* xi = input.handle().get();
  return make_result<T>(Shape{n, c, oh, ow}, std::move(out), {&input},
                        [xi, argmax = std::move(argmax)](TensorImpl<T>& res) {
                          T* dx = grad_of(xi);
                          if (!dx) return;
                          for (std::size_t o = 0; o < argmax.size(); ++o) dx[argmax[o]] += res.grad[o];
                        });
}

// --- upconv2 ----------------------------------------------------------------

template <typename T>
Tensor<T> upconv2(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank(input, 4, "upconv2", "input");
  require_rank(weight, 4, "upconv2", "weight");
  const std::size_t n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  require(weight.dim(0) == cin, "upconv2: weight C_in (dim 0) is " + std::to_string(weight.dim(0)) +
                                    " but input has " + std::to_string(cin) + " channels");
  require(weight.dim(2) == 2 && weight.dim(3) == 2, "upconv2: kernel must be 2x2, got " + shape_str(weight.shape()));
  const std::size_t cout = weight.dim(1);
  require(bias.defined() && bias.numel() == cout, "upconv2: bias must have C_out = " + std::to_string(cout) + " entries");
  const std::size_t oh = 2 * h, ow = 2 * w;

  std::vector<T> out(n * cout * oh * ow);
  const T* x = input.data().data();
  const T* wt = weight.data().data();
  const T* bs = bias.data().data();
  for (std::size_t b = 0; b < n; ++b) {
    T* yb = out.data() + b * cout * oh * ow;
    for (std::size_t o = 0; o < cout; ++o) std::fill(yb + o * oh * ow, yb + (o + 1) * oh * ow, bs[o]);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T* xp = x + (b * cin + ci) * h * w;
      for (std::size_t o = 0; o < cout; ++o) {
        T* yp = yb + o * oh * ow;
        const T* k4 = wt + (ci * cout + o) * 4;
        for (std::size_t y = 0; y < h; ++y) {
          T* top = yp + (2 * y) * ow;
          T* bot = top + ow;
          const T* xr = xp + y * w;
          for (std::size_t xx = 0; xx < w; ++xx) {
            const T v = xr[xx];
            top[2 * xx] += v * k4[0];
            top[2 * xx + 1] += v * k4[1];
            bot[2 * xx] += v * k4[2];
            bot[2 * xx + 1] += v * k4[3];
          }
        }
      }
    }
  }

  auto* xi = input.handle().get();
  auto* wi = weight.handle().get();
  auto* bi = bias.handle().get();
  return make_result<T>(Shape{n, cout, oh, ow}, std::move(out), {&input, &weight, &bias},
                        [=](TensorImpl<T>& res) {
                          const T* dy = res.grad.data();
                          T* dx = grad_of(xi);
                          T* dw = grad_of(wi);
                          T* db = grad_of(bi);
                          const T* xv = xi->data.data();
                          const T* wv = wi->data.data();
                          for (std::size_t b = 0; b < n; ++b) {
                            const T* dyb = dy + b * cout * oh * ow;
                            if (db) {
                              for (std::size_t o = 0; o < cout; ++o) {
                                T s = 0;
                                for (std::size_t p = 0; p < oh * ow; ++p) s += dyb[o * oh * ow + p];
                                db[o] += s;
                              }
                            }
                            for (std::size_t ci = 0; ci < cin; ++ci) {
                              const T* xp = xv + (b * cin + ci) * h * w;
                              T* dxp = dx ? dx + (b * cin + ci) * h * w : nullptr;
                              for (std::size_t o = 0; o < cout; ++o) {
                                const T* dyp = dyb + o * oh * ow;
                                const T* k4 = wv + (ci * cout + o) * 4;
                                T g0 = 0, g1 = 0, g2 = 0, g3 = 0;
                                for (std::size_t y = 0; y < h; ++y) {
                                  const T* top = dyp + (2 * y) * ow;
                                  const T* bot = top + ow;
                                  for (std::size_t xx = 0; xx < w; ++xx) {
                                    const T v = xp[y * w + xx];
                                    g0 += v * top[2 * xx];
                                    g1 += v * top[2 * xx + 1];
                                    g2 += v * bot[2 * xx];
                                    g3 += v * bot[2 * xx + 1];
                                    if (dxp) {
                                      dxp[y * w + xx] += k4[0] * top[2 * xx] + k4[1] * top[2 * xx + 1] +
                                                         k4[2] * bot[2 * xx] + k4[3] * bot[2 * xx + 1];
                                    }
                                  }
                                }
                                if (dw) {
                                  T* dk = dw + (ci * cout + o) * 4;
                                  dk[0] += g0;
                                  dk[1] += g1;
                                  dk[2] += g2;
                                  dk[3] += g3;
                                }
                              }
                            }
                          }
                        });
}

// --- batchnorm2d ------------------------------------------------------------

template <typename T>
BatchNormState<T> BatchNormState<T>::create(std::size_t channels) {
  BatchNormState s;
  s.running_mean = Tensor<T>::zeros({channels});
  s.running_var = Tensor<T>::full({channels}, T(1));
  return s;
}

template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                      BatchNormState<T>& state, Mode mode) {
  require_rank(input, 4, "batchnorm2d", "input");
  const std::size_t n = input.dim(0), c = input.dim(1), plane = input.dim(2) * input.dim(3);
  require(gamma.numel() == c && beta.numel() == c,
          "batchnorm2d: gamma/beta must have " + std::to_string(c) + " entries (channel dim 1)");
  require(state.running_mean.numel() == c && state.running_var.numel() == c,
          "batchnorm2d: running stats must have " + std::to_string(c) + " entries (channel dim 1)");
  const std::size_t count = n * plane;
  if (mode == Mode::train && count < 2) {
    throw ShapeError("batchnorm2d: train mode needs batch*H*W >= 2 per channel, got " + std::to_string(count));
  }

  const T* x = input.data().data();
  const T* g = gamma.data().data();
  const T* bt = beta.data().data();
  std::vector<T> out(input.numel());
  std::vector<T> xhat(input.numel());
  std::vector<T> invstd(c);

  for (std::size_t ch = 0; ch < c; ++ch) {
    T mu, var;
    if (mode == Mode::train) {
      double s = 0;
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t p = 0; p < plane; ++p) s += x[(b * c + ch) * plane + p];
      const double m = s / static_cast<double>(count);
      double ss = 0;
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t p = 0; p < plane; ++p) {
          const double d = x[(b * c + ch) * plane + p] - m;
          ss += d * d;
        }
      mu = static_cast<T>(m);
      var = static_cast<T>(ss / static_cast<double>(count));
      const T unbiased = static_cast<T>(ss / static_cast<double>(count - 1));
      T& rm = state.running_mean.values()[ch];
      T& rv = state.running_var.values()[ch];
      rm = (T(1) - state.momentum) * rm + state.momentum * mu;
      rv = (T(1) - state.momentum) * rv + state.momentum * unbiased;
    } else {
      mu = state.running_mean.values()[ch];
      var = state.running_var.values()[ch];
    }
    const T is = T(1) / std::sqrt(var + state.eps);
    invstd[ch] = is;
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t p = 0; p < plane; ++p) {
        const std::size_t i = (b * c + ch) * plane + p;
        const T xh = (x[i] - mu) * is;
        xhat[i] = xh;
        out[i] = g[ch] * xh + bt[ch];
      }
    }
  }

  auto* xi = input.handle().get();
  auto* gi = gamma.handle().get();
  auto* bi = beta.handle().get();
  const bool train = mode == Mode::train;
  return make_result<T>(
      input.shape(), std::move(out), {&input, &gamma, &beta},
      [=, xhat = std::move(xhat), invstd = std::move(invstd)](TensorImpl<T>& res) {
        const T* dy = res.grad.data();
        T* dx = grad_of(xi);
        T* dg = grad_of(gi);
        T* db = grad_of(bi);
        const T* gv = gi->data.data();
        for (std::size_t ch = 0; ch < c; ++ch) {
          T sum_dy = 0, sum_dy_xhat = 0;
          for (std::size_t b = 0; b < n; ++b)
            for (std::size_t p = 0; p < plane; ++p) {
              const std::size_t i = (b * c + ch) * plane + p;
              const T xh = xhat[i];
              sum_dy += dy[i];
              sum_dy_xhat += dy[i] * xh;
            }
          if (dg) dg[ch] += sum_dy_xhat;
          if (db) db[ch] += sum_dy;
          if (!dx) continue;
          const T scale_ch = gv[ch] * invstd[ch];
          if (train) {
            const T inv_count = T(1) / static_cast<T>(count);
            for (std::size_t b = 0; b < n; ++b)
              for (std::size_t p = 0; p < plane; ++p) {
                const std::size_t i = (b * c + ch) * plane + p;
                dx[i] += scale_ch * (dy[i] - inv_count * sum_dy - xhat[i] * inv_count * sum_dy_xhat);
              }
          } else {
            for (std::size_t b = 0; b < n; ++b)
              for (std::size_t p = 0; p < plane; ++p) {
                const std::size_t i = (b * c + ch) * plane + p;
                dx[i] += scale_ch * dy[i];
              }
          }
        }
      });
}

// --- elementwise ------------------------------------------------------------

template <typename T>
Tensor<T> elementwise(const Tensor<T>& input, Activation kind) {
  const T* x = input.data().data();
  const std::size_t count = input.numel();
  std::vector<T> out(count);
  switch (kind) {
    case Activation::relu:
      for (std::size_t i = 0; i < count; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < count; ++i) out[i] = std::tanh(x[i]);
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < count; ++i)
        out[i] = x[i] >= T(0) ? T(1) / (T(1) + std::exp(-x[i])) : std::exp(x[i]) / (T(1) + std::exp(x[i]));
      break;
  }
  auto* xi = input.handle().get();
  return make_result<T>(input.shape(), std::move(out), {&input}, [xi, kind](TensorImpl<T>& res) {
    T* dx = grad_of(xi);
    if (!dx) return;
    const T* dy = res.grad.data();
    const T* y = res.data.data();
    const std::size_t n = res.data.size();
    switch (kind) {
      case Activation::relu:
        for (std::size_t i = 0; i < n; ++i)
          if (xi->data[i] > T(0)) dx[i] += dy[i];
        break;
      case Activation::tanh:
        for (std::size_t i = 0; i < n; ++i) dx[i] += dy[i] * (T(1) - y[i] * y[i]);
        break;
      case Activation::sigmoid:
        for (std::size_t i = 0; i < n; ++i) dx[i] += dy[i] * y[i] * (T(1) - y[i]);
        break;
    }
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  auto* ai = a.handle().get();
  auto* bi = b.handle().get();
  return make_result<T>(a.shape(), std::move(out), {&a, &b}, [ai, bi](TensorImpl<T>& res) {
    for (auto* in : {ai, bi}) {
      T* d = grad_of(in);
      if (!d) continue;
      for (std::size_t i = 0; i < res.grad.size(); ++i) d[i] += res.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  auto* ai = a.handle().get();
  auto* bi = b.handle().get();
  return make_result<T>(a.shape(), std::move(out), {&a, &b}, [ai, bi](TensorImpl<T>& res) {
    const std::size_t n = res.grad.size();
    if (T* da = grad_of(ai))
      for (std::size_t i = 0; i < n; ++i) da[i] += res.grad[i] * bi->data[i];
    if (T* db = grad_of(bi))
      for (std::size_t i = 0; i < n; ++i) db[i] += res.grad[i] * ai->data[i];
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& input, T factor) {
  std::vector<T> out(input.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = input.data()[i] * factor;
  auto* xi = input.handle().get();
  return make_result<T>(input.shape(), std::move(out), {&input}, [xi, factor](TensorImpl<T>& res) {
    if (T* dx = grad_of(xi))
      for (std::size_t i = 0; i < res.grad.size(); ++i) dx[i] += res.grad[i] * factor;
  });
}

template <typename T>
Tensor<T> add_row_bias(const Tensor<T>& input, const Tensor<T>& bias) {
  require(input.rank() >= 1, "add_row_bias: input must have rank >= 1");
  const std::size_t cols = input.shape().back();
  require(bias.numel() == cols, "add_row_bias: bias has " + std::to_string(bias.numel()) +
                                    " entries but last dim is " + std::to_string(cols));
  const std::size_t rows = cols ? input.numel() / cols : 0;
  std::vector<T> out(input.numel());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = input.data()[r * cols + c] + bias.data()[c];
  auto* xi = input.handle().get();
  auto* bi = bias.handle().get();
  return make_result<T>(input.shape(), std::move(out), {&input, &bias}, [=](TensorImpl<T>& res) {
    if (T* dx = grad_of(xi))
      for (std::size_t i = 0; i < res.grad.size(); ++i) dx[i] += res.grad[i];
    if (T* db = grad_of(bi))
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) db[c] += res.grad[r * cols + c];
  });
}

// --- matrix products --------------------------------------------------------

namespace {

// Shared kernel for matmul and bmm: batch × (m×k · k×n).
template <typename T>
Tensor<T> batched_product(const Tensor<T>& a, const Tensor<T>& b, std::size_t batch, std::size_t m,
                          std::size_t k, std::size_t n, Shape out_shape) {
  std::vector<T> out(batch * m * n, T(0));
  for (std::size_t s = 0; s < batch; ++s)
    detail::gemm_acc(m, n, k, a.data().data() + s * m * k, k, b.data().data() + s * k * n, n,
                     out.data() + s * m * n, n);
  auto* ai = a.handle().get();
  auto* bi = b.handle().get();
  return make_result<T>(std::move(out_shape), std::move(out), {&a, &b}, [=](TensorImpl<T>& res) {
    T* da = grad_of(ai);
    T* db = grad_of(bi);
    std::vector<T> bt(da ? k * n : 0), at(db ? m * k : 0);
    for (std::size_t s = 0; s < batch; ++s) {
      const T* dc = res.grad.data() + s * m * n;
      if (da) {
        // dA = dC · Bᵀ
        detail::transpose_into(k, n, bi->data.data() + s * k * n, bt.data());
        detail::gemm_acc(m, k, n, dc, n, bt.data(), k, da + s * m * k, k);
      }
      if (db) {
        // dB = Aᵀ · dC
        detail::transpose_into(m, k, ai->data.data() + s * m * k, at.data());
        detail::gemm_acc(k, n, m, at.data(), m, dc, n, db + s * k * n, n);
      }
    }
  });
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a, 2, "matmul", "a");
  require_rank(b, 2, "matmul", "b");
  require(a.dim(1) == b.dim(0), "matmul: inner dimensions differ, a is " + shape_str(a.shape()) + " and b is " +
                                    shape_str(b.shape()));
  return batched_product(a, b, 1, a.dim(0), a.dim(1), b.dim(1), Shape{a.dim(0), b.dim(1)});
}

template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a, 3, "bmm", "a");
  require_rank(b, 3, "bmm", "b");
  require(a.dim(0) == b.dim(0), "bmm: batch dim 0 differs, " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  require(a.dim(2) == b.dim(1), "bmm: inner dimensions differ, a is " + shape_str(a.shape()) + " and b is " +
                                    shape_str(b.shape()));
  return batched_product(a, b, a.dim(0), a.dim(1), a.dim(2), b.dim(2), Shape{a.dim(0), a.dim(1), b.dim(2)});
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& input) {
  require(input.rank() == 2 || input.rank() == 3, "transpose: rank must be 2 or 3, got shape " +
                                                      shape_str(input.shape()));
  const bool batched = input.rank() == 3;
  const std::size_t batch = batched ? input.dim(0) : 1;
  const std::size_t rows = input.dim(batched ? 1 : 0), cols = input.dim(batched ? 2 : 1);
  std::vector<T> out(input.numel());
  for (std::size_t s = 0; s < batch; ++s)
    detail::transpose_into(rows, cols, input.data().data() + s * rows * cols, out.data() + s * rows * cols);
  Shape shape = batched ? Shape{batch, cols, rows} : Shape{cols, rows};
  auto* xi = input.handle().get();
  return make_result<T>(std::move(shape), std::move(out), {&input}, [=](TensorImpl<T>& res) {
    T* dx = grad_of(xi);
    if (!dx) return;
    std::vector<T> tmp(rows * cols);
    for (std::size_t s = 0; s < batch; ++s) {
      detail::transpose_into(cols, rows, res.grad.data() + s * rows * cols, tmp.data());
      for (std::size_t i = 0; i < tmp.size(); ++i) dx[s * rows * cols + i] += tmp[i];
    }
  });
}

template <typename T>
Tensor<T> rowsoftmax(const Tensor<T>& input) {
  require(input.rank() >= 1 && input.shape().back() > 0, "rowsoftmax: last dim must be nonempty");
  const std::size_t cols = input.shape().back();
  const std::size_t rows = input.numel() / cols;
  const T* x = input.data().data();
  std::vector<T> out(input.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x + r * cols;
    T* yr = out.data() + r * cols;
    const T mx = *std::max_element(xr, xr + cols);
    if (!std::isfinite(mx)) throw NumericError("rowsoftmax: row " + std::to_string(r) + " has no finite maximum");
    T total = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      yr[c] = std::exp(xr[c] - mx);
      total += yr[c];
    }
    const T inv = T(1) / total;
    for (std::size_t c = 0; c < cols; ++c) yr[c] *= inv;
  }
  auto* xi = input.handle().get();
  return make_result<T>(input.shape(), std::move(out), {&input}, [=](TensorImpl<T>& res) {
    T* dx = grad_of(xi);
    if (!dx) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const T* yr = res.data.data() + r * cols;
      const T* dy = res.grad.data() + r * cols;
      T dot = 0;
      for (std::size_t c = 0; c < cols; ++c) dot += dy[c] * yr[c];
      for (std::size_t c = 0; c < cols; ++c) dx[r * cols + c] += yr[c] * (dy[c] - dot);
    }
  });
}

// --- layout -----------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& input, Shape shape) {
  require(shape_numel(shape) == input.numel(), "reshape: cannot view " + shape_str(input.shape()) + " as " +
                                                   shape_str(shape));
  auto* xi = input.handle().get();
  return make_result<T>(std::move(shape), input.values(), {&input}, [xi](TensorImpl<T>& res) {
    if (T* dx = grad_of(xi))
      for (std::size_t i = 0; i < res.grad.size(); ++i) dx[i] += res.grad[i];
  });
}

template <typename T>
Tensor<T> pixels_to_rows(const Tensor<T>& input) {
  require_rank(input, 4, "pixels_to_rows", "input");
  const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  std::vector<T> out(input.numel());
  for (std::size_t b = 0; b < n; ++b)
    detail::transpose_into(c, hw, input.data().data() + b * c * hw, out.data() + b * c * hw);
  auto* xi = input.handle().get();
  return make_result<T>(Shape{n, hw, c}, std::move(out), {&input}, [=](TensorImpl<T>& res) {
    T* dx = grad_of(xi);
    if (!dx) return;
    std::vector<T> tmp(c * hw);
    for (std::size_t b = 0; b < n; ++b) {
      detail::transpose_into(hw, c, res.grad.data() + b * c * hw, tmp.data());
      for (std::size_t i = 0; i < tmp.size(); ++i) dx[b * c * hw + i] += tmp[i];
    }
  });
}

template <typename T>
Tensor<T> rows_to_pixels(const Tensor<T>& input, std::size_t height, std::size_t width) {
  require_rank(input, 3, "rows_to_pixels", "input");
  const std::size_t n = input.dim(0), hw = input.dim(1), c = input.dim(2);
  require(hw == height * width, "rows_to_pixels: dim 1 is " + std::to_string(hw) + ", expected " +
                                    std::to_string(height * width));
  std::vector<T> out(input.numel());
  for (std::size_t b = 0; b < n; ++b)
    detail::transpose_into(hw, c, input.data().data() + b * c * hw, out.data() + b * c * hw);
  auto* xi = input.handle().get();
  return make_result<T>(Shape{n, c, height, width}, std::move(out), {&input}, [=](TensorImpl<T>& res) {
    T* dx = grad_of(xi);
    if (!dx) return;
    std::vector<T> tmp(c * hw);
    for (std::size_t b = 0; b < n; ++b) {
      detail::transpose_into(c, hw, res.grad.data() + b * c * hw, tmp.data());
      for (std::size_t i = 0; i < tmp.size(); ++i) dx[b * c * hw + i] += tmp[i];
    }
  });
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a, 4, "concat_channels", "a");
  require_rank(b, 4, "concat_channels", "b");
  const char* names[] = {"batch (dim 0)", "", "height (dim 2)", "width (dim 3)"};
  for (std::size_t axis : {0u, 2u, 3u}) {
    require(a.dim(axis) == b.dim(axis), std::string("concat_channels: ") + names[axis] + " differs, " +
                                            shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const std::size_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1), plane = a.dim(2) * a.dim(3);
  std::vector<T> out(n * (ca + cb) * plane);
  for (std::size_t s = 0; s < n; ++s) {
    std::copy_n(a.data().data() + s * ca * plane, ca * plane, out.data() + s * (ca + cb) * plane);
    std::copy_n(b.data().data() + s * cb * plane, cb * plane, out.data() + (s * (ca + cb) + ca) * plane);
  }
  auto* ai = a.handle().get();
  auto* bi = b.handle().get();
  return make_result<T>(Shape{n, ca + cb, a.dim(2), a.dim(3)}, std::move(out), {&a, &b}, [=](TensorImpl<T>& res) {
    T* da = grad_of(ai);
    T* db = grad_of(bi);
    for (std::size_t s = 0; s < n; ++s) {
      const T* g = res.grad.data() + s * (ca + cb) * plane;
      if (da)
        for (std::size_t i = 0; i < ca * plane; ++i) da[s * ca * plane + i] += g[i];
      if (db)
        for (std::size_t i = 0; i < cb * plane; ++i) db[s * cb * plane + i] += g[ca * plane + i];
    }
  });
}

template <typename T>
Tensor<T> concat_batch(const std::vector<Tensor<T>>& parts) {
  require(!parts.empty(), "concat_batch: no inputs");
  Shape shape = parts.front().shape();
  require(shape.size() >= 1, "concat_batch: inputs must have rank >= 1");
  std::size_t total = 0;
  std::vector<T> out;
  for (const auto& p : parts) {
    require(p.rank() == shape.size() && std::equal(shape.begin() + 1, shape.end(), p.shape().begin() + 1),
            "concat_batch: trailing dims differ, " + shape_str(shape) + " vs " + shape_str(p.shape()));
    total += p.dim(0);
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  shape[0] = total;
  std::vector<const Tensor<T>*> inputs;
  std::vector<TensorImpl<T>*> impls;
  for (const auto& p : parts) {
    inputs.push_back(&p);
    impls.push_back(p.handle().get());
  }
  return make_result<T>(std::move(shape), std::move(out), std::span<const Tensor<T>* const>(inputs), [impls](TensorImpl<T>& res) {
    std::size_t offset = 0;
    for (auto* pi : impls) {
      if (T* dx = grad_of(pi))
        for (std::size_t i = 0; i < pi->data.size(); ++i) dx[i] += res.grad[offset + i];
      offset += pi->data.size();
    }
  });
}

// --- reductions and loss ----------------------------------------------------

template <typename T>
Tensor<T> sum(const Tensor<T>& input) {
  T total = 0;
  for (T v : input.data()) total += v;
  auto* xi = input.handle().get();
  return make_result<T>(Shape{1}, {total}, {&input}, [xi](TensorImpl<T>& res) {
    if (T* dx = grad_of(xi))
      for (std::size_t i = 0; i < xi->data.size(); ++i) dx[i] += res.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& input) {
  require(input.numel() > 0, "mean: empty input");
  return scale(sum(input), T(1) / static_cast<T>(input.numel()));
}

template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& targets) {
  require(logits.shape() == targets.shape(), "bce_with_logits: shape mismatch " + shape_str(logits.shape()) +
                                                 " vs " + shape_str(targets.shape()));
  require(logits.numel() > 0, "bce_with_logits: empty input");
  const std::size_t n = logits.numel();
  const T* z = logits.data().data();
  const T* t = targets.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    if (t[i] != T(0) && t[i] != T(1)) {
      throw std::invalid_argument("bce_with_logits: target at flat index " + std::to_string(i) + " is " +
                                  std::to_string(t[i]) + ", expected 0 or 1");
    }
  }
  // max(z,0) − z·t + log1p(exp(−|z|)) equals the two-branch form and never
  // exponentiates a positive number.
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double zi = z[i];
    total += std::max(zi, 0.0) - zi * t[i] + std::log1p(std::exp(-std::abs(zi)));
  }
  auto* zi = logits.handle().get();
  auto* ti = targets.handle().get();
  return make_result<T>(Shape{1}, {static_cast<T>(total / static_cast<double>(n))}, {&logits, &targets},
                        [=](TensorImpl<T>& res) {
                          T* dz = grad_of(zi);
                          if (!dz) return;
                          const T g = res.grad[0] / static_cast<T>(n);
                          for (std::size_t i = 0; i < n; ++i) {
                            const T v = zi->data[i];
                            const T sig = v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
                            dz[i] += g * (sig - ti->data[i]);
                          }
                        });
}

#define CTXN_INSTANTIATE_OPS(T)                                                                          \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t, std::size_t); \
  template Tensor<T> maxpool2(const Tensor<T>&);                                                         \
  template Tensor<T> upconv2(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                      \
  template struct BatchNormState<T>;                                                                     \
  template Tensor<T> batchnorm2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, BatchNormState<T>&, Mode); \
  template Tensor<T> elementwise(const Tensor<T>&, Activation);                                          \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                            \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                            \
  template Tensor<T> scale(const Tensor<T>&, T);                                                         \
  template Tensor<T> add_row_bias(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                         \
  template Tensor<T> bmm(const Tensor<T>&, const Tensor<T>&);                                            \
  template Tensor<T> transpose(const Tensor<T>&);                                                        \
  template Tensor<T> rowsoftmax(const Tensor<T>&);                                                       \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                                   \
  template Tensor<T> pixels_to_rows(const Tensor<T>&);                                                   \
  template Tensor<T> rows_to_pixels(const Tensor<T>&, std::size_t, std::size_t);                         \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> concat_batch(const std::vector<Tensor<T>>&);                                        \
  template Tensor<T> sum(const Tensor<T>&);                                                              \
  template Tensor<T> mean(const Tensor<T>&);                                                             \
  template Tensor<T> bce_with_logits(const Tensor<T>&, const Tensor<T>&);

CTXN_INSTANTIATE_OPS(float)
CTXN_INSTANTIATE_OPS(double)

}  // namespace ctxn
