#include "wdtcn/ops.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace wdtcn {

namespace {

constexpr std::size_t kTimeTile = 256;

// out[r, t] += sum_k a[k * rows + r] * b[k * len + t]. Register-blocked over
// 4 output rows and 8 frames; the summation order is fixed, so results are
// reproducible.
void mix_rows(const double* __restrict a, const double* __restrict b, std::size_t depth,
              std::size_t len, double* __restrict out, std::size_t rows) {
  constexpr std::size_t kR = 4, kC = 8;
  std::size_t r = 0;
  for (; r + kR <= rows; r += kR) {
    std::size_t t = 0;
    for (; t + kC <= len; t += kC) {
      double acc[kR][kC] = {};
      for (std::size_t k = 0; k < depth; ++k) {
        const double* br = b + k * len + t;
        const double* ak = a + k * rows + r;
        for (std::size_t i = 0; i < kR; ++i)
          for (std::size_t j = 0; j < kC; ++j) acc[i][j] += ak[i] * br[j];
      }
      for (std::size_t i = 0; i < kR; ++i)
        for (std::size_t j = 0; j < kC; ++j) out[(r + i) * len + t + j] += acc[i][j];
    }
    for (; t < len; ++t) {
      for (std::size_t i = 0; i < kR; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < depth; ++k) acc += a[k * rows + r + i] * b[k * len + t];
        out[(r + i) * len + t] += acc;
      }
    }
  }
  for (; r < rows; ++r) {
    for (std::size_t t = 0; t < len; ++t) {
      double acc = 0.0;
      for (std::size_t k = 0; k < depth; ++k) acc += a[k * rows + r] * b[k * len + t];
      out[r * len + t] += acc;
    }
  }
}

// Dot products of every row of x [m x len] with every row of y [n x len],
// accumulated into out [m x n]. Two lanes per pair; time is tiled so both
// row blocks stay in cache.
template <std::size_t RI, std::size_t RJ>
void row_dots_block(const double* x, const double* y, std::size_t len,
                    std::size_t t0, std::size_t t1, std::size_t i0, std::size_t j0,
                    std::size_t n, double* out) {
  constexpr std::size_t kLanes = 2;
  double acc[RI][RJ][kLanes] = {};
  std::size_t t = t0;
  for (; t + kLanes <= t1; t += kLanes) {
    for (std::size_t i = 0; i < RI; ++i) {
      const double* xr = x + (i0 + i) * len + t;
      for (std::size_t j = 0; j < RJ; ++j) {
        const double* yr = y + (j0 + j) * len + t;
        for (std::size_t l = 0; l < kLanes; ++l) acc[i][j][l] += xr[l] * yr[l];
      }
    }
  }
  for (; t < t1; ++t)
    for (std::size_t i = 0; i < RI; ++i)
      for (std::size_t j = 0; j < RJ; ++j) acc[i][j][0] += x[(i0 + i) * len + t] * y[(j0 + j) * len + t];
  for (std::size_t i = 0; i < RI; ++i)
    for (std::size_t j = 0; j < RJ; ++j) out[(i0 + i) * n + j0 + j] += acc[i][j][0] + acc[i][j][1];
}

void row_dots(const double* x, std::size_t m, const double* y, std::size_t n,
              std::size_t len, double* out) {
  for (std::size_t t0 = 0; t0 < len; t0 += kTimeTile) {
    const std::size_t t1 = std::min(len, t0 + kTimeTile);
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) row_dots_block<4, 4>(x, y, len, t0, t1, i, j, n, out);
      for (; j < n; ++j) row_dots_block<4, 1>(x, y, len, t0, t1, i, j, n, out);
    }
    for (; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) row_dots_block<1, 1>(x, y, len, t0, t1, i, j, n, out);
  }
}

// Gradient buffer of parent `i`, or nullptr when it takes no gradient.
Tensor* grad_of(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? &p.grad_buffer() : nullptr;
}

const Tensor& value_of(const Node& self, std::size_t i) {
  return self.parents[i]->value;
}

void expect_rank(const Var& v, std::size_t rank, const char* op,
                 const char* what) {
  if (v.value().rank() != rank) {
    throw DimensionError(std::string(op) + ": " + what + " must be rank " +
                         std::to_string(rank) + ", got " +
                         shape_string(v.shape()));
  }
}

void expect_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

Var finish(const char* op, Tensor value, std::vector<NodePtr> parents,
           std::function<void(Node&)> fn) {
  check_finite(value, op);
  return make_node(std::move(value), std::move(parents), std::move(fn));
}

}  // namespace

Var conv1d(const Var& input, const Var& kernel, std::size_t stride,
           std::size_t padding) {
  expect_rank(input, 2, "conv1d", "input");
  expect_rank(kernel, 3, "conv1d", "kernel");
  const std::size_t cin = input.shape()[0];
  const std::size_t len = input.shape()[1];
  const std::size_t cout = kernel.shape()[0];
  const std::size_t ksize = kernel.shape()[2];
  if (kernel.shape()[1] != cin) {
    throw DimensionError("conv1d: kernel input channels (axis 1) = " +
                         std::to_string(kernel.shape()[1]) +
                         " but input channels (axis 0) = " +
                         std::to_string(cin));
  }
  if (stride == 0) throw ConfigError("conv1d: stride must be >= 1");
  if (len + 2 * padding < ksize) {
    throw DimensionError("conv1d: padded input length (axis 1) " +
                         std::to_string(len + 2 * padding) +
                         " shorter than kernel size (axis 2) " +
                         std::to_string(ksize));
  }
  const std::size_t lout = (len + 2 * padding - ksize) / stride + 1;
  const auto pad = static_cast<std::ptrdiff_t>(padding);
  const auto slen = static_cast<std::ptrdiff_t>(len);

  const Tensor& x = input.value();
  const Tensor& w = kernel.value();
  Tensor out({cout, lout});
  for (std::size_t o = 0; o < cout; ++o) {
    double* y = &out.at(o, 0);
    for (std::size_t c = 0; c < cin; ++c) {
      const double* xr = &x.at(c, 0);
      for (std::size_t k = 0; k < ksize; ++k) {
        const double wk = w.at(o, c, k);
        for (std::size_t l = 0; l < lout; ++l) {
          const std::ptrdiff_t idx =
              static_cast<std::ptrdiff_t>(l * stride + k) - pad;
          if (idx >= 0 && idx < slen) y[l] += wk * xr[idx];
        }
      }
    }
  }

  return finish("conv1d", std::move(out), {input.node(), kernel.node()},
                [=](Node& self) {
                  const Tensor& g = self.grad;
                  const Tensor& xv = value_of(self, 0);
                  const Tensor& wv = value_of(self, 1);
                  Tensor* dx = grad_of(self, 0);
                  Tensor* dw = grad_of(self, 1);
                  for (std::size_t o = 0; o < cout; ++o) {
                    const double* go = &g.at(o, 0);
                    for (std::size_t c = 0; c < cin; ++c) {
                      const double* xr = &xv.at(c, 0);
                      for (std::size_t k = 0; k < ksize; ++k) {
                        double acc = 0.0;
                        const double wk = wv.at(o, c, k);
                        for (std::size_t l = 0; l < lout; ++l) {
                          const std::ptrdiff_t idx =
                              static_cast<std::ptrdiff_t>(l * stride + k) - pad;
                          if (idx < 0 || idx >= slen) continue;
                          acc += xr[idx] * go[l];
                          if (dx) dx->at(c, idx) += wk * go[l];
                        }
                        if (dw) dw->at(o, c, k) += acc;
                      }
                    }
                  }
                });
}

Var depthwise_conv1d(const Var& input, const Var& kernel,
                     std::size_t dilation) {
  expect_rank(input, 2, "depthwise_conv1d", "input");
  expect_rank(kernel, 2, "depthwise_conv1d", "kernel");
  const std::size_t channels = input.shape()[0];
  const std::size_t len = input.shape()[1];
  const std::size_t ksize = kernel.shape()[1];
  if (kernel.shape()[0] != channels) {
    throw DimensionError("depthwise_conv1d: kernel rows (axis 0) = " +
                         std::to_string(kernel.shape()[0]) +
                         " but input channels (axis 0) = " +
                         std::to_string(channels));
  }
  if (ksize % 2 == 0) {
    throw ConfigError("depthwise_conv1d: kernel size must be odd, got " +
                      std::to_string(ksize));
  }
  if (dilation == 0) throw ConfigError("depthwise_conv1d: dilation must be >= 1");
  const auto half = static_cast<std::ptrdiff_t>((ksize - 1) / 2);
  const auto slen = static_cast<std::ptrdiff_t>(len);
  const auto dil = static_cast<std::ptrdiff_t>(dilation);

  // Valid output range [lo, hi) for tap offset d so that t + d stays inside.
  auto range = [slen](std::ptrdiff_t d) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -d);
    const std::ptrdiff_t hi = std::min(slen, slen - d);
    return std::pair{lo, hi};
  };

  const Tensor& x = input.value();
  const Tensor& w = kernel.value();
  Tensor out({channels, len});
  for (std::size_t g = 0; g < channels; ++g) {
    const double* xr = &x.at(g, 0);
    double* y = &out.at(g, 0);
    for (std::size_t p = 0; p < ksize; ++p) {
      const std::ptrdiff_t d = (static_cast<std::ptrdiff_t>(p) - half) * dil;
      const double wk = w.at(g, p);
      const auto [lo, hi] = range(d);
      for (std::ptrdiff_t t = lo; t < hi; ++t) y[t] += wk * xr[t + d];
    }
  }

  return finish(
      "depthwise_conv1d", std::move(out), {input.node(), kernel.node()},
      [=](Node& self) {
        const Tensor& gt = self.grad;
        const Tensor& xv = value_of(self, 0);
        const Tensor& wv = value_of(self, 1);
        Tensor* dx = grad_of(self, 0);
        Tensor* dw = grad_of(self, 1);
        for (std::size_t g = 0; g < channels; ++g) {
          const double* go = &gt.at(g, 0);
          const double* xr = &xv.at(g, 0);
          for (std::size_t p = 0; p < ksize; ++p) {
            const std::ptrdiff_t d =
                (static_cast<std::ptrdiff_t>(p) - half) * dil;
            const auto [lo, hi] = range(d);
            if (dw) {
              double acc = 0.0;
              for (std::ptrdiff_t t = lo; t < hi; ++t) acc += xr[t + d] * go[t];
              dw->at(g, p) += acc;
            }
            if (dx) {
              const double wk = wv.at(g, p);
              double* dxr = &dx->at(g, 0);
              for (std::ptrdiff_t t = lo; t < hi; ++t) dxr[t + d] += wk * go[t];
            }
          }
        }
      });
}

Var pointwise_conv1d(const Var& input, const Var& kernel) {
  expect_rank(input, 2, "pointwise_conv1d", "input");
  expect_rank(kernel, 2, "pointwise_conv1d", "kernel");
  const std::size_t gin = input.shape()[0];
  const std::size_t len = input.shape()[1];
  const std::size_t hout = kernel.shape()[1];
  if (kernel.shape()[0] != gin) {
    throw DimensionError("pointwise_conv1d: kernel rows (axis 0) = " +
                         std::to_string(kernel.shape()[0]) +
                         " but input channels (axis 0) = " +
                         std::to_string(gin));
  }
  Tensor out({hout, len});
  // out[h, t] = sum_g w[g, h] x[g, t]
  mix_rows(kernel.value().data().data(), input.value().data().data(), gin, len,
           out.data().data(), hout);

  return finish("pointwise_conv1d", std::move(out),
                {input.node(), kernel.node()}, [=](Node& self) {
                  const double* go = self.grad.data().data();
                  const double* xv = value_of(self, 0).data().data();
                  const double* wv = value_of(self, 1).data().data();
                  // dx[g, t] += sum_h w[g, h] go[h, t]
                  if (Tensor* dx = grad_of(self, 0)) {
                    std::vector<double> wt(hout * gin);
                    for (std::size_t g = 0; g < gin; ++g)
                      for (std::size_t h = 0; h < hout; ++h) wt[h * gin + g] = wv[g * hout + h];
                    mix_rows(wt.data(), go, hout, len, dx->data().data(), gin);
                  }
                  // dw[g, h] += sum_t x[g, t] go[h, t]
                  if (Tensor* dw = grad_of(self, 1)) {
                    row_dots(xv, gin, go, hout, len, dw->data().data());
                  }
                });
}

Var transposed_conv1d(const Var& input, const Var& kernel, std::size_t stride) {
  expect_rank(input, 2, "transposed_conv1d", "input");
  expect_rank(kernel, 2, "transposed_conv1d", "kernel");
  const std::size_t channels = input.shape()[0];
  const std::size_t frames = input.shape()[1];
  const std::size_t ksize = kernel.shape()[1];
  if (kernel.shape()[0] != channels) {
    throw DimensionError("transposed_conv1d: kernel rows (axis 0) = " +
                         std::to_string(kernel.shape()[0]) +
                         " but input channels (axis 0) = " +
                         std::to_string(channels));
  }
  if (stride == 0 || ksize % stride != 0) {
    throw ConfigError("transposed_conv1d: stride " + std::to_string(stride) +
                      " must divide kernel size " + std::to_string(ksize));
  }
  const std::size_t out_len = (frames - 1) * stride + ksize;
  const Tensor& x = input.value();
  const Tensor& w = kernel.value();
  Tensor out({1, out_len});
  double* y = out.data().data();
  for (std::size_t n = 0; n < channels; ++n) {
    const double* wr = &w.at(n, 0);
    const double* xr = &x.at(n, 0);
    for (std::size_t l = 0; l < frames; ++l) {
      const double a = xr[l];
      double* yl = y + l * stride;
      for (std::size_t j = 0; j < ksize; ++j) yl[j] += a * wr[j];
    }
  }

  return finish("transposed_conv1d", std::move(out),
                {input.node(), kernel.node()}, [=](Node& self) {
                  const double* g = self.grad.data().data();
                  const Tensor& xv = value_of(self, 0);
                  const Tensor& wv = value_of(self, 1);
                  Tensor* dx = grad_of(self, 0);
                  Tensor* dw = grad_of(self, 1);
                  for (std::size_t n = 0; n < channels; ++n) {
                    const double* wr = &wv.at(n, 0);
                    const double* xr = &xv.at(n, 0);
                    for (std::size_t l = 0; l < frames; ++l) {
                      const double* gl = g + l * stride;
                      if (dx) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < ksize; ++j) acc += wr[j] * gl[j];
                        dx->at(n, l) += acc;
                      }
                      if (dw) {
                        double* dwr = &dw->at(n, 0);
                        const double a = xr[l];
                        for (std::size_t j = 0; j < ksize; ++j) dwr[j] += a * gl[j];
                      }
                    }
                  }
                });
}

Var relu(const Var& x) {
  Tensor out = x.value();
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return finish("relu", std::move(out), {x.node()}, [](Node& self) {
    const Tensor& xv = value_of(self, 0);
    Tensor* dx = grad_of(self, 0);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      if (xv[i] > 0.0) (*dx)[i] += self.grad[i];
    }
  });
}

Var prelu(const Var& x, const Var& slope) {
  if (slope.value().size() != 1) {
    throw DimensionError("prelu: slope must hold one value, got " +
                         shape_string(slope.shape()));
  }
  const double a = slope.value()[0];
  Tensor out = x.value();
  for (double& v : out.data()) v = v > 0.0 ? v : a * v;
  return finish("prelu", std::move(out), {x.node(), slope.node()},
                [a](Node& self) {
                  const Tensor& xv = value_of(self, 0);
                  Tensor* dx = grad_of(self, 0);
                  Tensor* da = grad_of(self, 1);
                  double acc = 0.0;
                  for (std::size_t i = 0; i < xv.size(); ++i) {
                    const double g = self.grad[i];
                    if (xv[i] > 0.0) {
                      if (dx) (*dx)[i] += g;
                    } else {
                      if (dx) (*dx)[i] += a * g;
                      acc += xv[i] * g;
                    }
                  }
                  if (da) (*da)[0] += acc;
                });
}

Var softmax(const Var& x) {
  expect_rank(x, 1, "softmax", "input");
  const auto in = x.value().data();
  const double m = *std::max_element(in.begin(), in.end());
  Tensor out(x.shape());
  double z = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i] = std::exp(in[i] - m);
    z += out[i];
  }
  out *= 1.0 / z;
  Tensor y = out;
  return finish("softmax", std::move(out), {x.node()},
                [y = std::move(y)](Node& self) {
                  const double gy = dot(self.grad.data(), y.data());
                  Tensor* dx = grad_of(self, 0);
                  for (std::size_t i = 0; i < y.size(); ++i) {
                    (*dx)[i] += y[i] * (self.grad[i] - gy);
                  }
                });
}

Var global_layer_norm(const Var& x, const Var& gain, const Var& bias,
                      double eps, bool detach_stats) {
  expect_rank(x, 2, "global_layer_norm", "input");
  const std::size_t channels = x.shape()[0];
  const std::size_t len = x.shape()[1];
  if (gain.value().size() != channels || bias.value().size() != channels) {
    throw DimensionError("global_layer_norm: gain/bias need " +
                         std::to_string(channels) + " entries (axis 0)");
  }
  if (!(eps > 0.0)) throw ConfigError("global_layer_norm: eps must be > 0");
  const Tensor& xv = x.value();
  const double count = static_cast<double>(xv.size());
  double mean = 0.0;
  for (double v : xv.data()) mean += v;
  mean /= count;
  double var = 0.0;
  for (double v : xv.data()) var += (v - mean) * (v - mean);
  var /= count;
  const double inv_std = 1.0 / std::sqrt(var + eps);

  Tensor out({channels, len});
  for (std::size_t c = 0; c < channels; ++c) {
    const double gc = gain.value()[c];
    const double bc = bias.value()[c];
    const double* xr = &xv.at(c, 0);
    double* y = &out.at(c, 0);
    for (std::size_t t = 0; t < len; ++t) {
      y[t] = gc * (xr[t] - mean) * inv_std + bc;
    }
  }

  return finish(
      "global_layer_norm", std::move(out), {x.node(), gain.node(), bias.node()},
      [=](Node& self) {
        const Tensor& g = self.grad;
        const Tensor& xin = value_of(self, 0);
        const Tensor& gv = value_of(self, 1);
        Tensor* dx = grad_of(self, 0);
        Tensor* dgain = grad_of(self, 1);
        Tensor* dbias = grad_of(self, 2);
        // dxhat = g * gain; accumulate its mean and its correlation with xhat.
        double sum_dxhat = 0.0;
        double sum_dxhat_xhat = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
          const double* gr = &g.at(c, 0);
          const double* xr = &xin.at(c, 0);
          double sg = 0.0;
          double sgx = 0.0;
          for (std::size_t t = 0; t < len; ++t) {
            const double xhat = (xr[t] - mean) * inv_std;
            sg += gr[t];
            sgx += gr[t] * xhat;
          }
          if (dgain) (*dgain)[c] += sgx;
          if (dbias) (*dbias)[c] += sg;
          sum_dxhat += gv[c] * sg;
          sum_dxhat_xhat += gv[c] * sgx;
        }
        if (!dx) return;
        const double mean_dxhat = detach_stats ? 0.0 : sum_dxhat / count;
        const double mean_dxhat_xhat = detach_stats ? 0.0 : sum_dxhat_xhat / count;
        for (std::size_t c = 0; c < channels; ++c) {
          const double* gr = &g.at(c, 0);
          const double* xr = &xin.at(c, 0);
          double* dxr = &dx->at(c, 0);
          const double gc = gv[c];
          for (std::size_t t = 0; t < len; ++t) {
            const double xhat = (xr[t] - mean) * inv_std;
            dxr[t] += inv_std * (gc * gr[t] - mean_dxhat - xhat * mean_dxhat_xhat);
          }
        }
      });
}

Var global_avg_pool(const Var& x) {
  expect_rank(x, 2, "global_avg_pool", "input");
  const std::size_t channels = x.shape()[0];
  const std::size_t len = x.shape()[1];
  Tensor out({channels});
  for (std::size_t c = 0; c < channels; ++c) {
    double acc = 0.0;
    for (double v : x.value().row(c)) acc += v;
    out[c] = acc / static_cast<double>(len);
  }
  return finish("global_avg_pool", std::move(out), {x.node()},
                [=](Node& self) {
                  Tensor* dx = grad_of(self, 0);
                  const double inv = 1.0 / static_cast<double>(len);
                  for (std::size_t c = 0; c < channels; ++c) {
                    const double g = self.grad[c] * inv;
                    for (double& v : dx->row(c)) v += g;
                  }
                });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  expect_rank(x, 1, "linear", "input");
  expect_rank(weight, 2, "linear", "weight");
  const std::size_t din = x.shape()[0];
  const std::size_t dout = weight.shape()[0];
  if (weight.shape()[1] != din) {
    throw DimensionError("linear: weight columns (axis 1) = " +
                         std::to_string(weight.shape()[1]) +
                         " but input size (axis 0) = " + std::to_string(din));
  }
  if (bias.value().size() != dout) {
    throw DimensionError("linear: bias needs " + std::to_string(dout) +
                         " entries (weight axis 0)");
  }
  Tensor out({dout});
  for (std::size_t o = 0; o < dout; ++o) {
    out[o] = dot(weight.value().row(o), x.value().data()) + bias.value()[o];
  }
  return finish("linear", std::move(out),
                {x.node(), weight.node(), bias.node()}, [=](Node& self) {
                  const Tensor& g = self.grad;
                  const Tensor& xv = value_of(self, 0);
                  const Tensor& wv = value_of(self, 1);
                  Tensor* dx = grad_of(self, 0);
                  Tensor* dw = grad_of(self, 1);
                  Tensor* db = grad_of(self, 2);
                  for (std::size_t o = 0; o < dout; ++o) {
                    if (db) (*db)[o] += g[o];
                    for (std::size_t i = 0; i < din; ++i) {
                      if (dw) dw->at(o, i) += g[o] * xv[i];
                      if (dx) (*dx)[i] += wv.at(o, i) * g[o];
                    }
                  }
                });
}

Var add(const Var& a, const Var& b) {
  expect_same_shape(a, b, "add");
  Tensor out = a.value();
  out += b.value();
  return finish("add", std::move(out), {a.node(), b.node()}, [](Node& self) {
    for (std::size_t i = 0; i < 2; ++i) {
      if (Tensor* d = grad_of(self, i)) *d += self.grad;
    }
  });
}

Var mul(const Var& a, const Var& b) {
  expect_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return finish("mul", std::move(out), {a.node(), b.node()}, [](Node& self) {
    const Tensor& av = value_of(self, 0);
    const Tensor& bv = value_of(self, 1);
    Tensor* da = grad_of(self, 0);
    Tensor* db = grad_of(self, 1);
    for (std::size_t i = 0; i < av.size(); ++i) {
      if (da) (*da)[i] += self.grad[i] * bv[i];
      if (db) (*db)[i] += self.grad[i] * av[i];
    }
  });
}

Var scale(const Var& x, double factor) {
  Tensor out = x.value();
  out *= factor;
  return finish("scale", std::move(out), {x.node()}, [factor](Node& self) {
    Tensor* dx = grad_of(self, 0);
    for (std::size_t i = 0; i < dx->size(); ++i) (*dx)[i] += factor * self.grad[i];
  });
}

Var sum(const Var& x) {
  return finish("sum", Tensor::scalar(x.value().sum()), {x.node()},
                [](Node& self) {
                  const double g = self.grad[0];
                  for (double& v : grad_of(self, 0)->data()) v += g;
                });
}

Var weighted_sum(const std::vector<Var>& terms, const Var& weights) {
  expect_rank(weights, 1, "weighted_sum", "weights");
  if (terms.empty() || weights.shape()[0] != terms.size()) {
    throw DimensionError("weighted_sum: " + std::to_string(terms.size()) +
                         " terms but weights shape " +
                         shape_string(weights.shape()));
  }
  Tensor out(terms[0].shape());
  std::vector<NodePtr> parents;
  parents.reserve(terms.size() + 1);
  for (std::size_t q = 0; q < terms.size(); ++q) {
    expect_same_shape(terms[q], terms[0], "weighted_sum");
    const double a = weights.value()[q];
    const auto src = terms[q].value().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += a * src[i];
    parents.push_back(terms[q].node());
  }
  parents.push_back(weights.node());
  const std::size_t count = terms.size();
  return finish("weighted_sum", std::move(out), std::move(parents),
                [count](Node& self) {
                  const Tensor& wv = value_of(self, count);
                  Tensor* dw = grad_of(self, count);
                  for (std::size_t q = 0; q < count; ++q) {
                    const Tensor& tv = value_of(self, q);
                    if (dw) (*dw)[q] += dot(tv.data(), self.grad.data());
                    if (Tensor* dt = grad_of(self, q)) {
                      const double a = wv[q];
                      for (std::size_t i = 0; i < dt->size(); ++i) {
                        (*dt)[i] += a * self.grad[i];
                      }
                    }
                  }
                });
}

Var trim_columns(const Var& x, std::size_t length) {
  expect_rank(x, 2, "trim_columns", "input");
  const std::size_t rows = x.shape()[0];
  const std::size_t cols = x.shape()[1];
  if (length == 0 || length > cols) {
    throw DimensionError("trim_columns: cannot keep " + std::to_string(length) +
                         " of " + std::to_string(cols) + " columns (axis 1)");
  }
  Tensor out({rows, length});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(x.value().row(r).begin(), length, out.row(r).begin());
  }
  return finish("trim_columns", std::move(out), {x.node()},
                [rows, length](Node& self) {
                  Tensor* dx = grad_of(self, 0);
                  for (std::size_t r = 0; r < rows; ++r) {
                    auto src = self.grad.row(r);
                    auto dst = dx->row(r);
                    for (std::size_t t = 0; t < length; ++t) dst[t] += src[t];
                  }
                });
}

Var column(const Var& x, std::size_t t) {
  expect_rank(x, 2, "column", "input");
  const std::size_t rows = x.shape()[0];
  if (t >= x.shape()[1]) {
    throw DimensionError("column: index " + std::to_string(t) +
                         " out of range for axis 1 of " +
                         shape_string(x.shape()));
  }
  Tensor out({rows});
  for (std::size_t r = 0; r < rows; ++r) out[r] = x.value().at(r, t);
  return finish("column", std::move(out), {x.node()},
                [rows, t](Node& self) {
                  Tensor* dx = grad_of(self, 0);
                  for (std::size_t r = 0; r < rows; ++r) dx->at(r, t) += self.grad[r];
                });
}

}  // namespace wdtcn
