#pragma once

#include <cstddef>
#include <vector>

#include "wdtcn/autodiff.h"

namespace wdtcn {

// All convolutions use the cross-correlation convention (no kernel flip).

// input [C_in x L], kernel [C_out x C_in x K] -> [C_out x L_out] with
// L_out = floor((L + 2*padding - K) / stride) + 1.
Var conv1d(const Var& input, const Var& kernel, std::size_t stride = 1,
           std::size_t padding = 0);

// input [G x L], kernel [G x P] with P odd. Row g is correlated with kernel
// row g at the given dilation; (P-1)*dilation/2 zeros on each side keep the
// length.
Var depthwise_conv1d(const Var& input, const Var& kernel,
                     std::size_t dilation = 1);

// input [G x L], kernel [G x H_out] -> [H_out x L]; out[:, t] = K^T in[:, t].
Var pointwise_conv1d(const Var& input, const Var& kernel);

// input [N x L_x], kernel [N x K] -> [1 x (L_x - 1)*stride + K]. Adjoint of
// conv1d with a [N x 1 x K] kernel at the same stride.
Var transposed_conv1d(const Var& input, const Var& kernel, std::size_t stride);

Var relu(const Var& x);
// slope is a single-element tensor shared by every entry.
Var prelu(const Var& x, const Var& slope);

// Rank-1 softmax, max-shifted for stability.
Var softmax(const Var& x);

// Global layer norm over channels and time jointly, then per-channel
// gain/bias. With `detach_stats` the mean and variance are treated as
// constants during backward.
Var global_layer_norm(const Var& x, const Var& gain, const Var& bias,
                      double eps = 1e-8, bool detach_stats = false);

// [H x L] -> [H], mean over time.
Var global_avg_pool(const Var& x);

// [D_in] -> [D_out]; weight is [D_out x D_in].
Var linear(const Var& x, const Var& weight, const Var& bias);

Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& x, double factor);
// Sum of all entries, shape [1].
Var sum(const Var& x);

// sum_q weights[q] * terms[q]; weights is rank-1 with one entry per term.
Var weighted_sum(const std::vector<Var>& terms, const Var& weights);

// Leading `length` columns of a [C x L] tensor.
Var trim_columns(const Var& x, std::size_t length);

// Selects column `t` of a [C x L] tensor as [C].
Var column(const Var& x, std::size_t t);

}  // namespace wdtcn
