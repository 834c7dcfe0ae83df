// SPDX-License-Identifier: Apache-2.0
/**
 * @file   ops.hpp
 * @brief  Differentiable tensor operations.
 *
 * Matrices are 2-D row-major tensors; vectors are 1-D. Elementwise binary
 * ops accept identical shapes or a single-element operand on either side.
 * Every op throws DimensionError naming both shapes on mismatch.
 */
#pragma once

#include <synctva/rng.hpp>
#include <synctva/tensor.hpp>

#include <cstddef>
#include <span>

namespace synctva {

Tensor matmul(const Tensor &a, const Tensor &b);
Tensor transpose(const Tensor &a);

Tensor add(const Tensor &a, const Tensor &b);
Tensor sub(const Tensor &a, const Tensor &b);
Tensor mul(const Tensor &a, const Tensor &b);
Tensor scale(const Tensor &a, double factor);

/// x[m×n] + b[n] broadcast over rows.
Tensor add_bias(const Tensor &x, const Tensor &bias);

Tensor sigmoid(const Tensor &x);
Tensor tanh(const Tensor &x);
Tensor relu(const Tensor &x);

enum class Pointwise { Add, Mul, Sigmoid, Tanh, Relu };
/// Dispatch form: unary kinds take `b` undefined.
Tensor elementwise(Pointwise kind, const Tensor &a, const Tensor &b = Tensor());

/// Row-wise softmax with max subtraction. 1-D input is one row.
Tensor softmax_rows(const Tensor &x);

/// Per-row normalization to zero mean / unit variance, then gamma*x + beta.
Tensor layer_norm(const Tensor &x, const Tensor &gamma, const Tensor &beta,
                  double eps = 1e-5);

/// Same-length 1-D convolution along rows with zero padding.
/// x: N×c_in, kernel: k×c_in×c_out (k odd), bias: c_out.
Tensor conv1d_seq(const Tensor &x, const Tensor &kernel, const Tensor &bias);

/// Concatenation. axis 0 stacks rows (or joins vectors), axis 1 joins columns.
Tensor concat(const Tensor &a, const Tensor &b, std::size_t axis);

Tensor slice_rows(const Tensor &x, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor &x, std::size_t begin, std::size_t count);

Tensor sum(const Tensor &x);
Tensor mean(const Tensor &x);

/// Inverted dropout; identity when p == 0.
Tensor dropout(const Tensor &x, double p, Rng &rng);

/// [[0, S], [Sᵀ, 0]] for a square N×N block S.
Tensor bipartite_embed(const Tensor &block);

/// D̃^{-1/2} (A + I) D̃^{-1/2} with D̃ the row-sum degree of A + I.
Tensor normalized_propagator(const Tensor &adjacency);

/// Rows (i, N+i) of a 2N×d matrix averaged into row i of an N×d result.
Tensor pair_mean_rows(const Tensor &x);

/// Mean of -log(max(p[i][y_i], floor)) over rows.
Tensor cross_entropy(const Tensor &probs, std::span<const int> labels, double floor = 1e-12);

} // namespace synctva
