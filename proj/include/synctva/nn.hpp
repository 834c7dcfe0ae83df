// SPDX-License-Identifier: Apache-2.0
/**
 * @file   nn.hpp
 * @brief  Parameter bookkeeping and attention primitives shared by the
 *         enhancement and fusion stages.
 */
#pragma once

#include <synctva/ops.hpp>
#include <synctva/rng.hpp>
#include <synctva/tensor.hpp>

#include <cstddef>
#include <string>
#include <vector>

namespace synctva {

struct NamedParam {
  std::string name;
  Tensor tensor;
};

using ParamList = std::vector<NamedParam>;

/// Appends `t` under `prefix + name` when the tensor is defined.
void collect_param(ParamList &out, const std::string &prefix, const char *name, const Tensor &t);
std::size_t count_parameters(const ParamList &params);

/// Glorot-uniform leaf requiring a gradient.
Tensor glorot(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng &rng);
Tensor zeros_param(Shape shape);
Tensor ones_param(Shape shape);

/// softmax(Q Kᵀ / sqrt(d_k)) V with d_k = Q.cols().
Tensor scaled_dot_attention(const Tensor &q, const Tensor &k, const Tensor &v);

/// Projects `query_src` with w_q and `kv_src` with w_k / w_v, runs scaled
/// dot attention independently on `heads` column blocks and concatenates
/// the head outputs.
Tensor multi_head_attention(const Tensor &query_src, const Tensor &kv_src, const Tensor &w_q,
                            const Tensor &w_k, const Tensor &w_v, std::size_t heads);

} // namespace synctva
