// SPDX-License-Identifier: Apache-2.0
#include <synctva/errors.hpp>
#include <synctva/nn.hpp>

#include <cmath>

namespace synctva {

void collect_param(ParamList &out, const std::string &prefix, const char *name, const Tensor &t) {
  if (t.defined())
    out.push_back({prefix + name, t});
}

std::size_t count_parameters(const ParamList &params) {
  std::size_t n = 0;
  for (const auto &p : params)
    n += p.tensor.numel();
  return n;
}

Tensor glorot(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng &rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(shape_numel(shape));
  for (double &x : v)
    x = rng.uniform(-a, a);
  return Tensor(std::move(shape), std::move(v), true);
}

Tensor zeros_param(Shape shape) { return Tensor::zeros(std::move(shape), true); }
Tensor ones_param(Shape shape) { return Tensor::full(std::move(shape), 1.0, true); }

Tensor scaled_dot_attention(const Tensor &q, const Tensor &k, const Tensor &v) {
  if (q.cols() != k.cols() || k.rows() != v.rows())
    throw DimensionError("attention: query " + shape_str(q.shape()) + ", key " +
                         shape_str(k.shape()) + ", value " + shape_str(v.shape()));
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Tensor weights = softmax_rows(scale(matmul(q, transpose(k)), inv_scale));
  return matmul(weights, v);
}

Tensor multi_head_attention(const Tensor &query_src, const Tensor &kv_src, const Tensor &w_q,
                            const Tensor &w_k, const Tensor &w_v, std::size_t heads) {
  const std::size_t d = w_q.cols();
  if (heads == 0 || d % heads != 0)
    throw ConfigError("attention width " + std::to_string(d) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  Tensor q = matmul(query_src, w_q);
  Tensor k = matmul(kv_src, w_k);
  Tensor v = matmul(kv_src, w_v);
  if (heads == 1)
    return scaled_dot_attention(q, k, v);
  const std::size_t hd = d / heads;
  Tensor out;
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor head = scaled_dot_attention(slice_cols(q, h * hd, hd), slice_cols(k, h * hd, hd),
                                       slice_cols(v, h * hd, hd));
    out = out.defined() ? concat(out, head, 1) : head;
  }
  return out;
}

} // namespace synctva
