// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <synctva/rng.hpp>
#include <synctva/tensor.hpp>

#include <numeric>
#include <vector>

namespace synctva::testing {

inline std::vector<std::size_t> random_permutation(std::size_t n, Rng &rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  for (std::size_t i = n; i > 1; --i)
    std::swap(p[i - 1], p[rng.below(i)]);
  return p;
}

// out[i] = x[perm[i]].
inline Tensor permute_rows(const Tensor &x, const std::vector<std::size_t> &perm) {
  const std::size_t c = x.cols();
  std::vector<double> v(x.numel());
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t j = 0; j < c; ++j)
      v[i * c + j] = x.at(perm[i], j);
  return Tensor(x.shape(), std::move(v));
}

// Applies an utterance permutation to both halves of a 2N-row node matrix.
inline std::vector<std::size_t> lift_to_nodes(const std::vector<std::size_t> &perm) {
  const std::size_t n = perm.size();
  std::vector<std::size_t> out(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = perm[i];
    out[n + i] = n + perm[i];
  }
  return out;
}

inline double max_abs_diff(const Tensor &a, const Tensor &b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(a.at(i) - b.at(i)));
  return a.shape() == b.shape() ? m : INFINITY;
}

} // namespace synctva::testing
