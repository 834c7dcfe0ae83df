// SPDX-License-Identifier: Apache-2.0
#include <synctva/errors.hpp>
#include <synctva/ops.hpp>

#include <algorithm>
#include <cmath>

namespace synctva {

using detail::make_result;
using detail::Node;

namespace {

// C[m×n] += A[m×k] · B[k×n]
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double *a, const double *b,
             double *c) {
  for (std::size_t i = 0; i < m; ++i) {
    double *ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0)
        continue;
      const double *bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j)
        ci[j] += aip * bp[j];
    }
  }
}

// C[m×n] += A[m×k] · B[n×k]ᵀ
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const double *a, const double *b,
             double *c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double *ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double *bj = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p)
        s += ai[p] * bj[p];
      c[i * n + j] += s;
    }
  }
}

// C[m×n] += A[k×m]ᵀ · B[k×n]
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double *a, const double *b,
             double *c) {
  for (std::size_t p = 0; p < k; ++p) {
    const double *ap = a + p * m;
    const double *bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double api = ap[i];
      if (api == 0.0)
        continue;
      double *ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j)
        ci[j] += api * bp[j];
    }
  }
}

void require_matrix(const Tensor &t, const char *op) {
  if (t.dim() != 2)
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " +
                         shape_str(t.shape()));
}

[[noreturn]] void mismatch(const char *op, const Tensor &a, const Tensor &b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) +
                       " and " + shape_str(b.shape()));
}

enum class Bcast { Same, ScalarA, ScalarB };

Bcast broadcast_kind(const char *op, const Tensor &a, const Tensor &b) {
  if (a.shape() == b.shape())
    return Bcast::Same;
  if (a.numel() == 1)
    return Bcast::ScalarA;
  if (b.numel() == 1)
    return Bcast::ScalarB;
  mismatch(op, a, b);
}

template <class Fwd, class DA, class DB>
Tensor binary(const char *op, const Tensor &a, const Tensor &b, Fwd fwd, DA da, DB db) {
  const Bcast kind = broadcast_kind(op, a, b);
  const Shape shape = kind == Bcast::ScalarA ? b.shape() : a.shape();
  const std::size_t n = shape_numel(shape);
  const auto av = a.values();
  const auto bv = b.values();
  auto ai = [&](std::size_t i) { return kind == Bcast::ScalarA ? av[0] : av[i]; };
  auto bi = [&](std::size_t i) { return kind == Bcast::ScalarB ? bv[0] : bv[i]; };
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = fwd(ai(i), bi(i));
  return make_result(op, shape, std::move(out), {&a, &b}, [kind, da, db](Node &self) {
    Node &na = *self.inputs[0];
    Node &nb = *self.inputs[1];
    const auto &g = self.grad;
    const std::size_t n = g.size();
    auto aval = [&](std::size_t i) { return kind == Bcast::ScalarA ? na.value[0] : na.value[i]; };
    auto bval = [&](std::size_t i) { return kind == Bcast::ScalarB ? nb.value[0] : nb.value[i]; };
    if (double *ga = na.grad_buffer())
      for (std::size_t i = 0; i < n; ++i)
        ga[kind == Bcast::ScalarA ? 0 : i] += g[i] * da(aval(i), bval(i));
    if (double *gb = nb.grad_buffer())
      for (std::size_t i = 0; i < n; ++i)
        gb[kind == Bcast::ScalarB ? 0 : i] += g[i] * db(aval(i), bval(i));
  });
}

// Unary op whose derivative is a function of the output value.
template <class Fwd, class Deriv>
Tensor unary_from_output(const char *op, const Tensor &x, Fwd fwd, Deriv deriv) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i)
    out[i] = fwd(xv[i]);
  return make_result(op, x.shape(), std::move(out), {&x}, [deriv](Node &self) {
    if (double *gx = self.inputs[0]->grad_buffer())
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        gx[i] += self.grad[i] * deriv(self.value[i]);
  });
}

double stable_sigmoid(double v) {
  if (v >= 0.0)
    return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

} // namespace

Tensor matmul(const Tensor &a, const Tensor &b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k)
    mismatch("matmul", a, b);
  std::vector<double> out(m * n, 0.0);
  gemm_nn(m, k, n, a.values().data(), b.values().data(), out.data());
  return make_result("matmul", {m, n}, std::move(out), {&a, &b}, [m, k, n](Node &self) {
    Node &na = *self.inputs[0];
    Node &nb = *self.inputs[1];
    if (double *ga = na.grad_buffer())
      gemm_nt(m, n, k, self.grad.data(), nb.value.data(), ga);
    if (double *gb = nb.grad_buffer())
      gemm_tn(k, m, n, na.value.data(), self.grad.data(), gb);
  });
}

Tensor transpose(const Tensor &a) {
  require_matrix(a, "transpose");
  const std::size_t r = a.rows(), c = a.cols();
  const auto av = a.values();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      out[j * r + i] = av[i * c + j];
  return make_result("transpose", {c, r}, std::move(out), {&a}, [r, c](Node &self) {
    if (double *ga = self.inputs[0]->grad_buffer())
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
          ga[i * c + j] += self.grad[j * r + i];
  });
}

Tensor add(const Tensor &a, const Tensor &b) {
  return binary(
    "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
    [](double, double) { return 1.0; });
}

Tensor sub(const Tensor &a, const Tensor &b) {
  return binary(
    "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
    [](double, double) { return -1.0; });
}

Tensor mul(const Tensor &a, const Tensor &b) {
  return binary(
    "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
    [](double x, double) { return x; });
}

Tensor scale(const Tensor &a, double factor) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i)
    out[i] = av[i] * factor;
  return make_result("scale", a.shape(), std::move(out), {&a}, [factor](Node &self) {
    if (double *ga = self.inputs[0]->grad_buffer())
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        ga[i] += self.grad[i] * factor;
  });
}

Tensor add_bias(const Tensor &x, const Tensor &bias) {
  require_matrix(x, "add_bias");
  const std::size_t m = x.rows(), n = x.cols();
  if (bias.dim() != 1 || bias.numel() != n)
    mismatch("add_bias", x, bias);
  const auto xv = x.values();
  const auto bv = bias.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out[i * n + j] = xv[i * n + j] + bv[j];
  return make_result("add_bias", x.shape(), std::move(out), {&x, &bias}, [m, n](Node &self) {
    if (double *gx = self.inputs[0]->grad_buffer())
      for (std::size_t i = 0; i < m * n; ++i)
        gx[i] += self.grad[i];
    if (double *gb = self.inputs[1]->grad_buffer())
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
          gb[j] += self.grad[i * n + j];
  });
}

Tensor sigmoid(const Tensor &x) {
  return unary_from_output(
    "sigmoid", x, stable_sigmoid, [](double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor &x) {
  return unary_from_output(
    "tanh", x, [](double v) { return std::tanh(v); }, [](double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor &x) {
  return unary_from_output(
    "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
    [](double y) { return y > 0.0 ? 1.0 : 0.0; });
}

Tensor elementwise(Pointwise kind, const Tensor &a, const Tensor &b) {
  switch (kind) {
  case Pointwise::Add:
    return add(a, b);
  case Pointwise::Mul:
    return mul(a, b);
  case Pointwise::Sigmoid:
    return sigmoid(a);
  case Pointwise::Tanh:
    return tanh(a);
  case Pointwise::Relu:
    return relu(a);
  }
  throw ConfigError("unknown pointwise op");
}

Tensor softmax_rows(const Tensor &x) {
  if (x.dim() != 1 && x.dim() != 2)
    throw DimensionError("softmax_rows: expected vector or matrix, got " + shape_str(x.shape()));
  const std::size_t m = x.rows(), n = x.cols();
  if (n == 0)
    throw DimensionError("softmax_rows: empty rows");
  const auto xv = x.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double *row = xv.data() + i * n;
    double mx = *std::max_element(row, row + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = std::exp(row[j] - mx);
      total += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j)
      out[i * n + j] /= total;
  }
  return make_result("softmax_rows", x.shape(), std::move(out), {&x}, [m, n](Node &self) {
    double *gx = self.inputs[0]->grad_buffer();
    if (!gx)
      return;
    for (std::size_t i = 0; i < m; ++i) {
      const double *y = self.value.data() + i * n;
      const double *g = self.grad.data() + i * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        dot += g[j] * y[j];
      for (std::size_t j = 0; j < n; ++j)
        gx[i * n + j] += y[j] * (g[j] - dot);
    }
  });
}

Tensor layer_norm(const Tensor &x, const Tensor &gamma, const Tensor &beta, double eps) {
  require_matrix(x, "layer_norm");
  const std::size_t m = x.rows(), d = x.cols();
  if (gamma.numel() != d || beta.numel() != d)
    mismatch("layer_norm", x, gamma.numel() != d ? gamma : beta);
  if (!(eps > 0.0))
    throw ConfigError("layer_norm: eps must be positive");
  const auto xv = x.values();
  const auto gv = gamma.values();
  const auto bv = beta.values();
  std::vector<double> xhat(m * d);
  std::vector<double> inv_std(m);
  std::vector<double> out(m * d);
  for (std::size_t i = 0; i < m; ++i) {
    const double *row = xv.data() + i * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j)
      mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j)
      var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[i * d + j] = (row[j] - mu) * inv_std[i];
      out[i * d + j] = gv[j] * xhat[i * d + j] + bv[j];
    }
  }
  return make_result(
    "layer_norm", x.shape(), std::move(out), {&x, &gamma, &beta},
    [m, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node &self) {
      Node &nx = *self.inputs[0];
      Node &ng = *self.inputs[1];
      Node &nb = *self.inputs[2];
      const double *g = self.grad.data();
      if (double *gg = ng.grad_buffer())
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < d; ++j)
            gg[j] += g[i * d + j] * xhat[i * d + j];
      if (double *gb = nb.grad_buffer())
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < d; ++j)
            gb[j] += g[i * d + j];
      if (double *gx = nx.grad_buffer()) {
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t i = 0; i < m; ++i) {
          double mean_g = 0.0, mean_gx = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double gh = g[i * d + j] * ng.value[j];
            mean_g += gh;
            mean_gx += gh * xhat[i * d + j];
          }
          mean_g *= inv_d;
          mean_gx *= inv_d;
          for (std::size_t j = 0; j < d; ++j) {
            const double gh = g[i * d + j] * ng.value[j];
            gx[i * d + j] += inv_std[i] * (gh - mean_g - xhat[i * d + j] * mean_gx);
          }
        }
      }
    });
}

Tensor conv1d_seq(const Tensor &x, const Tensor &kernel, const Tensor &bias) {
  require_matrix(x, "conv1d_seq");
  if (kernel.dim() != 3)
    throw DimensionError("conv1d_seq: kernel must be k×c_in×c_out, got " +
                         shape_str(kernel.shape()));
  const std::size_t n = x.rows(), cin = x.cols();
  const std::size_t k = kernel.shape()[0], cout = kernel.shape()[2];
  if (k % 2 == 0)
    throw ConfigError("conv1d_seq: kernel size must be odd, got " + std::to_string(k));
  if (kernel.shape()[1] != cin)
    mismatch("conv1d_seq", x, kernel);
  if (bias.dim() != 1 || bias.numel() != cout)
    mismatch("conv1d_seq", kernel, bias);
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(k / 2);
  const auto xv = x.values();
  const auto kv = kernel.values();
  const auto bv = bias.values();
  std::vector<double> out(n * cout);
  for (std::size_t i = 0; i < n; ++i)
    std::copy(bv.begin(), bv.end(), out.begin() + static_cast<std::ptrdiff_t>(i * cout));
  // Each tap t contributes x[i + t - half] · kernel[t] to row i.
  for (std::size_t t = 0; t < k; ++t) {
    const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(t) - half;
    const std::size_t lo = off < 0 ? static_cast<std::size_t>(-off) : 0;
    const std::size_t hi = off > 0 ? n - std::min<std::size_t>(n, off) : n;
    if (lo >= hi)
      continue;
    gemm_nn(hi - lo, cin, cout, xv.data() + (lo + off) * cin, kv.data() + t * cin * cout,
            out.data() + lo * cout);
  }
  return make_result(
    "conv1d_seq", {n, cout}, std::move(out), {&x, &kernel, &bias},
    [n, cin, cout, k, half](Node &self) {
      Node &nx = *self.inputs[0];
      Node &nk = *self.inputs[1];
      Node &nb = *self.inputs[2];
      const double *g = self.grad.data();
      double *gx = nx.grad_buffer();
      double *gk = nk.grad_buffer();
      for (std::size_t t = 0; t < k; ++t) {
        const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(t) - half;
        const std::size_t lo = off < 0 ? static_cast<std::size_t>(-off) : 0;
        const std::size_t hi = off > 0 ? n - std::min<std::size_t>(n, off) : n;
        if (lo >= hi)
          continue;
        const std::size_t rows = hi - lo;
        if (gx)
          gemm_nt(rows, cout, cin, g + lo * cout, nk.value.data() + t * cin * cout,
                  gx + (lo + off) * cin);
        if (gk)
          gemm_tn(cin, rows, cout, nx.value.data() + (lo + off) * cin, g + lo * cout,
                  gk + t * cin * cout);
      }
      if (double *gb = nb.grad_buffer())
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < cout; ++j)
            gb[j] += g[i * cout + j];
    });
}

Tensor concat(const Tensor &a, const Tensor &b, std::size_t axis) {
  if (a.dim() != b.dim() || a.dim() == 0 || a.dim() > 2 || axis >= a.dim())
    mismatch("concat", a, b);
  const auto av = a.values();
  const auto bv = b.values();
  if (axis == 0) {
    if (a.dim() == 2 && a.cols() != b.cols())
      mismatch("concat", a, b);
    Shape shape = a.shape();
    shape[0] += b.shape()[0];
    std::vector<double> out(av.begin(), av.end());
    out.insert(out.end(), bv.begin(), bv.end());
    const std::size_t na = av.size();
    return make_result("concat", shape, std::move(out), {&a, &b}, [na](Node &self) {
      if (double *ga = self.inputs[0]->grad_buffer())
        for (std::size_t i = 0; i < na; ++i)
          ga[i] += self.grad[i];
      if (double *gb = self.inputs[1]->grad_buffer())
        for (std::size_t i = na; i < self.grad.size(); ++i)
          gb[i - na] += self.grad[i];
    });
  }
  if (a.rows() != b.rows())
    mismatch("concat", a, b);
  const std::size_t m = a.rows(), ca = a.cols(), cb = b.cols(), c = ca + cb;
  std::vector<double> out(m * c);
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(av.data() + i * ca, ca, out.data() + i * c);
    std::copy_n(bv.data() + i * cb, cb, out.data() + i * c + ca);
  }
  return make_result("concat", {m, c}, std::move(out), {&a, &b}, [m, ca, cb, c](Node &self) {
    if (double *ga = self.inputs[0]->grad_buffer())
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < ca; ++j)
          ga[i * ca + j] += self.grad[i * c + j];
    if (double *gb = self.inputs[1]->grad_buffer())
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < cb; ++j)
          gb[i * cb + j] += self.grad[i * c + ca + j];
  });
}

Tensor slice_rows(const Tensor &x, std::size_t begin, std::size_t count) {
  require_matrix(x, "slice_rows");
  const std::size_t c = x.cols();
  if (begin + count > x.rows() || count == 0)
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside " + shape_str(x.shape()));
  const auto xv = x.values();
  std::vector<double> out(xv.begin() + static_cast<std::ptrdiff_t>(begin * c),
                          xv.begin() + static_cast<std::ptrdiff_t>((begin + count) * c));
  return make_result("slice_rows", {count, c}, std::move(out), {&x}, [begin, c](Node &self) {
    if (double *gx = self.inputs[0]->grad_buffer())
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        gx[begin * c + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor &x, std::size_t begin, std::size_t count) {
  require_matrix(x, "slice_cols");
  const std::size_t m = x.rows(), c = x.cols();
  if (begin + count > c || count == 0)
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside " + shape_str(x.shape()));
  const auto xv = x.values();
  std::vector<double> out(m * count);
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(xv.data() + i * c + begin, count, out.data() + i * count);
  return make_result("slice_cols", {m, count}, std::move(out), {&x},
                     [m, c, begin, count](Node &self) {
                       if (double *gx = self.inputs[0]->grad_buffer())
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < count; ++j)
                             gx[i * c + begin + j] += self.grad[i * count + j];
                     });
}

Tensor sum(const Tensor &x) {
  double s = 0.0;
  for (double v : x.values())
    s += v;
  return make_result("sum", {1}, {s}, {&x}, [](Node &self) {
    if (double *gx = self.inputs[0]->grad_buffer())
      for (std::size_t i = 0; i < self.inputs[0]->value.size(); ++i)
        gx[i] += self.grad[0];
  });
}

Tensor mean(const Tensor &x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor dropout(const Tensor &x, double p, Rng &rng) {
  if (p < 0.0 || p >= 1.0)
    throw ConfigError("dropout: p must lie in [0, 1), got " + std::to_string(p));
  if (p == 0.0)
    return x;
  const double keep = 1.0 / (1.0 - p);
  const auto xv = x.values();
  std::vector<double> mask(xv.size());
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    mask[i] = rng.uniform() < p ? 0.0 : keep;
    out[i] = xv[i] * mask[i];
  }
  return make_result("dropout", x.shape(), std::move(out), {&x},
                     [mask = std::move(mask)](Node &self) {
                       if (double *gx = self.inputs[0]->grad_buffer())
                         for (std::size_t i = 0; i < mask.size(); ++i)
                           gx[i] += self.grad[i] * mask[i];
                     });
}

Tensor bipartite_embed(const Tensor &block) {
  require_matrix(block, "bipartite_embed");
  const std::size_t n = block.rows();
  if (block.cols() != n)
    throw DimensionError("bipartite_embed: block must be square, got " +
                         shape_str(block.shape()));
  const std::size_t m = 2 * n;
  const auto bv = block.values();
  std::vector<double> out(m * m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      out[i * m + n + j] = bv[i * n + j];
      out[(n + j) * m + i] = bv[i * n + j];
    }
  return make_result("bipartite_embed", {m, m}, std::move(out), {&block}, [n, m](Node &self) {
    if (double *gb = self.inputs[0]->grad_buffer())
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          gb[i * n + j] += self.grad[i * m + n + j] + self.grad[(n + j) * m + i];
  });
}

Tensor normalized_propagator(const Tensor &adjacency) {
  require_matrix(adjacency, "normalized_propagator");
  const std::size_t n = adjacency.rows();
  if (adjacency.cols() != n)
    throw DimensionError("normalized_propagator: adjacency must be square, got " +
                         shape_str(adjacency.shape()));
  const auto av = adjacency.values();
  std::vector<double> at(av.begin(), av.end());
  for (std::size_t i = 0; i < n; ++i)
    at[i * n + i] += 1.0;
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      deg += at[i * n + j];
    if (!(deg > 0.0))
      throw NumericError("normalized_propagator", "non-positive node degree; adjacency must be "
                                                  "nonnegative");
    s[i] = 1.0 / std::sqrt(deg);
  }
  std::vector<double> out(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out[i * n + j] = s[i] * at[i * n + j] * s[j];
  return make_result(
    "normalized_propagator", {n, n}, std::move(out), {&adjacency},
    [n, at = std::move(at), s = std::move(s)](Node &self) {
      double *ga = self.inputs[0]->grad_buffer();
      if (!ga)
        return;
      const double *g = self.grad.data();
      // dL/ds_i collects the row-i and column-i appearances of s_i.
      std::vector<double> ds(n, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double w = g[i * n + j] * at[i * n + j];
          ds[i] += w * s[j];
          ds[j] += w * s[i];
        }
      for (std::size_t i = 0; i < n; ++i) {
        const double ddeg = -0.5 * ds[i] * s[i] * s[i] * s[i];
        for (std::size_t j = 0; j < n; ++j)
          ga[i * n + j] += g[i * n + j] * s[i] * s[j] + ddeg;
      }
    });
}

Tensor pair_mean_rows(const Tensor &x) {
  require_matrix(x, "pair_mean_rows");
  if (x.rows() % 2 != 0)
    throw DimensionError("pair_mean_rows: row count must be even, got " + shape_str(x.shape()));
  const std::size_t n = x.rows() / 2, d = x.cols();
  const auto xv = x.values();
  std::vector<double> out(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      out[i * d + j] = 0.5 * (xv[i * d + j] + xv[(n + i) * d + j]);
  return make_result("pair_mean_rows", {n, d}, std::move(out), {&x}, [n, d](Node &self) {
    if (double *gx = self.inputs[0]->grad_buffer())
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
          gx[i * d + j] += 0.5 * self.grad[i * d + j];
          gx[(n + i) * d + j] += 0.5 * self.grad[i * d + j];
        }
  });
}

Tensor cross_entropy(const Tensor &probs, std::span<const int> labels, double floor) {
  require_matrix(probs, "cross_entropy");
  const std::size_t m = probs.rows(), c = probs.cols();
  if (labels.size() != m)
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(m) + " rows");
  std::vector<int> y(labels.begin(), labels.end());
  for (int l : y)
    if (l < 0 || static_cast<std::size_t>(l) >= c)
      throw DataError(DataError::Kind::LabelOutOfRange, "cross_entropy: label " +
                                                          std::to_string(l) + " outside [0, " +
                                                          std::to_string(c) + ")");
  const auto pv = probs.values();
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    total -= std::log(std::max(pv[i * c + static_cast<std::size_t>(y[i])], floor));
  total /= static_cast<double>(m);
  return make_result("cross_entropy", {1}, {total}, {&probs},
                     [m, c, floor, y = std::move(y)](Node &self) {
                       Node &np = *self.inputs[0];
                       double *gp = np.grad_buffer();
                       if (!gp)
                         return;
                       for (std::size_t i = 0; i < m; ++i) {
                         const std::size_t idx = i * c + static_cast<std::size_t>(y[i]);
                         const double p = np.value[idx];
                         if (p > floor)
                           gp[idx] -= self.grad[0] / (static_cast<double>(m) * p);
                       }
                     });
}

} // namespace synctva
