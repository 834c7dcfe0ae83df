// SPDX-License-Identifier: Apache-2.0
#include "support/gradcheck.hpp"
#include "support/naive.hpp"

#include <synctva/errors.hpp>
#include <synctva/ops.hpp>
#include <synctva/rng.hpp>

#include <doctest.h>

#include <cmath>
#include <set>

using namespace synctva;
using namespace synctva::testing;

namespace {

constexpr double kNonlinearTol = 1e-4;
constexpr double kLinearTol = 1e-6;

void expect_values(const Tensor &t, std::vector<double> want, double tol = 0.0) {
  REQUIRE(t.numel() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i)
    CHECK(std::abs(t.at(i) - want[i]) <= tol);
}

} // namespace

TEST_SUITE("rng") {
  TEST_CASE("same seed gives the same stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i)
      CHECK(a.next_u64() == b.next_u64());
  }

  TEST_CASE("split streams are independent of draw order") {
    Rng root(5);
    Rng x = root.split("x");
    Rng root2(5);
    (void)root2.next_u64();
    CHECK(root2.split("x").next_u64() == x.next_u64());
    CHECK(root.split("x").next_u64() != root.split("y").next_u64());
    CHECK(root.split(1).next_u64() != root.split(2).next_u64());
  }

  TEST_CASE("uniform lies in [0, 1) and below covers its range") {
    Rng r(9);
    std::set<std::size_t> seen;
    for (int i = 0; i < 2000; ++i) {
      const double u = r.uniform();
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
      seen.insert(r.below(7));
    }
    CHECK(seen.size() == 7);
    CHECK(*seen.rbegin() == 6);
  }

  TEST_CASE("normal draws have roughly unit moments") {
    Rng r(11);
    double s = 0, ss = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const double z = r.normal();
      s += z;
      ss += z * z;
    }
    CHECK(std::abs(s / n) < 0.03);
    CHECK(std::abs(ss / n - 1.0) < 0.05);
  }
}

TEST_SUITE("tensor") {
  TEST_CASE("shape and data invariants") {
    CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), DimensionError);
    Tensor t = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK(t.at(1, 2) == 6);
    CHECK(!t.has_grad());
  }

  TEST_CASE("x squared at 3 has gradient 6") {
    Tensor x = Tensor::scalar(3.0, true);
    mul(x, x).backward();
    CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-15));
  }

  TEST_CASE("sigmoid at 0 has gradient 0.25") {
    Tensor x = Tensor::scalar(0.0, true);
    sigmoid(x).backward();
    CHECK(x.grad()[0] == 0.25);
  }

  TEST_CASE("backward needs a scalar") {
    Tensor x = Tensor::vector({1, 2}, true);
    CHECK_THROWS_AS(scale(x, 2.0).backward(), DimensionError);
  }

  TEST_CASE("a second backward through the same graph is an error") {
    Tensor x = Tensor::scalar(2.0, true);
    Tensor y = mul(x, x);
    y.backward();
    CHECK_THROWS_AS(y.backward(), Error);
    Tensor a = Tensor::scalar(1.0, true);
    Tensor mid = scale(a, 3.0);
    sum(mid).backward();
    CHECK_THROWS_AS(sum(mul(mid, mid)).backward(), Error);
  }

  TEST_CASE("disconnected parameters keep zero gradient") {
    Tensor x = Tensor::scalar(2.0, true);
    Tensor unused = Tensor::vector({1, 2, 3}, true);
    mul(x, x).backward();
    for (double g : unused.grad())
      CHECK(g == 0.0);
  }

  TEST_CASE("gradients accumulate across backwards and reset with zero_grad") {
    Tensor x = Tensor::scalar(1.5, true);
    mul(x, x).backward();
    scale(x, 4.0).backward();
    CHECK(x.grad()[0] == doctest::Approx(3.0 + 4.0));
    x.zero_grad();
    CHECK(x.grad()[0] == 0.0);
  }

  TEST_CASE("backward of a sum of losses equals the sum of separate backwards") {
    Rng rng(3);
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({4, 2}, rng);
    auto l1 = [&] { return sum(tanh(matmul(a, b))); };
    auto l2 = [&] { return sum(mul(a, a)); };
    add(l1(), l2()).backward();
    const auto ga = a.grad(), gb = b.grad();
    a.zero_grad();
    b.zero_grad();
    l1().backward();
    l2().backward();
    for (std::size_t i = 0; i < ga.size(); ++i)
      CHECK(std::abs(ga[i] - a.grad()[i]) <= 1e-12);
    for (std::size_t i = 0; i < gb.size(); ++i)
      CHECK(std::abs(gb[i] - b.grad()[i]) <= 1e-12);
  }

  TEST_CASE("NoGradGuard records nothing") {
    Tensor x = Tensor::scalar(2.0, true);
    Tensor y;
    {
      NoGradGuard g;
      y = mul(x, x);
    }
    CHECK(!y.requires_grad());
    CHECK(grad_enabled());
  }

  TEST_CASE("non-finite results raise NumericError naming the op") {
    Tensor big = Tensor::scalar(1e308);
    try {
      (void)scale(big, 10.0);
      FAIL("expected NumericError");
    } catch (const NumericError &e) {
      CHECK(e.op() == "scale");
    }
    set_finite_check(false);
    CHECK_NOTHROW((void)scale(big, 10.0));
    set_finite_check(true);
  }

  TEST_CASE("detach and clone_leaf cut history") {
    Tensor x = Tensor::scalar(2.0, true);
    Tensor y = mul(x, x);
    CHECK(!y.detach().requires_grad());
    Tensor c = y.clone_leaf(true);
    CHECK(c.is_leaf());
    CHECK(c.item() == 4.0);
  }

  TEST_CASE("identical inputs give bit-identical outputs") {
    Rng r1(8), r2(8);
    Tensor a = random_tensor({4, 5}, r1), b = random_tensor({4, 5}, r2);
    Tensor k1 = random_tensor({3, 5, 5}, r1), k2 = random_tensor({3, 5, 5}, r2);
    Tensor z = Tensor::zeros({5});
    const Tensor o1 = softmax_rows(conv1d_seq(a, k1, z));
    const Tensor o2 = softmax_rows(conv1d_seq(b, k2, z));
    CHECK(std::equal(o1.values().begin(), o1.values().end(), o2.values().begin()));
  }
}

TEST_SUITE("ops") {
  TEST_CASE("matmul examples") {
    expect_values(matmul(Tensor::identity(2), Tensor::matrix({{1, 2}, {3, 4}})), {1, 2, 3, 4});
    expect_values(matmul(Tensor::matrix({{1, 0}, {0, 0}}), Tensor::matrix({{5, 6}, {7, 8}})),
                  {5, 6, 0, 0});
  }

  TEST_CASE("matmul shape mismatch names both shapes") {
    try {
      (void)matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
      FAIL("expected DimensionError");
    } catch (const DimensionError &e) {
      const std::string msg = e.what();
      CHECK(msg.find("2x3") != std::string::npos);
    }
  }

  TEST_CASE("matmul gradient matches finite differences") {
    Rng rng(1);
    Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
    auto r = gradcheck([&] { return matmul(a, b); }, {a, b});
    CHECK(r.max_rel_error <= kLinearTol);
  }

  TEST_CASE("elementwise examples") {
    CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);
    CHECK(tanh(Tensor::scalar(0.0)).item() == 0.0);
    CHECK(relu(Tensor::scalar(-3.0)).item() == 0.0);
    CHECK(elementwise(Pointwise::Add, Tensor::scalar(1), Tensor::scalar(2)).item() == 3.0);
    Tensor a = Tensor::scalar(2.0, true), b = Tensor::scalar(3.0, true);
    elementwise(Pointwise::Mul, a, b).backward();
    CHECK(a.grad()[0] == 3.0);
    CHECK(b.grad()[0] == 2.0);
    CHECK_THROWS_AS(add(Tensor::zeros({2}), Tensor::zeros({3})), DimensionError);
    CHECK_NOTHROW(add(Tensor::zeros({2, 2}), Tensor::scalar(1.0)));
  }

  TEST_CASE("sigmoid is stable for large magnitudes") {
    const Tensor s = sigmoid(Tensor::vector({-800, 800}));
    CHECK(s.at(0) == 0.0);
    CHECK(s.at(1) == 1.0);
  }

  TEST_CASE("pointwise gradients match finite differences") {
    Rng rng(2);
    Tensor a = random_tensor({3, 3}, rng), b = random_tensor({3, 3}, rng);
    CHECK(gradcheck([&] { return add(a, b); }, {a, b}).max_rel_error <= kLinearTol);
    CHECK(gradcheck([&] { return sub(a, b); }, {a, b}).max_rel_error <= kLinearTol);
    CHECK(gradcheck([&] { return scale(a, -1.7); }, {a}).max_rel_error <= kLinearTol);
    CHECK(gradcheck([&] { return mul(a, b); }, {a, b}).max_rel_error <= kNonlinearTol);
    CHECK(gradcheck([&] { return sigmoid(a); }, {a}).max_rel_error <= kNonlinearTol);
    CHECK(gradcheck([&] { return tanh(a); }, {a}).max_rel_error <= kNonlinearTol);
    Tensor c = random_away_from_zero({3, 3}, rng);
    CHECK(gradcheck([&] { return relu(c); }, {c}).max_rel_error <= kLinearTol);
    Tensor s = random_tensor({1}, rng);
    CHECK(gradcheck([&] { return mul(a, s); }, {a, s}).max_rel_error <= kNonlinearTol);
    Tensor bias = random_tensor({3}, rng);
    CHECK(gradcheck([&] { return add_bias(a, bias); }, {a, bias}).max_rel_error <= kLinearTol);
    CHECK(gradcheck([&] { return transpose(a); }, {a}).max_rel_error <= kLinearTol);
  }

  TEST_CASE("softmax examples") {
    expect_values(softmax_rows(Tensor::matrix({{0, 0}})), {0.5, 0.5});
    expect_values(softmax_rows(Tensor::matrix({{1000, 1000}})), {0.5, 0.5});
    const Tensor s = softmax_rows(Tensor::matrix({{1, 2, 3}}));
    const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    expect_values(s, {std::exp(1.0) / z, std::exp(2.0) / z, std::exp(3.0) / z}, 1e-12);
  }

  TEST_CASE("softmax gradient matches finite differences") {
    Rng rng(4);
    Tensor x = random_tensor({3, 5}, rng);
    CHECK(gradcheck([&] { return softmax_rows(x); }, {x}).max_rel_error <= kNonlinearTol);
  }

  TEST_CASE("layer norm examples") {
    const Tensor g = Tensor::vector({1, 1, 1}), b = Tensor::vector({0, 0, 0});
    expect_values(layer_norm(Tensor::matrix({{5, 5, 5}}), g, b), {0, 0, 0});
    const Tensor g2 = Tensor::vector({1, 1}), b2 = Tensor::vector({0, 0});
    expect_values(layer_norm(Tensor::matrix({{1, -1}}), g2, b2), {1, -1}, 1e-5);
  }

  TEST_CASE("layer norm matches the naive formula and finite differences") {
    Rng rng(5);
    Tensor x = random_tensor({4, 6}, rng), g = random_tensor({6}, rng),
           b = random_tensor({6}, rng);
    const Dense want = naive_layer_norm(Dense(x), std::vector<double>(g.values().begin(), g.values().end()),
                                        std::vector<double>(b.values().begin(), b.values().end()), 1e-5);
    CHECK(max_abs_diff(want, layer_norm(x, g, b)) <= 1e-12);
    CHECK(gradcheck([&] { return layer_norm(x, g, b); }, {x, g, b}).max_rel_error <= 1e-5);
  }

  TEST_CASE("conv1d examples") {
    // k = 1 with an identity kernel is the identity map.
    Rng rng(6);
    Tensor x = random_tensor({4, 3}, rng, -2, 2, false);
    Tensor eye({1, 3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    expect_values(conv1d_seq(x, eye, Tensor::zeros({3})),
                  std::vector<double>(x.values().begin(), x.values().end()));
    // N = 1, k = 3: only the center tap sees data.
    Tensor one = Tensor::matrix({{2.0}});
    Tensor k3({3, 1, 1}, {10, 1, 100});
    CHECK(conv1d_seq(one, k3, Tensor::zeros({1})).item() == 2.0);
    CHECK_THROWS_AS(conv1d_seq(x, Tensor::zeros({2, 3, 3}), Tensor::zeros({3})), ConfigError);
  }

  TEST_CASE("conv1d matches a sliding window and finite differences") {
    Rng rng(7);
    Tensor x = random_tensor({5, 3}, rng), k = random_tensor({3, 3, 3}, rng),
           b = random_tensor({3}, rng);
    const Dense want = naive_conv1d(Dense(x), std::vector<double>(k.values().begin(), k.values().end()),
                                    3, 3, std::vector<double>(b.values().begin(), b.values().end()));
    CHECK(max_abs_diff(want, conv1d_seq(x, k, b)) <= 1e-12);
    CHECK(gradcheck([&] { return conv1d_seq(x, k, b); }, {x, k, b}).max_rel_error <= kLinearTol);
  }

  TEST_CASE("concat examples") {
    expect_values(concat(Tensor::vector({1, 2}), Tensor::vector({3}), 0), {1, 2, 3});
    CHECK(concat(Tensor::zeros({2, 2}), Tensor::zeros({2, 3}), 1).shape() == Shape{2, 5});
    CHECK_THROWS_AS(concat(Tensor::zeros({2, 2}), Tensor::zeros({3, 3}), 1), DimensionError);
    Tensor a = Tensor::zeros({2, 2}, true), b = Tensor::zeros({2, 3}, true);
    sum(concat(a, b, 1)).backward();
    for (double g : a.grad())
      CHECK(g == 1.0);
    for (double g : b.grad())
      CHECK(g == 1.0);
  }

  TEST_CASE("slicing, reductions and concat pass finite-difference checks") {
    Rng rng(8);
    Tensor a = random_tensor({4, 3}, rng), b = random_tensor({2, 3}, rng);
    CHECK(gradcheck([&] { return concat(a, b, 0); }, {a, b}).max_rel_error <= kLinearTol);
    CHECK(gradcheck([&] { return slice_rows(a, 1, 2); }, {a}).max_rel_error <= kLinearTol);
    CHECK(gradcheck([&] { return slice_cols(a, 1, 2); }, {a}).max_rel_error <= kLinearTol);
    CHECK(gradcheck([&] { return mean(a); }, {a}).max_rel_error <= kLinearTol);
    CHECK(gradcheck([&] { return pair_mean_rows(a); }, {a}).max_rel_error <= kLinearTol);
  }

  TEST_CASE("bipartite embedding and normalized propagator") {
    Rng rng(9);
    Tensor s = random_tensor({3, 3}, rng, 0.05, 1.0);
    const Tensor a = bipartite_embed(s);
    CHECK(a.shape() == Shape{6, 6});
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j)
        CHECK(a.at(i, j) == a.at(j, i));
    CHECK(gradcheck([&] { return bipartite_embed(s); }, {s}).max_rel_error <= kLinearTol);
    CHECK(gradcheck([&] { return normalized_propagator(bipartite_embed(s)); }, {s})
            .max_rel_error <= kNonlinearTol);
  }

  TEST_CASE("dropout") {
    Rng rng(10);
    Tensor x = Tensor::full({50, 40}, 1.0, true);
    Rng r1 = rng;
    Tensor y = dropout(x, 0.25, r1);
    std::size_t zeros = 0;
    for (double v : y.values()) {
      CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.75)));
      zeros += v == 0.0;
    }
    CHECK(std::abs(static_cast<double>(zeros) / 2000.0 - 0.25) < 0.05);
    Rng r2 = rng;
    CHECK(gradcheck([&] { Rng r = r2; return dropout(x, 0.25, r); }, {x}).max_rel_error <=
          kLinearTol);
    Rng r3 = rng;
    Tensor same = dropout(x, 0.0, r3);
    CHECK(std::equal(same.values().begin(), same.values().end(), x.values().begin()));
  }

  TEST_CASE("cross entropy") {
    Tensor onehot = Tensor::matrix({{1, 0}, {0, 1}});
    std::vector<int> labels = {0, 1};
    CHECK(cross_entropy(onehot, labels).item() == 0.0);
    Tensor uniform = Tensor::full({3, 4}, 0.25);
    std::vector<int> l3 = {0, 3, 2};
    CHECK(std::abs(cross_entropy(uniform, l3).item() - std::log(4.0)) <= 1e-12);
    std::vector<int> bad = {0, 4, 1};
    CHECK_THROWS_AS(cross_entropy(uniform, bad), DataError);
    // Floor keeps a zero probability finite.
    Tensor zero = Tensor::matrix({{0.0, 1.0}});
    std::vector<int> l0 = {0};
    CHECK(cross_entropy(zero, l0).item() == doctest::Approx(-std::log(1e-12)));
  }
}
