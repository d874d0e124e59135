#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "tanger/grad_check.hpp"
#include "tanger/ops.hpp"
#include "tanger/rng.hpp"
#include "tanger/tensor.hpp"

using namespace tanger;

namespace {

Tensor random_param(std::vector<std::size_t> shape, std::uint64_t key, double lo = -2.0,
                    double hi = 2.0) {
  SeqRng rng(key);
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = rng.next_uniform(lo, hi);
  return Tensor::from_data(std::move(shape), std::move(v)).set_requires_grad();
}

Tensor random_const(std::vector<std::size_t> shape, std::uint64_t key, double lo = -2.0,
                    double hi = 2.0) {
  SeqRng rng(key);
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = rng.next_uniform(lo, hi);
  return Tensor::from_data(std::move(shape), std::move(v));
}

// Random values whose pairwise gaps within each column are at least `gap`,
// so max-style reductions stay away from ties under finite differences.
Tensor separated_param(std::size_t rows, std::size_t cols, std::uint64_t key,
                       double gap = 1e-3) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    SeqRng rng(hash_combine(key, attempt));
    std::vector<double> v(rows * cols);
    for (double& x : v) x = rng.next_uniform(-2.0, 2.0);
    bool ok = true;
    for (std::size_t c = 0; c < cols && ok; ++c) {
      for (std::size_t r1 = 0; r1 < rows && ok; ++r1) {
        for (std::size_t r2 = r1 + 1; r2 < rows; ++r2) {
          if (std::abs(v[r1 * cols + c] - v[r2 * cols + c]) < gap) {
            ok = false;
            break;
          }
        }
      }
    }
    if (ok) return Tensor::from_data({rows, cols}, std::move(v)).set_requires_grad();
  }
}

// Weighted scalar reduction so that gradients are not uniform.
Tensor weighted(const Tensor& t, std::uint64_t key) {
  return sum_all(mul(t, random_const(t.shape(), hash_combine(key, 0xABCD))));
}

constexpr int kTrials = 20;
constexpr double kTol = 1e-4;

}  // namespace

TEST_CASE("forward values of elementwise primitives") {
  Tensor a = Tensor::from_data({3}, {1.0, -2.0, 0.5});
  Tensor b = Tensor::from_data({3}, {2.0, 3.0, -1.0});
  CHECK(add(a, b).value_at(1) == 1.0);
  CHECK(mul(a, b).value_at(0) == 2.0);
  CHECK(scale(a, -2.0).value_at(2) == -1.0);
  CHECK(relu(a).value_at(1) == 0.0);
  CHECK(relu(a).value_at(0) == 1.0);
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(exp(Tensor::scalar(1.0)).item() == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
  CHECK(log(Tensor::scalar(std::exp(2.0))).item() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(gelu(Tensor::scalar(0.0)).item() == 0.0);
  // gelu is odd-symmetric around 0 up to the linear term: gelu(x)+gelu(-x)=x... check value
  CHECK(gelu(Tensor::scalar(1.0)).item() ==
        doctest::Approx(0.5 * (1.0 + std::erf(1.0 / std::sqrt(2.0)))).epsilon(1e-12));
}

TEST_CASE("log rejects non-positive input") {
  CHECK_THROWS_AS(log(Tensor::from_data({2}, {1.0, 0.0})), std::runtime_error);
  CHECK_THROWS_AS(log(Tensor::from_data({1}, {-3.0})), std::runtime_error);
}

TEST_CASE("matmul forward and shape validation") {
  Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b = Tensor::from_data({3, 2}, {7, 8, 9, 10, 11, 12});
  Tensor c = matmul(a, b);
  CHECK(c.shape() == std::vector<std::size_t>{2, 2});
  CHECK(c.value_at(0) == 58.0);
  CHECK(c.value_at(1) == 64.0);
  CHECK(c.value_at(2) == 139.0);
  CHECK(c.value_at(3) == 154.0);
  CHECK_THROWS_AS(matmul(a, a), std::invalid_argument);
}

TEST_CASE("transpose forward") {
  Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor t = transpose(a);
  CHECK(t.shape() == std::vector<std::size_t>{3, 2});
  CHECK(t.value_at(0) == 1.0);
  CHECK(t.value_at(1) == 4.0);
  CHECK(t.value_at(4) == 3.0);
}

TEST_CASE("softmax rows sum to one and match closed form") {
  Tensor x = Tensor::from_data({2}, {0.0, 0.0});
  Tensor y = softmax(x, 0);
  CHECK(y.value_at(0) == doctest::Approx(0.5).epsilon(1e-12));

  Tensor m = random_const({5, 7}, 11);
  Tensor sm = softmax(m, 1);
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 7; ++c) s += sm.value_at(r * 7 + c);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }
  Tensor sm0 = softmax(m, 0);
  for (std::size_t c = 0; c < 7; ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < 5; ++r) s += sm0.value_at(r * 7 + c);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("layer_norm rows are standardized before the affine map") {
  Tensor x = random_const({4, 16}, 21, -3.0, 3.0);
  Tensor gamma = Tensor::full({16}, 1.0);
  Tensor beta = Tensor::zeros({16});
  Tensor y = layer_norm(x, gamma, beta);
  for (std::size_t r = 0; r < 4; ++r) {
    double mu = 0.0, var = 0.0;
    for (std::size_t c = 0; c < 16; ++c) mu += y.value_at(r * 16 + c);
    mu /= 16.0;
    for (std::size_t c = 0; c < 16; ++c) {
      const double d = y.value_at(r * 16 + c) - mu;
      var += d * d;
    }
    var /= 16.0;
    CHECK(std::abs(mu) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-5);
  }
}

TEST_CASE("mean and max reductions") {
  Tensor a = Tensor::from_data({2, 3}, {1, 5, 3, 2, 4, 9});
  Tensor m0 = mean(a, 0);
  CHECK(m0.shape() == std::vector<std::size_t>{3});
  CHECK(m0.value_at(0) == 1.5);
  Tensor m1 = mean(a, 1);
  CHECK(m1.value_at(1) == 5.0);
  CHECK(mean_all(a).item() == 4.0);
  CHECK(sum_all(a).item() == 24.0);

  Tensor x0 = max_along(a, 0);
  CHECK(x0.value_at(0) == 2.0);
  CHECK(x0.value_at(2) == 9.0);
  Tensor x1 = max_along(a, 1);
  CHECK(x1.value_at(0) == 5.0);
  CHECK(x1.value_at(1) == 9.0);
}

TEST_CASE("max ties route gradient to the lowest index") {
  Tensor a = Tensor::from_data({3, 1}, {2.0, 2.0, 1.0}).set_requires_grad();
  GradientMap g = backward(sum_all(max_along(a, 0)));
  CHECK(g.at(a).value_at(0) == 1.0);
  CHECK(g.at(a).value_at(1) == 0.0);
  CHECK(g.at(a).value_at(2) == 0.0);
}

TEST_CASE("max_pool1d window semantics with odd tail") {
  Tensor a = Tensor::from_data({5, 2}, {1, 10, 4, 9, 2, 8, 6, 7, 5, 0});
  Tensor p = max_pool1d(a, 2, 2);
  CHECK(p.shape() == std::vector<std::size_t>{3, 2});
  CHECK(p.value_at(0) == 4.0);   // max(1, 4)
  CHECK(p.value_at(1) == 10.0);  // max(10, 9)
  CHECK(p.value_at(2) == 6.0);   // max(2, 6)
  CHECK(p.value_at(4) == 5.0);   // odd tail window of one row
  CHECK(p.value_at(5) == 0.0);
}

TEST_CASE("concat and slice round trips") {
  Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from_data({1, 2}, {5, 6});
  Tensor c0 = concat({a, b}, 0);
  CHECK(c0.shape() == std::vector<std::size_t>{3, 2});
  CHECK(c0.value_at(4) == 5.0);

  Tensor d = Tensor::from_data({2, 1}, {9, 10});
  Tensor c1 = concat({a, d}, 1);
  CHECK(c1.shape() == std::vector<std::size_t>{2, 3});
  CHECK(c1.value_at(2) == 9.0);
  CHECK(c1.value_at(5) == 10.0);

  Tensor s = slice(c1, 1, 0, 2);
  for (std::size_t i = 0; i < 4; ++i) CHECK(s.value_at(i) == a.value_at(i));
  Tensor r = slice(c0, 0, 2, 1);
  CHECK(r.value_at(0) == 5.0);

  CHECK_THROWS_AS(slice(a, 0, 1, 5), std::invalid_argument);
  CHECK_THROWS_AS(concat({a, d}, 0), std::invalid_argument);
}

TEST_CASE("embedding lookup gathers rows and accumulates repeated ids") {
  Tensor table = Tensor::from_data({3, 2}, {1, 2, 3, 4, 5, 6}).set_requires_grad();
  Tensor out = embedding_lookup(table, {2, 0, 2});
  CHECK(out.shape() == std::vector<std::size_t>{3, 2});
  CHECK(out.value_at(0) == 5.0);
  CHECK(out.value_at(2) == 1.0);
  GradientMap g = backward(sum_all(out));
  CHECK(g.at(table).value_at(4) == 2.0);  // row 2 used twice
  CHECK(g.at(table).value_at(0) == 1.0);
  CHECK(g.at(table).value_at(2) == 0.0);
  CHECK_THROWS_AS(embedding_lookup(table, {3}), std::out_of_range);
}

TEST_CASE("dropout is identity at eval time and deterministic per key") {
  Tensor a = random_const({4, 4}, 31);
  Tensor e = dropout(a, 0.5, 123, false);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(e.value_at(i) == a.value_at(i));

  Tensor t1 = dropout(a, 0.5, 123, true);
  Tensor t2 = dropout(a, 0.5, 123, true);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(t1.value_at(i) == t2.value_at(i));

  Tensor t3 = dropout(a, 0.5, 124, true);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (t1.value_at(i) != t3.value_at(i)) any_diff = true;
  }
  CHECK(any_diff);

  // kept entries are scaled by 1/(1-rate)
  bool has_kept = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double v = t1.value_at(i);
    if (v != 0.0) {
      has_kept = true;
      CHECK(v == doctest::Approx(a.value_at(i) * 2.0).epsilon(1e-12));
    }
  }
  CHECK(has_kept);
  CHECK_THROWS_AS(dropout(a, 1.0, 1, true), std::invalid_argument);
  CHECK_THROWS_AS(dropout(a, -0.1, 1, true), std::invalid_argument);
}

TEST_CASE("cross entropy closed-form values") {
  // uniform logits over two classes, one-hot target -> ln 2
  Tensor l2 = Tensor::from_data({1, 2}, {0.0, 0.0});
  Tensor t2 = Tensor::from_data({1, 2}, {1.0, 0.0});
  CHECK(cross_entropy(l2, t2).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // uniform logits over 12 classes -> ln 12 regardless of the target
  Tensor l12 = Tensor::zeros({1, 12});
  std::vector<double> tv(12, 0.0);
  tv[3] = 0.25;
  tv[7] = 0.75;
  Tensor t12 = Tensor::from_data({1, 12}, tv);
  CHECK(cross_entropy(l12, t12).item() == doctest::Approx(std::log(12.0)).epsilon(1e-12));

  // row-mean over positions
  Tensor l = Tensor::from_data({2, 2}, {0.0, 0.0, 0.0, 0.0});
  Tensor t = Tensor::from_data({2, 2}, {1.0, 0.0, 0.0, 1.0});
  CHECK(cross_entropy(l, t).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Tensor bad = Tensor::from_data({1, 2}, {0.6, 0.6});
  CHECK_THROWS_AS(cross_entropy(l2, bad), std::invalid_argument);
}

TEST_CASE("finite differences agree with analytic gradients per primitive") {
  for (int trial = 0; trial < kTrials; ++trial) {
    const std::uint64_t k = hash_combine(0xF00D, static_cast<std::uint64_t>(trial));
    SeqRng dims(hash_combine(k, 1));
    const std::size_t r = 2 + dims.next_below(4);
    const std::size_t c = 2 + dims.next_below(4);

    CAPTURE(trial);

    SUBCASE("") {}  // keep doctest quiet about empty sections

    {
      Tensor a = random_param({r, c}, hash_combine(k, 2));
      Tensor b = random_param({r, c}, hash_combine(k, 3));
      auto res = finite_difference_check(
          [&] { return weighted(add(a, b), k); }, {a, b});
      CHECK(res.max_rel_error < kTol);
    }
    {
      Tensor a = random_param({r, c}, hash_combine(k, 4));
      Tensor v = random_param({c}, hash_combine(k, 5));
      auto res = finite_difference_check(
          [&] { return weighted(add_row_vector(a, v), k); }, {a, v});
      CHECK(res.max_rel_error < kTol);
    }
    {
      Tensor a = random_param({r, c}, hash_combine(k, 6));
      Tensor b = random_param({r, c}, hash_combine(k, 7));
      auto res = finite_difference_check(
          [&] { return weighted(mul(a, b), k); }, {a, b});
      CHECK(res.max_rel_error < kTol);
    }
    {
      Tensor a = random_param({r, c}, hash_combine(k, 8));
      auto res = finite_difference_check(
          [&] { return weighted(scale(a, -1.7), k); }, {a});
      CHECK(res.max_rel_error < kTol);
    }
    {
      Tensor a = random_param({r, c}, hash_combine(k, 9));
      Tensor b = random_param({c, r}, hash_combine(k, 10));
      auto res = finite_difference_check(
          [&] { return weighted(matmul(a, b), k); }, {a, b});
      CHECK(res.max_rel_error < kTol);
    }
    {
      Tensor a = random_param({r, c}, hash_combine(k, 11));
      auto res = finite_difference_check(
          [&] { return weighted(transpose(a), k); }, {a});
      CHECK(res.max_rel_error < kTol);
    }
    {
      Tensor a = random_param({r, c}, hash_combine(k, 12));
      auto res0 = finite_difference_check(
          [&] { return weighted(softmax(a, 0), k); }, {a});
      CHECK(res0.max_rel_error < kTol);
      auto res1 = finite_difference_check(
          [&] { return weighted(softmax(a, 1), k); }, {a});
      CHECK(res1.max_rel_error < kTol);
    }
    {
      Tensor a = random_param({c}, hash_combine(k, 13));
      auto res = finite_difference_check(
          [&] { return weighted(softmax(a, 0), k); }, {a});
      CHECK(res.max_rel_error < kTol);
    }
    {
      Tensor x = random_param({r, c}, hash_combine(k, 14));
      Tensor gamma = random_param({c}, hash_combine(k, 15), 0.5, 1.5);
      Tensor beta = random_param({c}, hash_combine(k, 16));
      auto res = finite_difference_check(
          [&] { return weighted(layer_norm(x, gamma, beta), k); }, {x, gamma, beta});
      CHECK(res.max_rel_error < kTol);
    }
    {
      Tensor a = random_param({r, c}, hash_combine(k, 17));
      auto res = finite_difference_check(
          [&] { return weighted(gelu(a), k); }, {a});
      CHECK(res.max_rel_error < kTol);
    }
    {
      // keep relu inputs away from the kink at zero
      SeqRng rng(hash_combine(k, 18));
      std::vector<double> v(r * c);
      for (double& x : v) {
        x = rng.next_uniform(0.05, 2.0);
        if (rng.next_uniform() < 0.5) x = -x;
      }
      Tensor a = Tensor::from_data({r, c}, std::move(v)).set_requires_grad();
      auto res = finite_difference_check(
          [&] { return weighted(relu(a), k); }, {a});
      CHECK(res.max_rel_error < kTol);
    }
    {
      Tensor a = random_param({r, c}, hash_combine(k, 19));
      auto res = finite_difference_check(
          [&] { return weighted(sigmoid(a), k); }, {a});
      CHECK(res.max_rel_error < kTol);
    }
    {
      Tensor a = random_param({r, c}, hash_combine(k, 20), 0.2, 3.0);
      auto res = finite_difference_check(
          [&] { return weighted(log(a), k); }, {a});
      CHECK(res.max_rel_error < kTol);
    }
    {
      Tensor a = random_param({r, c}, hash_combine(k, 21), -1.5, 1.5);
      auto res = finite_difference_check(
          [&] { return weighted(exp(a), k); }, {a});
      CHECK(res.max_rel_error < kTol);
    }
    {
      Tensor a = random_param({r, c}, hash_combine(k, 22));
      auto res0 = finite_difference_check(
          [&] { return weighted(mean(a, 0), k); }, {a});
      CHECK(res0.max_rel_error < kTol);
      auto res1 = finite_difference_check(
          [&] { return weighted(mean(a, 1), k); }, {a});
      CHECK(res1.max_rel_error < kTol);
      auto resm = finite_difference_check([&] { return mean_all(a); }, {a});
      CHECK(resm.max_rel_error < kTol);
      auto ress = finite_difference_check([&] { return sum_all(a); }, {a});
      CHECK(ress.max_rel_error < kTol);
    }
    {
      Tensor a = separated_param(r, c, hash_combine(k, 23));
      auto res = finite_difference_check(
          [&] { return weighted(max_along(a, 0), k); }, {a});
      CHECK(res.max_rel_error < kTol);
    }
    {
      Tensor a = separated_param(r, c, hash_combine(k, 24));
      auto res = finite_difference_check(
          [&] { return weighted(max_pool1d(a, 2, 2), k); }, {a});
      CHECK(res.max_rel_error < kTol);
    }
    {
      Tensor a = random_param({r, c}, hash_combine(k, 25));
      Tensor b = random_param({r, c}, hash_combine(k, 26));
      auto res0 = finite_difference_check(
          [&] { return weighted(concat({a, b}, 0), k); }, {a, b});
      CHECK(res0.max_rel_error < kTol);
      auto res1 = finite_difference_check(
          [&] { return weighted(concat({a, b}, 1), k); }, {a, b});
      CHECK(res1.max_rel_error < kTol);
    }
    {
      Tensor a = random_param({r, c}, hash_combine(k, 27));
      auto res0 = finite_difference_check(
          [&] { return weighted(slice(a, 0, 1, r - 1), k); }, {a});
      CHECK(res0.max_rel_error < kTol);
      auto res1 = finite_difference_check(
          [&] { return weighted(slice(a, 1, 0, c - 1), k); }, {a});
      CHECK(res1.max_rel_error < kTol);
    }
    {
      Tensor a = random_param({r, c}, hash_combine(k, 28));
      auto res = finite_difference_check(
          [&] { return weighted(reshape(a, {c, r}), k); }, {a});
      CHECK(res.max_rel_error < kTol);
    }
    {
      Tensor table = random_param({r + 2, c}, hash_combine(k, 29));
      std::vector<std::size_t> ids = {0, r, 0, 2};
      auto res = finite_difference_check(
          [&] { return weighted(embedding_lookup(table, ids), k); }, {table});
      CHECK(res.max_rel_error < kTol);
    }
    {
      Tensor a = random_param({r, c}, hash_combine(k, 30));
      auto res = finite_difference_check(
          [&] { return weighted(dropout(a, 0.4, hash_combine(k, 99), true), k); }, {a});
      CHECK(res.max_rel_error < kTol);
    }
    {
      Tensor logits = random_param({r, c}, hash_combine(k, 31));
      SeqRng rng(hash_combine(k, 32));
      std::vector<double> tv(r * c);
      for (std::size_t row = 0; row < r; ++row) {
        double s = 0.0;
        for (std::size_t col = 0; col < c; ++col) {
          tv[row * c + col] = rng.next_uniform(0.05, 1.0);
          s += tv[row * c + col];
        }
        for (std::size_t col = 0; col < c; ++col) tv[row * c + col] /= s;
      }
      Tensor targets = Tensor::from_data({r, c}, std::move(tv));
      auto res = finite_difference_check(
          [&] { return cross_entropy(logits, targets); }, {logits});
      CHECK(res.max_rel_error < kTol);
    }
  }
}

TEST_CASE("finite_difference_check input validation") {
  Tensor p32 = Tensor::full({2}, 1.0, DType::f32).set_requires_grad();
  CHECK_THROWS_AS(finite_difference_check([&] { return sum_all(p32); }, {p32}),
                  std::invalid_argument);

  Tensor not_leaf = Tensor::full({2}, 1.0);
  CHECK_THROWS_AS(finite_difference_check([&] { return sum_all(not_leaf); }, {not_leaf}),
                  std::invalid_argument);
}
