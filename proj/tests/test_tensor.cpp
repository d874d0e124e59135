#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "tanger/ops.hpp"
#include "tanger/tensor.hpp"

using namespace tanger;

TEST_CASE("tensor factories and accessors") {
  Tensor z = Tensor::zeros({2, 3});
  CHECK(z.shape() == std::vector<std::size_t>{2, 3});
  CHECK(z.size() == 6);
  CHECK(z.dtype() == DType::f64);
  for (double v : z.values()) CHECK(v == 0.0);

  Tensor f = Tensor::full({4}, 1.5, DType::f32);
  CHECK(f.dtype() == DType::f32);
  CHECK(f.value_at(3) == 1.5);

  Tensor s = Tensor::scalar(2.5);
  CHECK(s.item() == 2.5);
  CHECK_THROWS_AS(z.item(), std::invalid_argument);

  CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST_CASE("f32 tensors quantize to the float grid") {
  const double v = 0.1;  // not representable in binary32
  Tensor t = Tensor::from_data({1}, {v}, DType::f32);
  CHECK(t.item() == static_cast<double>(static_cast<float>(v)));
  CHECK(t.item() != v);

  Tensor a = Tensor::from_data({1}, {v}, DType::f32);
  Tensor b = Tensor::from_data({1}, {v}, DType::f32);
  Tensor c = add(a, b);
  CHECK(c.item() == static_cast<double>(static_cast<float>(t.item() + t.item())));
}

TEST_CASE("mixed dtype operands are rejected") {
  Tensor a = Tensor::full({2}, 1.0, DType::f32);
  Tensor b = Tensor::full({2}, 1.0, DType::f64);
  CHECK_THROWS_AS(add(a, b), std::invalid_argument);
  CHECK_THROWS_AS(mul(a, b), std::invalid_argument);
}

TEST_CASE("leaves, tracing and mutation rules") {
  Tensor a = Tensor::full({2}, 1.0).set_requires_grad();
  CHECK(a.requires_grad());
  CHECK(a.traced());

  Tensor b = Tensor::full({2}, 2.0);
  CHECK_FALSE(b.traced());

  Tensor c = add(a, b);
  CHECK(c.traced());
  CHECK_FALSE(c.requires_grad());
  CHECK_THROWS_AS(c.set_requires_grad(), std::invalid_argument);
  CHECK_THROWS_AS(c.mutable_values(), std::invalid_argument);

  // A tensor created outside any traced computation stays untraced.
  Tensor d = add(b, b);
  CHECK_FALSE(d.traced());
}

TEST_CASE("backward of sum gives all-ones gradient") {
  Tensor x = Tensor::from_data({3}, {1.0, -2.0, 0.5}).set_requires_grad();
  Tensor loss = sum_all(x);
  GradientMap g = backward(loss);
  REQUIRE(g.contains(x));
  const Tensor& gx = g.at(x);
  CHECK(gx.shape() == x.shape());
  for (double v : gx.values()) CHECK(v == 1.0);
}

TEST_CASE("backward validation errors") {
  Tensor untraced = Tensor::full({1}, 1.0);
  CHECK_THROWS_AS(backward(untraced), std::invalid_argument);

  Tensor x = Tensor::full({2, 2}, 1.0).set_requires_grad();
  Tensor y = mul(x, x);
  CHECK_THROWS_AS(backward(y), std::invalid_argument);  // non-scalar
}

TEST_CASE("fan-out gradients accumulate as the sum of both paths") {
  Tensor x = Tensor::from_data({2}, {3.0, -1.0}).set_requires_grad();
  Tensor a = Tensor::from_data({2}, {2.0, 5.0});
  Tensor b = Tensor::from_data({2}, {-4.0, 0.5});
  // f = sum(x * a) + sum(x * b)  ==> df/dx = a + b
  Tensor loss = add(sum_all(mul(x, a)), sum_all(mul(x, b)));
  GradientMap g = backward(loss);
  const Tensor& gx = g.at(x);
  CHECK(gx.value_at(0) == doctest::Approx(2.0 - 4.0).epsilon(1e-12));
  CHECK(gx.value_at(1) == doctest::Approx(5.0 + 0.5).epsilon(1e-12));
}

TEST_CASE("untraced inputs are absent from the gradient map") {
  Tensor x = Tensor::full({2}, 1.0).set_requires_grad();
  Tensor c = Tensor::full({2}, 3.0);
  GradientMap g = backward(sum_all(mul(x, c)));
  CHECK(g.contains(x));
  CHECK_FALSE(g.contains(c));
  CHECK(g.size() == 1);
  CHECK_THROWS_AS(g.at(c), std::out_of_range);
}

TEST_CASE("no-grad guard suppresses graph recording") {
  Tensor x = Tensor::full({2}, 1.0).set_requires_grad();
  {
    NoGradGuard ng;
    Tensor y = mul(x, x);
    CHECK_FALSE(y.traced());
  }
  Tensor y = mul(x, x);
  CHECK(y.traced());
}

TEST_CASE("gradient map keys leaves by identity") {
  Tensor x = Tensor::full({2}, 2.0).set_requires_grad();
  Tensor y = Tensor::full({2}, 2.0).set_requires_grad();  // equal values, distinct leaf
  GradientMap g = backward(sum_all(mul(x, y)));
  CHECK(g.contains(x));
  CHECK(g.contains(y));
  CHECK(g.at(x).value_at(0) == 2.0);
}
