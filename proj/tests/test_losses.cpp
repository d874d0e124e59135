#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "tanger/grad_check.hpp"
#include "tanger/losses.hpp"
#include "tanger/ops.hpp"
#include "tanger/rng.hpp"
#include "tanger/tensor.hpp"
#include "tanger/vocab.hpp"

using namespace tanger;

namespace {

Tensor random_leaf(std::vector<std::size_t> shape, std::uint64_t key) {
  SeqRng rng(key);
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  std::vector<double> v(n);
  for (double& x : v) x = rng.next_uniform(-1.5, 1.5);
  return Tensor::from_data(std::move(shape), std::move(v)).set_requires_grad();
}

}  // namespace

TEST_CASE("target encoding appends the stop marker and pads the rest") {
  const Vocab v = make_vocab();
  const TargetEncoding enc = encode_target(U"ab", v, 5, 3);
  REQUIRE(enc.ids.size() == 5);
  CHECK(enc.ids[0] == v.id_of(U'a'));
  CHECK(enc.ids[1] == v.id_of(U'b'));
  CHECK(enc.ids[2] == Vocab::kStopId);
  CHECK(enc.ids[3] == Vocab::kPadId);
  CHECK(enc.ids[4] == Vocab::kPadId);
  CHECK(enc.effective_length == 3);
  CHECK(enc.language[0] == doctest::Approx(1.0));

  // maximal text: maxlen - 1 characters leaves exactly one slot for the stop
  const TargetEncoding full = encode_target(U"abcd", v, 5, 3);
  CHECK(full.effective_length == 5);
  CHECK(full.ids[4] == Vocab::kStopId);

  CHECK_THROWS_AS(encode_target(U"", v, 5, 3), std::invalid_argument);
  CHECK_THROWS_AS(encode_target(U"abcde", v, 5, 3), std::invalid_argument);
  CHECK_THROWS_AS(encode_target(U"a!", v, 5, 3), std::invalid_argument);
}

TEST_CASE("uniform recognition logits cost ln(vocab) per supervised position") {
  TargetEncoding target;
  target.ids = {2, 3, 1, 0};
  target.effective_length = 3;
  const Tensor y = Tensor::zeros({4, 12});
  const Tensor l = loss_vision(y, target);
  CHECK(l.item() == doctest::Approx(std::log(12.0)).epsilon(1e-12));
}

TEST_CASE("saturated correct logits drive the recognition loss to zero") {
  TargetEncoding target;
  target.ids = {2, 3, 1, 0};
  target.effective_length = 3;
  std::vector<double> vals(4 * 12, 0.0);
  for (std::size_t i = 0; i < 3; ++i) vals[i * 12 + target.ids[i]] = 60.0;
  const Tensor y = Tensor::from_data({4, 12}, std::move(vals));
  CHECK(loss_vision(y, target).item() < 1e-12);
  CHECK(loss_vision(y, target).item() >= 0.0);
}

TEST_CASE("positions after the stop marker never influence the recognition loss") {
  TargetEncoding target;
  target.ids = {4, 1, 0, 0};
  target.effective_length = 2;
  Tensor a = random_leaf({4, 6}, 31);
  std::vector<double> altered(a.values().begin(), a.values().end());
  for (std::size_t i = 2 * 6; i < altered.size(); ++i) altered[i] += 37.0;
  Tensor b = Tensor::from_data({4, 6}, std::move(altered));
  CHECK(loss_vision(a, target).item() == loss_vision(b, target).item());
}

TEST_CASE("recognition loss validates shapes and ids") {
  TargetEncoding target;
  target.ids = {2, 1};
  target.effective_length = 2;
  CHECK_THROWS_AS(loss_vision(Tensor::zeros({3, 5}), target), std::invalid_argument);
  target.ids = {9, 1};
  CHECK_THROWS_AS(loss_vision(Tensor::zeros({2, 5}), target), std::invalid_argument);
  target.ids = {2, 1};
  target.effective_length = 0;
  CHECK_THROWS_AS(loss_vision(Tensor::zeros({2, 5}), target), std::invalid_argument);
  target.effective_length = 3;
  CHECK_THROWS_AS(loss_vision(Tensor::zeros({2, 5}), target), std::invalid_argument);
}

TEST_CASE("uniform language logits cost ln(3) for any admissible target") {
  const Tensor logits = Tensor::zeros({3});
  CHECK(loss_language_class(logits, {1.0, 0.0, 0.0}).item() ==
        doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(loss_language_class(logits, {0.2, 0.3, 0.5}).item() ==
        doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("a one-hot language target reduces to the standard cross entropy") {
  const Tensor logits = Tensor::from_data({3}, {0.7, -0.4, 1.2});
  const double l = loss_language_class(logits, {0.0, 1.0, 0.0}).item();
  const double z = std::exp(0.7) + std::exp(-0.4) + std::exp(1.2);
  CHECK(l == doctest::Approx(-std::log(std::exp(-0.4) / z)).epsilon(1e-12));
}

TEST_CASE("language loss rejects malformed targets") {
  const Tensor logits = Tensor::zeros({3});
  CHECK_THROWS_AS(loss_language_class(logits, {0.5, 0.4, 0.2}), std::invalid_argument);
  CHECK_THROWS_AS(loss_language_class(logits, {1.2, -0.2, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(loss_language_class(logits, {0.5, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(loss_language_class(Tensor::zeros({2, 3}), {0.5, 0.3, 0.2}),
                  std::invalid_argument);
}

TEST_CASE("coherence loss is the negative mean log of the supervised scores") {
  const Tensor half = Tensor::full({4, 1}, 0.5);
  CHECK(loss_coherence(half, 4).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  const Tensor near_one = Tensor::full({4, 1}, 1.0 - 1e-12);
  CHECK(loss_coherence(near_one, 4).item() == doctest::Approx(0.0).epsilon(1e-9));

  // only the first effective_length rows are consumed
  const Tensor mixed = Tensor::from_data({3, 1}, {0.5, 0.5, 123.0});
  CHECK(loss_coherence(mixed, 2).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("coherence loss guards its domain") {
  CHECK_THROWS_AS(loss_coherence(Tensor::full({2, 1}, 1.0), 2), std::runtime_error);
  CHECK_THROWS_AS(loss_coherence(Tensor::full({2, 1}, 0.0), 1), std::runtime_error);
  CHECK_THROWS_AS(loss_coherence(Tensor::full({2, 1}, -0.5), 1), std::runtime_error);
  CHECK_THROWS_AS(loss_coherence(Tensor::full({2, 1}, 0.5), 0), std::invalid_argument);
  CHECK_THROWS_AS(loss_coherence(Tensor::full({2, 1}, 0.5), 3), std::invalid_argument);
  CHECK_THROWS_AS(loss_coherence(Tensor::full({2, 2}, 0.5), 1), std::invalid_argument);
}

TEST_CASE("the weighted total combines the terms linearly in alpha") {
  const Tensor lv = Tensor::scalar(2.0);
  const Tensor lc = Tensor::scalar(0.6);
  const Tensor ls = Tensor::scalar(0.4);
  CHECK(loss_total(lv, lc, ls, 0.01).item() == doctest::Approx(2.01).epsilon(1e-15));
  CHECK(loss_total(lv, lc, ls, 0.0).item() == 2.0);
  CHECK(loss_total(Tensor::scalar(0.0), Tensor::scalar(0.0), Tensor::scalar(0.0), 0.5).item() ==
        0.0);

  const double base = loss_total(lv, lc, ls, 0.0).item();
  const double a1 = loss_total(lv, lc, ls, 0.02).item() - base;
  const double a2 = loss_total(lv, lc, ls, 0.04).item() - base;
  CHECK(a2 == doctest::Approx(2.0 * a1).epsilon(1e-12));

  CHECK_THROWS_AS(
      loss_total(Tensor::scalar(std::numeric_limits<double>::infinity()), lc, ls, 0.01),
      std::runtime_error);
  CHECK_THROWS_AS(
      loss_total(lv, Tensor::scalar(std::nan("")), ls, 0.01), std::runtime_error);
  CHECK_THROWS_AS(loss_total(Tensor::zeros({2}), lc, ls, 0.01), std::invalid_argument);
}

TEST_CASE("loss gradients match finite differences") {
  TargetEncoding target;
  target.ids = {2, 4, 1, 0};
  target.effective_length = 3;
  target.language = {0.25, 0.25, 0.5};

  Tensor y = random_leaf({4, 6}, 101);
  Tensor lang = random_leaf({3}, 102);
  Tensor pre = random_leaf({4, 1}, 103);

  auto f = [&]() {
    Tensor scores = sigmoid(pre);  // keeps every score inside (0, 1)
    return loss_total(loss_vision(y, target), loss_language_class(lang, target.language),
                      loss_coherence(scores, target.effective_length), 0.01);
  };
  const GradCheckResult r = finite_difference_check(f, {y, lang, pre});
  CHECK(r.max_rel_error < 1e-4);
}
