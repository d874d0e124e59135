#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "tanger/adam.hpp"
#include "tanger/model.hpp"
#include "tanger/ops.hpp"

using namespace tanger;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.embed_dim = 4;
  cfg.depth = 1;
  cfg.heads = 2;
  cfg.mlp_ratio = 1.0;
  cfg.maxlen = 2;
  cfg.vocab_size = 4;
  cfg.language_count = 3;
  cfg.dropout = 0.0;
  cfg.n_range = {2};
  cfg.spp_levels = {1};
  cfg.codebook_k = 2;
  cfg.patch = 2;
  cfg.descriptor_split = 1;
  cfg.image_height = 4;
  cfg.image_width = 8;  // 8 patch tokens
  return cfg;
}

std::vector<std::vector<double>> constant_grads(const ModelParams& params, double g) {
  std::vector<std::vector<double>> out;
  for (const auto& [name, t] : params.named()) {
    (void)name;
    out.emplace_back(t->size(), g);
  }
  return out;
}

}  // namespace

TEST_CASE("the first step moves every entry by almost exactly the learning rate") {
  const ModelConfig cfg = tiny_config();
  ModelParams params = make_params(cfg, 1);
  AdamState state = make_adam_state(params);
  CHECK(state.step == 0);

  const auto before_named = params.named();
  std::vector<std::vector<double>> before;
  for (const auto& [name, t] : before_named) {
    (void)name;
    before.emplace_back(t->values().begin(), t->values().end());
  }

  const double lr = 1e-3;
  adam_step(params, constant_grads(params, 1.0), state, lr);
  CHECK(state.step == 1);

  // m_hat = g, v_hat = g^2 at step one, so the update is lr * g / (|g| + eps)
  const double expected = lr * 1.0 / (1.0 + 1e-8);
  auto view = params.named();
  for (std::size_t i = 0; i < view.size(); ++i) {
    const auto vals = view[i].second->values();
    for (std::size_t j = 0; j < vals.size(); ++j) {
      CHECK(vals[j] == doctest::Approx(before[i][j] - expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("zero gradients leave fresh parameters untouched") {
  const ModelConfig cfg = tiny_config();
  ModelParams params = make_params(cfg, 2);
  ModelParams reference = make_params(cfg, 2);
  AdamState state = make_adam_state(params);

  adam_step(params, constant_grads(params, 0.0), state, 0.1);
  auto a = params.named();
  auto b = reference.named();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto av = a[i].second->values();
    const auto bv = b[i].second->values();
    REQUIRE(av.size() == bv.size());
    for (std::size_t j = 0; j < av.size(); ++j) CHECK(av[j] == bv[j]);
  }
}

TEST_CASE("identical gradient streams produce bit-identical trajectories") {
  const ModelConfig cfg = tiny_config();
  ModelParams p1 = make_params(cfg, 3);
  ModelParams p2 = make_params(cfg, 3);
  AdamState s1 = make_adam_state(p1);
  AdamState s2 = make_adam_state(p2);

  for (int step = 0; step < 5; ++step) {
    const double g = 0.25 * (step + 1);
    adam_step(p1, constant_grads(p1, g), s1, 3e-3);
    adam_step(p2, constant_grads(p2, g), s2, 3e-3);
  }
  auto a = p1.named();
  auto b = p2.named();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto av = a[i].second->values();
    const auto bv = b[i].second->values();
    for (std::size_t j = 0; j < av.size(); ++j) CHECK(av[j] == bv[j]);
  }
  CHECK(s1.step == 5);
}

TEST_CASE("bias correction makes early steps larger than the raw moment ratio") {
  const ModelConfig cfg = tiny_config();
  ModelParams params = make_params(cfg, 4);
  AdamState state = make_adam_state(params);
  const double before = params.primary_embed.value_at(0);
  adam_step(params, constant_grads(params, 0.5), state, 1e-2);
  const double after = params.primary_embed.value_at(0);
  // without bias correction the first step would be lr * 0.1 * g / (sqrt(0.001) * |g| + eps)
  // which is ~0.03 lr; with correction it is ~lr.
  CHECK(std::abs(after - before) > 0.9e-2);
}

TEST_CASE("non-finite gradients abort with the parameter name and step") {
  const ModelConfig cfg = tiny_config();
  ModelParams params = make_params(cfg, 5);
  AdamState state = make_adam_state(params);
  auto grads = constant_grads(params, 0.0);
  grads[0][0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(adam_step(params, grads, state, 1e-3),
                       doctest::Contains("primary.embed"), std::runtime_error);

  auto grads2 = constant_grads(params, 0.0);
  grads2.back()[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_WITH_AS(adam_step(params, grads2, state, 1e-3), doctest::Contains("coh.b"),
                       std::runtime_error);
}

TEST_CASE("gradient extraction fills missing parameters with zeros") {
  const ModelConfig cfg = tiny_config();
  ModelParams params = make_params(cfg, 6);

  // a loss touching only the recognition bias leaves everything else absent
  Tensor loss = sum_all(mul(params.rec_b, params.rec_b));
  GradientMap gm = backward(loss);
  REQUIRE(gm.contains(params.rec_b));

  const auto grads = gradients_for(params, gm);
  const auto view = params.named();
  REQUIRE(grads.size() == view.size());
  for (std::size_t i = 0; i < view.size(); ++i) {
    REQUIRE(grads[i].size() == view[i].second->size());
    if (view[i].first == "rec.b") {
      const auto vals = view[i].second->values();
      for (std::size_t j = 0; j < grads[i].size(); ++j) {
        CHECK(grads[i][j] == doctest::Approx(2.0 * vals[j]).epsilon(1e-12));
      }
    } else {
      for (double g : grads[i]) CHECK(g == 0.0);
    }
  }
}
