#include "tanger/model.hpp"

#include <cmath>
#include <stdexcept>

#include "tanger/ops.hpp"
#include "tanger/rng.hpp"

namespace tanger {

namespace {

constexpr std::uint64_t kStagePrimary = 1;
constexpr std::uint64_t kStagePyr2 = 2;
constexpr std::uint64_t kStagePyr3 = 3;
constexpr std::uint64_t kStagePyr4 = 4;

Tensor init_matrix(std::vector<std::size_t> shape, std::uint64_t seed,
                   const std::string& name, double bound) {
  CounterRng rng(hash_combine(seed, fnv1a64(name)));
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = rng.uniform(i, -bound, bound);
  return Tensor::from_data(std::move(shape), std::move(v)).set_requires_grad();
}

Tensor init_xavier(std::size_t rows, std::size_t cols, std::uint64_t seed,
                   const std::string& name) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  return init_matrix({rows, cols}, seed, name, bound);
}

Tensor init_zeros(std::vector<std::size_t> shape) {
  return Tensor::zeros(std::move(shape)).set_requires_grad();
}

Tensor init_ones(std::size_t n) {
  return Tensor::full({n}, 1.0).set_requires_grad();
}

std::uint64_t site_key(const DropoutCtx& ctx, std::uint64_t stage, std::size_t block,
                       std::size_t site) {
  return hash_combine(ctx.key, stage * 1024 + block * 4 + site);
}

Tensor encoder_block(const Tensor& x, const EncoderBlockParams& p,
                     const ModelConfig& cfg, const DropoutCtx& ctx,
                     std::uint64_t stage, std::size_t block_index) {
  const std::size_t heads = cfg.heads;
  const std::size_t dh = cfg.embed_dim / heads;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  // attention sublayer, pre-norm
  Tensor h = layer_norm(x, p.ln1_gamma, p.ln1_beta);
  Tensor q = add_row_vector(matmul(h, p.wq), p.bq);
  Tensor k = add_row_vector(matmul(h, p.wk), p.bk);
  Tensor v = add_row_vector(matmul(h, p.wv), p.bv);
  std::vector<Tensor> head_outputs;
  head_outputs.reserve(heads);
  for (std::size_t hd = 0; hd < heads; ++hd) {
    Tensor qh = slice(q, 1, hd * dh, dh);
    Tensor kh = slice(k, 1, hd * dh, dh);
    Tensor vh = slice(v, 1, hd * dh, dh);
    Tensor att = softmax(scale(matmul(qh, transpose(kh)), att_scale), 1);
    head_outputs.push_back(matmul(att, vh));
  }
  Tensor attn = add_row_vector(matmul(concat(head_outputs, 1), p.wo), p.bo);
  attn = dropout(attn, ctx.rate, site_key(ctx, stage, block_index, 0), ctx.train);
  Tensor y = add(x, attn);

  // MLP sublayer, pre-norm
  Tensor h2 = layer_norm(y, p.ln2_gamma, p.ln2_beta);
  Tensor m = gelu(add_row_vector(matmul(h2, p.mlp_w1), p.mlp_b1));
  m = add_row_vector(matmul(m, p.mlp_w2), p.mlp_b2);
  m = dropout(m, ctx.rate, site_key(ctx, stage, block_index, 1), ctx.train);
  return add(y, m);
}

Tensor run_stack(const Tensor& tokens, const ModelParams& params,
                 const ModelConfig& cfg, const DropoutCtx& ctx, std::uint64_t stage) {
  Tensor x = tokens;
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    x = encoder_block(x, params.blocks[b], cfg, ctx, stage, b);
  }
  if (!params.blocks.empty()) {
    // Standard pre-norm encoder exit: normalize the residual stream before it
    // reaches any head.  Parameter-free on purpose — the per-block norms carry
    // the learnable scales, and an empty stack stays an exact identity.
    x = layer_norm(x, Tensor::full({cfg.embed_dim}, 1.0), Tensor::full({cfg.embed_dim}, 0.0));
  }
  return x;
}

}  // namespace

void ModelConfig::validate() const {
  if (embed_dim == 0 || heads == 0) throw std::invalid_argument("embed_dim and heads must be positive");
  if (embed_dim % heads != 0) throw std::invalid_argument("embed_dim must be divisible by heads");
  if (mlp_ratio <= 0.0) throw std::invalid_argument("mlp_ratio must be positive");
  if (patch < 2) throw std::invalid_argument("patch side must be >= 2");
  if (image_height % patch != 0 || image_width % patch != 0) {
    throw std::invalid_argument("image dimensions must be divisible by the patch size");
  }
  if (descriptor_split == 0 || patch % descriptor_split != 0) {
    throw std::invalid_argument("descriptor_split must divide the patch size");
  }
  const std::size_t p = token_count();
  if (p < 4) throw std::invalid_argument("need at least 4 patch tokens for the pyramid");
  if (maxlen < 2) throw std::invalid_argument("maxlen must be >= 2");
  if (p < maxlen) throw std::invalid_argument("token count must be >= maxlen");
  if (vocab_size < 3) throw std::invalid_argument("vocab must hold pad, stop and a character");
  if (language_count == 0) throw std::invalid_argument("language_count must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must lie in [0, 1)");
  if (alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");
  if (n_range.empty()) throw std::invalid_argument("n_range must be non-empty");
  for (std::size_t i = 0; i < n_range.size(); ++i) {
    if (n_range[i] < 2) throw std::invalid_argument("candidate window widths must be >= 2");
    if (i > 0 && n_range[i] <= n_range[i - 1]) {
      throw std::invalid_argument("n_range must be strictly increasing");
    }
  }
  if (spp_levels.empty()) throw std::invalid_argument("spp_levels must be non-empty");
  for (std::size_t i = 0; i < spp_levels.size(); ++i) {
    if (spp_levels[i] < 1 || spp_levels[i] > 8) {
      throw std::invalid_argument("spp levels must lie in [1, 8]");
    }
    if (i > 0 && spp_levels[i] <= spp_levels[i - 1]) {
      throw std::invalid_argument("spp_levels must be strictly increasing");
    }
  }
  if (codebook_k < 2) throw std::invalid_argument("codebook_k must be >= 2");
  if (mlp_hidden() == 0) throw std::invalid_argument("mlp hidden width must be positive");
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::named() {
  std::vector<std::pair<std::string, Tensor*>> out;
  out.emplace_back("primary.embed", &primary_embed);
  out.emplace_back("primary.pos", &primary_pos);
  out.emplace_back("supp.embed", &supp_embed);
  out.emplace_back("supp.pos", &supp_pos);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::string pre = "enc." + std::to_string(b) + ".";
    EncoderBlockParams& blk = blocks[b];
    out.emplace_back(pre + "ln1.gamma", &blk.ln1_gamma);
    out.emplace_back(pre + "ln1.beta", &blk.ln1_beta);
    out.emplace_back(pre + "attn.wq", &blk.wq);
    out.emplace_back(pre + "attn.bq", &blk.bq);
    out.emplace_back(pre + "attn.wk", &blk.wk);
    out.emplace_back(pre + "attn.bk", &blk.bk);
    out.emplace_back(pre + "attn.wv", &blk.wv);
    out.emplace_back(pre + "attn.bv", &blk.bv);
    out.emplace_back(pre + "attn.wo", &blk.wo);
    out.emplace_back(pre + "attn.bo", &blk.bo);
    out.emplace_back(pre + "ln2.gamma", &blk.ln2_gamma);
    out.emplace_back(pre + "ln2.beta", &blk.ln2_beta);
    out.emplace_back(pre + "mlp.w1", &blk.mlp_w1);
    out.emplace_back(pre + "mlp.b1", &blk.mlp_b1);
    out.emplace_back(pre + "mlp.w2", &blk.mlp_w2);
    out.emplace_back(pre + "mlp.b2", &blk.mlp_b2);
  }
  out.emplace_back("rec.w", &rec_w);
  out.emplace_back("rec.b", &rec_b);
  out.emplace_back("lang.p.w1", &lang_p_w1);
  out.emplace_back("lang.p.b1", &lang_p_b1);
  out.emplace_back("lang.p.w2", &lang_p_w2);
  out.emplace_back("lang.p.b2", &lang_p_b2);
  out.emplace_back("lang.s.w1", &lang_s_w1);
  out.emplace_back("lang.s.b1", &lang_s_b1);
  out.emplace_back("lang.s.w2", &lang_s_w2);
  out.emplace_back("lang.s.b2", &lang_s_b2);
  out.emplace_back("coh.embed", &coh_embed);
  out.emplace_back("coh.w", &coh_w);
  out.emplace_back("coh.b", &coh_b);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named() const {
  auto mutable_view = const_cast<ModelParams*>(this)->named();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mutable_view.size());
  for (auto& [name, t] : mutable_view) out.emplace_back(name, t);
  return out;
}

ModelParams make_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t c = cfg.embed_dim;
  const std::size_t p = cfg.token_count();
  const std::size_t d_raw = cfg.patch_feature_dim();
  const std::size_t d_pool = cfg.pooled_feature_dim();
  const std::size_t hidden = cfg.mlp_hidden();
  const std::size_t v = cfg.vocab_size;

  ModelParams mp;
  mp.primary_embed = init_xavier(d_raw, c, seed, "primary.embed");
  // Position tables start at unit scale: background patches embed identically,
  // so the positional signal must rival the ~1-std content signal for
  // attention to break the translation symmetry within the short training
  // budgets this model targets.
  mp.primary_pos = init_matrix({p, c}, seed, "primary.pos", 1.0);
  mp.supp_embed = init_xavier(d_pool, c, seed, "supp.embed");
  mp.supp_pos = init_matrix({p, c}, seed, "supp.pos", 1.0);
  for (std::size_t b = 0; b < cfg.depth; ++b) {
    const std::string pre = "enc." + std::to_string(b) + ".";
    EncoderBlockParams blk;
    blk.ln1_gamma = init_ones(c);
    blk.ln1_beta = init_zeros({c});
    blk.wq = init_xavier(c, c, seed, pre + "attn.wq");
    blk.bq = init_zeros({c});
    blk.wk = init_xavier(c, c, seed, pre + "attn.wk");
    blk.bk = init_zeros({c});
    blk.wv = init_xavier(c, c, seed, pre + "attn.wv");
    blk.bv = init_zeros({c});
    blk.wo = init_xavier(c, c, seed, pre + "attn.wo");
    blk.bo = init_zeros({c});
    blk.ln2_gamma = init_ones(c);
    blk.ln2_beta = init_zeros({c});
    blk.mlp_w1 = init_xavier(c, hidden, seed, pre + "mlp.w1");
    blk.mlp_b1 = init_zeros({hidden});
    blk.mlp_w2 = init_xavier(hidden, c, seed, pre + "mlp.w2");
    blk.mlp_b2 = init_zeros({c});
    mp.blocks.push_back(std::move(blk));
  }
  mp.rec_w = init_xavier(c, v, seed, "rec.w");
  mp.rec_b = init_zeros({v});
  mp.lang_p_w1 = init_xavier(c, c, seed, "lang.p.w1");
  mp.lang_p_b1 = init_zeros({c});
  mp.lang_p_w2 = init_xavier(c, cfg.language_count, seed, "lang.p.w2");
  mp.lang_p_b2 = init_zeros({cfg.language_count});
  mp.lang_s_w1 = init_xavier(c, c, seed, "lang.s.w1");
  mp.lang_s_b1 = init_zeros({c});
  mp.lang_s_w2 = init_xavier(c, cfg.language_count, seed, "lang.s.w2");
  mp.lang_s_b2 = init_zeros({cfg.language_count});
  mp.coh_embed = init_matrix({v, c}, seed, "coh.embed", 0.02);
  mp.coh_w = init_xavier(2 * c, 1, seed, "coh.w");
  mp.coh_b = init_zeros({1});
  return mp;
}

std::map<std::string, std::size_t> count_parameters(const ModelParams& params) {
  std::map<std::string, std::size_t> out;
  out["primary embed"] = 0;
  out["supplementary embed"] = 0;
  out["encoder stack"] = 0;
  out["recognition head"] = 0;
  out["language heads"] = 0;
  out["coherence head"] = 0;
  for (const auto& [name, t] : params.named()) {
    std::string group;
    if (name.rfind("primary.", 0) == 0) group = "primary embed";
    else if (name.rfind("supp.", 0) == 0) group = "supplementary embed";
    else if (name.rfind("enc.", 0) == 0) group = "encoder stack";
    else if (name.rfind("rec.", 0) == 0) group = "recognition head";
    else if (name.rfind("lang.", 0) == 0) group = "language heads";
    else group = "coherence head";
    out[group] += t->size();
  }
  return out;
}

Tensor reduce_sequence(const Tensor& tokens) {
  if (tokens.shape().size() != 2 || tokens.shape()[0] == 0) {
    throw std::invalid_argument("reduce_sequence expects a non-empty token matrix");
  }
  return max_pool1d(tokens, 2, 2);
}

Tensor encode_primary(const Tensor& tokens, const ModelParams& params,
                      const ModelConfig& cfg, const DropoutCtx& ctx) {
  if (tokens.shape().size() != 2 || tokens.shape()[0] != params.primary_pos.shape()[0] ||
      tokens.shape()[1] != cfg.embed_dim) {
    throw std::invalid_argument("primary token sequence does not match the position table");
  }
  return run_stack(tokens, params, cfg, ctx, kStagePrimary);
}

PyramidOutputs encode_pyramid(const Tensor& tokens, const ModelParams& params,
                              const ModelConfig& cfg, const DropoutCtx& ctx) {
  if (tokens.shape().size() != 2 || tokens.shape()[1] != cfg.embed_dim) {
    throw std::invalid_argument("pyramid tokens must be P x C");
  }
  if (tokens.shape()[0] < 4) {
    throw std::invalid_argument("pyramid needs at least 4 tokens");
  }
  PyramidOutputs out;
  out.f2 = run_stack(tokens, params, cfg, ctx, kStagePyr2);
  out.f3 = run_stack(reduce_sequence(out.f2), params, cfg, ctx, kStagePyr3);
  out.f4 = run_stack(reduce_sequence(out.f3), params, cfg, ctx, kStagePyr4);
  return out;
}

Tensor recognition_logits(const Tensor& t_pt, const ModelParams& params,
                          const ModelConfig& cfg) {
  if (t_pt.shape()[0] < cfg.maxlen) {
    throw std::invalid_argument("need at least maxlen primary tokens");
  }
  Tensor lead = slice(t_pt, 0, 0, cfg.maxlen);
  return add_row_vector(matmul(lead, params.rec_w), params.rec_b);
}

Tensor language_logits(const Tensor& t_pt, const Tensor& t_st, const ModelParams& params) {
  auto branch = [](const Tensor& feats, const Tensor& w1, const Tensor& b1,
                   const Tensor& w2, const Tensor& b2) {
    Tensor h = gelu(add_row_vector(matmul(feats, w1), b1));
    Tensor logits = add_row_vector(matmul(h, w2), b2);
    return max_along(logits, 0);  // pool over the branch's own sequence
  };
  Tensor a = branch(t_pt, params.lang_p_w1, params.lang_p_b1, params.lang_p_w2,
                    params.lang_p_b2);
  Tensor b = branch(t_st, params.lang_s_w1, params.lang_s_b1, params.lang_s_w2,
                    params.lang_s_b2);
  return add(a, b);
}

Tensor coherence_scores(const Tensor& y, const Tensor& t_st, const ModelParams& params) {
  const std::size_t maxlen = y.shape()[0];
  const std::size_t vocab = y.shape()[1];

  // Greedy per-position readout; the chosen index is a constant w.r.t.
  // differentiation, gradients flow through the embedding rows instead.
  std::vector<std::size_t> ids(maxlen);
  for (std::size_t i = 0; i < maxlen; ++i) {
    std::size_t best = 0;
    double best_v = y.value_at(i * vocab);
    for (std::size_t j = 1; j < vocab; ++j) {
      const double v = y.value_at(i * vocab + j);
      if (v > best_v) {
        best_v = v;
        best = j;
      }
    }
    ids[i] = best;
  }

  Tensor chars = embedding_lookup(params.coh_embed, ids);        // maxlen x C
  Tensor pooled = max_along(t_st, 0);                            // C
  Tensor pooled_rows = matmul(Tensor::full({maxlen, 1}, 1.0),
                              reshape(pooled, {1, pooled.size()}));  // maxlen x C
  Tensor joint = concat({chars, pooled_rows}, 1);                // maxlen x 2C
  return sigmoid(add_row_vector(matmul(joint, params.coh_w), params.coh_b));
}

ForwardOutputs model_forward(const PatchSequence& seq, const NGramPlan& plan,
                             const ModelParams& params, const ModelConfig& cfg,
                             const DropoutCtx& ctx, bool with_clr) {
  ForwardOutputs out;
  Tensor primary_tokens = embed_primary(seq, params.primary_embed, params.primary_pos);
  out.t_pt = encode_primary(primary_tokens, params, cfg, ctx);
  out.y = recognition_logits(out.t_pt, params, cfg);
  out.has_clr = with_clr;
  if (with_clr) {
    Tensor supp_tokens =
        embed_supplementary(plan, seq, params.supp_embed, params.supp_pos, cfg.spp_levels);
    PyramidOutputs pyr = encode_pyramid(supp_tokens, params, cfg, ctx);
    out.f2 = pyr.f2;
    out.f3 = pyr.f3;
    out.f4 = pyr.f4;
    out.lang = language_logits(out.t_pt, out.f4, params);
    out.coherence = coherence_scores(out.y, out.f4, params);
  }
  return out;
}

}  // namespace tanger
