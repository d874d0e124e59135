#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tanger/patches.hpp"
#include "tanger/spp.hpp"
#include "tanger/tensor.hpp"
#include "tanger/visual_words.hpp"

namespace tanger {

// Architecture hyperparameters.  P (token count) is derived from the image
// geometry: P = (H/m) * (W/m).
struct ModelConfig {
  std::size_t embed_dim = 64;   // C
  std::size_t depth = 4;        // encoder blocks in the shared stack
  std::size_t heads = 4;
  double mlp_ratio = 4.0;
  std::size_t maxlen = 16;      // decoded positions (text chars + stop)
  std::size_t vocab_size = 70;
  std::size_t language_count = 3;
  double dropout = 0.1;
  std::vector<std::size_t> n_range = {2, 3, 4, 5};  // candidate window widths
  std::vector<std::size_t> spp_levels = {1, 2, 4};
  std::size_t codebook_k = 64;  // visual word count
  std::size_t patch = 8;        // m: square patch side
  std::size_t descriptor_split = 2;  // s: sub-block grid per patch
  std::size_t image_height = 32;
  std::size_t image_width = 128;
  double alpha = 0.01;          // weight of the auxiliary (language+coherence) loss

  std::size_t token_count() const {
    return (image_height / patch) * (image_width / patch);
  }
  std::size_t patch_feature_dim() const { return 3 * patch * patch; }
  std::size_t pooled_feature_dim() const {
    return spp_output_dim(patch_feature_dim(), spp_levels);
  }
  std::size_t mlp_hidden() const {
    return static_cast<std::size_t>(embed_dim * mlp_ratio + 0.5);
  }
  void validate() const;  // throws std::invalid_argument
};

struct EncoderBlockParams {
  Tensor ln1_gamma, ln1_beta;
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor ln2_gamma, ln2_beta;
  Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;
};

// All learned tensors.  There is exactly ONE encoder stack; the primary
// branch and all three pyramid stages run the same blocks, so the sharing
// constraint holds by construction.
struct ModelParams {
  Tensor primary_embed;   // D_raw x C
  Tensor primary_pos;     // P x C
  Tensor supp_embed;      // (D_raw * sum(levels)) x C
  Tensor supp_pos;        // P x C
  std::vector<EncoderBlockParams> blocks;
  Tensor rec_w, rec_b;    // C x V, V
  Tensor lang_p_w1, lang_p_b1, lang_p_w2, lang_p_b2;  // primary-branch MLP
  Tensor lang_s_w1, lang_s_b1, lang_s_w2, lang_s_b2;  // pyramid-branch MLP
  Tensor coh_embed;       // V x C character embedding
  Tensor coh_w, coh_b;    // 2C x 1, 1

  // Deterministically ordered (name, tensor) view over every parameter.
  std::vector<std::pair<std::string, Tensor*>> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;
};

// Fresh parameters with seeded uniform inits; every tensor is an f64 leaf
// with requires_grad set.
ModelParams make_params(const ModelConfig& cfg, std::uint64_t seed);

// Parameter count per logical group ("primary embed", "supplementary embed",
// "encoder stack", "recognition head", "language heads", "coherence head").
// The shared stack is counted exactly once however many stages consume it.
std::map<std::string, std::size_t> count_parameters(const ModelParams& params);

// Per-pass dropout context: `key` must be unique per forward pass (e.g.
// derived from seed/epoch/sample); site keys are derived from it so the
// primary branch draws identical masks whether or not the pyramid runs.
struct DropoutCtx {
  bool train = false;
  double rate = 0.0;
  std::uint64_t key = 0;
};

// Non-overlapping pairwise max along the sequence axis; odd tail kept as-is.
Tensor reduce_sequence(const Tensor& tokens);

// Runs the shared stack over already-positioned tokens.  stage_tag picks the
// dropout substream (primary and the three pyramid stages use distinct tags).
Tensor encode_primary(const Tensor& tokens, const ModelParams& params,
                      const ModelConfig& cfg, const DropoutCtx& ctx);

struct PyramidOutputs {
  Tensor f2, f3, f4;  // lengths P, ceil(P/2), ceil(P/4); f4 is T_st
};
PyramidOutputs encode_pyramid(const Tensor& tokens, const ModelParams& params,
                              const ModelConfig& cfg, const DropoutCtx& ctx);

Tensor recognition_logits(const Tensor& t_pt, const ModelParams& params,
                          const ModelConfig& cfg);          // maxlen x V
Tensor language_logits(const Tensor& t_pt, const Tensor& t_st,
                       const ModelParams& params);          // language_count
Tensor coherence_scores(const Tensor& y, const Tensor& t_st,
                        const ModelParams& params);         // maxlen x 1 in (0,1)

struct ForwardOutputs {
  Tensor t_pt;
  Tensor f2, f3, f4;      // empty tensors when the pyramid branch is skipped
  Tensor y;               // maxlen x V recognition logits
  Tensor lang;            // language_count logits
  Tensor coherence;       // maxlen x 1 scores
  bool has_clr = false;
};

// Full dual-branch forward.  with_clr=false skips the pyramid branch and the
// language/coherence heads entirely; with alpha = 0 both paths yield
// bitwise-identical gradients because the dropout streams are keyed per
// site rather than drawn sequentially.
ForwardOutputs model_forward(const PatchSequence& seq, const NGramPlan& plan,
                             const ModelParams& params, const ModelConfig& cfg,
                             const DropoutCtx& ctx, bool with_clr);

}  // namespace tanger
