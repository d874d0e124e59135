#include "tanger/diagnostics.hpp"

#include "tanger/grad_check.hpp"
#include "tanger/losses.hpp"
#include "tanger/render.hpp"
#include "tanger/rng.hpp"

namespace tanger {

ModelConfig grad_check_config() {
  ModelConfig cfg;
  cfg.embed_dim = 16;
  cfg.depth = 1;
  cfg.heads = 2;
  cfg.mlp_ratio = 2.0;
  cfg.maxlen = 4;
  cfg.vocab_size = 12;  // pad + stop + the ten digit characters
  cfg.language_count = 3;
  cfg.dropout = 0.1;
  cfg.n_range = {2, 3, 4, 5};
  cfg.spp_levels = {1, 2, 4};
  cfg.codebook_k = 8;
  cfg.patch = 8;
  cfg.descriptor_split = 2;
  cfg.image_height = 16;
  cfg.image_width = 32;  // 8 patch tokens
  cfg.alpha = 0.01;
  return cfg;
}

ModelGradCheckReport run_model_grad_check() {
  const ModelConfig cfg = grad_check_config();
  const Vocab vocab = make_vocab({kScriptDigits}, 7);

  GenConfig gen;
  gen.height = cfg.image_height;
  gen.width = cfg.image_width;
  gen.min_text_len = 2;
  gen.max_text_len = cfg.maxlen - 1;
  gen.mixing_probability = 0.0;
  gen.noise_level = 0.05;
  gen.glyph_cell = 1;
  gen.scripts = {kScriptDigits};

  const Sample sample = render_sample(gen, vocab, 1234, 0);
  const PatchSequence seq = patchify(sample.image, cfg.patch);
  const DescriptorSet descriptors = extract_descriptors(seq, cfg.descriptor_split);
  const Codebook codebook =
      build_codebook(descriptors, cfg.codebook_k, 10, hash_combine(1234, fnv1a64("codebook")));
  const NGramPlan plan = build_plan(descriptors, codebook, cfg.n_range);
  const TargetEncoding target =
      encode_target(sample.text, vocab, cfg.maxlen, cfg.language_count);

  ModelParams params = make_params(cfg, 99);
  auto named = params.named();
  std::vector<Tensor> leaves;
  leaves.reserve(named.size());
  for (auto& [name, t] : named) leaves.push_back(*t);

  const DropoutCtx ctx{true, cfg.dropout, hash_combine(99, fnv1a64("gradcheck"))};
  auto f = [&]() {
    const ForwardOutputs fwd = model_forward(seq, plan, params, cfg, ctx, true);
    return compute_losses(fwd, target, cfg.alpha).total;
  };

  const GradCheckResult res = finite_difference_check(f, leaves);
  ModelGradCheckReport rep;
  rep.max_rel_error = res.max_rel_error;
  rep.worst_param = named[res.worst_param].first;
  rep.worst_entry = res.worst_entry;
  rep.entries_checked = res.entries_checked;
  return rep;
}

}  // namespace tanger
