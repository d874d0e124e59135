#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tanger/adam.hpp"
#include "tanger/losses.hpp"
#include "tanger/metrics.hpp"
#include "tanger/model.hpp"
#include "tanger/render.hpp"
#include "tanger/visual_words.hpp"

namespace tanger {

// Window-plan policy: data-driven widths, or a forced fixed width (the
// fixed-width rows of the ablation table).
enum class NGramMode { adaptive, fixed2, fixed3, fixed4, fixed5 };

std::string_view ngram_mode_name(NGramMode m);
NGramMode ngram_mode_from_name(std::string_view name);  // throws invalid_argument
bool ngram_mode_is_fixed(NGramMode m);
std::size_t ngram_mode_width(NGramMode m);  // fixed modes only

struct TrainOptions {
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  std::uint64_t seed = 42;
  std::size_t codebook_iters = 25;
  NGramMode ngram_mode = NGramMode::adaptive;
};

struct EpochStats {
  std::size_t epoch = 0;       // 1-based
  double train_loss = 0.0;
  double val_char_acc = 0.0;
};

struct TrainResult {
  ModelParams params;
  Codebook codebook;           // k == 0 for fixed-width runs (no codebook)
  std::vector<EpochStats> log;
};

// CSV rendering of the per-epoch log: "epoch,train_loss,val_char_acc".
std::string format_epoch_log(const std::vector<EpochStats>& log);

// Pipeline inputs cached once per sample (reused across epochs).
struct PreparedSample {
  PatchSequence seq;
  NGramPlan plan;
  TargetEncoding target;
  std::u32string text;
  std::vector<double> language;
};

// Builds the visual-word codebook from every descriptor of the dataset.
Codebook build_dataset_codebook(const Dataset& ds, const ModelConfig& cfg,
                                std::size_t iters, std::uint64_t seed);

std::vector<PreparedSample> prepare_samples(const Dataset& ds, const ModelConfig& cfg,
                                            const Vocab& vocab, const Codebook* codebook,
                                            NGramMode mode);

// Full training loop: per-sample forward/backward with batch-averaged
// gradient accumulation and Adam updates; per-epoch validation accuracy.
// Deterministic for fixed inputs and seed.  Throws on divergence.
TrainResult train_model(const ModelConfig& cfg, const Vocab& vocab, const Dataset& train,
                        const Dataset& val, const TrainOptions& opts,
                        const Codebook* prebuilt_codebook = nullptr);

// Eval-mode metrics over a dataset (recognition branch only).
MetricsReport evaluate_model(const ModelParams& params, const Codebook& codebook,
                             const ModelConfig& cfg, const Vocab& vocab, const Dataset& ds,
                             NGramMode mode = NGramMode::adaptive);

// Decoded predictions in dataset order (eval mode).
std::vector<std::u32string> predict_texts(const ModelParams& params,
                                          const std::vector<PreparedSample>& samples,
                                          const ModelConfig& cfg, const Vocab& vocab);

struct AblationRow {
  std::string label;
  std::vector<double> val_acc;  // one entry per seed
  double median = 0.0;
};

// mode "ngram": rows fixed-2..fixed-5 plus adaptive; mode "clr": rows clr-on
// (configured alpha, or 0.01 if the config has alpha 0) and clr-off (alpha 0).
std::vector<AblationRow> run_ablation(const std::string& mode, const ModelConfig& cfg,
                                      const Vocab& vocab, const Dataset& train,
                                      const Dataset& val, const TrainOptions& base,
                                      const std::vector<std::uint64_t>& seeds);

std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace tanger
