#include "tanger/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "tanger/ops.hpp"
#include "tanger/rng.hpp"

namespace tanger {

namespace {

void check_geometry(const Dataset& ds, const ModelConfig& cfg) {
  if (ds.samples.empty()) throw std::invalid_argument("dataset is empty");
  if (ds.height != cfg.image_height || ds.width != cfg.image_width) {
    throw std::invalid_argument("dataset geometry does not match the model config");
  }
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string format_g6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

std::string_view ngram_mode_name(NGramMode m) {
  switch (m) {
    case NGramMode::adaptive: return "adaptive";
    case NGramMode::fixed2: return "fixed-2";
    case NGramMode::fixed3: return "fixed-3";
    case NGramMode::fixed4: return "fixed-4";
    case NGramMode::fixed5: return "fixed-5";
  }
  throw std::invalid_argument("bad ngram mode");
}

NGramMode ngram_mode_from_name(std::string_view name) {
  if (name == "adaptive") return NGramMode::adaptive;
  if (name == "fixed-2") return NGramMode::fixed2;
  if (name == "fixed-3") return NGramMode::fixed3;
  if (name == "fixed-4") return NGramMode::fixed4;
  if (name == "fixed-5") return NGramMode::fixed5;
  throw std::invalid_argument("unknown ngram mode: " + std::string(name));
}

bool ngram_mode_is_fixed(NGramMode m) { return m != NGramMode::adaptive; }

std::size_t ngram_mode_width(NGramMode m) {
  switch (m) {
    case NGramMode::fixed2: return 2;
    case NGramMode::fixed3: return 3;
    case NGramMode::fixed4: return 4;
    case NGramMode::fixed5: return 5;
    default: throw std::invalid_argument("adaptive mode has no fixed width");
  }
}

std::string format_epoch_log(const std::vector<EpochStats>& log) {
  std::string out = "epoch,train_loss,val_char_acc\n";
  for (const EpochStats& e : log) {
    out += std::to_string(e.epoch);
    out += ',';
    out += format_g6(e.train_loss);
    out += ',';
    out += format_g6(e.val_char_acc);
    out += '\n';
  }
  return out;
}

Codebook build_dataset_codebook(const Dataset& ds, const ModelConfig& cfg,
                                std::size_t iters, std::uint64_t seed) {
  check_geometry(ds, cfg);
  std::vector<double> pool;
  std::size_t count = 0;
  std::size_t dim = 0;
  for (const Sample& s : ds.samples) {
    const PatchSequence seq = patchify(s.image, cfg.patch);
    const DescriptorSet d = extract_descriptors(seq, cfg.descriptor_split);
    dim = d.dim;
    count += d.count();
    pool.insert(pool.end(), d.data.begin(), d.data.end());
  }
  return build_codebook(pool, count, dim, cfg.codebook_k, iters,
                        hash_combine(seed, fnv1a64("codebook")));
}

std::vector<PreparedSample> prepare_samples(const Dataset& ds, const ModelConfig& cfg,
                                            const Vocab& vocab, const Codebook* codebook,
                                            NGramMode mode) {
  check_geometry(ds, cfg);
  if (!ngram_mode_is_fixed(mode) && (codebook == nullptr || codebook->k == 0)) {
    throw std::invalid_argument("adaptive window planning requires a codebook");
  }
  std::vector<PreparedSample> out;
  out.reserve(ds.samples.size());
  for (const Sample& s : ds.samples) {
    PreparedSample ps;
    ps.seq = patchify(s.image, cfg.patch);
    if (ngram_mode_is_fixed(mode)) {
      ps.plan = build_fixed_plan(ps.seq.patch_count(), ngram_mode_width(mode));
    } else {
      const DescriptorSet d = extract_descriptors(ps.seq, cfg.descriptor_split);
      ps.plan = build_plan(d, *codebook, cfg.n_range);
    }
    ps.target = encode_target(s.text, vocab, cfg.maxlen, cfg.language_count);
    ps.text = s.text;
    ps.language = s.language;
    out.push_back(std::move(ps));
  }
  return out;
}

std::vector<std::u32string> predict_texts(const ModelParams& params,
                                          const std::vector<PreparedSample>& samples,
                                          const ModelConfig& cfg, const Vocab& vocab) {
  NoGradGuard eval_guard;
  DropoutCtx ctx;  // eval mode
  std::vector<std::u32string> out;
  out.reserve(samples.size());
  for (const PreparedSample& ps : samples) {
    const ForwardOutputs fwd = model_forward(ps.seq, ps.plan, params, cfg, ctx, false);
    out.push_back(decode(fwd.y, vocab));
  }
  return out;
}

TrainResult train_model(const ModelConfig& cfg, const Vocab& vocab, const Dataset& train,
                        const Dataset& val, const TrainOptions& opts,
                        const Codebook* prebuilt_codebook) {
  cfg.validate();
  if (opts.batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  check_geometry(train, cfg);
  check_geometry(val, cfg);

  TrainResult result;
  if (ngram_mode_is_fixed(opts.ngram_mode)) {
    result.codebook = Codebook{};  // unused in fixed-width runs
  } else if (prebuilt_codebook != nullptr) {
    result.codebook = *prebuilt_codebook;
  } else {
    result.codebook = build_dataset_codebook(train, cfg, opts.codebook_iters, opts.seed);
  }

  const Codebook* cb = ngram_mode_is_fixed(opts.ngram_mode) ? nullptr : &result.codebook;
  std::vector<PreparedSample> train_set =
      prepare_samples(train, cfg, vocab, cb, opts.ngram_mode);
  std::vector<PreparedSample> val_set = prepare_samples(val, cfg, vocab, cb, opts.ngram_mode);

  result.params = make_params(cfg, hash_combine(opts.seed, fnv1a64("init")));
  AdamState state = make_adam_state(result.params);
  auto named = result.params.named();

  std::vector<std::vector<double>> accum(named.size());
  for (std::size_t p = 0; p < named.size(); ++p) accum[p].assign(named[p].second->size(), 0.0);

  const bool with_clr = cfg.alpha > 0.0;
  const std::uint64_t dropout_base = hash_combine(opts.seed, fnv1a64("dropout"));
  std::uint64_t forward_counter = 0;

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= opts.epochs; ++epoch) {
    SeqRng shuffle_rng(hash_combine(hash_combine(opts.seed, fnv1a64("shuffle")), epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = shuffle_rng.next_below(i);
      std::swap(order[i - 1], order[j]);
    }

    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + opts.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      for (auto& a : accum) std::fill(a.begin(), a.end(), 0.0);

      for (std::size_t q = start; q < end; ++q) {
        const PreparedSample& ps = train_set[order[q]];
        DropoutCtx ctx{true, cfg.dropout, hash_combine(dropout_base, forward_counter++)};
        const ForwardOutputs fwd =
            model_forward(ps.seq, ps.plan, result.params, cfg, ctx, with_clr);
        const LossBreakdown lb = compute_losses(fwd, ps.target, cfg.alpha);
        const double loss_value = lb.total.item();
        if (!std::isfinite(loss_value)) {
          throw std::runtime_error("training diverged (non-finite loss) at epoch " +
                                   std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_index));
        }
        loss_sum += loss_value;
        const GradientMap grads = backward(lb.total);
        for (std::size_t p = 0; p < named.size(); ++p) {
          const Tensor* t = named[p].second;
          if (!grads.contains(*t)) continue;
          const auto g = grads.at(*t).values();
          for (std::size_t i = 0; i < accum[p].size(); ++i) accum[p][i] += g[i];
        }
      }
      for (auto& a : accum) {
        for (double& g : a) g *= inv;
      }
      adam_step(result.params, accum, state, opts.lr);
    }

    const std::vector<std::u32string> preds =
        predict_texts(result.params, val_set, cfg, vocab);
    std::vector<std::pair<std::u32string, std::u32string>> pairs;
    pairs.reserve(val_set.size());
    for (std::size_t i = 0; i < val_set.size(); ++i) pairs.emplace_back(preds[i], val_set[i].text);

    EpochStats es;
    es.epoch = epoch;
    es.train_loss = loss_sum / static_cast<double>(train_set.size());
    es.val_char_acc = char_accuracy(pairs);
    result.log.push_back(es);
  }
  return result;
}

MetricsReport evaluate_model(const ModelParams& params, const Codebook& codebook,
                             const ModelConfig& cfg, const Vocab& vocab, const Dataset& ds,
                             NGramMode mode) {
  const Codebook* cb = ngram_mode_is_fixed(mode) ? nullptr : &codebook;
  std::vector<PreparedSample> samples = prepare_samples(ds, cfg, vocab, cb, mode);
  const std::vector<std::u32string> preds = predict_texts(params, samples, cfg, vocab);
  std::vector<std::pair<std::u32string, std::u32string>> pairs;
  std::vector<std::vector<double>> langs;
  pairs.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    pairs.emplace_back(preds[i], samples[i].text);
    langs.push_back(samples[i].language);
  }
  return compute_metrics(pairs, langs);
}

std::vector<AblationRow> run_ablation(const std::string& mode, const ModelConfig& cfg,
                                      const Vocab& vocab, const Dataset& train,
                                      const Dataset& val, const TrainOptions& base,
                                      const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw std::invalid_argument("ablation needs at least one seed");

  struct Variant {
    std::string label;
    NGramMode ngram;
    double alpha;
  };
  std::vector<Variant> variants;
  if (mode == "ngram") {
    for (NGramMode m : {NGramMode::fixed2, NGramMode::fixed3, NGramMode::fixed4,
                        NGramMode::fixed5, NGramMode::adaptive}) {
      variants.push_back({std::string(ngram_mode_name(m)), m, cfg.alpha});
    }
  } else if (mode == "clr") {
    const double on_alpha = cfg.alpha > 0.0 ? cfg.alpha : 0.01;
    variants.push_back({"clr-on", base.ngram_mode, on_alpha});
    variants.push_back({"clr-off", base.ngram_mode, 0.0});
  } else {
    throw std::invalid_argument("unknown ablation mode: " + mode);
  }

  std::vector<AblationRow> rows;
  for (const Variant& var : variants) {
    AblationRow row;
    row.label = var.label;
    for (std::uint64_t seed : seeds) {
      ModelConfig vcfg = cfg;
      vcfg.alpha = var.alpha;
      TrainOptions vopts = base;
      vopts.seed = seed;
      vopts.ngram_mode = var.ngram;
      const TrainResult res = train_model(vcfg, vocab, train, val, vopts);
      row.val_acc.push_back(res.log.empty() ? 0.0 : res.log.back().val_char_acc);
    }
    row.median = median_of(row.val_acc);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "configuration";
  if (!rows.empty()) {
    for (std::size_t i = 0; i < rows.front().val_acc.size(); ++i) {
      out += ",val_acc_seed" + std::to_string(i);
    }
  }
  out += ",median\n";
  for (const AblationRow& r : rows) {
    out += r.label;
    for (double v : r.val_acc) {
      out += ',';
      out += format_g6(v);
    }
    out += ',';
    out += format_g6(r.median);
    out += '\n';
  }
  return out;
}

}  // namespace tanger
