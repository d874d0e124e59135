#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tanger/checkpoint.hpp"
#include "tanger/diagnostics.hpp"
#include "tanger/losses.hpp"
#include "tanger/metrics.hpp"
#include "tanger/model.hpp"
#include "tanger/render.hpp"
#include "tanger/rng.hpp"
#include "tanger/run_config.hpp"
#include "tanger/trainer.hpp"
#include "tanger/vocab.hpp"

namespace {

using namespace tanger;

constexpr const char* kUsage = R"(usage: tanger <command> [options]

commands:
  gen-data       --config FILE --out DIR --count N [--seed N]
                 render a synthetic dataset (PPM images + manifest.tsv)
  build-codebook --config FILE --data DIR --out FILE [--seed N]
                 cluster patch descriptors into the visual-word codebook
  train          --config FILE [--train-dir DIR] [--val-dir DIR] [--out-dir DIR]
                 train a model; writes checkpoint.bin and train_log.csv
  eval           --checkpoint FILE --data DIR
                 report accuracy, mean edit distance and the error histogram
  recognize      --checkpoint FILE --image FILE.ppm
                 print the decoded text and the per-script language posterior
  ablate         --mode ngram|clr --config FILE [--seeds A,B,C] [--out FILE]
                 train every variant and print the comparison table
  grad-check
                 compare analytic and numeric gradients on the tiny model

exit status: 0 success, 1 invalid arguments or config, 2 runtime failure
)";

// --flag value pairs; every flag takes exactly one value.
std::map<std::string, std::string> parse_flags(int argc, char** argv, int start,
                                               const std::vector<std::string>& allowed) {
  std::map<std::string, std::string> out;
  for (int i = start; i < argc; ++i) {
    const std::string flag = argv[i];
    bool known = false;
    for (const std::string& a : allowed) known = known || flag == a;
    if (!known) throw std::invalid_argument("unknown option '" + flag + "'");
    if (i + 1 >= argc) throw std::invalid_argument("option '" + flag + "' needs a value");
    if (out.count(flag)) throw std::invalid_argument("option '" + flag + "' given twice");
    out[flag] = argv[++i];
  }
  return out;
}

const std::string& require_flag(const std::map<std::string, std::string>& flags,
                                const std::string& name) {
  auto it = flags.find(name);
  if (it == flags.end()) throw std::invalid_argument("missing required option '" + name + "'");
  return it->second;
}

std::uint64_t parse_u64(const std::string& flag, const std::string& value) {
  std::size_t pos = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(value, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("option '" + flag + "': expected an unsigned integer");
  }
  if (pos != value.size()) {
    throw std::invalid_argument("option '" + flag + "': expected an unsigned integer");
  }
  return v;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("failed writing: " + path);
}

int cmd_gen_data(int argc, char** argv) {
  const auto flags = parse_flags(argc, argv, 2, {"--config", "--out", "--count", "--seed"});
  const RunConfig rc = load_run_config(require_flag(flags, "--config"));
  const std::string out_dir = require_flag(flags, "--out");
  const std::uint64_t count = parse_u64("--count", require_flag(flags, "--count"));
  const std::uint64_t seed =
      flags.count("--seed") ? parse_u64("--seed", flags.at("--seed")) : rc.train.seed;

  const Vocab vocab = rc.make_vocab_from_config();
  const std::string manifest = generate_dataset(rc.gen, vocab, seed, count, out_dir);
  std::cout << "wrote " << count << " samples to " << out_dir << " (" << manifest << ")\n";
  return 0;
}

int cmd_build_codebook(int argc, char** argv) {
  const auto flags = parse_flags(argc, argv, 2, {"--config", "--data", "--out", "--seed"});
  const RunConfig rc = load_run_config(require_flag(flags, "--config"));
  const std::string data_dir = require_flag(flags, "--data");
  const std::string out_path = require_flag(flags, "--out");
  const std::uint64_t seed =
      flags.count("--seed") ? parse_u64("--seed", flags.at("--seed")) : rc.train.seed;

  const Vocab vocab = rc.make_vocab_from_config();
  const Dataset ds = load_dataset(data_dir, vocab);
  const Codebook cb = build_dataset_codebook(ds, rc.model, rc.train.codebook_iters, seed);

  // persisted in the checkpoint container with no parameter records
  ModelParams empty;
  save_checkpoint(out_path, empty, cb, serialize_run_config(rc));
  std::cout << "codebook: k=" << cb.k << " dim=" << cb.dim << " -> " << out_path << "\n";
  return 0;
}

int cmd_train(int argc, char** argv) {
  const auto flags =
      parse_flags(argc, argv, 2, {"--config", "--train-dir", "--val-dir", "--out-dir"});
  RunConfig rc = load_run_config(require_flag(flags, "--config"));
  if (flags.count("--train-dir")) rc.train_dir = flags.at("--train-dir");
  if (flags.count("--val-dir")) rc.val_dir = flags.at("--val-dir");
  if (flags.count("--out-dir")) rc.out_dir = flags.at("--out-dir");
  if (rc.train_dir.empty()) throw std::invalid_argument("train_dir is not set");
  if (rc.val_dir.empty()) throw std::invalid_argument("val_dir is not set");
  if (rc.out_dir.empty()) throw std::invalid_argument("out_dir is not set");

  const Vocab vocab = rc.make_vocab_from_config();
  const Dataset train = load_dataset(rc.train_dir, vocab);
  const Dataset val = load_dataset(rc.val_dir, vocab);

  const TrainResult result = train_model(rc.model, vocab, train, val, rc.train);

  std::error_code ec;
  std::filesystem::create_directories(rc.out_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + rc.out_dir);
  const std::string ckpt_path = rc.out_dir + "/checkpoint.bin";
  const std::string log_path = rc.out_dir + "/train_log.csv";
  save_checkpoint(ckpt_path, result.params, result.codebook, serialize_run_config(rc));
  write_text_file(log_path, format_epoch_log(result.log));

  for (const EpochStats& e : result.log) {
    std::cout << "epoch " << e.epoch << ": train_loss=" << e.train_loss
              << " val_char_acc=" << e.val_char_acc << "\n";
  }
  std::cout << "checkpoint: " << ckpt_path << "\nlog: " << log_path << "\n";
  return 0;
}

// Restores the run config, vocabulary and parameters stored in a checkpoint.
struct LoadedModel {
  RunConfig rc;
  Vocab vocab;
  ModelParams params;
  Codebook codebook;
};

LoadedModel load_model(const std::string& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  LoadedModel lm;
  lm.rc = parse_run_config(ckpt.config_text);
  lm.vocab = lm.rc.make_vocab_from_config();
  lm.params = params_from_checkpoint(lm.rc.model, ckpt);
  lm.codebook = ckpt.codebook;
  return lm;
}

int cmd_eval(int argc, char** argv) {
  const auto flags = parse_flags(argc, argv, 2, {"--checkpoint", "--data"});
  const LoadedModel lm = load_model(require_flag(flags, "--checkpoint"));
  const Dataset ds = load_dataset(require_flag(flags, "--data"), lm.vocab);

  const MetricsReport rep = evaluate_model(lm.params, lm.codebook, lm.rc.model, lm.vocab, ds,
                                           lm.rc.train.ngram_mode);
  std::cout << "samples: " << rep.sample_count << "\n";
  std::cout << "char_accuracy: " << rep.char_acc << "\n";
  std::cout << "mean_edit_distance: " << rep.mean_edit_distance << "\n";
  std::cout << rep.histogram_csv();
  return 0;
}

int cmd_recognize(int argc, char** argv) {
  const auto flags = parse_flags(argc, argv, 2, {"--checkpoint", "--image"});
  const LoadedModel lm = load_model(require_flag(flags, "--checkpoint"));
  const Image img = read_ppm(require_flag(flags, "--image"));
  if (img.height != lm.rc.model.image_height || img.width != lm.rc.model.image_width) {
    throw std::runtime_error("image geometry does not match the trained model");
  }

  const PatchSequence seq = patchify(img, lm.rc.model.patch);
  NGramPlan plan;
  if (ngram_mode_is_fixed(lm.rc.train.ngram_mode)) {
    plan = build_fixed_plan(seq.patch_count(), ngram_mode_width(lm.rc.train.ngram_mode));
  } else {
    const DescriptorSet desc = extract_descriptors(seq, lm.rc.model.descriptor_split);
    plan = build_plan(desc, lm.codebook, lm.rc.model.n_range);
  }

  NoGradGuard guard;
  const DropoutCtx ctx;  // eval mode
  const ForwardOutputs fwd = model_forward(seq, plan, lm.params, lm.rc.model, ctx, true);
  const std::u32string text = decode(fwd.y, lm.vocab);

  // language posterior: softmax over the language logits
  std::vector<double> probs(fwd.lang.size());
  double max_logit = fwd.lang.value_at(0);
  for (std::size_t i = 1; i < probs.size(); ++i) {
    max_logit = std::max(max_logit, fwd.lang.value_at(i));
  }
  double z = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    probs[i] = std::exp(fwd.lang.value_at(i) - max_logit);
    z += probs[i];
  }
  for (double& p : probs) p /= z;

  std::cout << "text: " << utf8_encode(text) << "\n";
  for (std::size_t s = 0; s < probs.size(); ++s) {
    const std::string name = s < kScriptCount ? std::string(script_name(s))
                                              : "script" + std::to_string(s);
    std::cout << "lang " << name << ": " << probs[s] << "\n";
  }
  return 0;
}

int cmd_ablate(int argc, char** argv) {
  const auto flags = parse_flags(argc, argv, 2, {"--mode", "--config", "--seeds", "--out"});
  const std::string mode = require_flag(flags, "--mode");
  if (mode != "ngram" && mode != "clr") {
    throw std::invalid_argument("--mode must be 'ngram' or 'clr'");
  }
  const RunConfig rc = load_run_config(require_flag(flags, "--config"));
  if (rc.train_dir.empty() || rc.val_dir.empty()) {
    throw std::invalid_argument("ablation configs must set train_dir and val_dir");
  }

  std::vector<std::uint64_t> seeds;
  if (flags.count("--seeds")) {
    std::istringstream in(flags.at("--seeds"));
    std::string item;
    while (std::getline(in, item, ',')) seeds.push_back(parse_u64("--seeds", item));
  } else {
    seeds = {rc.train.seed, rc.train.seed + 1, rc.train.seed + 2};
  }

  const Vocab vocab = rc.make_vocab_from_config();
  const Dataset train = load_dataset(rc.train_dir, vocab);
  const Dataset val = load_dataset(rc.val_dir, vocab);

  const std::vector<AblationRow> rows =
      run_ablation(mode, rc.model, vocab, train, val, rc.train, seeds);
  const std::string csv = ablation_csv(rows);
  std::cout << csv;
  if (flags.count("--out")) write_text_file(flags.at("--out"), csv);
  return 0;
}

int cmd_grad_check(int argc, char** argv) {
  parse_flags(argc, argv, 2, {});
  const ModelGradCheckReport rep = run_model_grad_check();
  std::cout << "entries checked: " << rep.entries_checked << "\n";
  std::cout << "max relative error: " << rep.max_rel_error << " (parameter "
            << rep.worst_param << ", entry " << rep.worst_entry << ")\n";
  if (rep.max_rel_error < 1e-4) {
    std::cout << "gradients match finite differences\n";
    return 0;
  }
  std::cout << "gradient mismatch exceeds tolerance 1e-4\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << kUsage;
    return 1;
  }
  const std::string cmd = argv[1];
  try {
    if (cmd == "gen-data") return cmd_gen_data(argc, argv);
    if (cmd == "build-codebook") return cmd_build_codebook(argc, argv);
    if (cmd == "train") return cmd_train(argc, argv);
    if (cmd == "eval") return cmd_eval(argc, argv);
    if (cmd == "recognize") return cmd_recognize(argc, argv);
    if (cmd == "ablate") return cmd_ablate(argc, argv);
    if (cmd == "grad-check") return cmd_grad_check(argc, argv);
    if (cmd == "--help" || cmd == "help" || cmd == "-h") {
      std::cout << kUsage;
      return 0;
    }
    std::cerr << "unknown command '" << cmd << "'\n" << kUsage;
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n" << kUsage;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
