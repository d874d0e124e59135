#include "tanger/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace tanger {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return s.substr(a, b - a);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': expected an unsigned integer, got '" +
                                value + "'");
  }
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  return static_cast<std::size_t>(parse_u64(key, value));
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': expected a number, got '" + value +
                                "'");
  }
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    const std::size_t comma = value.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(trim(value.substr(start)));
      break;
    }
    out.push_back(trim(value.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  for (const std::string& item : split_list(value)) out.push_back(parse_size(key, item));
  return out;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Vocab RunConfig::make_vocab_from_config() const {
  return make_vocab(gen.scripts, gen.synth_seed);
}

void RunConfig::validate() const {
  gen.validate();
  if (gen.height != model.image_height || gen.width != model.image_width) {
    throw std::invalid_argument("generator and model image geometry must agree");
  }
  if (gen.max_text_len > model.maxlen - 1) {
    throw std::invalid_argument("gen_max_len must be <= maxlen - 1");
  }
  ModelConfig checked = model;
  checked.vocab_size = make_vocab_from_config().size();
  checked.validate();
  if (train.batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  if (train.codebook_iters == 0) throw std::invalid_argument("codebook_iters must be >= 1");
  if (!(train.lr > 0.0)) throw std::invalid_argument("lr must be positive");
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig rc;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
    }
    if (!seen.insert(key).second) {
      throw std::invalid_argument("duplicate config key '" + key + "'");
    }

    if (key == "embed_dim") rc.model.embed_dim = parse_size(key, value);
    else if (key == "depth") rc.model.depth = parse_size(key, value);
    else if (key == "heads") rc.model.heads = parse_size(key, value);
    else if (key == "mlp_ratio") rc.model.mlp_ratio = parse_double(key, value);
    else if (key == "maxlen") rc.model.maxlen = parse_size(key, value);
    else if (key == "language_count") rc.model.language_count = parse_size(key, value);
    else if (key == "dropout") rc.model.dropout = parse_double(key, value);
    else if (key == "n_range") rc.model.n_range = parse_size_list(key, value);
    else if (key == "spp_levels") rc.model.spp_levels = parse_size_list(key, value);
    else if (key == "codebook_k") rc.model.codebook_k = parse_size(key, value);
    else if (key == "patch") rc.model.patch = parse_size(key, value);
    else if (key == "descriptor_split") rc.model.descriptor_split = parse_size(key, value);
    else if (key == "image_height") {
      rc.model.image_height = parse_size(key, value);
      rc.gen.height = rc.model.image_height;
    } else if (key == "image_width") {
      rc.model.image_width = parse_size(key, value);
      rc.gen.width = rc.model.image_width;
    } else if (key == "alpha") rc.model.alpha = parse_double(key, value);
    else if (key == "gen_min_len") rc.gen.min_text_len = parse_size(key, value);
    else if (key == "gen_max_len") rc.gen.max_text_len = parse_size(key, value);
    else if (key == "gen_mixing") rc.gen.mixing_probability = parse_double(key, value);
    else if (key == "gen_noise") rc.gen.noise_level = parse_double(key, value);
    else if (key == "gen_glyph_cell") rc.gen.glyph_cell = parse_size(key, value);
    else if (key == "gen_synth_seed") rc.gen.synth_seed = parse_u64(key, value);
    else if (key == "gen_scripts") {
      rc.gen.scripts.clear();
      for (const std::string& name : split_list(value)) {
        rc.gen.scripts.push_back(script_from_name(name));
      }
    } else if (key == "epochs") rc.train.epochs = parse_size(key, value);
    else if (key == "batch_size") rc.train.batch_size = parse_size(key, value);
    else if (key == "lr") rc.train.lr = parse_double(key, value);
    else if (key == "seed") rc.train.seed = parse_u64(key, value);
    else if (key == "codebook_iters") rc.train.codebook_iters = parse_size(key, value);
    else if (key == "ngram_mode") rc.train.ngram_mode = ngram_mode_from_name(value);
    else if (key == "train_dir") rc.train_dir = value;
    else if (key == "val_dir") rc.val_dir = value;
    else if (key == "out_dir") rc.out_dir = value;
    else throw std::invalid_argument("unknown config key '" + key + "'");
  }
  rc.model.vocab_size = rc.make_vocab_from_config().size();
  rc.validate();
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::string serialize_run_config(const RunConfig& rc) {
  std::ostringstream out;
  out << "embed_dim = " << rc.model.embed_dim << '\n';
  out << "depth = " << rc.model.depth << '\n';
  out << "heads = " << rc.model.heads << '\n';
  out << "mlp_ratio = " << format_double(rc.model.mlp_ratio) << '\n';
  out << "maxlen = " << rc.model.maxlen << '\n';
  out << "language_count = " << rc.model.language_count << '\n';
  out << "dropout = " << format_double(rc.model.dropout) << '\n';
  out << "n_range = " << join_sizes(rc.model.n_range) << '\n';
  out << "spp_levels = " << join_sizes(rc.model.spp_levels) << '\n';
  out << "codebook_k = " << rc.model.codebook_k << '\n';
  out << "patch = " << rc.model.patch << '\n';
  out << "descriptor_split = " << rc.model.descriptor_split << '\n';
  out << "image_height = " << rc.model.image_height << '\n';
  out << "image_width = " << rc.model.image_width << '\n';
  out << "alpha = " << format_double(rc.model.alpha) << '\n';
  out << "gen_min_len = " << rc.gen.min_text_len << '\n';
  out << "gen_max_len = " << rc.gen.max_text_len << '\n';
  out << "gen_mixing = " << format_double(rc.gen.mixing_probability) << '\n';
  out << "gen_noise = " << format_double(rc.gen.noise_level) << '\n';
  out << "gen_glyph_cell = " << rc.gen.glyph_cell << '\n';
  out << "gen_synth_seed = " << rc.gen.synth_seed << '\n';
  out << "gen_scripts = ";
  for (std::size_t i = 0; i < rc.gen.scripts.size(); ++i) {
    if (i) out << ',';
    out << script_name(rc.gen.scripts[i]);
  }
  out << '\n';
  out << "epochs = " << rc.train.epochs << '\n';
  out << "batch_size = " << rc.train.batch_size << '\n';
  out << "lr = " << format_double(rc.train.lr) << '\n';
  out << "seed = " << rc.train.seed << '\n';
  out << "codebook_iters = " << rc.train.codebook_iters << '\n';
  out << "ngram_mode = " << ngram_mode_name(rc.train.ngram_mode) << '\n';
  out << "train_dir = " << rc.train_dir << '\n';
  out << "val_dir = " << rc.val_dir << '\n';
  out << "out_dir = " << rc.out_dir << '\n';
  return out.str();
}

}  // namespace tanger
