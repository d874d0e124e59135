#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tanger/image.hpp"
#include "tanger/vocab.hpp"

namespace tanger {

// Generator settings for the synthetic multilingual text corpus.
struct GenConfig {
  std::size_t height = 32;
  std::size_t width = 128;
  std::size_t min_text_len = 1;
  std::size_t max_text_len = 15;
  double mixing_probability = 0.5;  // chance a sample mixes >= 2 scripts
  double noise_level = 0.1;         // per-sample noise amplitude upper bound
  std::size_t glyph_cell = 2;       // base pixel size of one glyph cell
  std::vector<std::size_t> scripts = {kScriptLatin, kScriptDigits, kScriptSynth};
  std::uint64_t synth_seed = 7;     // seed for the generated script's glyphs

  void validate() const;  // throws std::invalid_argument
};

// Fully resolved drawing instructions for one image.
struct RenderSpec {
  std::u32string text;
  std::vector<std::uint32_t> scale_permille;  // per character, 700..1400
  std::int32_t rotation_millideg = 0;         // -15000..15000
  std::uint8_t background = 255;              // 8-bit gray background
  std::uint8_t ink = 0;                       // 8-bit gray ink
  std::uint8_t noise_amplitude = 0;           // max |delta| in 8-bit units
  std::uint64_t noise_key = 0;                // key for the noise stream
};

struct Sample {
  Image image;
  std::u32string text;
  std::vector<double> language;               // per-script weight, sums to 1
  std::vector<std::uint32_t> scale_permille;  // render metadata
  std::int32_t rotation_millideg = 0;
};

// Q16 (cos, sin) of an angle given in millidegrees, computed with integer
// CORDIC so results are bit-identical on every platform.  Angle 0 returns
// exactly (65536, 0).
std::pair<std::int64_t, std::int64_t> fixed_cos_sin(std::int32_t millideg);

// True when the rotated bounding box of the laid-out text stays inside the
// frame with a one-pixel margin.
bool text_fits(const Vocab& vocab, const GenConfig& cfg, const RenderSpec& spec);

// Integer-only rasterizer: nearest-neighbor glyph scaling, fixed-point
// inverse-mapped rotation about the text's own center, uniform additive noise.
// Throws std::runtime_error when the text does not fit.
Image render_text(const Vocab& vocab, const GenConfig& cfg, const RenderSpec& spec);

// Draws every sample attribute from (seed, index) and renders it, shortening
// the text deterministically when it cannot fit.  Pure function of its
// arguments.
Sample render_sample(const GenConfig& cfg, const Vocab& vocab, std::uint64_t seed,
                     std::uint64_t index);

// Manifest field escaping: backslash escapes for tab, newline and backslash.
std::string escape_field(std::string_view raw);
std::string unescape_field(std::string_view escaped);  // throws on bad escape

struct Dataset {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Sample> samples;
};

// Writes `count` samples as zero-padded-index PPM files plus manifest.tsv
// into dir (created if absent); returns the manifest path.
std::string generate_dataset(const GenConfig& cfg, const Vocab& vocab,
                             std::uint64_t seed, std::size_t count,
                             const std::string& dir);

// Loads a generated dataset back; validates manifest structure, image sizes,
// vocabulary membership and the stored language distribution.
Dataset load_dataset(const std::string& dir, const Vocab& vocab);

}  // namespace tanger
