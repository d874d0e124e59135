#include "tanger/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "tanger/rng.hpp"

namespace tanger {

namespace {

constexpr std::int64_t kQ = 16;           // fixed-point fractional bits
constexpr std::int64_t kOne = 1 << kQ;    // 1.0 in Q16
constexpr std::int64_t kHalf = 1 << (kQ - 1);

// arctan(2^-i) in millidegrees for the CORDIC sweep.
constexpr std::int64_t kAtanMdeg[] = {45000, 26565, 14036, 7125, 3576, 1790,
                                      895,   448,   224,   112,  56,   28,
                                      14,    7,     3,     2,    1};
// 1/K in Q16 where K is the CORDIC gain for this iteration count.
constexpr std::int64_t kGainInvQ16 = 39797;

struct LayoutChar {
  std::size_t glyph_index;  // index into Vocab::glyphs
  std::int64_t x;           // left edge in the unrotated frame
  std::int64_t y;           // top edge
  std::int64_t h;           // scaled height in pixels
  std::int64_t w;           // scaled width in pixels
};

struct Layout {
  std::vector<LayoutChar> chars;
  std::int64_t min_x = 0, max_x = 0;  // ink bounding box, inclusive-exclusive
  std::int64_t min_y = 0, max_y = 0;
};

std::int64_t scaled_extent(std::size_t cells, std::size_t glyph_cell,
                           std::uint32_t permille) {
  return (static_cast<std::int64_t>(cells) * glyph_cell * permille + 500) / 1000;
}

Layout layout_text(const Vocab& vocab, const GenConfig& cfg, const RenderSpec& spec) {
  if (spec.text.empty()) throw std::invalid_argument("cannot render empty text");
  if (spec.scale_permille.size() != spec.text.size()) {
    throw std::invalid_argument("one scale per character required");
  }
  const std::int64_t h = static_cast<std::int64_t>(cfg.height);
  const std::int64_t gap = static_cast<std::int64_t>(cfg.glyph_cell);

  Layout out;
  std::int64_t total_w = 0;
  std::int64_t max_h = 0;
  std::vector<std::int64_t> widths, heights;
  for (std::size_t i = 0; i < spec.text.size(); ++i) {
    const std::uint32_t s = spec.scale_permille[i];
    if (s < 700 || s > 1400) throw std::invalid_argument("character scale out of range");
    const std::int64_t gw = scaled_extent(kGlyphCols, cfg.glyph_cell, s);
    const std::int64_t gh = scaled_extent(kGlyphRows, cfg.glyph_cell, s);
    widths.push_back(gw);
    heights.push_back(gh);
    total_w += gw;
    if (i > 0) total_w += gap;
    max_h = std::max(max_h, gh);
  }

  // Fixed top-left anchor, glyph tops aligned: character k's slot depends
  // only on the widths of characters 0..k-1, never on the total line width
  // or height.  The h/8 margins absorb the worst swing of a +-15 degree
  // rotation about the box center ((h/2)*sin15 < h/8) for short boxes, so
  // minimum-length text always fits; longer rotated lines shorten normally.
  const std::int64_t anchor_y = gap + h / 8;
  std::int64_t x = gap + h / 8;
  out.min_x = x;
  out.max_x = x + total_w;
  out.min_y = anchor_y;
  out.max_y = anchor_y + max_h;
  for (std::size_t i = 0; i < spec.text.size(); ++i) {
    LayoutChar lc;
    lc.glyph_index = vocab.id_of(spec.text[i]) - 2;
    lc.x = x;
    lc.y = anchor_y;
    lc.h = heights[i];
    lc.w = widths[i];
    out.chars.push_back(lc);
    x += widths[i] + gap;
  }
  return out;
}

// Rotation pivot: the center of the ink bounding box (Q16).  Anchoring the
// pivot to the text itself keeps the glyph slots in place under rotation, so
// the fit test depends only on the box's own size, not on where it sits.
std::pair<std::int64_t, std::int64_t> box_pivot(const Layout& lay) {
  return {((lay.min_x + lay.max_x - 1) << kQ) / 2, ((lay.min_y + lay.max_y - 1) << kQ) / 2};
}

bool layout_fits(const Layout& lay, const GenConfig& cfg, std::int32_t rot_mdeg) {
  const std::int64_t w = static_cast<std::int64_t>(cfg.width);
  const std::int64_t h = static_cast<std::int64_t>(cfg.height);
  // forward-rotate the ink bounding box corners about the pivot and require a
  // one-pixel margin all around
  const auto [c, s] = fixed_cos_sin(rot_mdeg);
  const auto [cx, cy] = box_pivot(lay);
  const std::int64_t lo_x = 1 << kQ, hi_x = (w - 2) << kQ;
  const std::int64_t lo_y = 1 << kQ, hi_y = (h - 2) << kQ;
  const std::int64_t xs[2] = {lay.min_x << kQ, (lay.max_x - 1) << kQ};
  const std::int64_t ys[2] = {lay.min_y << kQ, (lay.max_y - 1) << kQ};
  for (std::int64_t px : xs) {
    for (std::int64_t py : ys) {
      const std::int64_t dx = px - cx;
      const std::int64_t dy = py - cy;
      const std::int64_t rx = cx + ((c * dx - s * dy) >> kQ);
      const std::int64_t ry = cy + ((s * dx + c * dy) >> kQ);
      if (rx < lo_x || rx > hi_x || ry < lo_y || ry > hi_y) return false;
    }
  }
  return true;
}

std::vector<std::uint8_t> rasterize_mask(const Vocab& vocab, const GenConfig& cfg,
                                         const Layout& lay) {
  std::vector<std::uint8_t> mask(cfg.height * cfg.width, 0);
  for (const LayoutChar& lc : lay.chars) {
    const Glyph& g = vocab.glyphs[lc.glyph_index];
    for (std::int64_t r = 0; r < lc.h; ++r) {
      const std::size_t src_r = static_cast<std::size_t>(r * kGlyphRows / lc.h);
      for (std::int64_t c = 0; c < lc.w; ++c) {
        const std::size_t src_c = static_cast<std::size_t>(c * kGlyphCols / lc.w);
        if (!g.at(src_r, src_c)) continue;
        const std::int64_t y = lc.y + r;
        const std::int64_t x = lc.x + c;
        if (y >= 0 && y < static_cast<std::int64_t>(cfg.height) && x >= 0 &&
            x < static_cast<std::int64_t>(cfg.width)) {
          mask[static_cast<std::size_t>(y) * cfg.width + static_cast<std::size_t>(x)] = 1;
        }
      }
    }
  }
  return mask;
}

}  // namespace

void GenConfig::validate() const {
  if (height < 8 || width < 8) throw std::invalid_argument("image must be at least 8x8");
  if (min_text_len < 1) throw std::invalid_argument("min_text_len must be >= 1");
  if (max_text_len < min_text_len) {
    throw std::invalid_argument("max_text_len must be >= min_text_len");
  }
  if (mixing_probability < 0.0 || mixing_probability > 1.0) {
    throw std::invalid_argument("mixing_probability must lie in [0, 1]");
  }
  if (noise_level < 0.0 || noise_level > 0.5) {
    throw std::invalid_argument("noise_level must lie in [0, 0.5]");
  }
  if (glyph_cell < 1 || glyph_cell > 8) {
    throw std::invalid_argument("glyph_cell must lie in [1, 8]");
  }
  if (scripts.empty()) throw std::invalid_argument("at least one script required");
  for (std::size_t i = 0; i < scripts.size(); ++i) {
    if (scripts[i] >= kScriptCount) throw std::invalid_argument("unknown script id");
    if (i > 0 && scripts[i] <= scripts[i - 1]) {
      throw std::invalid_argument("script list must be strictly increasing");
    }
  }
  if (mixing_probability > 0.0 && scripts.size() < 2) {
    throw std::invalid_argument("mixed samples need at least two scripts");
  }
}

std::pair<std::int64_t, std::int64_t> fixed_cos_sin(std::int32_t millideg) {
  if (millideg == 0) return {kOne, 0};
  const bool neg = millideg < 0;
  std::int64_t z = neg ? -static_cast<std::int64_t>(millideg) : millideg;
  if (z > 90000) throw std::invalid_argument("angle magnitude must be <= 90000 millidegrees");
  std::int64_t x = kGainInvQ16;
  std::int64_t y = 0;
  for (std::size_t i = 0; i < sizeof(kAtanMdeg) / sizeof(kAtanMdeg[0]); ++i) {
    const std::int64_t xs = x >> i;
    const std::int64_t ys = y >> i;
    if (z >= 0) {
      x -= ys;
      y += xs;
      z -= kAtanMdeg[i];
    } else {
      x += ys;
      y -= xs;
      z += kAtanMdeg[i];
    }
  }
  return {x, neg ? -y : y};
}

bool text_fits(const Vocab& vocab, const GenConfig& cfg, const RenderSpec& spec) {
  return layout_fits(layout_text(vocab, cfg, spec), cfg, spec.rotation_millideg);
}

Image render_text(const Vocab& vocab, const GenConfig& cfg, const RenderSpec& spec) {
  cfg.validate();
  const Layout lay = layout_text(vocab, cfg, spec);
  if (!layout_fits(lay, cfg, spec.rotation_millideg)) {
    throw std::runtime_error("text does not fit inside the frame at the requested geometry");
  }
  const std::vector<std::uint8_t> mask = rasterize_mask(vocab, cfg, lay);

  const std::int64_t w = static_cast<std::int64_t>(cfg.width);
  const std::int64_t h = static_cast<std::int64_t>(cfg.height);
  const auto [c, s] = fixed_cos_sin(spec.rotation_millideg);
  const auto [cx, cy] = box_pivot(lay);

  CounterRng noise(spec.noise_key);
  const std::int64_t amp = spec.noise_amplitude;

  Image img = Image::blank(cfg.height, cfg.width);
  for (std::int64_t oy = 0; oy < h; ++oy) {
    for (std::int64_t ox = 0; ox < w; ++ox) {
      const std::int64_t dx = (ox << kQ) - cx;
      const std::int64_t dy = (oy << kQ) - cy;
      // inverse mapping: rotate the output pixel back into mask space
      const std::int64_t sx = cx + ((c * dx + s * dy) >> kQ);
      const std::int64_t sy = cy + ((-s * dx + c * dy) >> kQ);
      const std::int64_t mx = (sx + kHalf) >> kQ;
      const std::int64_t my = (sy + kHalf) >> kQ;
      const bool ink = mx >= 0 && mx < w && my >= 0 && my < h &&
                       mask[static_cast<std::size_t>(my) * cfg.width +
                            static_cast<std::size_t>(mx)] != 0;
      const std::int64_t base = ink ? spec.ink : spec.background;
      const std::size_t pix = static_cast<std::size_t>(oy) * cfg.width +
                              static_cast<std::size_t>(ox);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        std::int64_t v = base;
        if (amp > 0) {
          const std::int64_t delta =
              static_cast<std::int64_t>(noise.below(pix * 3 + ch, 2 * amp + 1)) - amp;
          v = std::clamp<std::int64_t>(v + delta, 0, 255);
        }
        img.pixels[pix * 3 + ch] = static_cast<double>(v) / 255.0;
      }
    }
  }
  return img;
}

Sample render_sample(const GenConfig& cfg, const Vocab& vocab, std::uint64_t seed,
                     std::uint64_t index) {
  cfg.validate();
  SeqRng rng(hash_combine(hash_combine(seed, index), fnv1a64("sample")));

  const double mix_draw = rng.next_uniform();
  const bool mixed = cfg.scripts.size() >= 2 && mix_draw < cfg.mixing_probability;

  const std::size_t lo = std::max<std::size_t>(cfg.min_text_len, mixed ? 2 : 1);
  const std::size_t hi = std::max(lo, cfg.max_text_len);
  const std::size_t length = lo + rng.next_below(hi - lo + 1);

  std::vector<std::size_t> char_script(length);
  if (mixed) {
    const std::size_t a = rng.next_below(cfg.scripts.size());
    std::size_t b = rng.next_below(cfg.scripts.size() - 1);
    if (b >= a) ++b;
    char_script[0] = cfg.scripts[a];
    char_script[1] = cfg.scripts[b];
    for (std::size_t i = 2; i < length; ++i) {
      char_script[i] = cfg.scripts[rng.next_below(cfg.scripts.size())];
    }
  } else {
    const std::size_t s = cfg.scripts[rng.next_below(cfg.scripts.size())];
    for (std::size_t i = 0; i < length; ++i) char_script[i] = s;
  }

  RenderSpec spec;
  for (std::size_t i = 0; i < length; ++i) {
    const std::vector<char32_t> pool = vocab.chars_in_script(char_script[i]);
    if (pool.empty()) throw std::invalid_argument("enabled script missing from vocabulary");
    spec.text.push_back(pool[rng.next_below(pool.size())]);
    spec.scale_permille.push_back(static_cast<std::uint32_t>(700 + rng.next_below(701)));
  }
  spec.rotation_millideg = static_cast<std::int32_t>(rng.next_below(30001)) - 15000;
  spec.background = static_cast<std::uint8_t>(200 + rng.next_below(56));
  spec.ink = static_cast<std::uint8_t>(rng.next_below(71));
  const std::int64_t amp_max = std::llround(255.0 * cfg.noise_level);
  spec.noise_amplitude =
      static_cast<std::uint8_t>(rng.next_below(static_cast<std::uint64_t>(amp_max) + 1));
  spec.noise_key = hash_combine(hash_combine(seed, index), fnv1a64("noise"));

  // Shorten from the tail until the rotated text fits; mixed samples keep
  // their first two (distinct-script) characters.  A floor-length line that
  // still overflows (big glyphs at a steep angle) falls back to the minimum
  // scale before giving up.
  const std::size_t floor_len = mixed ? 2 : 1;
  while (!text_fits(vocab, cfg, spec) && spec.text.size() > floor_len) {
    spec.text.pop_back();
    spec.scale_permille.pop_back();
  }
  if (!text_fits(vocab, cfg, spec)) {
    std::fill(spec.scale_permille.begin(), spec.scale_permille.end(), 700u);
  }
  if (!text_fits(vocab, cfg, spec)) {
    throw std::runtime_error("sample generation failed: text cannot fit at index " +
                             std::to_string(index));
  }

  Sample out;
  out.image = render_text(vocab, cfg, spec);
  out.text = spec.text;
  out.language = script_distribution(spec.text, vocab, kScriptCount);
  out.scale_permille = spec.scale_permille;
  out.rotation_millideg = spec.rotation_millideg;
  return out;
}

std::string escape_field(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    switch (c) {
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\\': out += "\\\\"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string unescape_field(std::string_view escaped) {
  std::string out;
  out.reserve(escaped.size());
  for (std::size_t i = 0; i < escaped.size(); ++i) {
    if (escaped[i] != '\\') {
      out.push_back(escaped[i]);
      continue;
    }
    if (i + 1 >= escaped.size()) throw std::runtime_error("dangling escape in manifest field");
    const char n = escaped[++i];
    if (n == 't') out.push_back('\t');
    else if (n == 'n') out.push_back('\n');
    else if (n == '\\') out.push_back('\\');
    else throw std::runtime_error("unknown escape sequence in manifest field");
  }
  return out;
}

std::string generate_dataset(const GenConfig& cfg, const Vocab& vocab,
                             std::uint64_t seed, std::size_t count,
                             const std::string& dir) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create dataset directory " + dir + ": " + ec.message());

  std::ostringstream manifest;
  for (std::size_t i = 0; i < count; ++i) {
    const Sample sample = render_sample(cfg, vocab, seed, i);
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.ppm", i);
    write_ppm(dir + "/" + name, sample.image);

    manifest << name << '\t' << escape_field(utf8_encode(sample.text)) << '\t';
    bool first = true;
    for (std::size_t s = 0; s < sample.language.size(); ++s) {
      if (sample.language[s] <= 0.0) continue;
      if (!first) manifest << ',';
      first = false;
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.17g", sample.language[s]);
      manifest << script_name(s) << ':' << buf;
    }
    manifest << '\n';
  }

  const std::string path = dir + "/manifest.tsv";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open manifest for writing: " + path);
  const std::string text = manifest.str();
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("failed writing manifest: " + path);
  return path;
}

Dataset load_dataset(const std::string& dir, const Vocab& vocab) {
  const std::string path = dir + "/manifest.tsv";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);

  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "manifest line " + std::to_string(line_no);

    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    if (fields.size() != 3) {
      throw std::runtime_error(where + ": expected 3 tab-separated fields, got " +
                               std::to_string(fields.size()));
    }

    Sample sample;
    sample.text = utf8_decode(unescape_field(fields[1]));
    if (sample.text.empty()) throw std::runtime_error(where + ": empty text");
    for (char32_t c : sample.text) {
      if (!vocab.contains(c)) {
        throw std::runtime_error(where + ": text contains a character outside the vocabulary");
      }
    }

    std::vector<double> stored(kScriptCount, 0.0);
    std::size_t pos = 0;
    const std::string& spec = fields[2];
    while (pos < spec.size()) {
      const std::size_t comma = spec.find(',', pos);
      const std::string entry =
          spec.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      const std::size_t colon = entry.find(':');
      if (colon == std::string::npos) {
        throw std::runtime_error(where + ": malformed script weight entry");
      }
      std::size_t script;
      try {
        script = script_from_name(entry.substr(0, colon));
      } catch (const std::invalid_argument& e) {
        throw std::runtime_error(where + ": " + e.what());
      }
      try {
        stored[script] = std::stod(entry.substr(colon + 1));
      } catch (const std::exception&) {
        throw std::runtime_error(where + ": malformed script weight value");
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    sample.language = script_distribution(sample.text, vocab, kScriptCount);
    for (std::size_t s = 0; s < kScriptCount; ++s) {
      if (std::abs(sample.language[s] - stored[s]) > 1e-9) {
        throw std::runtime_error(where + ": stored language distribution disagrees with text");
      }
    }

    try {
      sample.image = read_ppm(dir + "/" + fields[0]);
    } catch (const std::exception& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
    if (ds.samples.empty()) {
      ds.height = sample.image.height;
      ds.width = sample.image.width;
    } else if (sample.image.height != ds.height || sample.image.width != ds.width) {
      throw std::runtime_error(where + ": image size differs from the rest of the dataset");
    }
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

}  // namespace tanger
