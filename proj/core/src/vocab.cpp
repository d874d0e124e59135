#include "tanger/vocab.hpp"

#include <algorithm>
#include <stdexcept>

#include "tanger/rng.hpp"

namespace tanger {

namespace {

// Embedded 7x5 bitmap font for a-z and 0-9.  '#' = ink.
struct FontEntry {
  char32_t cp;
  const char* rows[kGlyphRows];
};

constexpr FontEntry kFont[] = {
    {U'a', {".....", ".....", ".###.", "....#", ".####", "#...#", ".####"}},
    {U'b', {"#....", "#....", "#.##.", "##..#", "#...#", "##..#", "#.##."}},
    {U'c', {".....", ".....", ".###.", "#....", "#....", "#...#", ".###."}},
    {U'd', {"....#", "....#", ".##.#", "#..##", "#...#", "#..##", ".##.#"}},
    {U'e', {".....", ".....", ".###.", "#...#", "#####", "#....", ".###."}},
    {U'f', {"..##.", ".#..#", ".#...", "###..", ".#...", ".#...", ".#..."}},
    {U'g', {".....", ".####", "#...#", "#...#", ".####", "....#", ".###."}},
    {U'h', {"#....", "#....", "#.##.", "##..#", "#...#", "#...#", "#...#"}},
    {U'i', {"..#..", ".....", ".##..", "..#..", "..#..", "..#..", ".###."}},
    {U'j', {"...#.", ".....", "..##.", "...#.", "...#.", "#..#.", ".##.."}},
    {U'k', {"#....", "#....", "#..#.", "#.#..", "##...", "#.#..", "#..#."}},
    {U'l', {".##..", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."}},
    {U'm', {".....", ".....", "##.#.", "#.#.#", "#.#.#", "#.#.#", "#.#.#"}},
    {U'n', {".....", ".....", "#.##.", "##..#", "#...#", "#...#", "#...#"}},
    {U'o', {".....", ".....", ".###.", "#...#", "#...#", "#...#", ".###."}},
    {U'p', {".....", ".....", "####.", "#...#", "####.", "#....", "#...."}},
    {U'q', {".....", ".....", ".####", "#...#", ".####", "....#", "....#"}},
    {U'r', {".....", ".....", "#.##.", "##..#", "#....", "#....", "#...."}},
    {U's', {".....", ".....", ".####", "#....", ".###.", "....#", "####."}},
    {U't', {".#...", ".#...", "####.", ".#...", ".#...", ".#..#", "..##."}},
    {U'u', {".....", ".....", "#...#", "#...#", "#...#", "#..##", ".##.#"}},
    {U'v', {".....", ".....", "#...#", "#...#", "#...#", ".#.#.", "..#.."}},
    {U'w', {".....", ".....", "#...#", "#.#.#", "#.#.#", "#.#.#", ".#.#."}},
    {U'x', {".....", ".....", "#...#", ".#.#.", "..#..", ".#.#.", "#...#"}},
    {U'y', {".....", ".....", "#...#", "#...#", ".####", "....#", ".###."}},
    {U'z', {".....", ".....", "#####", "...#.", "..#..", ".#...", "#####"}},
    {U'0', {".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."}},
    {U'1', {"..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."}},
    {U'2', {".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"}},
    {U'3', {"#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."}},
    {U'4', {"...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."}},
    {U'5', {"#####", "#....", "####.", "....#", "....#", "#...#", ".###."}},
    {U'6', {"..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."}},
    {U'7', {"#####", "....#", "...#.", "..#..", "..#..", "..#..", "..#.."}},
    {U'8', {".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."}},
    {U'9', {".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."}},
};

Glyph parse_glyph(const FontEntry& e) {
  Glyph g;
  for (std::size_t r = 0; r < kGlyphRows; ++r) {
    for (std::size_t c = 0; c < kGlyphCols; ++c) {
      g.cells[r * kGlyphCols + c] = (e.rows[r][c] == '#') ? 1 : 0;
    }
  }
  return g;
}

Glyph synth_glyph(std::uint64_t synth_seed, char32_t cp) {
  // Rejection sampling keyed by (seed, codepoint, attempt): roughly 40% ink
  // density, accepted once the glyph has >= 8 lit cells and is left-right
  // asymmetric so orientation carries signal.
  const std::uint64_t base =
      hash_combine(hash_combine(synth_seed, static_cast<std::uint64_t>(cp)),
                   fnv1a64("synth-glyph"));
  for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
    CounterRng rng(hash_combine(base, attempt));
    Glyph g;
    for (std::size_t i = 0; i < g.cells.size(); ++i) {
      g.cells[i] = rng.below(i, 5) < 2 ? 1 : 0;
    }
    if (g.lit_count() >= 8 && g.left_right_asymmetric()) return g;
  }
  throw std::runtime_error("synth glyph generation failed to converge");
}

}  // namespace

std::size_t Glyph::lit_count() const {
  std::size_t n = 0;
  for (std::uint8_t c : cells) n += c;
  return n;
}

bool Glyph::left_right_asymmetric() const {
  for (std::size_t r = 0; r < kGlyphRows; ++r) {
    for (std::size_t c = 0; c < kGlyphCols; ++c) {
      if (at(r, c) != at(r, kGlyphCols - 1 - c)) return true;
    }
  }
  return false;
}

std::string_view script_name(std::size_t script) {
  switch (script) {
    case kScriptLatin: return "latin";
    case kScriptDigits: return "digits";
    case kScriptSynth: return "synth";
    default: throw std::invalid_argument("unknown script id");
  }
}

std::size_t script_from_name(std::string_view name) {
  if (name == "latin") return kScriptLatin;
  if (name == "digits") return kScriptDigits;
  if (name == "synth") return kScriptSynth;
  throw std::invalid_argument("unknown script name: " + std::string(name));
}

std::size_t Vocab::id_of(char32_t c) const {
  auto it = ids.find(c);
  if (it == ids.end()) {
    throw std::invalid_argument("character U+" + std::to_string(static_cast<std::uint32_t>(c)) +
                                " is not in the vocabulary");
  }
  return it->second;
}

char32_t Vocab::char_at(std::size_t id) const {
  if (id < 2 || id - 2 >= chars.size()) {
    throw std::invalid_argument("token id " + std::to_string(id) +
                                " does not name a character");
  }
  return chars[id - 2];
}

std::size_t Vocab::script_of(char32_t c) const { return scripts[id_of(c) - 2]; }

const Glyph& Vocab::glyph_of(char32_t c) const { return glyphs[id_of(c) - 2]; }

std::vector<char32_t> Vocab::chars_in_script(std::size_t script) const {
  std::vector<char32_t> out;
  for (std::size_t i = 0; i < chars.size(); ++i) {
    if (scripts[i] == script) out.push_back(chars[i]);
  }
  return out;
}

Vocab make_vocab(const std::vector<std::size_t>& enabled_scripts,
                 std::uint64_t synth_seed) {
  if (enabled_scripts.empty()) {
    throw std::invalid_argument("at least one script must be enabled");
  }
  for (std::size_t i = 0; i < enabled_scripts.size(); ++i) {
    if (enabled_scripts[i] >= kScriptCount) {
      throw std::invalid_argument("unknown script id in script list");
    }
    if (i > 0 && enabled_scripts[i] <= enabled_scripts[i - 1]) {
      throw std::invalid_argument("script list must be strictly increasing");
    }
  }

  Vocab v;
  v.synth_seed = synth_seed;
  auto add_char = [&v](char32_t cp, std::size_t script, const Glyph& g) {
    v.ids.emplace(cp, v.chars.size() + 2);
    v.chars.push_back(cp);
    v.scripts.push_back(script);
    v.glyphs.push_back(g);
  };
  for (std::size_t script : enabled_scripts) {
    if (script == kScriptLatin) {
      for (std::size_t i = 0; i < 26; ++i) add_char(kFont[i].cp, script, parse_glyph(kFont[i]));
    } else if (script == kScriptDigits) {
      for (std::size_t i = 26; i < 36; ++i) add_char(kFont[i].cp, script, parse_glyph(kFont[i]));
    } else {
      for (char32_t cp = U'■'; cp <= U'▿'; ++cp) {
        add_char(cp, script, synth_glyph(synth_seed, cp));
      }
    }
  }
  return v;
}

Vocab make_vocab(std::uint64_t synth_seed) {
  return make_vocab({kScriptLatin, kScriptDigits, kScriptSynth}, synth_seed);
}

std::vector<double> script_distribution(const std::u32string& text, const Vocab& vocab,
                                        std::size_t language_count) {
  if (text.empty()) throw std::invalid_argument("cannot derive a script distribution from empty text");
  if (language_count < kScriptCount) {
    throw std::invalid_argument("language_count must cover all scripts");
  }
  std::vector<double> dist(language_count, 0.0);
  for (char32_t c : text) dist[vocab.script_of(c)] += 1.0;
  for (double& d : dist) d /= static_cast<double>(text.size());
  return dist;
}

std::string utf8_encode(const std::u32string& text) {
  std::string out;
  for (char32_t cp : text) {
    const std::uint32_t c = static_cast<std::uint32_t>(cp);
    if (c < 0x80) {
      out.push_back(static_cast<char>(c));
    } else if (c < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (c >> 6)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else if (c < 0x10000) {
      if (c >= 0xD800 && c <= 0xDFFF) throw std::invalid_argument("surrogate codepoint");
      out.push_back(static_cast<char>(0xE0 | (c >> 12)));
      out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else if (c < 0x110000) {
      out.push_back(static_cast<char>(0xF0 | (c >> 18)));
      out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else {
      throw std::invalid_argument("codepoint out of range");
    }
  }
  return out;
}

std::u32string utf8_decode(std::string_view bytes) {
  std::u32string out;
  std::size_t i = 0;
  while (i < bytes.size()) {
    const std::uint32_t b0 = static_cast<std::uint8_t>(bytes[i]);
    std::size_t extra;
    std::uint32_t cp;
    std::uint32_t min_cp;
    if (b0 < 0x80) {
      extra = 0;
      cp = b0;
      min_cp = 0;
    } else if ((b0 & 0xE0) == 0xC0) {
      extra = 1;
      cp = b0 & 0x1F;
      min_cp = 0x80;
    } else if ((b0 & 0xF0) == 0xE0) {
      extra = 2;
      cp = b0 & 0x0F;
      min_cp = 0x800;
    } else if ((b0 & 0xF8) == 0xF0) {
      extra = 3;
      cp = b0 & 0x07;
      min_cp = 0x10000;
    } else {
      throw std::invalid_argument("malformed UTF-8 lead byte");
    }
    if (i + extra >= bytes.size()) throw std::invalid_argument("truncated UTF-8 sequence");
    for (std::size_t k = 1; k <= extra; ++k) {
      const std::uint32_t bk = static_cast<std::uint8_t>(bytes[i + k]);
      if ((bk & 0xC0) != 0x80) throw std::invalid_argument("malformed UTF-8 continuation");
      cp = (cp << 6) | (bk & 0x3F);
    }
    if (cp < min_cp) throw std::invalid_argument("overlong UTF-8 sequence");
    if (cp >= 0x110000 || (cp >= 0xD800 && cp <= 0xDFFF)) {
      throw std::invalid_argument("invalid codepoint");
    }
    out.push_back(static_cast<char32_t>(cp));
    i += extra + 1;
  }
  return out;
}

}  // namespace tanger
