#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tanger {

// Glyphs are 7x5 binary bitmaps, row-major, 1 = ink.
inline constexpr std::size_t kGlyphRows = 7;
inline constexpr std::size_t kGlyphCols = 5;

struct Glyph {
  std::array<std::uint8_t, kGlyphRows * kGlyphCols> cells{};

  std::uint8_t at(std::size_t row, std::size_t col) const {
    return cells[row * kGlyphCols + col];
  }
  std::size_t lit_count() const;
  bool left_right_asymmetric() const;
};

// Script ids are fixed: 0 = latin (a-z), 1 = digits (0-9), 2 = synth
// (32 generated box glyphs at U+25A0..U+25BF).
inline constexpr std::size_t kScriptLatin = 0;
inline constexpr std::size_t kScriptDigits = 1;
inline constexpr std::size_t kScriptSynth = 2;
inline constexpr std::size_t kScriptCount = 3;

std::string_view script_name(std::size_t script);
std::size_t script_from_name(std::string_view name);  // throws invalid_argument

// Token id layout: 0 = pad, 1 = stop marker, characters from 2 upward in a
// fixed order (latin a..z, digits 0..9, then the 32 synth codepoints).
struct Vocab {
  static constexpr std::size_t kPadId = 0;
  static constexpr std::size_t kStopId = 1;

  std::vector<char32_t> chars;                    // index = id - 2
  std::vector<std::size_t> scripts;               // script of chars[i]
  std::vector<Glyph> glyphs;                      // glyph of chars[i]
  std::unordered_map<char32_t, std::size_t> ids;  // char -> token id
  std::uint64_t synth_seed = 0;

  std::size_t size() const { return chars.size() + 2; }
  bool contains(char32_t c) const { return ids.count(c) != 0; }
  std::size_t id_of(char32_t c) const;             // throws on unknown char
  char32_t char_at(std::size_t id) const;          // throws for pad/stop/range
  std::size_t script_of(char32_t c) const;         // throws on unknown char
  const Glyph& glyph_of(char32_t c) const;         // throws on unknown char
  std::vector<char32_t> chars_in_script(std::size_t script) const;
};

// Builds the vocabulary for the given scripts (ids must be a non-empty,
// strictly increasing subset of {0,1,2}).  The synth glyphs are derived from
// synth_seed alone; latin/digit glyphs come from the embedded table.
Vocab make_vocab(const std::vector<std::size_t>& enabled_scripts,
                 std::uint64_t synth_seed);
Vocab make_vocab(std::uint64_t synth_seed = 7);  // all three scripts

// Per-script character-count distribution of a text, normalized to sum 1,
// padded/truncated to language_count entries (language_count >= 3 required
// when a synth char occurs, etc.).  Empty text or unknown char -> error.
std::vector<double> script_distribution(const std::u32string& text,
                                        const Vocab& vocab,
                                        std::size_t language_count);

// Minimal UTF-8 codec for manifest round trips.  decode throws on malformed
// or overlong sequences.
std::string utf8_encode(const std::u32string& text);
std::u32string utf8_decode(std::string_view bytes);

}  // namespace tanger
