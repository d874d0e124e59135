#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "tanger/metrics.hpp"
#include "tanger/tensor.hpp"
#include "tanger/vocab.hpp"

using namespace tanger;

namespace {

// Logits whose per-row argmax follows the given id sequence.
Tensor logits_for(const std::vector<std::size_t>& ids, std::size_t vocab_size) {
  std::vector<double> v(ids.size() * vocab_size, 0.0);
  for (std::size_t i = 0; i < ids.size(); ++i) v[i * vocab_size + ids[i]] = 5.0;
  return Tensor::from_data({ids.size(), vocab_size}, std::move(v));
}

}  // namespace

TEST_CASE("greedy decoding truncates at the stop marker and skips pad") {
  const Vocab v = make_vocab();
  const std::size_t a = v.id_of(U'a');
  const std::size_t b = v.id_of(U'b');

  CHECK(decode(logits_for({a, b, Vocab::kStopId, a}, v.size()), v) == U"ab");
  CHECK(decode(logits_for({Vocab::kStopId, a}, v.size()), v) == U"");
  CHECK(decode(logits_for({a, Vocab::kPadId, b, Vocab::kStopId}, v.size()), v) == U"ab");
  CHECK(decode(logits_for({a, b}, v.size()), v) == U"ab");  // no stop emitted

  // exact ties resolve to the lowest id: id 0 is pad, so a tie row is skipped
  const Tensor tie = Tensor::zeros({2, v.size()});
  CHECK(decode(tie, v) == U"");
  CHECK_THROWS_AS(decode(Tensor::zeros({4}), v), std::invalid_argument);
}

TEST_CASE("edit distance satisfies the classic textbook example and axioms") {
  CHECK(edit_distance(U"kitten", U"sitting") == 3);
  CHECK(edit_distance(U"", U"") == 0);
  CHECK(edit_distance(U"abc", U"abc") == 0);
  CHECK(edit_distance(U"abc", U"") == 3);
  CHECK(edit_distance(U"", U"abc") == 3);
  CHECK(edit_distance(U"abc", U"axc") == 1);
  CHECK(edit_distance(U"ab", U"ba") == 2);

  // symmetry and triangle inequality on a few fixed triples
  const std::u32string xs[] = {U"abc", U"", U"aabbcc", U"cab", U"abcabc"};
  for (const auto& x : xs) {
    for (const auto& y : xs) {
      CHECK(edit_distance(x, y) == edit_distance(y, x));
      for (const auto& z : xs) {
        CHECK(edit_distance(x, z) <= edit_distance(x, y) + edit_distance(y, z));
      }
    }
  }
}

TEST_CASE("character accuracy is one minus the normalized edit distance, clamped") {
  using P = std::pair<std::u32string, std::u32string>;
  CHECK(char_accuracy({P{U"abc", U"abc"}}) == 1.0);
  CHECK(char_accuracy({P{U"abd", U"abc"}}) == doctest::Approx(2.0 / 3.0));
  CHECK(char_accuracy({P{U"xxxxxxxxxx", U"ab"}}) == 0.0);  // clamped at zero
  CHECK(char_accuracy({P{U"ab", U"ab"}, P{U"x", U"xy"}}) == doctest::Approx(3.0 / 4.0));
  CHECK_THROWS_AS(char_accuracy({}), std::invalid_argument);
  CHECK_THROWS_AS(char_accuracy({P{U"a", U""}}), std::invalid_argument);
}

TEST_CASE("metric reports bucket every sample under its dominant script") {
  using P = std::pair<std::u32string, std::u32string>;
  std::vector<P> pairs = {
      {U"abc", U"abc"},   // distance 0
      {U"ab", U"ax"},     // distance 1
      {U"", U"0123456789012"},  // distance 13 -> the 10+ bucket
  };
  std::vector<std::vector<double>> langs = {
      {1.0, 0.0, 0.0},
      {0.4, 0.4, 0.2},  // tie -> lower script id (latin)
      {0.1, 0.8, 0.1},
  };
  const MetricsReport rep = compute_metrics(pairs, langs);
  CHECK(rep.sample_count == 3);
  CHECK(rep.mean_edit_distance == doctest::Approx(14.0 / 3.0));
  CHECK(rep.histogram[kScriptLatin][0] == 1);
  CHECK(rep.histogram[kScriptLatin][1] == 1);
  CHECK(rep.histogram[kScriptDigits][kHistogramBuckets - 1] == 1);

  std::size_t total = 0;
  for (const auto& row : rep.histogram) {
    for (std::size_t c : row) total += c;
  }
  CHECK(total == pairs.size());

  const std::string csv = rep.histogram_csv();
  CHECK(csv.rfind("script,distance_bucket,frequency\n", 0) == 0);
  CHECK(csv.find("latin,0,1") != std::string::npos);
  CHECK(csv.find("digits,10+,1") != std::string::npos);

  CHECK_THROWS_AS(compute_metrics(pairs, {{1.0, 0.0, 0.0}}), std::invalid_argument);
  CHECK_THROWS_AS(compute_metrics({pairs[0]}, {{1.0, 0.0}}), std::invalid_argument);
}
