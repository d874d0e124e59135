#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "tanger/tensor.hpp"
#include "tanger/vocab.hpp"

namespace tanger {

// Greedy readout of recognition logits: per-position argmax (ties -> lowest
// id), truncated at the first stop marker; pad ids never reach the output.
std::u32string decode(const Tensor& y, const Vocab& vocab);

// Levenshtein distance with unit costs.
std::size_t edit_distance(const std::u32string& a, const std::u32string& b);

// max(0, 1 - sum(edit distances) / sum(ground-truth lengths)).
// Every ground truth must be non-empty.
double char_accuracy(const std::vector<std::pair<std::u32string, std::u32string>>& pairs);

inline constexpr std::size_t kHistogramBuckets = 11;  // 0..9 and >= 10

struct MetricsReport {
  double char_acc = 0.0;
  double mean_edit_distance = 0.0;
  std::size_t sample_count = 0;
  // histogram[script][bucket]; each sample is counted under its dominant
  // script (highest language weight, ties -> lower script id).
  std::array<std::array<std::size_t, kHistogramBuckets>, kScriptCount> histogram{};

  std::string histogram_csv() const;  // "script,distance_bucket,frequency"
};

// pred/gt pairs plus each sample's language distribution (for the per-script
// split).
MetricsReport compute_metrics(
    const std::vector<std::pair<std::u32string, std::u32string>>& pairs,
    const std::vector<std::vector<double>>& languages);

}  // namespace tanger
