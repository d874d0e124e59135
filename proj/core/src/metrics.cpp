#include "tanger/metrics.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace tanger {

std::u32string decode(const Tensor& y, const Vocab& vocab) {
  if (y.shape().size() != 2) throw std::invalid_argument("recognition logits must be 2-D");
  const std::size_t rows = y.shape()[0];
  const std::size_t cols = y.shape()[1];
  std::u32string out;
  for (std::size_t i = 0; i < rows; ++i) {
    std::size_t best = 0;
    double best_v = y.value_at(i * cols);
    for (std::size_t j = 1; j < cols; ++j) {
      const double v = y.value_at(i * cols + j);
      if (v > best_v) {
        best_v = v;
        best = j;
      }
    }
    if (best == Vocab::kStopId) break;
    if (best != Vocab::kPadId) out.push_back(vocab.char_at(best));
  }
  return out;
}

std::size_t edit_distance(const std::u32string& a, const std::u32string& b) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double char_accuracy(const std::vector<std::pair<std::u32string, std::u32string>>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("char_accuracy needs at least one pair");
  std::size_t total_dist = 0;
  std::size_t total_len = 0;
  for (const auto& [pred, gt] : pairs) {
    if (gt.empty()) throw std::invalid_argument("ground-truth text must be non-empty");
    total_dist += edit_distance(pred, gt);
    total_len += gt.size();
  }
  const double acc = 1.0 - static_cast<double>(total_dist) / static_cast<double>(total_len);
  return std::max(0.0, acc);
}

std::string MetricsReport::histogram_csv() const {
  std::ostringstream out;
  out << "script,distance_bucket,frequency\n";
  for (std::size_t s = 0; s < kScriptCount; ++s) {
    for (std::size_t b = 0; b < kHistogramBuckets; ++b) {
      out << script_name(s) << ',' << (b + 1 == kHistogramBuckets ? "10+" : std::to_string(b))
          << ',' << histogram[s][b] << '\n';
    }
  }
  return out.str();
}

MetricsReport compute_metrics(
    const std::vector<std::pair<std::u32string, std::u32string>>& pairs,
    const std::vector<std::vector<double>>& languages) {
  if (pairs.size() != languages.size()) {
    throw std::invalid_argument("one language distribution per pair required");
  }
  MetricsReport rep;
  rep.char_acc = char_accuracy(pairs);
  rep.sample_count = pairs.size();
  std::size_t total = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::size_t d = edit_distance(pairs[i].first, pairs[i].second);
    total += d;
    const std::vector<double>& lang = languages[i];
    if (lang.size() < kScriptCount) {
      throw std::invalid_argument("language distribution must cover every script");
    }
    std::size_t dominant = 0;
    for (std::size_t s = 1; s < kScriptCount; ++s) {
      if (lang[s] > lang[dominant]) dominant = s;
    }
    rep.histogram[dominant][std::min<std::size_t>(d, kHistogramBuckets - 1)]++;
  }
  rep.mean_edit_distance = static_cast<double>(total) / static_cast<double>(pairs.size());
  return rep;
}

}  // namespace tanger
