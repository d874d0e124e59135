#include "tanger/visual_words.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

#include "tanger/rng.hpp"

namespace tanger {

namespace {

double sq_dist(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

Codebook build_codebook(std::span<const double> descriptors, std::size_t count, std::size_t dim,
                        std::size_t k, std::size_t max_iters, std::uint64_t seed) {
  if (dim == 0) throw std::invalid_argument("build_codebook: descriptor dimension is zero");
  if (descriptors.size() != count * dim) {
    throw std::invalid_argument("build_codebook: descriptor buffer size does not match count");
  }
  if (k < 2) throw std::invalid_argument("build_codebook: need at least 2 words");
  if (count < k) {
    throw std::invalid_argument("build_codebook: pool of " + std::to_string(count) +
                                " descriptors is smaller than k = " + std::to_string(k));
  }
  if (max_iters == 0) throw std::invalid_argument("build_codebook: need at least one iteration");

  auto desc = [&](std::size_t i) { return descriptors.data() + i * dim; };

  Codebook cb;
  cb.k = k;
  cb.dim = dim;
  cb.centroids.resize(k * dim);
  cb.training_hash = fnv1a64_bytes(descriptors.data(), descriptors.size() * sizeof(double));

  // Greedy farthest-point seeding: random first pick, then repeatedly take
  // the descriptor farthest from the chosen set (ties -> lowest index).
  const CounterRng rng(hash_combine(seed, fnv1a64("codebook.init")));
  const std::size_t first = static_cast<std::size_t>(rng.below(0, count));
  std::copy_n(desc(first), dim, cb.centroids.begin());
  std::vector<double> nearest(count);
  for (std::size_t i = 0; i < count; ++i) nearest[i] = sq_dist(desc(i), cb.centroid(0), dim);
  for (std::size_t j = 1; j < k; ++j) {
    std::size_t far = 0;
    for (std::size_t i = 1; i < count; ++i) {
      if (nearest[i] > nearest[far]) far = i;
    }
    if (nearest[far] == 0.0) {
      throw std::runtime_error(
          "build_codebook: degenerate pool, fewer distinct descriptors than words");
    }
    std::copy_n(desc(far), dim, cb.centroids.begin() + j * dim);
    for (std::size_t i = 0; i < count; ++i) {
      nearest[i] = std::min(nearest[i], sq_dist(desc(i), cb.centroid(j), dim));
    }
  }

  std::vector<std::size_t> assign(count, k);
  std::vector<double> dist(count, 0.0);
  std::vector<double> sums(k * dim);
  std::vector<std::size_t> sizes(k);

  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    // assignment step (ties -> lowest centroid index)
    bool changed = false;
    double wcss = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      std::size_t best = 0;
      double bd = sq_dist(desc(i), cb.centroid(0), dim);
      for (std::size_t j = 1; j < k; ++j) {
        const double d = sq_dist(desc(i), cb.centroid(j), dim);
        if (d < bd) {
          bd = d;
          best = j;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
      dist[i] = bd;
      wcss += bd;
    }
    cb.inertia_history.push_back(wcss);
    if (!changed && iter > 0) break;

    // update step: centroids move to the means of their members
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t i = 0; i < count; ++i) {
      const double* d = desc(i);
      double* s = sums.data() + assign[i] * dim;
      for (std::size_t c = 0; c < dim; ++c) s[c] += d[c];
      ++sizes[assign[i]];
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (sizes[j] == 0) continue;
      const double inv = 1.0 / static_cast<double>(sizes[j]);
      for (std::size_t c = 0; c < dim; ++c) cb.centroids[j * dim + c] = sums[j * dim + c] * inv;
    }
    // empty clusters are re-seeded to the descriptor farthest from its
    // assigned centroid (each descriptor used at most once)
    for (std::size_t j = 0; j < k; ++j) {
      if (sizes[j] != 0) continue;
      std::size_t far = 0;
      for (std::size_t i = 1; i < count; ++i) {
        if (dist[i] > dist[far]) far = i;
      }
      std::copy_n(desc(far), dim, cb.centroids.begin() + j * dim);
      dist[far] = -1.0;
    }
  }
  return cb;
}

Codebook build_codebook(const DescriptorSet& pool, std::size_t k, std::size_t max_iters,
                        std::uint64_t seed) {
  return build_codebook(std::span<const double>(pool.data.data(), pool.data.size()),
                        pool.count(), pool.dim, k, max_iters, seed);
}

std::size_t assign_word(std::span<const double> descriptor, const Codebook& codebook) {
  if (codebook.k == 0) throw std::invalid_argument("assign_word: empty codebook");
  if (descriptor.size() != codebook.dim) {
    throw std::invalid_argument("assign_word: descriptor dimension " +
                                std::to_string(descriptor.size()) + " does not match codebook " +
                                std::to_string(codebook.dim));
  }
  std::size_t best = 0;
  double bd = sq_dist(descriptor.data(), codebook.centroid(0), codebook.dim);
  for (std::size_t j = 1; j < codebook.k; ++j) {
    const double d = sq_dist(descriptor.data(), codebook.centroid(j), codebook.dim);
    if (d < bd) {
      bd = d;
      best = j;
    }
  }
  return best;
}

Histogram word_histogram(std::size_t i, std::size_t n, const DescriptorSet& descriptors,
                         const Codebook& codebook) {
  if (n == 0) throw std::invalid_argument("word_histogram: group size must be positive");
  if (i >= descriptors.patch_count) {
    throw std::invalid_argument("word_histogram: patch index " + std::to_string(i) +
                                " out of range");
  }
  if (n > i + 1) {
    throw std::invalid_argument("word_histogram: group of " + std::to_string(n) +
                                " needs more predecessors than patch " + std::to_string(i) +
                                " has");
  }
  if (descriptors.dim != codebook.dim) {
    throw std::invalid_argument("word_histogram: descriptor/codebook dimension mismatch");
  }
  Histogram h;
  h.counts.assign(codebook.k, 0);
  const std::size_t start = (i + 1 - n) * descriptors.per_patch;
  const std::size_t end = (i + 1) * descriptors.per_patch;
  for (std::size_t d = start; d < end; ++d) {
    ++h.counts[assign_word({descriptors.descriptor(d), descriptors.dim}, codebook)];
  }
  h.total = end - start;
  return h;
}

double ngram_probability(std::size_t i, std::size_t n, const DescriptorSet& descriptors,
                         const Codebook& codebook) {
  const Histogram h = word_histogram(i, n, descriptors, codebook);
  std::size_t peak = 0;
  for (std::size_t c : h.counts) peak = std::max(peak, c);
  return static_cast<double>(peak) / static_cast<double>(h.total);
}

namespace {

// Shared core for select_n/build_plan: probabilities computed from
// precomputed word assignments, identical arithmetic to ngram_probability.
std::size_t select_from_assignments(std::size_t i, const std::vector<std::size_t>& words,
                                    std::size_t per_patch, std::size_t k,
                                    const std::vector<std::size_t>& n_range,
                                    std::vector<std::size_t>& scratch) {
  std::size_t best_n = 1;
  double best_p = -1.0;
  for (std::size_t n : n_range) {
    if (n > i + 1) continue;
    scratch.assign(k, 0);
    std::size_t peak = 0;
    const std::size_t start = (i + 1 - n) * per_patch;
    const std::size_t end = (i + 1) * per_patch;
    for (std::size_t d = start; d < end; ++d) peak = std::max(peak, ++scratch[words[d]]);
    const double p = static_cast<double>(peak) / static_cast<double>(end - start);
    if (p > best_p) {  // strict: ties keep the smallest n
      best_p = p;
      best_n = n;
    }
  }
  return best_p < 0.0 ? 1 : best_n;
}

void check_n_range(const std::vector<std::size_t>& n_range) {
  if (n_range.empty()) throw std::invalid_argument("select_n: empty candidate range");
  for (std::size_t j = 0; j < n_range.size(); ++j) {
    if (n_range[j] == 0) throw std::invalid_argument("select_n: candidate n must be positive");
    if (j > 0 && n_range[j] <= n_range[j - 1]) {
      throw std::invalid_argument("select_n: candidate range must be strictly increasing");
    }
  }
}

}  // namespace

std::size_t select_n(std::size_t i, const DescriptorSet& descriptors, const Codebook& codebook,
                     const std::vector<std::size_t>& n_range) {
  check_n_range(n_range);
  if (i >= descriptors.patch_count) {
    throw std::invalid_argument("select_n: patch index out of range");
  }
  if (i == 0) return 1;
  std::size_t best_n = 1;
  double best_p = -1.0;
  for (std::size_t n : n_range) {
    if (n > i + 1) continue;
    const double p = ngram_probability(i, n, descriptors, codebook);
    if (p > best_p) {
      best_p = p;
      best_n = n;
    }
  }
  return best_p < 0.0 ? 1 : best_n;
}

void NGramPlan::validate(std::size_t patch_count, std::size_t max_n) const {
  if (n.size() != patch_count) {
    throw std::invalid_argument("NGramPlan: plan covers " + std::to_string(n.size()) +
                                " patches, expected " + std::to_string(patch_count));
  }
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (n[i] == 0 || n[i] > i + 1 || n[i] > max_n) {
      throw std::invalid_argument("NGramPlan: invalid group size " + std::to_string(n[i]) +
                                  " at patch " + std::to_string(i));
    }
  }
  if (!n.empty() && n[0] != 1) {
    throw std::invalid_argument("NGramPlan: first patch must have group size 1");
  }
}

NGramPlan build_plan(const DescriptorSet& descriptors, const Codebook& codebook,
                     const std::vector<std::size_t>& n_range) {
  check_n_range(n_range);
  if (descriptors.patch_count == 0) {
    throw std::invalid_argument("build_plan: empty descriptor set");
  }
  if (descriptors.dim != codebook.dim) {
    throw std::invalid_argument("build_plan: descriptor/codebook dimension mismatch");
  }
  // one nearest-word assignment per descriptor, reused by every candidate n
  std::vector<std::size_t> words(descriptors.count());
  for (std::size_t d = 0; d < words.size(); ++d) {
    words[d] = assign_word({descriptors.descriptor(d), descriptors.dim}, codebook);
  }
  NGramPlan plan;
  plan.n.resize(descriptors.patch_count);
  plan.n[0] = 1;
  std::vector<std::size_t> scratch;
  for (std::size_t i = 1; i < descriptors.patch_count; ++i) {
    plan.n[i] =
        select_from_assignments(i, words, descriptors.per_patch, codebook.k, n_range, scratch);
  }
  return plan;
}

NGramPlan build_fixed_plan(std::size_t patch_count, std::size_t fixed_n) {
  if (patch_count == 0) throw std::invalid_argument("build_fixed_plan: no patches");
  if (fixed_n == 0) throw std::invalid_argument("build_fixed_plan: group size must be positive");
  NGramPlan plan;
  plan.n.resize(patch_count);
  for (std::size_t i = 0; i < patch_count; ++i) plan.n[i] = std::min(fixed_n, i + 1);
  return plan;
}

}  // namespace tanger
