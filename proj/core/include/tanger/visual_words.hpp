#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tanger/patches.hpp"

namespace tanger {

// Bag-of-visual-words codebook over local descriptors, trained with Lloyd's
// algorithm from a greedy farthest-point seeding.
struct Codebook {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<double> centroids;        // k x dim, row-major
  std::uint64_t training_hash = 0;      // digest of the descriptors used (0 if restored)
  std::vector<double> inertia_history;  // within-cluster sum of squares after each assignment

  const double* centroid(std::size_t i) const { return centroids.data() + i * dim; }
};

Codebook build_codebook(std::span<const double> descriptors, std::size_t count, std::size_t dim,
                        std::size_t k, std::size_t max_iters, std::uint64_t seed);
Codebook build_codebook(const DescriptorSet& pool, std::size_t k, std::size_t max_iters,
                        std::uint64_t seed);

// Index of the nearest centroid under squared Euclidean distance; ties go to
// the lowest index.
std::size_t assign_word(std::span<const double> descriptor, const Codebook& codebook);

// Word-frequency histogram over the descriptors of patches
// [i - n + 1, i] (inclusive, 0-based).
struct Histogram {
  std::vector<std::size_t> counts;  // length k
  std::size_t total = 0;
};

Histogram word_histogram(std::size_t i, std::size_t n, const DescriptorSet& descriptors,
                         const Codebook& codebook);

// Peak share of the histogram: max_k count_k / total.  Lies in [1/k, 1] and
// equals 1 exactly when every descriptor in the group maps to one word.
double ngram_probability(std::size_t i, std::size_t n, const DescriptorSet& descriptors,
                         const Codebook& codebook);

// Adaptive group-size choice for patch i: the feasible n (n <= i + 1) from
// n_range with the highest ngram_probability; ties prefer the smallest n.
// Patch 0 always gets 1; if no candidate is feasible the result is 1.
std::size_t select_n(std::size_t i, const DescriptorSet& descriptors, const Codebook& codebook,
                     const std::vector<std::size_t>& n_range);

// Per-patch group sizes; patch i pools patches [i - n[i] + 1, i].
struct NGramPlan {
  std::vector<std::size_t> n;

  std::size_t group_start(std::size_t i) const { return i + 1 - n[i]; }
  void validate(std::size_t patch_count, std::size_t max_n) const;
};

NGramPlan build_plan(const DescriptorSet& descriptors, const Codebook& codebook,
                     const std::vector<std::size_t>& n_range);
// Fixed-size variant bypassing the adaptive rule: n_i = min(fixed_n, i + 1).
NGramPlan build_fixed_plan(std::size_t patch_count, std::size_t fixed_n);

}  // namespace tanger
