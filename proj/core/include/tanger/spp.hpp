#pragma once

#include <vector>

#include "tanger/patches.hpp"
#include "tanger/tensor.hpp"
#include "tanger/visual_words.hpp"

namespace tanger {

// Spatial pyramid pooling over a variable-size group of patch feature rows.
// For level l, bin j covers rows [floor(j*n/l), ceil((j+1)*n/l) - 1]; every
// bin is non-empty for any n >= 1.  Bins are max-pooled elementwise and
// concatenated in level order, so the output length is dim * sum(levels)
// independently of n.
std::vector<double> spp_pool(const double* group, std::size_t n, std::size_t dim,
                             const std::vector<std::size_t>& levels);

std::size_t spp_output_dim(std::size_t dim, const std::vector<std::size_t>& levels);

// Supplementary token embedding: each patch's n-gram group is pyramid-pooled
// to a fixed-length vector, then mapped by a learned projection plus its own
// position table.  The pooled matrix itself carries no gradient.
Tensor embed_supplementary(const NGramPlan& plan, const PatchSequence& seq, const Tensor& weight,
                           const Tensor& positions, const std::vector<std::size_t>& levels);

}  // namespace tanger
