#pragma once

#include <vector>

#include "tanger/image.hpp"
#include "tanger/tensor.hpp"

namespace tanger {

// Non-overlapping m x m patches in row-major grid order.  A patch feature
// vector concatenates its raw RGB pixels row by row: pixel (r, c) channel ch
// lands at index (r * m + c) * 3 + ch, so reassembly is bit-exact.
struct PatchSequence {
  std::size_t grid_rows = 0;
  std::size_t grid_cols = 0;
  std::size_t patch_size = 0;           // m
  std::vector<double> features;         // patch_count() x feature_dim(), row-major

  std::size_t patch_count() const { return grid_rows * grid_cols; }
  std::size_t feature_dim() const { return 3 * patch_size * patch_size; }
  const double* patch(std::size_t i) const { return features.data() + i * feature_dim(); }
};

PatchSequence patchify(const Image& image, std::size_t m);

// Inverse of patchify; used to verify the layout contract.
Image reassemble(const PatchSequence& seq);

// Per-patch local descriptors: the patch is split into an s x s grid of
// (m/s) x (m/s) sub-blocks, each flattened in the same raw layout.  Patch i
// owns descriptors [i * s^2, (i + 1) * s^2), sub-blocks in row-major order.
struct DescriptorSet {
  std::size_t patch_count = 0;
  std::size_t per_patch = 0;            // s^2
  std::size_t dim = 0;                  // 3 * (m/s)^2
  std::vector<double> data;             // (patch_count * per_patch) x dim

  std::size_t count() const { return patch_count * per_patch; }
  const double* descriptor(std::size_t i) const { return data.data() + i * dim; }
};

DescriptorSet extract_descriptors(const PatchSequence& seq, std::size_t s);

// Linear patch embedding plus learned positions: tokens = X . W + pos, where
// X is the (untraced) patch feature matrix.
Tensor embed_primary(const PatchSequence& seq, const Tensor& weight, const Tensor& positions);

}  // namespace tanger
