#include "tanger/patches.hpp"

#include <stdexcept>
#include <string>

#include "tanger/ops.hpp"

namespace tanger {

PatchSequence patchify(const Image& image, std::size_t m) {
  image.validate();
  if (m < 2) {
    throw std::invalid_argument("patchify: patch size must be at least 2, got " +
                                std::to_string(m));
  }
  if (image.height % m != 0 || image.width % m != 0) {
    throw std::invalid_argument("patchify: image " + std::to_string(image.height) + "x" +
                                std::to_string(image.width) + " is not divisible by patch size " +
                                std::to_string(m));
  }
  PatchSequence seq;
  seq.grid_rows = image.height / m;
  seq.grid_cols = image.width / m;
  seq.patch_size = m;
  seq.features.resize(seq.patch_count() * seq.feature_dim());
  const std::size_t dim = seq.feature_dim();
  for (std::size_t pr = 0; pr < seq.grid_rows; ++pr) {
    for (std::size_t pc = 0; pc < seq.grid_cols; ++pc) {
      double* dst = seq.features.data() + (pr * seq.grid_cols + pc) * dim;
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < m; ++c) {
          for (std::size_t ch = 0; ch < 3; ++ch) {
            dst[(r * m + c) * 3 + ch] = image.at(pr * m + r, pc * m + c, ch);
          }
        }
      }
    }
  }
  return seq;
}

Image reassemble(const PatchSequence& seq) {
  const std::size_t m = seq.patch_size;
  Image img = Image::blank(seq.grid_rows * m, seq.grid_cols * m);
  const std::size_t dim = seq.feature_dim();
  for (std::size_t pr = 0; pr < seq.grid_rows; ++pr) {
    for (std::size_t pc = 0; pc < seq.grid_cols; ++pc) {
      const double* src = seq.features.data() + (pr * seq.grid_cols + pc) * dim;
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < m; ++c) {
          for (std::size_t ch = 0; ch < 3; ++ch) {
            img.at(pr * m + r, pc * m + c, ch) = src[(r * m + c) * 3 + ch];
          }
        }
      }
    }
  }
  return img;
}

DescriptorSet extract_descriptors(const PatchSequence& seq, std::size_t s) {
  if (s == 0) throw std::invalid_argument("extract_descriptors: grid must be positive");
  const std::size_t m = seq.patch_size;
  if (m % s != 0) {
    throw std::invalid_argument("extract_descriptors: grid " + std::to_string(s) +
                                " does not divide patch size " + std::to_string(m));
  }
  const std::size_t b = m / s;  // sub-block side
  DescriptorSet ds;
  ds.patch_count = seq.patch_count();
  ds.per_patch = s * s;
  ds.dim = 3 * b * b;
  ds.data.resize(ds.count() * ds.dim);
  for (std::size_t p = 0; p < ds.patch_count; ++p) {
    const double* patch = seq.patch(p);
    for (std::size_t qr = 0; qr < s; ++qr) {
      for (std::size_t qc = 0; qc < s; ++qc) {
        double* dst = ds.data.data() + ((p * ds.per_patch) + qr * s + qc) * ds.dim;
        for (std::size_t r = 0; r < b; ++r) {
          for (std::size_t c = 0; c < b; ++c) {
            const std::size_t pr = qr * b + r, pc = qc * b + c;
            for (std::size_t ch = 0; ch < 3; ++ch) {
              dst[(r * b + c) * 3 + ch] = patch[(pr * m + pc) * 3 + ch];
            }
          }
        }
      }
    }
  }
  return ds;
}

Tensor embed_primary(const PatchSequence& seq, const Tensor& weight, const Tensor& positions) {
  if (!weight.defined() || !positions.defined()) {
    throw std::invalid_argument("embed_primary: undefined parameters");
  }
  if (weight.rank() != 2 || weight.shape()[0] != seq.feature_dim()) {
    throw std::invalid_argument("embed_primary: weight shape " +
                                shape_to_string(weight.shape()) +
                                " does not match patch feature dimension " +
                                std::to_string(seq.feature_dim()));
  }
  const std::size_t p = seq.patch_count();
  if (positions.rank() != 2 || positions.shape()[1] != weight.shape()[1] ||
      positions.shape()[0] < p) {
    throw std::invalid_argument("embed_primary: position table " +
                                shape_to_string(positions.shape()) + " too small for " +
                                std::to_string(p) + " patches");
  }
  Tensor x = Tensor::from_data({p, seq.feature_dim()}, seq.features, weight.dtype());
  Tensor pos = positions.shape()[0] == p ? positions : slice(positions, 0, 0, p);
  return add(matmul(x, weight), pos);
}

}  // namespace tanger
