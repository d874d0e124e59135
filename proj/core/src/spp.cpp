#include "tanger/spp.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "tanger/ops.hpp"

namespace tanger {

namespace {

void check_levels(const std::vector<std::size_t>& levels) {
  if (levels.empty()) throw std::invalid_argument("spp_pool: no pyramid levels");
  for (std::size_t l : levels) {
    if (l == 0) throw std::invalid_argument("spp_pool: level sizes must be positive");
    if (l > 8) {
      throw std::invalid_argument("spp_pool: level size " + std::to_string(l) +
                                  " exceeds the supported maximum of 8");
    }
  }
}

}  // namespace

std::size_t spp_output_dim(std::size_t dim, const std::vector<std::size_t>& levels) {
  std::size_t total = 0;
  for (std::size_t l : levels) total += l;
  return dim * total;
}

std::vector<double> spp_pool(const double* group, std::size_t n, std::size_t dim,
                             const std::vector<std::size_t>& levels) {
  check_levels(levels);
  if (n == 0) throw std::invalid_argument("spp_pool: empty group");
  if (dim == 0) throw std::invalid_argument("spp_pool: zero feature dimension");

  std::vector<double> out;
  out.reserve(spp_output_dim(dim, levels));
  for (std::size_t l : levels) {
    for (std::size_t j = 0; j < l; ++j) {
      const std::size_t start = (j * n) / l;
      const std::size_t end = ((j + 1) * n + l - 1) / l;  // ceil, always > start
      const std::size_t base = out.size();
      out.insert(out.end(), group + start * dim, group + (start + 1) * dim);
      for (std::size_t r = start + 1; r < end; ++r) {
        const double* row = group + r * dim;
        for (std::size_t c = 0; c < dim; ++c) {
          out[base + c] = std::max(out[base + c], row[c]);
        }
      }
    }
  }
  return out;
}

Tensor embed_supplementary(const NGramPlan& plan, const PatchSequence& seq, const Tensor& weight,
                           const Tensor& positions, const std::vector<std::size_t>& levels) {
  const std::size_t p = seq.patch_count();
  const std::size_t dim = seq.feature_dim();
  if (plan.n.size() != p) {
    throw std::invalid_argument("embed_supplementary: plan covers " +
                                std::to_string(plan.n.size()) + " patches, sequence has " +
                                std::to_string(p));
  }
  plan.validate(p, p);
  const std::size_t pooled_dim = spp_output_dim(dim, levels);
  if (!weight.defined() || weight.rank() != 2 || weight.shape()[0] != pooled_dim) {
    throw std::invalid_argument("embed_supplementary: weight must have " +
                                std::to_string(pooled_dim) + " input rows");
  }
  if (!positions.defined() || positions.rank() != 2 ||
      positions.shape()[1] != weight.shape()[1] || positions.shape()[0] < p) {
    throw std::invalid_argument("embed_supplementary: position table too small");
  }

  std::vector<double> pooled(p * pooled_dim);
  for (std::size_t i = 0; i < p; ++i) {
    const std::size_t start = plan.group_start(i);
    const std::vector<double> row = spp_pool(seq.patch(start), plan.n[i], dim, levels);
    std::copy(row.begin(), row.end(), pooled.begin() + i * pooled_dim);
  }
  Tensor x = Tensor::from_data({p, pooled_dim}, std::move(pooled), weight.dtype());
  Tensor pos = positions.shape()[0] == p ? positions : slice(positions, 0, 0, p);
  return add(matmul(x, weight), pos);
}

}  // namespace tanger
