#pragma once

#include <cstdint>
#include <vector>

#include "tanger/tensor.hpp"

namespace tanger {

// Differentiable primitive suite.  Shapes are validated per primitive; the
// only implicit broadcast anywhere is add_row_vector (a vector added along
// the last axis).  Binary operations require matching dtypes.

Tensor add(const Tensor& a, const Tensor& b);                       // same shape
Tensor add_row_vector(const Tensor& m, const Tensor& v);            // m: R x C, v: C
Tensor mul(const Tensor& a, const Tensor& b);                       // same shape
Tensor scale(const Tensor& a, double s);
Tensor matmul(const Tensor& a, const Tensor& b);                    // 2-D only
Tensor transpose(const Tensor& a);                                  // 2-D only
Tensor softmax(const Tensor& a, std::size_t axis);                  // rank 1 or 2
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-6);                               // rows of R x C
Tensor gelu(const Tensor& a);                                       // exact erf form
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor log(const Tensor& a);                                        // requires positive input
Tensor exp(const Tensor& a);
Tensor mean(const Tensor& a, std::size_t axis);                     // rank 2 -> rank 1
Tensor mean_all(const Tensor& a);                                   // -> shape {1}
Tensor sum_all(const Tensor& a);                                    // -> shape {1}
Tensor max_along(const Tensor& a, std::size_t axis);                // rank 2 -> rank 1, ties -> lowest index
Tensor max_pool1d(const Tensor& a, std::size_t window, std::size_t stride);  // over rows
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);  // rank 2
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t len);
Tensor reshape(const Tensor& a, std::vector<std::size_t> new_shape);
Tensor embedding_lookup(const Tensor& table, const std::vector<std::size_t>& ids);
Tensor dropout(const Tensor& a, double rate, std::uint64_t key, bool training);
// Soft-target cross entropy, averaged over rows.  Targets must be untraced
// and every row must sum to 1 within 1e-6.
Tensor cross_entropy(const Tensor& logits, const Tensor& targets);

}  // namespace tanger
