#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tanger/model.hpp"
#include "tanger/tensor.hpp"
#include "tanger/vocab.hpp"

namespace tanger {

// Supervision targets for one sample: the character ids padded to maxlen
// (text, then the stop marker, then pad), and the per-script soft language
// distribution.
struct TargetEncoding {
  std::vector<std::size_t> ids;     // length maxlen
  std::size_t effective_length = 0; // chars + stop
  std::vector<double> language;     // language_count entries, sums to 1
};

TargetEncoding encode_target(const std::u32string& text, const Vocab& vocab,
                             std::size_t maxlen, std::size_t language_count);

// Per-script character-count distribution (proportional to counts).
std::vector<double> soft_language_target(const std::u32string& text, const Vocab& vocab,
                                         std::size_t language_count);

// Mean cross entropy of the first effective_length recognition rows against
// the one-hot target characters; pad positions are excluded.
Tensor loss_vision(const Tensor& y, const TargetEncoding& target);

// Soft cross entropy -sum_c t_c log softmax(logits)_c; target must sum to 1.
Tensor loss_language_class(const Tensor& logits, const std::vector<double>& soft_target);

// -mean log score over the first effective_length positions; every consumed
// score must lie strictly inside (0, 1).
Tensor loss_coherence(const Tensor& scores, std::size_t effective_length);

// loss_v + alpha * (l_class + l_score); all inputs must be finite scalars.
Tensor loss_total(const Tensor& loss_v, const Tensor& l_class, const Tensor& l_score,
                  double alpha);

// Convenience bundle used by the trainer: assembles the weighted total from a
// forward pass (the auxiliary terms are only computed when the pass ran the
// pyramid branch).
struct LossBreakdown {
  Tensor total;
  double vision = 0.0;
  double language = 0.0;
  double coherence = 0.0;
};
LossBreakdown compute_losses(const ForwardOutputs& fwd, const TargetEncoding& target,
                             double alpha);

}  // namespace tanger
