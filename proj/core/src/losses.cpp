#include "tanger/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "tanger/ops.hpp"

namespace tanger {

std::vector<double> soft_language_target(const std::u32string& text, const Vocab& vocab,
                                         std::size_t language_count) {
  return script_distribution(text, vocab, language_count);
}

TargetEncoding encode_target(const std::u32string& text, const Vocab& vocab,
                             std::size_t maxlen, std::size_t language_count) {
  if (text.empty()) throw std::invalid_argument("target text must be non-empty");
  if (text.size() > maxlen - 1) {
    throw std::invalid_argument("target text longer than maxlen - 1");
  }
  TargetEncoding enc;
  enc.ids.assign(maxlen, Vocab::kPadId);
  for (std::size_t i = 0; i < text.size(); ++i) enc.ids[i] = vocab.id_of(text[i]);
  enc.ids[text.size()] = Vocab::kStopId;
  enc.effective_length = text.size() + 1;
  enc.language = soft_language_target(text, vocab, language_count);
  return enc;
}

Tensor loss_vision(const Tensor& y, const TargetEncoding& target) {
  if (y.shape().size() != 2) throw std::invalid_argument("recognition logits must be 2-D");
  const std::size_t maxlen = y.shape()[0];
  const std::size_t vocab = y.shape()[1];
  if (target.ids.size() != maxlen) {
    throw std::invalid_argument("target length does not match the logit rows");
  }
  const std::size_t eff = target.effective_length;
  if (eff == 0 || eff > maxlen) throw std::invalid_argument("bad effective length");

  std::vector<double> one_hot(eff * vocab, 0.0);
  for (std::size_t i = 0; i < eff; ++i) {
    if (target.ids[i] >= vocab) throw std::invalid_argument("target id out of vocabulary");
    one_hot[i * vocab + target.ids[i]] = 1.0;
  }
  Tensor supervised = slice(y, 0, 0, eff);
  return cross_entropy(supervised, Tensor::from_data({eff, vocab}, std::move(one_hot)));
}

Tensor loss_language_class(const Tensor& logits, const std::vector<double>& soft_target) {
  if (logits.shape().size() != 1) throw std::invalid_argument("language logits must be rank 1");
  const std::size_t n = logits.shape()[0];
  if (soft_target.size() != n) {
    throw std::invalid_argument("soft target length does not match the logits");
  }
  double sum = 0.0;
  for (double t : soft_target) {
    if (t < 0.0) throw std::invalid_argument("soft target entries must be >= 0");
    sum += t;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw std::invalid_argument("soft target must sum to 1");
  }
  Tensor row = reshape(logits, {1, n});
  return cross_entropy(row, Tensor::from_data({1, n}, std::vector<double>(soft_target)));
}

Tensor loss_coherence(const Tensor& scores, std::size_t effective_length) {
  if (scores.shape().size() != 2 || scores.shape()[1] != 1) {
    throw std::invalid_argument("coherence scores must be maxlen x 1");
  }
  if (effective_length == 0 || effective_length > scores.shape()[0]) {
    throw std::invalid_argument("effective length out of range");
  }
  for (std::size_t i = 0; i < effective_length; ++i) {
    const double s = scores.value_at(i);
    if (!(s > 0.0 && s < 1.0)) {
      throw std::runtime_error("coherence score outside (0, 1) at position " +
                               std::to_string(i));
    }
  }
  Tensor used = slice(scores, 0, 0, effective_length);
  return scale(mean_all(log(used)), -1.0);
}

Tensor loss_total(const Tensor& loss_v, const Tensor& l_class, const Tensor& l_score,
                  double alpha) {
  if (loss_v.size() != 1 || l_class.size() != 1 || l_score.size() != 1) {
    throw std::invalid_argument("loss terms must be scalars");
  }
  if (!std::isfinite(loss_v.item()) || !std::isfinite(l_class.item()) ||
      !std::isfinite(l_score.item()) || !std::isfinite(alpha)) {
    throw std::runtime_error("non-finite loss term");
  }
  return add(loss_v, scale(add(l_class, l_score), alpha));
}

LossBreakdown compute_losses(const ForwardOutputs& fwd, const TargetEncoding& target,
                             double alpha) {
  LossBreakdown out;
  Tensor lv = loss_vision(fwd.y, target);
  out.vision = lv.item();
  if (!fwd.has_clr) {
    if (!std::isfinite(out.vision)) throw std::runtime_error("non-finite vision loss");
    out.total = lv;
    return out;
  }
  Tensor lc = loss_language_class(fwd.lang, target.language);
  Tensor ls = loss_coherence(fwd.coherence, target.effective_length);
  out.language = lc.item();
  out.coherence = ls.item();
  out.total = loss_total(lv, lc, ls, alpha);
  return out;
}

}  // namespace tanger
