#pragma once

#include <map>
#include <string>

#include "tanger/model.hpp"
#include "tanger/tensor.hpp"
#include "tanger/visual_words.hpp"

namespace tanger {

// Binary container: magic "TNGR1", then records of
//   u32 name length, name bytes, u32 rank, u32 extents[rank],
//   u8 dtype tag (0 = f32, 1 = f64), raw little-endian values.
// Holds every model parameter, the codebook centroids, and the serialized
// run-config text under the reserved name "__config__" (stored as one f32
// value per byte so the record format stays uniform).

struct Checkpoint {
  std::map<std::string, Tensor> tensors;  // parameters + codebook.centroids
  std::string config_text;
  Codebook codebook;
};

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const Codebook& codebook, const std::string& config_text);

Checkpoint load_checkpoint(const std::string& path);  // throws runtime_error

// Rebuilds ModelParams from checkpoint tensors; every named parameter must be
// present with the exact shape the config implies.
ModelParams params_from_checkpoint(const ModelConfig& cfg, const Checkpoint& ckpt);

}  // namespace tanger
