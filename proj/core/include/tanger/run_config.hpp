#pragma once

#include <string>

#include "tanger/model.hpp"
#include "tanger/render.hpp"
#include "tanger/trainer.hpp"
#include "tanger/vocab.hpp"

namespace tanger {

// Declarative run settings: flat `key = value` text, '#' comments, strict
// unknown-key rejection.  The model's vocab_size is derived from the enabled
// scripts rather than stored.
struct RunConfig {
  ModelConfig model;
  GenConfig gen;
  TrainOptions train;
  std::string train_dir;
  std::string val_dir;
  std::string out_dir;

  Vocab make_vocab_from_config() const;
  void validate() const;  // cross-field checks; throws std::invalid_argument
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);  // missing file -> invalid_argument
std::string serialize_run_config(const RunConfig& rc);  // canonical key order

}  // namespace tanger
