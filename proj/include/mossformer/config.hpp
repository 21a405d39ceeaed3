// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

// Model and training configuration, and the flat key=value text format both
// are read from (config files, --set overrides, checkpoint headers).

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mossformer/mossformer_block.hpp"

namespace mossformer {

struct ModelConfig {
  std::string preset = "tiny";
  std::size_t R = 1;       // MossFormer blocks
  std::size_t N = 16;      // encoder output dimension
  std::size_t K1 = 8;      // encoder kernel
  std::size_t stride = 4;  // encoder stride, K1 / 2
  std::size_t K2 = 7;      // depthwise kernel
  std::size_t P = 8;       // chunk size
  std::size_t D = 8;       // attention dimension
  Activation phi = Activation::kSigmoid;
  std::size_t C = 2;  // speakers
  double dropout_p = 0.1;
  BlockAblation ablation;
  bool tie_uv = false;
  std::size_t expansion = 2;
  double rope_base = 10000.0;
  Activation global_qk_activation = Activation::kIdentity;
  double norm_eps = 1e-5;
  std::uint32_t sample_rate = 8000;

  /// "S", "M", "L" (published hyper-parameters) or "tiny" (test scale).
  static ModelConfig preset_config(std::string_view name);

  /// Applies one key=value setting; returns false for keys it does not own.
  /// Setting `preset` resets every architecture field to that preset.
  bool set(std::string_view key, std::string_view value);

  /// Throws ConfigError on inconsistent values.
  void validate() const;

  /// Every key, one `key=value` per line, in a fixed order.
  std::string to_text() const;

  BlockSpec block_spec() const;

  bool operator==(const ModelConfig&) const = default;
};

struct TrainConfig {
  double lr = 15e-5;
  std::size_t max_epochs = 200;
  std::size_t hold_epochs = 85;
  double lr_decay = 0.5;
  std::size_t patience = 2;
  double clip_norm = 5.0;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  std::size_t max_steps = 0;  // 0: no step limit
  double val_fraction = 0.125;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // Synthetic data used by the `train` and `eval` commands.
  std::size_t data_count = 16;
  std::size_t data_samples = 4000;
  std::uint64_t data_seed = 1;

  bool set(std::string_view key, std::string_view value);
  void validate() const;
  std::string to_text() const;
};

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text);

/// Applies settings in order to whichever config owns each key; unknown keys
/// raise ConfigError.
void apply_settings(const std::vector<std::pair<std::string, std::string>>& settings,
                    ModelConfig& model, TrainConfig* train);

/// Reads a key=value file into `model` / `train`.
void load_config_file(const std::string& path, ModelConfig& model, TrainConfig* train);

}  // namespace mossformer
