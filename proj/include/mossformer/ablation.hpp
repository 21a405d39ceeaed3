// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mossformer/config.hpp"
#include "mossformer/synth.hpp"

namespace mossformer {

struct AblationVariant {
  std::string name;
  ModelConfig config;
};

struct AblationRow {
  std::string suite;
  std::string variant;
  std::size_t params = 0;
  std::size_t steps = 0;
  double final_loss = 0.0;  // training loss of the last step
  double si_sdri = 0.0;     // mean SI-SDRi on the training set
};

/// Suite names: attention_mode, gating, convm_vs_dense, phi, K2, D, P.
const std::vector<std::string>& ablation_suites();

/// The variants of `suite` derived from `base`. K2, D and P are scaled around
/// the base value (K2 by 21/31 and 65/31 rounded to odd, D by 1/2 and 2, P by
/// 1/2 and 3/2). Throws ConfigError for an unknown suite.
std::vector<AblationVariant> ablation_variants(const std::string& suite, const ModelConfig& base);

/// Trains every variant for `budget` steps from the same seed on the same data.
/// Progress lines go to `log` when given.
std::vector<AblationRow> run_ablation(const std::string& suite, const ModelConfig& base,
                                      const TrainConfig& train_cfg, std::size_t budget,
                                      const std::vector<Example>& data, std::ostream* log = nullptr);

/// Column-aligned table. The phi suite is laid out with one column per
/// activation, the others with one row per variant.
std::string format_ablation_table(const std::vector<AblationRow>& rows);

/// Header plus one line per row: suite,variant,params,steps,final_loss,si_sdri
std::string format_ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace mossformer
