// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include "mossformer/ablation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "mossformer/train.hpp"

namespace mossformer {

namespace {

std::size_t nearest_odd(double x) {
  const long k = std::lround((x - 1.0) / 2.0);
  return static_cast<std::size_t>(std::max(0L, k)) * 2 + 1;
}

std::size_t nearest_even(double x) {
  return std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(x / 2.0)) * 2);
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string render(const std::vector<std::vector<std::string>>& cells) {
  std::vector<std::size_t> width;
  for (const auto& row : cells) {
    width.resize(std::max(width.size(), row.size()), 0);
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream os;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c == 0) {
        os << std::left << std::setw(static_cast<int>(width[c])) << row[c];
      } else {
        os << "  " << std::right << std::setw(static_cast<int>(width[c])) << row[c];
      }
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace

const std::vector<std::string>& ablation_suites() {
  static const std::vector<std::string> suites = {"attention_mode", "gating", "convm_vs_dense",
                                                  "phi",            "K2",     "D",
                                                  "P"};
  return suites;
}

std::vector<AblationVariant> ablation_variants(const std::string& suite, const ModelConfig& base) {
  std::vector<AblationVariant> out;
  auto add = [&](std::string name, auto&& edit) {
    ModelConfig c = base;
    edit(c);
    out.push_back({std::move(name), c});
  };
  if (suite == "attention_mode") {
    add("joint", [](ModelConfig& c) { c.ablation.attention_mode = AttentionMode::kJoint; });
    add("local_only", [](ModelConfig& c) { c.ablation.attention_mode = AttentionMode::kLocalOnly; });
    add("global_only",
        [](ModelConfig& c) { c.ablation.attention_mode = AttentionMode::kGlobalOnly; });
  } else if (suite == "gating") {
    add("triple", [](ModelConfig& c) { c.ablation.single_gate = false; });
    add("single_gate", [](ModelConfig& c) { c.ablation.single_gate = true; });
  } else if (suite == "convm_vs_dense") {
    add("convm", [](ModelConfig& c) { c.ablation.dense_uv = c.ablation.dense_qk = false; });
    add("dense_uv", [](ModelConfig& c) {
      c.ablation.dense_uv = true;
      c.ablation.dense_qk = false;
    });
    add("dense_qk", [](ModelConfig& c) {
      c.ablation.dense_uv = false;
      c.ablation.dense_qk = true;
    });
    add("dense_both", [](ModelConfig& c) { c.ablation.dense_uv = c.ablation.dense_qk = true; });
  } else if (suite == "phi") {
    const std::pair<const char*, Activation> kinds[] = {{"ReLU", Activation::kRelu},
                                                        {"GELU", Activation::kGelu},
                                                        {"Swish", Activation::kSwish},
                                                        {"Bilinear", Activation::kIdentity},
                                                        {"Sigmoid", Activation::kSigmoid}};
    for (const auto& [name, a] : kinds) add(name, [a = a](ModelConfig& c) { c.phi = a; });
  } else if (suite == "K2") {
    for (const std::size_t k : {nearest_odd(base.K2 * 21.0 / 31.0), base.K2,
                                nearest_odd(base.K2 * 65.0 / 31.0)}) {
      add("K2=" + std::to_string(k), [k](ModelConfig& c) { c.K2 = k; });
    }
  } else if (suite == "D") {
    for (const std::size_t d : {nearest_even(base.D / 2.0), base.D, base.D * 2}) {
      add("D=" + std::to_string(d), [d](ModelConfig& c) { c.D = d; });
    }
  } else if (suite == "P") {
    for (const std::size_t p : {std::max<std::size_t>(1, base.P / 2), base.P, base.P * 3 / 2}) {
      add("P=" + std::to_string(p), [p](ModelConfig& c) { c.P = p; });
    }
  } else {
    throw ConfigError("unknown ablation suite '" + suite +
                      "' (expected attention_mode, gating, convm_vs_dense, phi, K2, D or P)");
  }
  for (const auto& v : out) v.config.validate();
  return out;
}

std::vector<AblationRow> run_ablation(const std::string& suite, const ModelConfig& base,
                                      const TrainConfig& train_cfg, std::size_t budget,
                                      const std::vector<Example>& data, std::ostream* log) {
  if (budget == 0) throw ConfigError("ablation: budget must be at least one step");
  const auto variants = ablation_variants(suite, base);
  TrainConfig cfg = train_cfg;
  cfg.max_steps = budget;
  cfg.max_epochs = std::numeric_limits<std::size_t>::max() / 2;

  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    const Model model(v.config);
    auto result = train<float>(v.config, cfg, data);
    AblationRow row;
    row.suite = suite;
    row.variant = v.name;
    row.params = model.parameter_count();
    row.steps = result.steps;
    row.final_loss = result.step_losses.empty() ? 0.0 : result.step_losses.back();
    row.si_sdri = evaluate_si_sdri(model, result.last.params, data);
    if (log) {
      *log << suite << ' ' << row.variant << ": steps=" << row.steps
           << " final_loss=" << row.final_loss << " si_sdri=" << row.si_sdri << std::endl;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  if (rows.empty()) return {};
  std::vector<std::vector<std::string>> cells;
  if (rows.front().suite == "phi") {
    std::vector<std::string> head{"phi"}, params{"params"}, steps{"steps"}, loss{"final loss"},
        sdri{"SI-SDRi (dB)"};
    for (const auto& r : rows) {
      head.push_back(r.variant);
      params.push_back(std::to_string(r.params));
      steps.push_back(std::to_string(r.steps));
      loss.push_back(fixed(r.final_loss, 3));
      sdri.push_back(fixed(r.si_sdri, 2));
    }
    cells = {head, params, steps, loss, sdri};
  } else {
    cells.push_back({rows.front().suite, "params", "steps", "final loss", "SI-SDRi (dB)"});
    for (const auto& r : rows) {
      cells.push_back({r.variant, std::to_string(r.params), std::to_string(r.steps),
                       fixed(r.final_loss, 3), fixed(r.si_sdri, 2)});
    }
  }
  return render(cells);
}

std::string format_ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os.precision(10);
  os << "suite,variant,params,steps,final_loss,si_sdri\n";
  for (const auto& r : rows) {
    os << r.suite << ',' << r.variant << ',' << r.params << ',' << r.steps << ',' << r.final_loss
       << ',' << r.si_sdri << '\n';
  }
  return os.str();
}

}  // namespace mossformer
