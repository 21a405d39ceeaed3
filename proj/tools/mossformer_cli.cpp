// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: train, separate, eval, ablate, gradcheck, paramcount.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "mossformer/ablation.hpp"
#include "mossformer/gradcheck.hpp"
#include "mossformer/loss.hpp"
#include "mossformer/runtime.hpp"
#include "mossformer/separate.hpp"
#include "mossformer/train.hpp"
#include "mossformer/wav.hpp"

using namespace mossformer;

namespace {

struct Settings {
  std::string config_file;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "key=value configuration file")
        ->check(CLI::ExistingFile);
    cmd->add_option("--set", overrides, "key=value override, applied after --config");
  }

  void apply(ModelConfig& model, TrainConfig* train) const {
    if (!config_file.empty()) load_config_file(config_file, model, train);
    std::string joined;
    for (const auto& o : overrides) joined += o + '\n';
    apply_settings(parse_key_values(joined), model, train);
  }
};

std::vector<Example> training_data(const ModelConfig& m, const TrainConfig& t) {
  return synth_dataset(t.data_seed, t.data_count, m.C, t.data_samples, m.sample_rate);
}

template <typename T>
int run_train(const ModelConfig& m, const TrainConfig& t, const std::string& out,
              const std::string& last_out, const std::string& resume) {
  std::unique_ptr<Checkpoint<T>> from;
  if (!resume.empty()) from = std::make_unique<Checkpoint<T>>(load_checkpoint<T>(resume));
  const auto data = training_data(m, t);
  const auto result = train<T>(m, t, data, &std::cout, from.get());
  save_checkpoint(out, result.best);
  if (!last_out.empty()) save_checkpoint(last_out, result.last);
  std::cout << "steps=" << result.steps << " best_val_loss=" << result.best_val_loss
            << " checkpoint=" << out << '\n';
  return 0;
}

template <typename T>
int run_separate(const std::string& ckpt, const std::string& in, const std::string& out_dir) {
  for (const auto& p : separate_file(load_checkpoint<T>(ckpt), in, out_dir)) std::cout << p << '\n';
  return 0;
}

template <typename T>
int run_eval(const std::string& ckpt_path, const Settings& settings, const std::string& mixture,
             const std::vector<std::string>& refs) {
  Checkpoint<T> ckpt = load_checkpoint<T>(ckpt_path);
  const Model model(ckpt.config);
  if (mixture.empty()) {
    ModelConfig m = ckpt.config;
    TrainConfig t;
    settings.apply(m, &t);
    if (!(m == ckpt.config)) throw ConfigError("eval: model keys cannot be overridden");
    const auto data = training_data(m, t);
    std::cout << "examples=" << data.size()
              << " loss=" << evaluate_loss(model, ckpt.params, data)
              << " si_sdri=" << evaluate_si_sdri(model, ckpt.params, data) << '\n';
    return 0;
  }
  if (refs.size() != ckpt.config.C) {
    throw ConfigError("eval: " + std::to_string(ckpt.config.C) + " --ref files required, got " +
                      std::to_string(refs.size()));
  }
  const WavData mix = read_wav(mixture);
  const auto est = separate_samples(ckpt, mix.samples);
  const std::size_t n = mix.samples.size();
  NdArray<double> e({est.size(), n}), r({refs.size(), n});
  for (std::size_t c = 0; c < refs.size(); ++c) {
    const WavData w = read_wav(refs[c]);
    if (w.samples.size() != n) throw DimensionError("eval: " + refs[c] + " length differs from the mixture");
    std::copy(est[c].begin(), est[c].end(), e.raw() + c * n);
    std::copy(w.samples.begin(), w.samples.end(), r.raw() + c * n);
  }
  const PitResult pit = pit_loss(e, r);
  double mean = 0.0;
  for (std::size_t c = 0; c < refs.size(); ++c) {
    const double* ref = r.raw() + c * n;
    const double v = si_sdr(e.raw() + pit.perm[c] * n, ref, n) - si_sdr(mix.samples.data(), ref, n);
    std::cout << refs[c] << ": estimate " << pit.perm[c] + 1 << " si_sdri=" << v << '\n';
    mean += v / static_cast<double>(refs.size());
  }
  std::cout << "mean si_sdri=" << mean << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"MossFormer speech separation"};
  app.require_subcommand(1);

  Settings train_settings, eval_settings, ablate_settings, grad_settings, count_settings;
  std::string precision = "float";
  const auto precisions = CLI::IsMember({"float", "double"});

  auto* train_cmd = app.add_subcommand("train", "train on synthetic mixtures");
  std::string train_out = "mossformer.ckpt", train_last, train_resume;
  train_settings.attach(train_cmd);
  train_cmd->add_option("--out", train_out, "best-validation checkpoint path");
  train_cmd->add_option("--last", train_last, "also save the final state here");
  train_cmd->add_option("--resume", train_resume, "continue from this checkpoint")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--precision", precision)->check(precisions);

  auto* sep_cmd = app.add_subcommand("separate", "separate a mono WAV into per-speaker WAVs");
  std::string ckpt_path, wav_in, out_dir = ".";
  sep_cmd->add_option("--checkpoint", ckpt_path)->required()->check(CLI::ExistingFile);
  sep_cmd->add_option("--input", wav_in)->required()->check(CLI::ExistingFile);
  sep_cmd->add_option("--out-dir", out_dir);

  auto* eval_cmd = app.add_subcommand("eval", "SI-SDRi of a checkpoint");
  std::string eval_mix;
  std::vector<std::string> eval_refs;
  eval_settings.attach(eval_cmd);
  eval_cmd->add_option("--checkpoint", ckpt_path)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--mixture", eval_mix, "mixture WAV (default: synthetic set)")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--ref", eval_refs, "reference WAV, one per speaker")
      ->check(CLI::ExistingFile);

  auto* ablate_cmd = app.add_subcommand("ablate", "train ablation variants");
  std::vector<std::string> suites;
  std::size_t budget = 50;
  std::string csv_path;
  ablate_settings.attach(ablate_cmd);
  ablate_cmd->add_option("--suite", suites, "suite name or 'all'")->required();
  ablate_cmd->add_option("--budget", budget, "steps per variant");
  ablate_cmd->add_option("--csv", csv_path, "write the CSV table here");

  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of the model gradient");
  std::size_t grad_samples = 64;
  std::uint64_t grad_seed = 1;
  double grad_h = 1e-5, grad_tol = 1e-4;
  grad_settings.attach(grad_cmd);
  grad_cmd->add_option("--samples", grad_samples);
  grad_cmd->add_option("--seed", grad_seed);
  grad_cmd->add_option("--step", grad_h, "finite-difference step");
  grad_cmd->add_option("--tol", grad_tol);

  auto* count_cmd = app.add_subcommand("paramcount", "trainable parameter count");
  count_settings.attach(count_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      ModelConfig m;
      TrainConfig t;
      train_settings.apply(m, &t);
      m.validate();
      return precision == "double" ? run_train<double>(m, t, train_out, train_last, train_resume)
                                   : run_train<float>(m, t, train_out, train_last, train_resume);
    }
    if (*sep_cmd) {
      return checkpoint_scalar_size(ckpt_path) == sizeof(double)
                 ? run_separate<double>(ckpt_path, wav_in, out_dir)
                 : run_separate<float>(ckpt_path, wav_in, out_dir);
    }
    if (*eval_cmd) {
      return checkpoint_scalar_size(ckpt_path) == sizeof(double)
                 ? run_eval<double>(ckpt_path, eval_settings, eval_mix, eval_refs)
                 : run_eval<float>(ckpt_path, eval_settings, eval_mix, eval_refs);
    }
    if (*ablate_cmd) {
      ModelConfig m;
      TrainConfig t;
      ablate_settings.apply(m, &t);
      m.validate();
      if (suites.size() == 1 && suites.front() == "all") suites = ablation_suites();
      for (const auto& s : suites) ablation_variants(s, m);  // reject typos before training
      const auto data = training_data(m, t);
      std::vector<AblationRow> all;
      for (const auto& s : suites) {
        const auto rows = run_ablation(s, m, t, budget, data, &std::cerr);
        std::cout << format_ablation_table(rows) << '\n';
        all.insert(all.end(), rows.begin(), rows.end());
      }
      if (!csv_path.empty()) {
        std::ofstream(csv_path) << format_ablation_csv(all);
      }
      return 0;
    }
    if (*grad_cmd) {
      ModelConfig m;
      grad_settings.apply(m, nullptr);
      const auto r = model_gradient_check(m, grad_samples, grad_seed, grad_h);
      std::cout << "checked=" << r.checked << " max_rel_error=" << r.max_rel_error << " at "
                << r.worst_param << '[' << r.worst_index << "] analytic=" << r.worst_analytic
                << " numeric=" << r.worst_numeric << '\n';
      return r.max_rel_error < grad_tol ? 0 : 1;
    }
    if (*count_cmd) {
      ModelConfig m;
      count_settings.apply(m, nullptr);
      m.validate();
      std::cout << "preset=" << m.preset << " params=" << count_parameters(m) << '\n';
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
