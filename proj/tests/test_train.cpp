// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <regex>
#include <sstream>

#include "mossformer/loss.hpp"
#include "mossformer/optim.hpp"
#include "mossformer/train.hpp"

using namespace mossformer;

namespace {

TrainConfig quick_config(std::size_t max_steps) {
  TrainConfig t;
  t.max_steps = max_steps;
  t.max_epochs = 1000;
  t.val_fraction = 0.0;
  t.seed = 5;
  return t;
}

bool same_values(const ParamStore<float>& a, const ParamStore<float>& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [name, e] : a.entries())
    if (!b.contains(name) || !(e.value == b.at(name).value)) return false;
  return true;
}

}  // namespace

TEST_CASE("Adam matches a hand-rolled update on one parameter") {
  ParamStore<double> params;
  params.add("p", NdArray<double>({1}, 0.5));
  Adam<double> adam({0.01, 0.9, 0.999, 1e-8});
  double p = 0.5, m = 0.0, v = 0.0;
  for (int t = 1; t <= 25; ++t) {
    params.at("p").grad[0] = 2.0 * (params.at("p").value[0] - 3.0);
    adam.step(params);
    const double g = 2.0 * (p - 3.0);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mhat = m / (1.0 - std::pow(0.9, t)), vhat = v / (1.0 - std::pow(0.999, t));
    p -= 0.01 * mhat / (std::sqrt(vhat) + 1e-8);
    CHECK(std::abs(params.at("p").value[0] - p) < 1e-12);
  }
  CHECK(adam.steps() == 25);
}

TEST_CASE("gradient clipping rescales to the global norm") {
  ParamStore<double> params;
  params.add("a", NdArray<double>({3}));
  params.add("b", NdArray<double>({2, 2}));
  params.at("a").grad = NdArray<double>({3}, {30.0, 0.0, 0.0});
  params.at("b").grad = NdArray<double>({2, 2}, {0.0, 40.0, 0.0, 0.0});
  CHECK(grad_norm(params) == doctest::Approx(50.0));
  CHECK(clip_grad_norm(params, 5.0) == doctest::Approx(50.0));
  CHECK(std::abs(grad_norm(params) - 5.0) < 1e-6);
  CHECK(params.at("a").grad[0] == doctest::Approx(3.0));
  CHECK(clip_grad_norm(params, 10.0) == doctest::Approx(5.0));  // below the limit: untouched
  CHECK(std::abs(grad_norm(params) - 5.0) < 1e-6);
}

TEST_CASE("plateau schedule holds, then decays after `patience` bad epochs") {
  PlateauSchedule s(3, 2, 0.5);
  double lr = 1.0;
  const double losses[] = {5, 6, 7, 8, 9, 4, 4, 4, 4, 3};
  const double want[] = {1, 1, 1, 1, 0.5, 0.5, 0.5, 0.25, 0.25, 0.25};
  for (std::size_t e = 0; e < 10; ++e) {
    lr = s.update(e + 1, losses[e], lr);
    CAPTURE(e + 1);
    CHECK(lr == want[e]);
  }
}

TEST_CASE("validation split takes the trailing examples") {
  CHECK(validation_count(16, 0.125) == 2);
  CHECK(validation_count(8, 0.125) == 1);
  CHECK(validation_count(8, 0.0) == 0);
  CHECK(validation_count(1, 0.5) == 0);
  CHECK(validation_count(4, 0.9) == 3);
}

TEST_CASE("epoch log line format") {
  EpochLog e{3, 0.00015, -1.5, -1.25};
  CHECK(format_epoch_log(e) == "epoch=3 lr=0.00015 train_loss=-1.5 val_loss=-1.25");
}

TEST_CASE("training lowers the loss, logs every epoch and keeps the best checkpoint") {
  const auto cfg = ModelConfig::preset_config("tiny");
  const auto data = synth_dataset(1, 8, 2, 4000);
  TrainConfig t = quick_config(300);
  t.val_fraction = 0.125;
  std::ostringstream log;
  const auto r = train<float>(cfg, t, data, &log);
  CHECK(r.steps == 300);
  REQUIRE(r.step_losses.size() == 300);
  CHECK(r.epochs.back().train_loss < r.step_losses.front());

  const std::regex line(R"(epoch=\d+ lr=\S+ train_loss=\S+ val_loss=\S+)");
  std::istringstream in(log.str());
  std::string s;
  std::size_t lines = 0;
  while (std::getline(in, s)) {
    CHECK(std::regex_match(s, line));
    ++lines;
  }
  CHECK(lines == r.epochs.size());
  CHECK(r.epochs.size() == (300 + 6) / 7);  // 7 training examples per epoch

  std::size_t best = 0;
  for (std::size_t i = 1; i < r.epochs.size(); ++i)
    if (r.epochs[i].val_loss < r.epochs[best].val_loss) best = i;
  CHECK(r.best.epoch == r.epochs[best].epoch);
  CHECK(r.best_val_loss == r.epochs[best].val_loss);
  const Model model(cfg);
  ParamStore<float> best_params = r.best.params;
  const std::vector<Example> val(data.end() - 1, data.end());
  CHECK(evaluate_loss(model, best_params, val) == doctest::Approx(r.best_val_loss).epsilon(1e-6));
}

TEST_CASE("same seed twice gives the same loss curve") {
  const auto cfg = ModelConfig::preset_config("tiny");
  const auto data = synth_dataset(2, 4, 2, 1000);
  const auto a = train<float>(cfg, quick_config(20), data);
  const auto b = train<float>(cfg, quick_config(20), data);
  CHECK(a.step_losses == b.step_losses);
  CHECK(same_values(a.last.params, b.last.params));
  TrainConfig other = quick_config(20);
  other.seed = 6;
  CHECK(train<float>(cfg, other, data).step_losses != a.step_losses);
}

TEST_CASE("resuming from a checkpoint continues the same trajectory") {
  const auto cfg = ModelConfig::preset_config("tiny");
  const auto data = synth_dataset(3, 4, 2, 1000);
  TrainConfig t = quick_config(0);
  t.max_epochs = 4;
  const auto straight = train<float>(cfg, t, data);
  t.max_epochs = 2;
  const auto first = train<float>(cfg, t, data);
  const auto second = train<float>(cfg, t, data, nullptr, &first.last);
  CHECK(second.epochs.front().epoch == 3);
  CHECK(same_values(second.last.params, straight.last.params));
  std::vector<double> joined = first.step_losses;
  joined.insert(joined.end(), second.step_losses.begin(), second.step_losses.end());
  CHECK(joined == straight.step_losses);

  ModelConfig other = cfg;
  other.N = 18;
  CHECK_THROWS_AS(train<float>(other, t, data, nullptr, &first.last), VersionError);
}

TEST_CASE("a non-finite loss aborts with diagnostics") {
  const auto cfg = ModelConfig::preset_config("tiny");
  const auto data = synth_dataset(4, 2, 2, 800);
  TrainConfig t = quick_config(5);
  auto start = train<float>(cfg, quick_config(1), data).last;
  start.params.at("decoder.weight").value[3] = std::nanf("");
  try {
    train<float>(cfg, t, data, nullptr, &start);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch 2") != std::string::npos);
    CHECK(msg.find("batch 0") != std::string::npos);
    CHECK(msg.find("decoder.weight=nan") != std::string::npos);
  }
}

TEST_CASE("training rejects bad configurations") {
  const auto cfg = ModelConfig::preset_config("tiny");
  const auto data = synth_dataset(5, 2, 2, 800);
  TrainConfig t = quick_config(1);
  t.lr = 0.0;
  CHECK_THROWS_AS(train<float>(cfg, t, data), ConfigError);
  t = quick_config(1);
  t.clip_norm = -1.0;
  CHECK_THROWS_AS(train<float>(cfg, t, data), ConfigError);
  CHECK_THROWS_AS(train<float>(cfg, quick_config(1), {}), ConfigError);
  CHECK_THROWS_AS(train<float>(cfg, quick_config(1), synth_dataset(5, 2, 3, 800)), DimensionError);
}

TEST_CASE("SI-SDRi subtracts the mixture score per reference") {
  // All-zero parameters give silent estimates, which score 0 dB; the
  // improvement is then minus the mean mixture score.
  const auto cfg = ModelConfig::preset_config("tiny");
  const Model model(cfg);
  auto params = model.init<double>(1);
  for (auto& [name, e] : params.entries()) e.value.fill(0.0);
  const auto data = synth_dataset(6, 2, 2, 800);
  double want = 0.0;
  for (const auto& ex : data)
    for (std::size_t c = 0; c < 2; ++c)
      want -= si_sdr(ex.mixture.raw(), ex.sources.raw() + c * 800, 800) / 4.0;
  CHECK(evaluate_si_sdri(model, params, data) == doctest::Approx(want).epsilon(1e-12));
}
