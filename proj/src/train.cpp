// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include "mossformer/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "mossformer/loss.hpp"
#include "mossformer/optim.hpp"

namespace mossformer {

namespace {

template <typename T>
struct Prepared {
  NdArray<T> mixture;  // [1 x T]
  NdArray<T> sources;  // [C x T]
};

template <typename T>
std::vector<Prepared<T>> prepare(const std::vector<Example>& data, std::size_t speakers) {
  std::vector<Prepared<T>> out;
  out.reserve(data.size());
  for (const auto& ex : data) {
    if (ex.sources.rank() != 2 || ex.sources.dim(0) != speakers ||
        ex.sources.dim(1) != ex.mixture.size()) {
      throw DimensionError("training example: sources " + shape_string(ex.sources.shape()) +
                           " do not match " + std::to_string(speakers) + " speakers x " +
                           std::to_string(ex.mixture.size()) + " samples");
    }
    out.push_back({ex.mixture.template cast<T>().reshaped({1, ex.mixture.size()}),
                   ex.sources.template cast<T>()});
  }
  return out;
}

template <typename T>
std::string parameter_norms(const ParamStore<T>& params) {
  std::vector<std::pair<double, std::string>> norms;
  double total = 0.0;
  for (const auto& [name, e] : params.entries()) {
    double sq = 0.0;
    for (std::size_t i = 0; i < e.value.size(); ++i) sq += double(e.value[i]) * double(e.value[i]);
    total += sq;
    norms.emplace_back(std::sqrt(sq), name);
  }
  // Non-finite norms first, then descending; a plain > is not a strict weak
  // ordering once NaN is involved.
  std::sort(norms.begin(), norms.end(), [](const auto& a, const auto& b) {
    const bool fa = std::isfinite(a.first), fb = std::isfinite(b.first);
    if (fa != fb) return !fa;
    return fa && a.first > b.first;
  });
  std::ostringstream os;
  os << "global parameter norm " << std::sqrt(total) << "; largest:";
  for (std::size_t i = 0; i < std::min<std::size_t>(5, norms.size()); ++i) {
    os << ' ' << norms[i].second << '=';
    if (std::isnan(norms[i].first)) os << "nan"; else os << norms[i].first;
  }
  return os.str();
}

template <typename T>
Checkpoint<T> snapshot(const ModelConfig& cfg, const ParamStore<T>& params, const Adam<T>& adam,
                       std::size_t epoch, const Rng& rng) {
  Checkpoint<T> c;
  c.config = cfg;
  c.params = params;
  c.adam_m = adam.first_moment();
  c.adam_v = adam.second_moment();
  c.adam_steps = adam.steps();
  c.epoch = epoch;
  std::ostringstream os;
  os << rng;
  c.rng_state = os.str();
  return c;
}

template <typename T>
double mean_loss(const Model& model, ParamStore<T>& params, const std::vector<Prepared<T>>& set) {
  double total = 0.0;
  for (const auto& ex : set) {
    Tape<T> tape(false);
    ForwardContext<T> ctx{tape, params};
    const auto r = model.forward(ctx, tape.constant(ex.mixture));
    total += double(pit_loss(r.estimates, ex.sources).value()[0]);
  }
  return total / static_cast<double>(set.size());
}

}  // namespace

std::string format_epoch_log(const EpochLog& log) {
  std::ostringstream os;
  os.precision(8);
  os << "epoch=" << log.epoch << " lr=" << log.lr << " train_loss=" << log.train_loss
     << " val_loss=" << log.val_loss;
  return os.str();
}

std::size_t validation_count(std::size_t examples, double fraction) {
  if (fraction <= 0.0 || examples < 2) return 0;
  const auto n = static_cast<std::size_t>(std::floor(examples * fraction));
  return std::clamp<std::size_t>(n, 1, examples - 1);
}

template <typename T>
TrainResult<T> train(const ModelConfig& model_cfg, const TrainConfig& cfg,
                     const std::vector<Example>& data, std::ostream* log,
                     const Checkpoint<T>* resume) {
  cfg.validate();
  if (data.empty()) throw ConfigError("train: no training data");
  const Model model(model_cfg);
  const auto all = prepare<T>(data, model_cfg.C);
  const std::size_t n_val = validation_count(all.size(), cfg.val_fraction);
  const std::vector<Prepared<T>> train_set(all.begin(), all.end() - n_val);
  const std::vector<Prepared<T>> val_set(all.end() - n_val, all.end());

  Rng rng(cfg.seed);
  ParamStore<T> params;
  Adam<T> adam({cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps});
  std::size_t first_epoch = 1;
  if (resume) {
    if (!(resume->config == model_cfg)) {
      throw VersionError("train: resume checkpoint was made with a different model config");
    }
    params = resume->params;
    adam.restore(resume->adam_steps, resume->adam_m, resume->adam_v);
    std::istringstream is(resume->rng_state);
    is >> rng;
    if (!is) throw FormatError("train: unreadable RNG state in resume checkpoint");
    first_epoch = resume->epoch + 1;
  } else {
    params = model.init<T>(cfg.seed);
  }

  TrainResult<T> result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  PlateauSchedule schedule(cfg.hold_epochs, cfg.patience, cfg.lr_decay);
  std::vector<std::size_t> order(train_set.size());

  for (std::size_t epoch = first_epoch; epoch < first_epoch + cfg.max_epochs; ++epoch) {
    // Reset first so the epoch order depends on the RNG state alone and a
    // resumed run sees the same permutation.
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    bool out_of_steps = false;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      if (cfg.max_steps && result.steps >= cfg.max_steps) {
        out_of_steps = true;
        break;
      }
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      params.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t i = start; i < stop; ++i) {
        const auto& ex = train_set[order[i]];
        auto diagnose = [&](const std::string& what) {
          return NumericalError("train: " + what + " at epoch " + std::to_string(epoch) +
                                " batch " + std::to_string(batches) + "; " +
                                parameter_norms(params));
        };
        Tape<T> tape;
        ForwardContext<T> ctx{tape, params, true, &rng};
        Var<T> loss;
        try {
          const auto r = model.forward(ctx, tape.constant(ex.mixture));
          loss = scale(pit_loss(r.estimates, ex.sources), 1.0 / static_cast<double>(stop - start));
        } catch (const NumericalError& e) {
          throw diagnose(e.what());
        }
        const double value = loss.value()[0];
        if (!std::isfinite(value)) throw diagnose("non-finite loss");
        batch_loss += value;
        tape.backward(loss);
      }
      const double norm = clip_grad_norm(params, cfg.clip_norm);
      if (!std::isfinite(norm)) {
        throw NumericalError("train: non-finite gradient norm at epoch " + std::to_string(epoch) +
                             " batch " + std::to_string(batches) + "; " + parameter_norms(params));
      }
      adam.step(params);
      result.step_losses.push_back(batch_loss);
      epoch_loss += batch_loss;
      ++batches;
      ++result.steps;
    }
    if (batches == 0) break;

    EpochLog entry;
    entry.epoch = epoch;
    entry.lr = adam.lr();
    entry.train_loss = epoch_loss / static_cast<double>(batches);
    entry.val_loss = val_set.empty() ? entry.train_loss : mean_loss(model, params, val_set);
    result.epochs.push_back(entry);
    if (log) *log << format_epoch_log(entry) << std::endl;

    if (entry.val_loss < result.best_val_loss || result.epochs.size() == 1) {
      result.best_val_loss = entry.val_loss;
      result.best = snapshot(model_cfg, params, adam, epoch, rng);
    }
    adam.set_lr(schedule.update(epoch, entry.val_loss, adam.lr()));
    if (out_of_steps || (cfg.max_steps && result.steps >= cfg.max_steps)) break;
  }
  result.last = snapshot(model_cfg, params, adam,
                         result.epochs.empty() ? first_epoch - 1 : result.epochs.back().epoch, rng);
  if (result.epochs.empty()) result.best = result.last;
  return result;
}

template <typename T>
double evaluate_loss(const Model& model, ParamStore<T>& params, const std::vector<Example>& data) {
  if (data.empty()) throw ConfigError("evaluate: no data");
  return mean_loss(model, params, prepare<T>(data, model.config().C));
}

template <typename T>
double evaluate_si_sdri(const Model& model, ParamStore<T>& params,
                        const std::vector<Example>& data) {
  if (data.empty()) throw ConfigError("evaluate: no data");
  const std::size_t C = model.config().C;
  double total = 0.0;
  for (const auto& ex : data) {
    const NdArray<double> est = model.separate(params, ex.mixture.template cast<T>()).template cast<double>();
    const PitResult pit = pit_loss(est, ex.sources);
    const std::size_t n = ex.mixture.size();
    double sum = 0.0;
    for (std::size_t i = 0; i < C; ++i) {
      const double* ref = ex.sources.raw() + i * n;
      const double* e = est.raw() + pit.perm[i] * n;
      sum += si_sdr(e, ref, n) - si_sdr(ex.mixture.raw(), ref, n);
    }
    total += sum / static_cast<double>(C);
  }
  return total / static_cast<double>(data.size());
}

#define MOSSFORMER_TRAIN(T)                                                                     \
  template TrainResult<T> train(const ModelConfig&, const TrainConfig&,                        \
                                const std::vector<Example>&, std::ostream*,                    \
                                const Checkpoint<T>*);                                          \
  template double evaluate_loss(const Model&, ParamStore<T>&, const std::vector<Example>&);     \
  template double evaluate_si_sdri(const Model&, ParamStore<T>&, const std::vector<Example>&);

MOSSFORMER_TRAIN(float)
MOSSFORMER_TRAIN(double)

}  // namespace mossformer
