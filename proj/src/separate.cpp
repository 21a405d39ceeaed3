// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include "mossformer/separate.hpp"

#include <filesystem>

#include "mossformer/model.hpp"
#include "mossformer/wav.hpp"

namespace mossformer {

template <typename T>
std::vector<std::vector<double>> separate_samples(const Checkpoint<T>& ckpt,
                                                  const std::vector<double>& mixture) {
  const Model model(ckpt.config);
  ParamStore<T> params = ckpt.params;
  const NdArray<double> in({mixture.size()}, mixture);
  const NdArray<T> out = model.separate(params, in.template cast<T>());
  const std::size_t n = mixture.size();
  std::vector<std::vector<double>> result(ckpt.config.C);
  for (std::size_t c = 0; c < result.size(); ++c) {
    result[c].assign(out.raw() + c * n, out.raw() + (c + 1) * n);
  }
  return result;
}

template <typename T>
std::vector<std::string> separate_file(const Checkpoint<T>& ckpt, const std::string& wav_in,
                                       const std::string& out_dir) {
  const WavData wav = read_wav(wav_in);
  if (wav.sample_rate != ckpt.config.sample_rate) {
    throw FormatError(wav_in + ": sample rate " + std::to_string(wav.sample_rate) +
                      " Hz, model expects " + std::to_string(ckpt.config.sample_rate) + " Hz");
  }
  const auto sources = separate_samples(ckpt, wav.samples);
  std::filesystem::create_directories(out_dir);
  const std::string stem = std::filesystem::path(wav_in).stem().string();
  std::vector<std::string> paths;
  for (std::size_t c = 0; c < sources.size(); ++c) {
    const auto path = std::filesystem::path(out_dir) / (stem + "_spk" + std::to_string(c + 1) + ".wav");
    write_wav(path.string(), sources[c], wav.sample_rate);
    paths.push_back(path.string());
  }
  return paths;
}

template std::vector<std::vector<double>> separate_samples(const Checkpoint<float>&,
                                                           const std::vector<double>&);
template std::vector<std::vector<double>> separate_samples(const Checkpoint<double>&,
                                                           const std::vector<double>&);
template std::vector<std::string> separate_file(const Checkpoint<float>&, const std::string&,
                                                const std::string&);
template std::vector<std::string> separate_file(const Checkpoint<double>&, const std::string&,
                                                const std::string&);

}  // namespace mossformer
