// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include "mossformer/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace mossformer {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename Int>
Int to_int(std::string_view key, std::string_view v) {
  Int out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config: '" + std::string(key) + "' expects an integer, got '" +
                      std::string(v) + "'");
  }
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    const std::string s(v);
    const double d = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + std::string(key) + "' expects a number, got '" +
                      std::string(v) + "'");
  }
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw ConfigError("config: '" + std::string(key) + "' expects a boolean, got '" +
                    std::string(v) + "'");
}

std::string fmt_double(double d) {
  std::ostringstream os;
  os.precision(17);
  os << d;
  return os.str();
}

}  // namespace

ModelConfig ModelConfig::preset_config(std::string_view name) {
  ModelConfig c;
  c.preset = std::string(name);
  if (name == "S") {
    c.R = 22, c.N = 256, c.K1 = 8, c.stride = 4, c.K2 = 31, c.P = 256, c.D = 128;
  } else if (name == "M") {
    c.R = 25, c.N = 384, c.K1 = 16, c.stride = 8, c.K2 = 17, c.P = 256, c.D = 128;
  } else if (name == "L") {
    c.R = 24, c.N = 512, c.K1 = 16, c.stride = 8, c.K2 = 17, c.P = 256, c.D = 128;
  } else if (name == "tiny") {
    c.R = 1, c.N = 16, c.K1 = 8, c.stride = 4, c.K2 = 7, c.P = 8, c.D = 8;
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "' (expected S, M, L or tiny)");
  }
  c.phi = Activation::kSigmoid;
  return c;
}

bool ModelConfig::set(std::string_view key, std::string_view v) {
  if (key == "preset") {
    *this = preset_config(v);
  } else if (key == "R") {
    R = to_int<std::size_t>(key, v);
  } else if (key == "N") {
    N = to_int<std::size_t>(key, v);
  } else if (key == "K1") {
    K1 = to_int<std::size_t>(key, v);
  } else if (key == "stride") {
    stride = to_int<std::size_t>(key, v);
  } else if (key == "K2") {
    K2 = to_int<std::size_t>(key, v);
  } else if (key == "P") {
    P = to_int<std::size_t>(key, v);
  } else if (key == "D") {
    D = to_int<std::size_t>(key, v);
  } else if (key == "phi") {
    phi = parse_activation(v);
  } else if (key == "C") {
    C = to_int<std::size_t>(key, v);
  } else if (key == "dropout_p") {
    dropout_p = to_double(key, v);
  } else if (key == "attention_mode") {
    ablation.attention_mode = parse_attention_mode(v);
  } else if (key == "single_gate") {
    ablation.single_gate = to_bool(key, v);
  } else if (key == "dense_uv") {
    ablation.dense_uv = to_bool(key, v);
  } else if (key == "dense_qk") {
    ablation.dense_qk = to_bool(key, v);
  } else if (key == "tie_uv") {
    tie_uv = to_bool(key, v);
  } else if (key == "expansion") {
    expansion = to_int<std::size_t>(key, v);
  } else if (key == "rope_base") {
    rope_base = to_double(key, v);
  } else if (key == "global_qk_activation") {
    global_qk_activation = parse_activation(v);
  } else if (key == "norm_eps") {
    norm_eps = to_double(key, v);
  } else if (key == "sample_rate") {
    sample_rate = to_int<std::uint32_t>(key, v);
  } else {
    return false;
  }
  return true;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("model config: " + m); };
  if (R == 0 || N == 0 || K1 == 0 || K2 == 0 || P == 0 || D == 0 || C == 0 || expansion == 0)
    fail("R, N, K1, K2, P, D, C and expansion must be positive");
  if (K1 % 2 != 0) fail("K1 must be even (stride is K1/2), got " + std::to_string(K1));
  if (stride * 2 != K1) fail("stride must equal K1/2");
  if (K2 % 2 == 0) fail("K2 must be odd, got " + std::to_string(K2));
  if (D % 2 != 0) fail("D must be even for RoPE, got " + std::to_string(D));
  if (N % 2 != 0) fail("N must be even for the positional encoding, got " + std::to_string(N));
  if (dropout_p < 0.0 || dropout_p >= 1.0) fail("dropout_p must be in [0, 1)");
  if (norm_eps < 0.0) fail("norm_eps must be >= 0");
  if (sample_rate == 0) fail("sample_rate must be positive");
}

std::string ModelConfig::to_text() const {
  std::ostringstream os;
  os << "preset=" << preset << '\n'
     << "R=" << R << '\n'
     << "N=" << N << '\n'
     << "K1=" << K1 << '\n'
     << "stride=" << stride << '\n'
     << "K2=" << K2 << '\n'
     << "P=" << P << '\n'
     << "D=" << D << '\n'
     << "phi=" << activation_name(phi) << '\n'
     << "C=" << C << '\n'
     << "dropout_p=" << fmt_double(dropout_p) << '\n'
     << "attention_mode=" << attention_mode_name(ablation.attention_mode) << '\n'
     << "single_gate=" << ablation.single_gate << '\n'
     << "dense_uv=" << ablation.dense_uv << '\n'
     << "dense_qk=" << ablation.dense_qk << '\n'
     << "tie_uv=" << tie_uv << '\n'
     << "expansion=" << expansion << '\n'
     << "rope_base=" << fmt_double(rope_base) << '\n'
     << "global_qk_activation=" << activation_name(global_qk_activation) << '\n'
     << "norm_eps=" << fmt_double(norm_eps) << '\n'
     << "sample_rate=" << sample_rate << '\n';
  return os.str();
}

BlockSpec ModelConfig::block_spec() const {
  BlockSpec s;
  s.model_dim = N;
  s.attn_dim = D;
  s.chunk = P;
  s.kernel = K2;
  s.expansion = expansion;
  s.dropout = dropout_p;
  s.norm_eps = norm_eps;
  s.rope_base = rope_base;
  s.gate = phi;
  s.global_qk_activation = global_qk_activation;
  s.ablation = ablation;
  s.tie_uv = tie_uv;
  return s;
}

bool TrainConfig::set(std::string_view key, std::string_view v) {
  if (key == "lr") lr = to_double(key, v);
  else if (key == "max_epochs") max_epochs = to_int<std::size_t>(key, v);
  else if (key == "hold_epochs") hold_epochs = to_int<std::size_t>(key, v);
  else if (key == "lr_decay") lr_decay = to_double(key, v);
  else if (key == "patience") patience = to_int<std::size_t>(key, v);
  else if (key == "clip_norm") clip_norm = to_double(key, v);
  else if (key == "batch_size") batch_size = to_int<std::size_t>(key, v);
  else if (key == "seed") seed = to_int<std::uint64_t>(key, v);
  else if (key == "max_steps") max_steps = to_int<std::size_t>(key, v);
  else if (key == "val_fraction") val_fraction = to_double(key, v);
  else if (key == "adam_beta1") adam_beta1 = to_double(key, v);
  else if (key == "adam_beta2") adam_beta2 = to_double(key, v);
  else if (key == "adam_eps") adam_eps = to_double(key, v);
  else if (key == "data_count") data_count = to_int<std::size_t>(key, v);
  else if (key == "data_samples") data_samples = to_int<std::size_t>(key, v);
  else if (key == "data_seed") data_seed = to_int<std::uint64_t>(key, v);
  else return false;
  return true;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("train config: " + m); };
  if (!(lr > 0.0)) fail("lr must be > 0");
  if (!(clip_norm > 0.0)) fail("clip_norm must be > 0");
  if (batch_size == 0) fail("batch_size must be >= 1");
  if (lr_decay <= 0.0 || lr_decay > 1.0) fail("lr_decay must be in (0, 1]");
  if (val_fraction < 0.0 || val_fraction >= 1.0) fail("val_fraction must be in [0, 1)");
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os << "lr=" << fmt_double(lr) << '\n'
     << "max_epochs=" << max_epochs << '\n'
     << "hold_epochs=" << hold_epochs << '\n'
     << "lr_decay=" << fmt_double(lr_decay) << '\n'
     << "patience=" << patience << '\n'
     << "clip_norm=" << fmt_double(clip_norm) << '\n'
     << "batch_size=" << batch_size << '\n'
     << "seed=" << seed << '\n'
     << "max_steps=" << max_steps << '\n'
     << "val_fraction=" << fmt_double(val_fraction) << '\n'
     << "adam_beta1=" << fmt_double(adam_beta1) << '\n'
     << "adam_beta2=" << fmt_double(adam_beta2) << '\n'
     << "adam_eps=" << fmt_double(adam_eps) << '\n'
     << "data_count=" << data_count << '\n'
     << "data_samples=" << data_samples << '\n'
     << "data_seed=" << data_seed << '\n';
  return os.str();
}

std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value, got '" +
                        std::string(line) + "'");
    }
    out.emplace_back(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

void apply_settings(const std::vector<std::pair<std::string, std::string>>& settings,
                    ModelConfig& model, TrainConfig* train) {
  for (const auto& [k, v] : settings) {
    if (model.set(k, v)) continue;
    if (train && train->set(k, v)) continue;
    throw ConfigError("config: unknown key '" + k + "'");
  }
}

void load_config_file(const std::string& path, ModelConfig& model, TrainConfig* train) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  apply_settings(parse_key_values(ss.str()), model, train);
}

}  // namespace mossformer
