// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include "mossformer/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "mossformer/model.hpp"

namespace mossformer {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O writes host scalars and assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'M', 'S', 'F', 'M', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  template <typename U>
  void pod(U v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(U));
  }
  void bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  void text(const std::string& s) {
    pod<std::uint64_t>(s.size());
    bytes(s.data(), s.size());
  }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  Reader(std::ifstream& in, std::string path) : in_(in), path_(std::move(path)) {}
  template <typename U>
  U pod() {
    U v{};
    bytes(&v, sizeof(U));
    return v;
  }
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in_) throw FormatError("checkpoint '" + path_ + "': truncated file");
  }
  std::string text(std::size_t limit = 1 << 24) {
    const auto n = pod<std::uint64_t>();
    if (n > limit) throw FormatError("checkpoint '" + path_ + "': implausible string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  const std::string& path() const { return path_; }

 private:
  std::ifstream& in_;
  std::string path_;
};

template <typename T>
void write_table(Writer& w, const ParamStore<T>& store) {
  w.pod<std::uint64_t>(store.size());
  for (const auto& [name, e] : store.entries()) {
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.pod<std::uint8_t>(e.trainable ? 1 : 0);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(e.value.rank()));
    for (std::size_t d : e.value.shape()) w.pod<std::uint64_t>(d);
    w.bytes(e.value.raw(), e.value.size() * sizeof(T));
  }
}

template <typename T>
ParamStore<T> read_table(Reader& r) {
  ParamStore<T> store;
  const auto count = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = r.pod<std::uint32_t>();
    if (name_len > 4096) throw FormatError("checkpoint '" + r.path() + "': implausible name length");
    std::string name(name_len, '\0');
    r.bytes(name.data(), name_len);
    const bool trainable = r.pod<std::uint8_t>() != 0;
    const auto rank = r.pod<std::uint32_t>();
    if (rank == 0 || rank > 8) throw FormatError("checkpoint '" + r.path() + "': bad rank for " + name);
    Shape shape(rank);
    std::size_t total = 1;
    for (auto& d : shape) {
      d = r.pod<std::uint64_t>();
      if (d == 0 || d > (std::size_t{1} << 32)) {
        throw FormatError("checkpoint '" + r.path() + "': bad dimension for " + name);
      }
      total *= d;
    }
    if (total > (std::size_t{1} << 32)) {
      throw FormatError("checkpoint '" + r.path() + "': tensor too large: " + name);
    }
    auto value = NdArray<T>::uninitialized(shape);
    r.bytes(value.raw(), value.size() * sizeof(T));
    store.add(name, std::move(value), trainable);
  }
  return store;
}

void check_header(Reader& r, std::uint32_t& scalar_size) {
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw FormatError("'" + r.path() + "' is not a checkpoint (bad magic)");
  }
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint '" + r.path() + "' has version " + std::to_string(version) +
                       ", this build reads version " + std::to_string(kCheckpointVersion));
  }
  scalar_size = r.pod<std::uint32_t>();
}

}  // namespace

template <typename T>
void save_checkpoint(const std::string& path, const Checkpoint<T>& ckpt) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("checkpoint: cannot write '" + tmp + "'");
    Writer w(out);
    w.bytes(kMagic, sizeof kMagic);
    w.pod<std::uint32_t>(kCheckpointVersion);
    w.pod<std::uint32_t>(sizeof(T));
    w.text(ckpt.config.to_text());
    w.pod<std::uint64_t>(ckpt.epoch);
    w.pod<std::uint64_t>(ckpt.adam_steps);
    w.text(ckpt.rng_state);
    write_table(w, ckpt.params);
    write_table(w, ckpt.adam_m);
    write_table(w, ckpt.adam_v);
    out.flush();
    if (!out) throw FormatError("checkpoint: write to '" + tmp + "' failed");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw FormatError("checkpoint: cannot rename '" + tmp + "' to '" + path + "'");
  }
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint: cannot open '" + path + "'");
  Reader r(in, path);
  std::uint32_t scalar_size = 0;
  check_header(r, scalar_size);
  if (scalar_size != sizeof(T)) {
    throw VersionError("checkpoint '" + path + "' stores " + std::to_string(scalar_size) +
                       "-byte scalars, expected " + std::to_string(sizeof(T)));
  }
  Checkpoint<T> ckpt;
  ckpt.config = ModelConfig{};
  apply_settings(parse_key_values(r.text()), ckpt.config, nullptr);
  ckpt.epoch = r.pod<std::uint64_t>();
  ckpt.adam_steps = r.pod<std::uint64_t>();
  ckpt.rng_state = r.text();
  ckpt.params = read_table<T>(r);
  ckpt.adam_m = read_table<T>(r);
  ckpt.adam_v = read_table<T>(r);

  // The parameters must be exactly those the stored architecture declares.
  const Model model(ckpt.config);
  if (model.params().size() != ckpt.params.size()) {
    throw VersionError("checkpoint '" + path + "': " + std::to_string(ckpt.params.size()) +
                       " tensors but the stored config declares " +
                       std::to_string(model.params().size()));
  }
  for (const auto& decl : model.params()) {
    if (!ckpt.params.contains(decl.name)) {
      throw VersionError("checkpoint '" + path + "': missing parameter " + decl.name);
    }
    if (ckpt.params.at(decl.name).value.shape() != decl.shape) {
      throw VersionError("checkpoint '" + path + "': parameter " + decl.name + " has shape " +
                         shape_string(ckpt.params.at(decl.name).value.shape()) + ", config expects " +
                         shape_string(decl.shape));
    }
  }
  return ckpt;
}

std::uint32_t checkpoint_scalar_size(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint: cannot open '" + path + "'");
  Reader r(in, path);
  std::uint32_t scalar_size = 0;
  check_header(r, scalar_size);
  return scalar_size;
}

template void save_checkpoint(const std::string&, const Checkpoint<float>&);
template void save_checkpoint(const std::string&, const Checkpoint<double>&);
template Checkpoint<float> load_checkpoint(const std::string&);
template Checkpoint<double> load_checkpoint(const std::string&);

}  // namespace mossformer
