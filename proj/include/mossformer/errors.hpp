// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace mossformer {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes disagree. The message names the offending axes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyper-parameter or unknown enumerator (even kernel, odd RoPE dim, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or otherwise unusable numerics.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Signal shorter than the encoder kernel.
class InputTooShortError : public Error {
 public:
  using Error::Error;
};

/// Out-of-range speaker or element index.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Reference signal has no energy after centering.
class InvalidReferenceError : public Error {
 public:
  using Error::Error;
};

/// Malformed WAV or checkpoint file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint written by an incompatible version or for a different model.
class VersionError : public Error {
 public:
  using Error::Error;
};

/// Request outside what the implementation supports (e.g. PIT with C > 4).
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

}  // namespace mossformer
