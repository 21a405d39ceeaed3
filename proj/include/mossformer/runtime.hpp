// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace mossformer {

/// Keeps large activation buffers in the heap instead of fresh mmap()s, which
/// otherwise dominate system time during a forward pass. No-op off glibc.
void tune_allocator();

}  // namespace mossformer
