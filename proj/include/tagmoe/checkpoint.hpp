// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "tagmoe/parameters.hpp"

// Weight checkpoint layout (all integers u64 little-endian, floats IEEE-754
// binary64 little-endian):
//
//   "TAGMOE1"                 7 bytes magic
//   entry_count               u64
//   entry_count times:
//     name_length, name       u64 + UTF-8 bytes
//     rank, dims[rank]        u64 + rank * u64
//     payload                 product(dims) * f64

namespace tagmoe {

inline constexpr char kCheckpointMagic[] = "TAGMOE1";

std::string encode_checkpoint(const ParameterList& params);
/// Decoded tensors are fresh leaves that do not require grad.
ParameterList decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const ParameterList& params);
ParameterList load_checkpoint(const std::filesystem::path& path);

/// Copies values from `source` into `target` by name; names and shapes must
/// match one to one.
void assign_parameters(ParameterList& target, const ParameterList& source);

}  // namespace tagmoe
