// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <string>

#include "textsynth/graph.hpp"

namespace textsynth {

// Sectioned binary checkpoint: magic "TSYNCKPT", u32 version, then one
// record per parameter in name order: u32 name length, name bytes,
// u32 rank, u64 dims, raw little-endian f32 data. Round trips bit-exactly.
void save_checkpoint(const ParameterStore<float>& store,
                     const std::string& path);

// Replaces the store contents with the file's parameters.
void load_checkpoint(ParameterStore<float>& store, const std::string& path);

// Raw file bytes, for bit-identity assertions.
std::string checkpoint_bytes(const ParameterStore<float>& store);

}  // namespace textsynth
