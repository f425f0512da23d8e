// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#include "textsynth/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace textsynth {

namespace {

constexpr char kMagic[8] = {'T', 'S', 'Y', 'N', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, uint64_t v) {
  put_u32(out, uint32_t(v));
  put_u32(out, uint32_t(v >> 32));
}

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw IoError("truncated checkpoint");
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 |
         uint32_t(b[3]) << 24;
}

uint64_t get_u64(std::istream& in) {
  uint64_t lo = get_u32(in);
  uint64_t hi = get_u32(in);
  return lo | hi << 32;
}

void write_stream(const ParameterStore<float>& store, std::ostream& out) {
  out.write(kMagic, 8);
  put_u32(out, kVersion);
  for (const auto& [name, tensor] : store.values) {
    put_u32(out, uint32_t(name.size()));
    out.write(name.data(), std::streamsize(name.size()));
    put_u32(out, uint32_t(tensor.shape.size()));
    for (int64_t d : tensor.shape) put_u64(out, uint64_t(d));
    static_assert(sizeof(float) == 4);
    for (float v : tensor.data) {
      uint32_t bits;
      std::memcpy(&bits, &v, 4);
      put_u32(out, bits);
    }
  }
}

}  // namespace

void save_checkpoint(const ParameterStore<float>& store,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  write_stream(store, out);
  if (!out) throw IoError("checkpoint write failed: " + path);
}

std::string checkpoint_bytes(const ParameterStore<float>& store) {
  std::ostringstream out(std::ios::binary);
  write_stream(store, out);
  return out.str();
}

void load_checkpoint(ParameterStore<float>& store, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw IoError("not a checkpoint file: " + path);
  uint32_t version = get_u32(in);
  if (version != kVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version) +
                  ": " + path);
  store.values.clear();
  store.grads.clear();
  while (in.peek() != std::char_traits<char>::eof()) {
    uint32_t name_len = get_u32(in);
    if (name_len > 4096) throw IoError("corrupt checkpoint record: " + path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    uint32_t rank = get_u32(in);
    if (rank > 8) throw IoError("corrupt checkpoint record: " + path);
    std::vector<int64_t> shape(rank);
    for (uint32_t i = 0; i < rank; ++i) shape[i] = int64_t(get_u64(in));
    Tensor<float> tensor(shape);
    for (float& v : tensor.data) {
      uint32_t bits = get_u32(in);
      std::memcpy(&v, &bits, 4);
    }
    if (!in) throw IoError("truncated checkpoint: " + path);
    store.add(name, std::move(tensor));
  }
}

}  // namespace textsynth
