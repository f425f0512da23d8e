// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "textsynth/error.hpp"
#include "textsynth/rng.hpp"

namespace textsynth {

inline int64_t shape_numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

inline std::string shape_str(const std::vector<int64_t>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i)
    s += (i ? "," : "") + std::to_string(shape[i]);
  return s + "]";
}

// Dense row-major value carrier. T is float for training, double for
// gradient checks.
template <typename T>
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> s, T fill = T(0))
      : shape(std::move(s)), data(size_t(shape_numel(shape)), fill) {}

  int64_t numel() const { return int64_t(data.size()); }
  int64_t dim(size_t i) const { return shape[i]; }
  T& operator[](size_t i) { return data[i]; }
  const T& operator[](size_t i) const { return data[i]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(double(v))) return false;
    return true;
  }

  static Tensor zeros(std::vector<int64_t> s) { return Tensor(std::move(s)); }

  static Tensor full(std::vector<int64_t> s, T v) {
    Tensor t(std::move(s));
    t.fill(v);
    return t;
  }

  // Uniform in [-limit, limit]; He-style limit = sqrt(3 / fan_in) keeps
  // leaky-rectifier activations in a stable range.
  static Tensor uniform_init(std::vector<int64_t> s, T limit, Rng& rng) {
    Tensor t(std::move(s));
    for (T& v : t.data) v = T(rng.uniform(-double(limit), double(limit)));
    return t;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = U(data[i]);
    return out;
  }
};

}  // namespace textsynth
