// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cmath>
#include <map>
#include <set>
#include <string>

#include "textsynth/graph.hpp"

namespace textsynth {

// RMSProp over a subset of a parameter store. One accumulator per
// coordinate:
//   acc   <- decay * acc + (1 - decay) * grad^2
//   param <- param - lr * grad / sqrt(acc + 1e-8)
template <typename T>
class RmsProp {
public:
  RmsProp(std::set<std::string> param_names, T learning_rate, T decay)
      : names_(std::move(param_names)), lr_(learning_rate), decay_(decay) {}

  void step(ParameterStore<T>& store) {
    for (const std::string& name : names_) {
      Tensor<T>& value = store.value(name);
      Tensor<T>& grad = store.grad(name);
      if (!grad.same_shape(value))
        throw InvalidArgument("rmsprop: grad/param shape mismatch for " + name);
      Tensor<T>& acc = accumulator(name, value);
      for (int64_t i = 0; i < value.numel(); ++i) {
        T g = grad[size_t(i)];
        acc[size_t(i)] = decay_ * acc[size_t(i)] + (T(1) - decay_) * g * g;
        value[size_t(i)] -=
            lr_ * g / T(std::sqrt(double(acc[size_t(i)]) + 1e-8));
      }
    }
  }

  const std::set<std::string>& names() const { return names_; }
  T learning_rate() const { return lr_; }

private:
  Tensor<T>& accumulator(const std::string& name, const Tensor<T>& like) {
    auto it = state_.find(name);
    if (it == state_.end())
      it = state_.emplace(name, Tensor<T>::zeros(like.shape)).first;
    return it->second;
  }

  std::set<std::string> names_;
  T lr_;
  T decay_;
  std::map<std::string, Tensor<T>> state_;
};

// Clamps every entry of the named parameters to [-c, c] (Wasserstein
// critic weight clipping).
template <typename T>
void clip_weights(ParameterStore<T>& store, const std::set<std::string>& names,
                  T c) {
  if (!(c > T(0))) throw InvalidArgument("clip_weights: c must be > 0");
  for (const std::string& name : names) {
    Tensor<T>& value = store.value(name);
    for (T& v : value.data) v = std::clamp(v, -c, c);
  }
}

}  // namespace textsynth
