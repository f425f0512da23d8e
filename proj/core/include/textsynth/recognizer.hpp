// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <string>
#include <vector>

#include "textsynth/gan.hpp"

namespace textsynth {

struct RecognizerConfig {
  std::string alphabet = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ";
  int char_size = 24;
  int samples_per_class_per_font = 40;
  double heldout_fraction = 0.15;
  int max_epochs = 40;
  double target_accuracy = 0.95;  // stop once the held-out set reaches this
  double min_accuracy = 0.80;     // below this at the epoch cap is an error
  float learning_rate = 1e-3f;
  float rms_decay = 0.9f;
  int batch_size = 64;
  double scale_jitter = 0.2;  // +-20% glyph size
  uint64_t seed = 1;
};

struct RecognizerResult {
  double heldout_accuracy = 0;
  int epochs_run = 0;
};

// Renders one training crop: a single character centered with random
// offset, size jitter and gray-level jitter, replicated to RGB.
RasterImage render_char_crop(const Font& font, uint32_t codepoint,
                             const RecognizerConfig& cfg, Rng& rng);

// Trains the recognizer on rendered single-character crops until the
// held-out accuracy reaches the target (or the epoch cap). Parameters are
// written into `store` under the R/ prefix; training failure (accuracy
// below min_accuracy at the cap) raises an error.
RecognizerResult pretrain_recognizer(const std::vector<std::string>& font_paths,
                                     const RecognizerConfig& config,
                                     ParameterStore<float>& store);

// Frozen-recognizer prediction for one char crop tensor [N,3,cs,cs]:
// argmax class index per sample.
std::vector<int> recognize(ParameterStore<float>& store,
                           const Tensor<float>& crops, int num_classes);

}  // namespace textsynth
