// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "textsynth/error.hpp"

namespace textsynth {

// Batch synthesis configuration. Loaded from a key = value file; every
// key can be overridden from the command line.
struct SynthesisConfig {
  // Paths.
  std::string backgrounds_dir;
  std::string semantic_maps_dir;
  std::string palette;
  std::string corpus;
  std::string fonts_dir;
  std::string generator_checkpoint;
  std::string recognizer_checkpoint;  // used by train-gan
  std::string real_crops_dir;         // used by train-gan
  std::string output_dir;

  // Contour segmentation.
  int superpixels = 300;  // for a 512x512 image, scaled by pixel count
  double compactness = 10.0;
  int slic_iterations = 10;
  double merge_delta_e = 8.0;

  // Candidate selection.
  std::set<std::string> whitelist = {"signboard", "building", "wall",
                                     "car",       "door",     "board"};
  double min_score = 0.6;
  double min_area_frac = 0.005;

  // Geometry.
  double max_perturb = 0.15;
  double margins = 0.05;
  double word_fraction = 0.7;  // word vs line sampling
  int max_chars = 16;
  int text_px_height = 64;  // nominal rasterization size before scaling

  // Limits.
  int max_instances = 15;  // hard cap 15 per background image
  int retries = 10;

  // Appearance network.
  double gan_scale = 0.25;
  int gan_input_size = 64;
  int gan_batch = 16;
  int gan_iterations = 2000;
  int gan_critic_steps = 5;
  double gan_lambda_s = 1.0;
  double gan_learning_rate = 5e-5;
  double gan_generator_lr = 0;  // 0: use gan_learning_rate
  double gan_clip_c = 0.01;
  int char_size = 24;
  std::string alphabet = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ";
  int train_samples = 256;  // (x, m) pairs harvested for train-gan

  bool dump_region_maps = false;  // write <stem>.regions.png debug dumps

  uint64_t seed = 1;
  int workers = 1;

  // Applies one textual override; throws on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);

  // Checks value ranges and (when `check_paths`) that every referenced
  // path exists. Returns human-readable problems, empty when valid.
  std::vector<std::string> validate(bool check_paths) const;
};

// Parses a config file of `key = value` lines ('#' comments allowed).
SynthesisConfig load_synthesis_config(const std::string& path);

// All recognized keys, for CLI registration.
std::vector<std::string> synthesis_config_keys();

}  // namespace textsynth
