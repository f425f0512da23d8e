// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "textsynth/config.hpp"
#include "textsynth/corpus.hpp"
#include "textsynth/gan.hpp"
#include "textsynth/placement.hpp"
#include "textsynth/segmentation.hpp"

namespace textsynth {

// One embedded instance: the word quad with its transcript and where and
// how it was placed.
struct InstanceRecord {
  Quad quad;
  std::string transcript;
  int region_id = 0;
  std::string semantic_class;
  double score = 0;
  Homography homography;
};

// All annotations produced for one background image.
struct SynthesisRecord {
  std::string image_path;
  std::vector<InstanceRecord> instances;
};

// Immutable resources shared by all synthesis workers.
struct SynthesisResources {
  const SynthesisConfig* config = nullptr;
  const Corpus* corpus = nullptr;
  const std::vector<Font>* fonts = nullptr;
  ParameterStore<float>* generator = nullptr;  // loaded checkpoint
};

struct SynthesisOutput {
  RasterImage image;
  SynthesisRecord record;
  // The union of all placed text masks (for preservation checks).
  std::vector<uint8_t> text_mask;
  // Filled when config.dump_region_maps is set.
  std::optional<RegionMap> region_map;
};

// End-to-end single-image synthesis: region detection, candidate
// selection, per-instance text sampling, geometry placement, appearance
// inference and masked composition onto the running canvas. Zero
// candidates is not an error: the background passes through untouched.
SynthesisOutput synthesize_one(const RasterImage& background,
                               const SemanticMap& semantic_map,
                               const SynthesisResources& resources,
                               uint64_t seed);

// Serializes one line per instance: x1,y1,x2,y2,x3,y3,x4,y4,transcript
// with clockwise-from-top-left integer vertices (rounded half up).
void write_annotations(const SynthesisRecord& record, const std::string& path);

// Parses the annotation format back (the transcript is everything after
// the 8th comma).
std::vector<std::pair<std::array<std::array<int, 2>, 4>, std::string>>
parse_annotations(const std::string& path);

struct BatchSummary {
  int processed = 0;
  int failed = 0;
  std::vector<std::string> failures;  // "stem: reason"
  std::string manifest_path;
};

// Batch driver: pairs backgrounds with semantic maps by filename stem,
// derives one rng stream per stem, writes PNG + annotations + a
// tab-separated manifest (stem, instance count, classes used). Failures
// are recorded and skipped. Parallel workers produce byte-identical
// outputs to a sequential run.
BatchSummary batch_synthesize(const SynthesisConfig& config);

// Harvests (x, m) training pairs for the appearance network from the
// same region detection + geometry placement pipeline, without running
// the generator.
std::vector<TrainingSample> harvest_training_samples(
    const SynthesisConfig& config, int count);

}  // namespace textsynth
