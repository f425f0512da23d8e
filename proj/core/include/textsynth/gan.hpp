// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "textsynth/checkpoint.hpp"
#include "textsynth/font.hpp"
#include "textsynth/graph.hpp"
#include "textsynth/image.hpp"
#include "textsynth/optimizer.hpp"

namespace textsynth {

// One appearance-training example: a background region crop x with the
// binary text mask m aligned to it; the ground-truth transcript and char
// boxes ride along inside the mask.
struct TrainingSample {
  RasterImage x;  // RGB region crop
  TextMask m;     // same spatial dimensions as x
};

// Real scene-text crops Y, letterboxed (never stretched) to the training
// resolution at load time.
struct RealCropSet {
  std::vector<RasterImage> crops;  // each size x size x 3

  static RealCropSet load_directory(const std::string& dir, int size);
  static RealCropSet from_images(const std::vector<RasterImage>& images,
                                 int size);
};

// Per-batch scalar loss terms. l_d and l_g are the pixel-level
// Wasserstein terms, l_f the feature-level term, l_s the semantic
// consistency term; all are the quantities being minimized by their
// respective nets.  wasserstein = mean D(real) - mean D(fake) = -l_d.
struct LossReport {
  double l_d = 0;
  double l_g = 0;
  double l_f = 0;
  double l_s = 0;
  double wasserstein = 0;
};

struct GanConfig {
  double scale = 0.25;       // channel multiplier s: 1, 1/2 or 1/4
  int input_size = 64;       // crop side fed to G; multiple of 4
  int batch_size = 16;
  int critic_steps = 5;      // critic updates per generator update
  float learning_rate = 5e-5f;  // critic step size
  float generator_lr = 0.f;     // 0: use learning_rate
  float rms_decay = 0.9f;
  float clip_c = 0.01f;      // critic weight clip bound
  double lambda_s = 1.0;     // semantic consistency weight
  bool generator_feature_term = false;  // optionally add -mean D_F(F(.)) to G
  int iterations = 2000;     // generator steps
  int checkpoint_every = 500;
  int char_size = 24;        // char crop side fed to R
  std::string alphabet =
      "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ";  // recognizer classes
  uint64_t seed = 1;
  std::string checkpoint_path;  // empty: no checkpoints
  std::string log_path;         // empty: no log file
};

// Channel count after applying the scale factor (never below 1).
int scaled_channels(int base, double scale);

// Pixel-level masked composition: out = gx * m + x * (1 - m). The mask
// must be binary and all shapes must agree; where m = 0 the output is
// bit-identical to x.
RasterImage compose_masked(const RasterImage& gx,
                           const std::vector<uint8_t>& mask,
                           const RasterImage& x);

// Tensor packing helpers shared by training and inference.
Tensor<float> image_to_tensor(const RasterImage& image);   // [1,C,H,W]
RasterImage tensor_to_image(const Tensor<float>& t, int sample = 0);
RasterImage resize_bilinear(const RasterImage& image, int w, int h);

// A packed training batch at the network resolution.
struct GanBatch {
  Tensor<float> x;             // [N,3,S,S]
  Tensor<float> m3;            // [N,3,S,S] mask replicated over channels
  Tensor<float> one_minus_m3;  // [N,3,S,S]
  std::vector<CropBox> char_boxes;  // into batch samples
  Tensor<float> onehot;        // [num_chars, alphabet size]
};

// Resizes samples to `size`, rescales char boxes, encodes targets.
// Characters outside the alphabet (e.g. spaces) carry no box; every
// sample must retain at least one.
GanBatch pack_batch(const std::vector<TrainingSample>& samples,
                    const std::vector<size_t>& indices, int size,
                    const std::string& alphabet);

// Trains G (the translation network) and D (4 stride-2 convolutions to a
// spatial-mean critic) with the feature critic D_F over the frozen
// recognizer trunk F. Parameters live in two stores: the trainable GAN
// store (G/, D/, DF/) and the frozen recognizer store (R/).
class GanTrainer {
public:
  GanTrainer(GanConfig config, ParameterStore<float>* gan_store,
             ParameterStore<float>* recognizer_store);

  // Registers freshly initialized G/D/DF parameters.
  static void init_params(ParameterStore<float>& store, const GanConfig& cfg,
                          Rng& rng);

  static std::set<std::string> generator_params(const ParameterStore<float>&);
  static std::set<std::string> critic_params(const ParameterStore<float>&);

  // G forward + masked composition on a packed batch.
  Tensor<float> compose_forward(const GanBatch& batch);

  // One critic update on fixed composed/real tensors: minimizes
  // (mean D(fake) - mean D(real)) + (mean D_F(F(fake)) - mean D_F(F(real)))
  // then clips D and D_F weights to [-c, c]. G and R are untouched.
  LossReport discriminator_step(const Tensor<float>& composed,
                                const Tensor<float>& real);

  // One generator update: minimizes -mean D(G_m(x)) + lambda_s * L_S
  // (optionally adding the feature term). D, D_F, F and R are untouched.
  LossReport generator_step(const GanBatch& batch);

  // Forward-only loss evaluations (oracles and logging).
  double eval_feature_loss(const Tensor<float>& composed,
                           const Tensor<float>& real);
  double eval_semantic_loss(const Tensor<float>& composed,
                            const std::vector<CropBox>& boxes,
                            const Tensor<float>& onehot);
  double eval_wasserstein(const Tensor<float>& composed,
                          const Tensor<float>& real);

  const GanConfig& config() const { return config_; }
  Rng& rng() { return rng_; }

private:
  Tensor<float> slice_mask(const GanBatch& batch) const;

  GanConfig config_;
  ParameterStore<float>* store_;
  ParameterStore<float>* rstore_;
  RmsProp<float> critic_opt_;
  RmsProp<float> gen_opt_;
  Rng rng_;
};

// Feature-level critic separation on fixed batches, forward only:
// mean D_F(F(composed)) - mean D_F(F(real)).
double feature_loss(ParameterStore<float>& gan_store,
                    ParameterStore<float>& recognizer_store,
                    const Tensor<float>& composed, const Tensor<float>& real,
                    int char_size);

// Semantic consistency: mean softmax cross entropy of the frozen recognizer
// over per-character crops of the composed batch.
double semantic_loss(ParameterStore<float>& recognizer_store,
                     const Tensor<float>& composed,
                     const std::vector<CropBox>& boxes,
                     const Tensor<float>& onehot, int char_size);

// Training driver: alternates critic_steps critic updates with one
// generator update, logs all four loss terms per iteration, checkpoints
// periodically, and aborts on divergence after restoring the last good
// checkpoint. Deterministic for a fixed config seed.
struct TrainResult {
  std::vector<LossReport> log;      // one entry per generator iteration
  double wasserstein_start = 0;     // after the first critic round
  double wasserstein_end = 0;
  int iterations_run = 0;
};

TrainResult train(const GanConfig& config, ParameterStore<float>& gan_store,
                  ParameterStore<float>& recognizer_store,
                  const std::vector<TrainingSample>& samples,
                  const RealCropSet& real);

// Applies the trained generator to one region crop at its original
// resolution: the crop is resized to the network input, translated, the
// text pixels are resampled back, and the masked composition keeps every m=0 pixel of the
// original crop bit-identical.
RasterImage infer_appearance(ParameterStore<float>& gan_store,
                             const GanConfig& config, const RasterImage& x,
                             const std::vector<uint8_t>& mask);

// Network builders (shared with tests and the recognizer pretrainer).
namespace nets {
// Encoder/residual/decoder translation network over a [N,4,H,W] input
// node; returns the
// [N,3,H,W] output node squashed to [0,1]. When `block_shapes` is given
// it receives the 7 block output shapes in order.
int build_generator(Graph<float>& g, int input, double scale,
                    std::vector<std::vector<int64_t>>* block_shapes = nullptr);
// Pixel critic: 4 stride-2 convolutions then a spatial mean -> [N].
int build_discriminator(Graph<float>& g, int input, double scale);
// Frozen recognizer trunk: 3 stride-2 convolutions + global average
// pooling -> pooled feature vector [N, 64].
int build_feature_extractor(Graph<float>& g, int input);
// 2-layer fully-connected critic on the pooled features -> [N].
int build_feature_discriminator(Graph<float>& g, int features);
// Recognizer logits over the alphabet -> [N, K]: the trunk's conv map
// flattened into a linear head (the pooled vector stays F's output) .
int build_recognizer(Graph<float>& g, int input, int num_classes);
// Spatial side of the trunk output for a given char crop size.
int recognizer_head_spatial(int char_size);

void init_generator(ParameterStore<float>& store, double scale, Rng& rng);
void init_discriminator(ParameterStore<float>& store, double scale, Rng& rng);
void init_feature_discriminator(ParameterStore<float>& store, Rng& rng);
void init_recognizer(ParameterStore<float>& store, int num_classes,
                     int char_size, Rng& rng);
}  // namespace nets

}  // namespace textsynth
