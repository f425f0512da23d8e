// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#include "textsynth/recognizer.hpp"

#include <algorithm>
#include <numeric>

#include "textsynth/utf8.hpp"

namespace textsynth {

RasterImage render_char_crop(const Font& font, uint32_t codepoint,
                             const RecognizerConfig& cfg, Rng& rng) {
  std::string ch;
  utf8_append(ch, codepoint);
  const double jitter = 1.0 + rng.uniform(-cfg.scale_jitter, cfg.scale_jitter);
  const int px = std::max(8, int(std::lround(cfg.char_size * 0.75 * jitter)));
  TextMask mask = rasterize_text(ch, font, px);

  // Dark ink over a jittered light background gray.
  float bg = float(rng.uniform(0.5, 1.0));
  float fg = float(rng.uniform(0.0, 0.3));

  RasterImage crop(cfg.char_size, cfg.char_size, 3, bg);
  const PixelBox& box =
      mask.char_boxes.empty() ? PixelBox{0, 0, mask.width - 1, mask.height - 1}
                              : mask.char_boxes[0];
  int bw = box.width(), bh = box.height();
  // Near-centered placement, as produced by char-box crops downstream.
  int jx = std::max(1, cfg.char_size / 8);
  int jy = std::max(1, cfg.char_size / 8);
  int ox = std::clamp((cfg.char_size - bw) / 2 +
                          int(rng.uniform_index(uint64_t(2 * jx + 1))) - jx,
                      0, std::max(0, cfg.char_size - bw));
  int oy = std::clamp((cfg.char_size - bh) / 2 +
                          int(rng.uniform_index(uint64_t(2 * jy + 1))) - jy,
                      0, std::max(0, cfg.char_size - bh));
  for (int y = 0; y < bh && oy + y < cfg.char_size; ++y) {
    for (int x = 0; x < bw && ox + x < cfg.char_size; ++x) {
      if (!mask.at(box.x0 + x, box.y0 + y)) continue;
      for (int c = 0; c < 3; ++c) crop.at(ox + x, oy + y, c) = fg;
    }
  }
  return crop;
}

RecognizerResult pretrain_recognizer(const std::vector<std::string>& font_paths,
                                     const RecognizerConfig& config,
                                     ParameterStore<float>& store) {
  const std::vector<uint32_t> classes = utf8_decode(config.alphabet);
  if (classes.empty())
    throw InvalidArgument("pretrain_recognizer: empty alphabet");
  if (font_paths.size() < 2)
    throw InvalidArgument("pretrain_recognizer: need at least 2 fonts");
  const int K = int(classes.size());

  std::vector<Font> fonts;
  for (const std::string& path : font_paths) fonts.push_back(Font::load(path));

  Rng rng(config.seed);
  for (int k = 0; k < K; ++k) {
    std::string s;
    utf8_append(s, classes[size_t(k)]);
    for (const Font& font : fonts)
      if (!font.covers(s))
        throw Error("font " + font.path() + " lacks a glyph for class '" + s +
                    "'");
  }

  // Held-out set rendered up front; training batches are rendered fresh
  // every step, so the augmentation never repeats.
  struct Example {
    RasterImage crop;
    int label;
  };
  const int heldout_per = std::max(
      1, int(config.samples_per_class_per_font * config.heldout_fraction));
  std::vector<Example> heldout;
  for (int k = 0; k < K; ++k)
    for (const Font& font : fonts)
      for (int j = 0; j < heldout_per; ++j)
        heldout.push_back(
            {render_char_crop(font, classes[size_t(k)], config, rng), k});

  if (!store.has("R/c1_w"))
    nets::init_recognizer(store, K, config.char_size, rng);
  RmsProp<float> opt(
      [&store] {
        std::set<std::string> names;
        for (const auto& n : store.names())
          if (n.rfind("R/", 0) == 0) names.insert(n);
        return names;
      }(),
      config.learning_rate, config.rms_decay);

  const int cs = config.char_size;
  const int64_t crop_len = 3LL * cs * cs;

  auto heldout_accuracy = [&] {
    size_t correct = 0;
    const size_t chunk = 128;
    for (size_t start = 0; start < heldout.size(); start += chunk) {
      size_t count = std::min(chunk, heldout.size() - start);
      Tensor<float> x({int64_t(count), 3, cs, cs});
      for (size_t n = 0; n < count; ++n) {
        Tensor<float> one = image_to_tensor(heldout[start + n].crop);
        std::copy_n(one.data.data(), crop_len,
                    x.data.data() + int64_t(n) * crop_len);
      }
      Graph<float> g(&store);
      auto logits = nets::build_recognizer(g, g.constant(x, "x"), K);
      g.forward({});
      const Tensor<float>& out = g.value(logits);
      for (size_t n = 0; n < count; ++n) {
        int best = 0;
        for (int k = 1; k < K; ++k)
          if (out[n * size_t(K) + size_t(k)] > out[n * size_t(K) + size_t(best)])
            best = k;
        correct += best == heldout[start + n].label;
      }
    }
    return double(correct) / double(heldout.size());
  };

  const int steps_per_epoch = std::max(
      1, int(int64_t(K) * int64_t(fonts.size()) *
             config.samples_per_class_per_font / config.batch_size));
  RecognizerResult result;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    for (int step = 0; step < steps_per_epoch; ++step) {
      const int B = config.batch_size;
      Tensor<float> x({B, 3, cs, cs});
      Tensor<float> onehot({B, K});
      for (int n = 0; n < B; ++n) {
        int k = int(rng.uniform_index(uint64_t(K)));
        const Font& font = fonts[rng.uniform_index(fonts.size())];
        Tensor<float> one = image_to_tensor(
            render_char_crop(font, classes[size_t(k)], config, rng));
        std::copy_n(one.data.data(), crop_len,
                    x.data.data() + int64_t(n) * crop_len);
        onehot[size_t(int64_t(n) * K + k)] = 1.f;
      }
      store.zero_grads();
      Graph<float> g(&store);
      auto logits = nets::build_recognizer(g, g.constant(x, "x"), K);
      auto loss = g.softmax_cross_entropy(logits, g.constant(onehot, "gt"));
      g.forward({});
      g.backward(loss);
      opt.step(store);
    }
    result.epochs_run = epoch + 1;
    result.heldout_accuracy = heldout_accuracy();
    if (result.heldout_accuracy >= config.target_accuracy) break;
  }
  if (result.heldout_accuracy < config.min_accuracy)
    throw Error("pretrain_recognizer: held-out accuracy " +
                std::to_string(result.heldout_accuracy) +
                " below the minimum after " +
                std::to_string(result.epochs_run) + " epochs");
  return result;
}

std::vector<int> recognize(ParameterStore<float>& store,
                           const Tensor<float>& crops, int num_classes) {
  Graph<float> g(&store);
  auto logits = nets::build_recognizer(g, g.constant(crops, "x"), num_classes);
  g.forward({});
  const Tensor<float>& out = g.value(logits);
  std::vector<int> labels(size_t(crops.shape[0]));
  for (size_t n = 0; n < labels.size(); ++n) {
    int best = 0;
    for (int k = 1; k < num_classes; ++k)
      if (out[n * size_t(num_classes) + size_t(k)] >
          out[n * size_t(num_classes) + size_t(best)])
        best = k;
    labels[n] = best;
  }
  return labels;
}

}  // namespace textsynth
