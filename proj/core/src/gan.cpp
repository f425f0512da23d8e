// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#include "textsynth/gan.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "textsynth/utf8.hpp"

namespace textsynth {

int scaled_channels(int base, double scale) {
  return std::max(1, int(std::lround(base * scale)));
}

RasterImage compose_masked(const RasterImage& gx,
                           const std::vector<uint8_t>& mask,
                           const RasterImage& x) {
  if (gx.width != x.width || gx.height != x.height ||
      gx.channels != x.channels)
    throw InvalidArgument("compose_masked: image shapes differ");
  if (mask.size() != x.pixel_count())
    throw InvalidArgument("compose_masked: mask size mismatch");
  for (uint8_t v : mask)
    if (v > 1) throw InvalidArgument("compose_masked: mask is not binary");
  RasterImage out = x;
  for (size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;  // m=0 pixels stay bit-identical to x
    for (int c = 0; c < x.channels; ++c)
      out.data[i * x.channels + c] = gx.data[i * x.channels + c];
  }
  return out;
}

Tensor<float> image_to_tensor(const RasterImage& image) {
  Tensor<float> t({1, image.channels, image.height, image.width});
  const int64_t plane = int64_t(image.width) * image.height;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < image.channels; ++c)
        t[size_t(c * plane + y * image.width + x)] = image.at(x, y, c);
  return t;
}

RasterImage tensor_to_image(const Tensor<float>& t, int sample) {
  if (t.shape.size() != 4) throw InvalidArgument("tensor_to_image: rank-4 only");
  const int C = int(t.shape[1]), H = int(t.shape[2]), W = int(t.shape[3]);
  RasterImage img(W, H, C);
  const int64_t plane = int64_t(W) * H;
  const int64_t base = int64_t(sample) * C * plane;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < C; ++c)
        img.at(x, y, c) =
            std::clamp(t[size_t(base + c * plane + y * W + x)], 0.f, 1.f);
  return img;
}

RasterImage resize_bilinear(const RasterImage& image, int w, int h) {
  if (w == image.width && h == image.height) return image;
  RasterImage out(w, h, image.channels);
  std::vector<float> px(image.channels);
  for (int y = 0; y < h; ++y) {
    double sy = h > 1 ? double(y) * (image.height - 1) / (h - 1) : 0.0;
    for (int x = 0; x < w; ++x) {
      double sx = w > 1 ? double(x) * (image.width - 1) / (w - 1) : 0.0;
      bilinear_sample(image, sx, sy, px);
      for (int c = 0; c < image.channels; ++c) out.at(x, y, c) = px[c];
    }
  }
  return out;
}

RealCropSet RealCropSet::from_images(const std::vector<RasterImage>& images,
                                     int size) {
  RealCropSet set;
  for (const RasterImage& raw : images) {
    RasterImage rgb = to_rgb(raw);
    // Letterbox: fit the longer side, center on mid-gray.
    double s = std::min(double(size) / rgb.width, double(size) / rgb.height);
    int w = std::max(1, int(std::lround(rgb.width * s)));
    int h = std::max(1, int(std::lround(rgb.height * s)));
    RasterImage scaled = resize_bilinear(rgb, w, h);
    RasterImage canvas(size, size, 3, 0.5f);
    int ox = (size - w) / 2, oy = (size - h) / 2;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c)
          canvas.at(ox + x, oy + y, c) = scaled.at(x, y, c);
    set.crops.push_back(std::move(canvas));
  }
  if (set.crops.empty()) throw InvalidArgument("real crop set is empty");
  return set;
}

RealCropSet RealCropSet::load_directory(const std::string& dir, int size) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir))
    throw IoError("real crop directory not found: " + dir);
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg")
      files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no images in real crop directory: " + dir);
  std::vector<RasterImage> images;
  for (const std::string& f : files) images.push_back(load_image(f));
  return from_images(images, size);
}

GanBatch pack_batch(const std::vector<TrainingSample>& samples,
                    const std::vector<size_t>& indices, int size,
                    const std::string& alphabet) {
  if (indices.empty()) throw InvalidArgument("pack_batch: empty batch");
  const std::vector<uint32_t> alpha_cps = utf8_decode(alphabet);
  const int64_t N = int64_t(indices.size());
  GanBatch batch;
  batch.x = Tensor<float>::zeros({N, 3, size, size});
  batch.m3 = Tensor<float>::zeros({N, 3, size, size});
  batch.one_minus_m3 = Tensor<float>::zeros({N, 3, size, size});
  std::vector<std::pair<size_t, int>> char_classes;  // (box idx, class)

  const int64_t plane = int64_t(size) * size;
  for (int64_t n = 0; n < N; ++n) {
    const TrainingSample& sample = samples.at(indices[size_t(n)]);
    if (sample.x.width != sample.m.width || sample.x.height != sample.m.height)
      throw InvalidArgument("pack_batch: sample crop/mask size mismatch");
    RasterImage x = resize_bilinear(to_rgb(sample.x), size, size);
    RasterImage mf(sample.m.width, sample.m.height, 1);
    for (size_t i = 0; i < sample.m.mask.size(); ++i)
      mf.data[i] = float(sample.m.mask[i]);
    RasterImage m = resize_bilinear(mf, size, size);
    for (int64_t i = 0; i < plane; ++i) {
      float mv = m.data[size_t(i)] >= 0.5f ? 1.f : 0.f;
      for (int c = 0; c < 3; ++c) {
        batch.x[size_t(((n * 3 + c) * plane) + i)] = x.data[size_t(i * 3 + c)];
        batch.m3[size_t(((n * 3 + c) * plane) + i)] = mv;
        batch.one_minus_m3[size_t(((n * 3 + c) * plane) + i)] = 1.f - mv;
      }
    }
    // Char boxes scaled to the packed resolution.
    const double sx = double(size) / sample.m.width;
    const double sy = double(size) / sample.m.height;
    const std::vector<uint32_t> cps = utf8_decode(sample.m.transcript);
    size_t renderable = 0;
    size_t boxes_before = batch.char_boxes.size();
    for (uint32_t cp : cps) {
      if (cp == ' ') continue;  // spaces carry no char box
      if (renderable >= sample.m.char_boxes.size()) break;
      const PixelBox& cb = sample.m.char_boxes[renderable++];
      auto it = std::find(alpha_cps.begin(), alpha_cps.end(), cp);
      if (it == alpha_cps.end()) continue;  // not a recognizer class
      CropBox box;
      box.sample = int(n);
      box.x0 = std::clamp(cb.x0 * sx, 0.0, double(size - 1));
      box.y0 = std::clamp(cb.y0 * sy, 0.0, double(size - 1));
      box.x1 = std::clamp((cb.x1 + 1) * sx - 1, box.x0, double(size - 1));
      box.y1 = std::clamp((cb.y1 + 1) * sy - 1, box.y0, double(size - 1));
      batch.char_boxes.push_back(box);
      char_classes.push_back({batch.char_boxes.size() - 1,
                              int(it - alpha_cps.begin())});
    }
    if (batch.char_boxes.size() == boxes_before)
      throw InvalidArgument(
          "pack_batch: sample has no recognizable characters: \"" +
          sample.m.transcript + "\"");
  }
  batch.onehot =
      Tensor<float>::zeros({int64_t(char_classes.size()), int64_t(alpha_cps.size())});
  for (const auto& [box_idx, cls] : char_classes)
    batch.onehot[size_t(box_idx * alpha_cps.size() + cls)] = 1.f;
  return batch;
}

namespace nets {

namespace {

// He-style uniform limit for a convolution fan-in.
float conv_limit(int64_t fan_in) { return float(std::sqrt(3.0 / double(fan_in))); }

void add_conv(ParameterStore<float>& store, const std::string& name, int cout,
              int cin, int k, Rng& rng) {
  store.add(name + "_w", Tensor<float>::uniform_init(
                             {cout, cin, k, k}, conv_limit(int64_t(cin) * k * k), rng));
  store.add(name + "_b", Tensor<float>::zeros({cout}));
}

void add_deconv(ParameterStore<float>& store, const std::string& name, int cin,
                int cout, int k, Rng& rng) {
  store.add(name + "_w", Tensor<float>::uniform_init(
                             {cin, cout, k, k}, conv_limit(int64_t(cin) * k * k), rng));
  store.add(name + "_b", Tensor<float>::zeros({cout}));
}

void add_linear(ParameterStore<float>& store, const std::string& name, int din,
                int dout, Rng& rng) {
  store.add(name + "_w",
            Tensor<float>::uniform_init({din, dout}, conv_limit(din), rng));
  store.add(name + "_b", Tensor<float>::zeros({dout}));
}

constexpr float kAlpha = 0.2f;  // leaky-rectifier slope after blocks 1..6

}  // namespace

void init_generator(ParameterStore<float>& store, double scale, Rng& rng) {
  const int c64 = scaled_channels(64, scale);
  const int c128 = scaled_channels(128, scale);
  const int c256 = scaled_channels(256, scale);
  add_conv(store, "G/b1", c64, 4, 7, rng);
  add_conv(store, "G/b2", c128, c64, 3, rng);
  add_conv(store, "G/b3", c256, c128, 3, rng);
  add_conv(store, "G/b4r1c1", c256, c256, 3, rng);
  add_conv(store, "G/b4r1c2", c256, c256, 3, rng);
  add_conv(store, "G/b4r2c1", c256, c256, 3, rng);
  add_conv(store, "G/b4r2c2", c256, c256, 3, rng);
  add_deconv(store, "G/b5", c256, c128, 3, rng);
  add_deconv(store, "G/b6", c128, c64, 3, rng);
  add_deconv(store, "G/b7", c64, 3, 7, rng);
}

int build_generator(Graph<float>& g, int input, double scale,
                    std::vector<std::vector<int64_t>>* block_shapes) {
  (void)scale;
  auto conv = [&](int x, const std::string& name, int stride, int pad) {
    return g.conv2d(x, g.param(name + "_w"), g.param(name + "_b"), stride, pad,
                    name);
  };
  auto deconv = [&](int x, const std::string& name, int stride, int pad,
                    int opad) {
    return g.conv_transpose2d(x, g.param(name + "_w"), g.param(name + "_b"),
                              stride, pad, opad, name);
  };
  auto note = [&](int node) {
    if (block_shapes) block_shapes->push_back(g.shape(node));
    return node;
  };
  int h = g.leaky_relu(note(conv(input, "G/b1", 1, 3)), kAlpha);  // same size
  h = g.leaky_relu(note(conv(h, "G/b2", 2, 1)), kAlpha);          // /2
  h = g.leaky_relu(note(conv(h, "G/b3", 2, 1)), kAlpha);          // /4
  for (const char* block : {"G/b4r1", "G/b4r2"}) {                // residual x2
    int inner = g.leaky_relu(conv(h, std::string(block) + "c1", 1, 1), kAlpha);
    inner = conv(inner, std::string(block) + "c2", 1, 1);
    h = g.leaky_relu(g.add(h, inner, std::string(block) + "_skip"), kAlpha);
  }
  note(h);                                                        // block 4
  h = g.leaky_relu(note(deconv(h, "G/b5", 2, 1, 1)), kAlpha);     // x2
  h = g.leaky_relu(note(deconv(h, "G/b6", 2, 1, 1)), kAlpha);     // x4
  return g.logistic(note(deconv(h, "G/b7", 1, 3, 0)), "G/out");   // [0,1]
}

void init_discriminator(ParameterStore<float>& store, double scale, Rng& rng) {
  add_conv(store, "D/c1", scaled_channels(64, scale), 3, 3, rng);
  add_conv(store, "D/c2", scaled_channels(128, scale),
           scaled_channels(64, scale), 3, rng);
  add_conv(store, "D/c3", scaled_channels(256, scale),
           scaled_channels(128, scale), 3, rng);
  add_conv(store, "D/c4", scaled_channels(512, scale),
           scaled_channels(256, scale), 3, rng);
}

int build_discriminator(Graph<float>& g, int input, double scale) {
  (void)scale;
  int h = input;
  for (const char* name : {"D/c1", "D/c2", "D/c3", "D/c4"}) {
    h = g.leaky_relu(g.conv2d(h, g.param(std::string(name) + "_w"),
                              g.param(std::string(name) + "_b"), 2, 1, name),
                     kAlpha);
  }
  return g.sample_mean(h, "D/critic");  // unsquashed scalar per sample
}

int recognizer_head_spatial(int char_size) {
  int n = char_size;
  for (int i = 0; i < 3; ++i) n = (n + 2 - 3) / 2 + 1;  // 3x3 conv, stride 2
  return n;
}

void init_recognizer(ParameterStore<float>& store, int num_classes,
                     int char_size, Rng& rng) {
  add_conv(store, "R/c1", 16, 3, 3, rng);
  add_conv(store, "R/c2", 32, 16, 3, rng);
  add_conv(store, "R/c3", 64, 32, 3, rng);
  int spatial = recognizer_head_spatial(char_size);
  add_linear(store, "R/fc", 64 * spatial * spatial, num_classes, rng);
}

namespace {

int recognizer_trunk(Graph<float>& g, int input) {
  int h = input;
  for (const char* name : {"R/c1", "R/c2", "R/c3"}) {
    h = g.leaky_relu(g.conv2d(h, g.param(std::string(name) + "_w"),
                              g.param(std::string(name) + "_b"), 2, 1, name),
                     kAlpha);
  }
  return h;
}

}  // namespace

int build_feature_extractor(Graph<float>& g, int input) {
  return g.global_avg_pool(recognizer_trunk(g, input), "R/features");  // [N,64]
}

int build_recognizer(Graph<float>& g, int input, int num_classes) {
  (void)num_classes;
  int h = g.flatten(recognizer_trunk(g, input), "R/flat");
  return g.linear(h, g.param("R/fc_w"), g.param("R/fc_b"), "R/logits");
}

void init_feature_discriminator(ParameterStore<float>& store, Rng& rng) {
  add_linear(store, "DF/fc1", 64, 64, rng);
  add_linear(store, "DF/fc2", 64, 1, rng);
}

int build_feature_discriminator(Graph<float>& g, int features) {
  int h = g.leaky_relu(
      g.linear(features, g.param("DF/fc1_w"), g.param("DF/fc1_b"), "DF/fc1"),
      kAlpha);
  h = g.linear(h, g.param("DF/fc2_w"), g.param("DF/fc2_b"), "DF/fc2");
  return g.sample_mean(h, "DF/critic");  // [N,1] -> [N]
}

}  // namespace nets

namespace {

std::set<std::string> params_with_prefix(const ParameterStore<float>& store,
                                         const std::string& prefix) {
  std::set<std::string> out;
  for (const auto& name : store.names())
    if (name.rfind(prefix, 0) == 0) out.insert(name);
  return out;
}

// Bridges two stores into one graph: GAN params plus frozen R params.
// Copies R entries into the GAN store namespace once at construction.
void ensure_recognizer_visible(ParameterStore<float>& gan,
                               ParameterStore<float>& recognizer) {
  for (const auto& name : recognizer.names()) {
    if (!gan.has(name)) gan.add(name, recognizer.value(name));
  }
}

}  // namespace

GanTrainer::GanTrainer(GanConfig config, ParameterStore<float>* gan_store,
                       ParameterStore<float>* recognizer_store)
    : config_(std::move(config)),
      store_(gan_store),
      rstore_(recognizer_store),
      critic_opt_(
          [&] {
            ensure_recognizer_visible(*gan_store, *recognizer_store);
            auto names = params_with_prefix(*gan_store, "D/");
            auto df = params_with_prefix(*gan_store, "DF/");
            names.insert(df.begin(), df.end());
            return names;
          }(),
          config_.learning_rate, config_.rms_decay),
      gen_opt_(params_with_prefix(*gan_store, "G/"),
               config_.generator_lr > 0 ? config_.generator_lr
                                        : config_.learning_rate,
               config_.rms_decay),
      rng_(config_.seed) {
  if (config_.input_size % 4 != 0 || config_.input_size < 8)
    throw InvalidArgument("GanConfig: input_size must be a multiple of 4, >= 8");
}

void GanTrainer::init_params(ParameterStore<float>& store,
                             const GanConfig& cfg, Rng& rng) {
  nets::init_generator(store, cfg.scale, rng);
  nets::init_discriminator(store, cfg.scale, rng);
  nets::init_feature_discriminator(store, rng);
}

std::set<std::string> GanTrainer::generator_params(
    const ParameterStore<float>& store) {
  return params_with_prefix(store, "G/");
}

std::set<std::string> GanTrainer::critic_params(
    const ParameterStore<float>& store) {
  auto names = params_with_prefix(store, "D/");
  auto df = params_with_prefix(store, "DF/");
  names.insert(df.begin(), df.end());
  return names;
}

Tensor<float> GanTrainer::compose_forward(const GanBatch& batch) {
  Graph<float> g(store_);
  auto x = g.constant(batch.x, "x");
  auto m3 = g.constant(batch.m3, "m3");
  auto inv = g.constant(batch.one_minus_m3, "one_minus_m");
  auto m1 = g.constant(slice_mask(batch), "m1");
  auto gin = g.concat_channels(x, m1, "G/in");
  auto gout = nets::build_generator(g, gin, config_.scale);
  auto composed = g.add(g.mul(gout, m3), g.mul(x, inv), "composed");
  g.forward({});
  return g.value(composed);
}

LossReport GanTrainer::discriminator_step(const Tensor<float>& composed,
                                          const Tensor<float>& real) {
  if (composed.shape != real.shape)
    throw InvalidArgument("discriminator_step: batch shapes differ");
  store_->zero_grads();
  Graph<float> g(store_);
  auto fake_in = g.constant(composed, "fake");
  auto real_in = g.constant(real, "real");
  auto d_fake = g.reduce_mean(nets::build_discriminator(g, fake_in, config_.scale));
  auto d_real = g.reduce_mean(nets::build_discriminator(g, real_in, config_.scale));
  auto l_d = g.sub(d_fake, d_real, "L_D");
  auto f_fake = nets::build_feature_extractor(g, fake_in);
  auto f_real = nets::build_feature_extractor(g, real_in);
  auto df_fake = g.reduce_mean(nets::build_feature_discriminator(g, f_fake));
  auto df_real = g.reduce_mean(nets::build_feature_discriminator(g, f_real));
  auto l_f = g.sub(df_fake, df_real, "L_F");
  auto total = g.add(l_d, l_f, "critic_loss");
  g.forward({});
  g.backward(total);
  critic_opt_.step(*store_);
  clip_weights(*store_, critic_params(*store_), config_.clip_c);

  LossReport report;
  report.l_d = double(g.value(l_d)[0]);
  report.l_f = double(g.value(l_f)[0]);
  report.wasserstein = -report.l_d;
  if (!std::isfinite(report.l_d) || !std::isfinite(report.l_f))
    throw NumericError("discriminator_step: non-finite loss");
  return report;
}

LossReport GanTrainer::generator_step(const GanBatch& batch) {
  store_->zero_grads();
  Graph<float> g(store_);
  auto x = g.constant(batch.x, "x");
  auto m3 = g.constant(batch.m3, "m3");
  auto inv = g.constant(batch.one_minus_m3, "one_minus_m");
  auto m1 = g.constant(slice_mask(batch), "m1");
  auto gin = g.concat_channels(x, m1, "G/in");
  auto gout = nets::build_generator(g, gin, config_.scale);
  auto composed = g.add(g.mul(gout, m3), g.mul(x, inv), "composed");
  auto d_fake = g.reduce_mean(nets::build_discriminator(g, composed, config_.scale));
  auto l_g = g.scale(d_fake, -1.f, "L_G");
  int total = l_g;
  int l_s = -1;
  if (!batch.char_boxes.empty() && config_.lambda_s != 0) {
    auto crops = g.crop_resize(composed, batch.char_boxes, config_.char_size,
                               config_.char_size, "char_crops");
    auto logits = nets::build_recognizer(g, crops, int(batch.onehot.shape[1]));
    l_s = g.softmax_cross_entropy(logits, g.constant(batch.onehot, "gt"), "L_S");
    total = g.add(total, g.scale(l_s, float(config_.lambda_s)), "gen_loss");
  }
  if (config_.generator_feature_term) {
    auto feats = nets::build_feature_extractor(g, composed);
    auto df = g.reduce_mean(nets::build_feature_discriminator(g, feats));
    total = g.add(total, g.scale(df, -1.f), "gen_loss_feat");
  }
  g.forward({});
  g.backward(total);
  gen_opt_.step(*store_);

  LossReport report;
  report.l_g = double(g.value(l_g)[0]);
  if (l_s >= 0) report.l_s = double(g.value(l_s)[0]);
  if (!std::isfinite(report.l_g) || !std::isfinite(report.l_s))
    throw NumericError("generator_step: non-finite loss");
  return report;
}

Tensor<float> GanTrainer::slice_mask(const GanBatch& batch) const {
  // [N,3,S,S] -> [N,1,S,S]: the three replicated channels are identical.
  const int64_t N = batch.m3.shape[0], S = batch.m3.shape[2];
  Tensor<float> m({N, 1, S, S});
  const int64_t plane = S * S;
  for (int64_t n = 0; n < N; ++n)
    std::copy_n(batch.m3.data.data() + n * 3 * plane, plane,
                m.data.data() + n * plane);
  return m;
}

double GanTrainer::eval_feature_loss(const Tensor<float>& composed,
                                     const Tensor<float>& real) {
  return feature_loss(*store_, *rstore_, composed, real, config_.char_size);
}

double GanTrainer::eval_semantic_loss(const Tensor<float>& composed,
                                      const std::vector<CropBox>& boxes,
                                      const Tensor<float>& onehot) {
  return semantic_loss(*store_, composed, boxes, onehot, config_.char_size);
}

double GanTrainer::eval_wasserstein(const Tensor<float>& composed,
                                    const Tensor<float>& real) {
  Graph<float> g(store_);
  auto d_fake = g.reduce_mean(
      nets::build_discriminator(g, g.constant(composed, "fake"), config_.scale));
  auto d_real = g.reduce_mean(
      nets::build_discriminator(g, g.constant(real, "real"), config_.scale));
  auto w = g.sub(d_real, d_fake, "wasserstein");
  g.forward({});
  return double(g.value(w)[0]);
}

double feature_loss(ParameterStore<float>& gan_store,
                    ParameterStore<float>& recognizer_store,
                    const Tensor<float>& composed, const Tensor<float>& real,
                    int char_size) {
  (void)char_size;
  if (composed.shape[0] < 1 || real.shape[0] < 1)
    throw InvalidArgument("feature_loss: empty batch");
  ensure_recognizer_visible(gan_store, recognizer_store);
  Graph<float> g(&gan_store);
  auto f_fake = nets::build_feature_extractor(g, g.constant(composed, "fake"));
  auto f_real = nets::build_feature_extractor(g, g.constant(real, "real"));
  auto df_fake = g.reduce_mean(nets::build_feature_discriminator(g, f_fake));
  auto df_real = g.reduce_mean(nets::build_feature_discriminator(g, f_real));
  auto l_f = g.sub(df_fake, df_real, "L_F");
  g.forward({});
  return double(g.value(l_f)[0]);
}

double semantic_loss(ParameterStore<float>& recognizer_store,
                     const Tensor<float>& composed,
                     const std::vector<CropBox>& boxes,
                     const Tensor<float>& onehot, int char_size) {
  if (boxes.empty()) throw InvalidArgument("semantic_loss: no char boxes");
  Graph<float> g(&recognizer_store);
  auto crops = g.crop_resize(g.constant(composed, "composed"), boxes,
                             char_size, char_size, "char_crops");
  auto logits = nets::build_recognizer(g, crops, int(onehot.shape[1]));
  auto l_s = g.softmax_cross_entropy(logits, g.constant(onehot, "gt"), "L_S");
  g.forward({});
  return double(g.value(l_s)[0]);
}

TrainResult train(const GanConfig& config, ParameterStore<float>& gan_store,
                  ParameterStore<float>& recognizer_store,
                  const std::vector<TrainingSample>& samples,
                  const RealCropSet& real) {
  if (samples.empty()) throw InvalidArgument("train: no training samples");
  if (real.crops.empty()) throw InvalidArgument("train: empty real crop set");
  for (const RasterImage& crop : real.crops)
    if (crop.width != config.input_size || crop.height != config.input_size)
      throw InvalidArgument("train: real crops must match input_size");

  GanTrainer trainer(config, &gan_store, &recognizer_store);
  Rng& rng = trainer.rng();

  std::ofstream log_file;
  if (!config.log_path.empty()) {
    log_file.open(config.log_path, std::ios::trunc);
    if (!log_file) throw IoError("cannot write training log: " + config.log_path);
    log_file << "iteration,L_D,L_G,L_F,L_S,seconds\n";
  }

  auto pick_batch = [&](size_t pool) {
    std::vector<size_t> idx(size_t(config.batch_size));
    for (auto& i : idx) i = size_t(rng.uniform_index(pool));
    return idx;
  };
  auto real_tensor = [&](const std::vector<size_t>& idx) {
    Tensor<float> t({int64_t(idx.size()), 3, config.input_size, config.input_size});
    const int64_t sz = 3LL * config.input_size * config.input_size;
    for (size_t n = 0; n < idx.size(); ++n) {
      Tensor<float> one = image_to_tensor(real.crops[idx[n]]);
      std::copy_n(one.data.data(), sz, t.data.data() + int64_t(n) * sz);
    }
    return t;
  };

  TrainResult result;
  const auto t0 = std::chrono::steady_clock::now();
  std::string last_good;
  if (!config.checkpoint_path.empty()) {
    save_checkpoint(gan_store, config.checkpoint_path);
    last_good = config.checkpoint_path;
  }

  try {
    for (int iter = 0; iter < config.iterations; ++iter) {
      LossReport report;
      for (int k = 0; k < config.critic_steps; ++k) {
        GanBatch batch =
            pack_batch(samples, pick_batch(samples.size()), config.input_size,
                       config.alphabet);
        Tensor<float> composed = trainer.compose_forward(batch);
        Tensor<float> realb = real_tensor(pick_batch(real.crops.size()));
        LossReport critic = trainer.discriminator_step(composed, realb);
        report.l_d = critic.l_d;
        report.l_f = critic.l_f;
        report.wasserstein = critic.wasserstein;
      }
      GanBatch batch = pack_batch(samples, pick_batch(samples.size()),
                                  config.input_size, config.alphabet);
      LossReport gen = trainer.generator_step(batch);
      report.l_g = gen.l_g;
      report.l_s = gen.l_s;

      if (iter == 0) result.wasserstein_start = report.wasserstein;
      result.wasserstein_end = report.wasserstein;
      result.log.push_back(report);
      result.iterations_run = iter + 1;

      if (log_file) {
        double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        log_file << iter << ',' << report.l_d << ',' << report.l_g << ','
                 << report.l_f << ',' << report.l_s << ',' << secs << '\n';
      }
      if (!config.checkpoint_path.empty() && config.checkpoint_every > 0 &&
          (iter + 1) % config.checkpoint_every == 0) {
        save_checkpoint(gan_store, config.checkpoint_path);
      }
    }
  } catch (const NumericError& e) {
    if (!last_good.empty()) {
      load_checkpoint(gan_store, last_good);
      throw NumericError(std::string(e.what()) +
                         " (restored last good checkpoint: " + last_good + ")");
    }
    throw;
  }
  if (!config.checkpoint_path.empty())
    save_checkpoint(gan_store, config.checkpoint_path);
  return result;
}

RasterImage infer_appearance(ParameterStore<float>& gan_store,
                             const GanConfig& config, const RasterImage& x,
                             const std::vector<uint8_t>& mask) {
  if (mask.size() != x.pixel_count())
    throw InvalidArgument("infer_appearance: mask size mismatch");
  if (!gan_store.has("G/b1_w"))
    throw InvalidArgument("infer_appearance: generator parameters missing "
                          "(no checkpoint loaded)");
  const int S = config.input_size;
  RasterImage rgb = to_rgb(x);
  RasterImage x_small = resize_bilinear(rgb, S, S);
  RasterImage m_img(x.width, x.height, 1);
  for (size_t i = 0; i < mask.size(); ++i) m_img.data[i] = float(mask[i]);
  RasterImage m_small_f = resize_bilinear(m_img, S, S);

  Tensor<float> xt = image_to_tensor(x_small);
  Tensor<float> mt({1, 1, S, S});
  for (int64_t i = 0; i < int64_t(S) * S; ++i)
    mt[size_t(i)] = m_small_f.data[size_t(i)] >= 0.5f ? 1.f : 0.f;

  Graph<float> g(&gan_store);
  auto gin = g.concat_channels(g.constant(xt, "x"), g.constant(mt, "m"), "G/in");
  auto gout = nets::build_generator(g, gin, config.scale);
  g.forward({});
  RasterImage gen_small = tensor_to_image(g.value(gout));
  RasterImage gen_full = resize_bilinear(gen_small, x.width, x.height);

  // Masked composition at the original resolution: m = 0 pixels stay
  // bit-identical.
  return compose_masked(gen_full, mask, rgb);
}

}  // namespace textsynth
