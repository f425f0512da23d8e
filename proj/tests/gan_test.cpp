#include <doctest.h>

#include <cmath>
#include <fstream>

#include "test_util.hpp"
#include "textsynth/gan.hpp"
#include "textsynth/recognizer.hpp"

using namespace textsynth;

namespace {

RasterImage random_image(Rng& rng, int w, int h, int c = 3) {
  RasterImage img(w, h, c);
  for (float& v : img.data) v = float(rng.uniform());
  return img;
}

std::vector<uint8_t> random_mask(Rng& rng, int w, int h, double p = 0.3) {
  std::vector<uint8_t> m(size_t(w) * h);
  for (auto& v : m) v = rng.bernoulli(p);
  return m;
}

Tensor<float> random_batch(Rng& rng, int n, int size) {
  Tensor<float> t({n, 3, size, size});
  for (float& v : t.data) v = float(rng.uniform());
  return t;
}

// Minimal stores for a tiny GAN at 16x16 scale 1/4.
struct TinyGan {
  GanConfig cfg;
  ParameterStore<float> store;
  ParameterStore<float> rstore;

  explicit TinyGan(uint64_t seed = 3, int input = 16) {
    cfg.scale = 0.25;
    cfg.input_size = input;
    cfg.batch_size = 4;
    cfg.char_size = 12;
    cfg.alphabet = "ABC";
    cfg.seed = seed;
    Rng rng(seed);
    GanTrainer::init_params(store, cfg, rng);
    nets::init_recognizer(rstore, 3, cfg.char_size, rng);
  }
};

// A simple synthetic training sample: flat background with one rendered
// character worth of mask.
TrainingSample make_sample(Rng& rng, const Font& font, const char* text,
                           int size) {
  TrainingSample s;
  s.x = RasterImage(size, size, 3, float(rng.uniform(0.2, 0.8)));
  TextMask glyph = rasterize_text(text, font, std::max(8, size / 2));
  // Paste the glyph mask centered into a size x size mask.
  TextMask m;
  m.width = size;
  m.height = size;
  m.mask.assign(size_t(size) * size, 0);
  m.transcript = text;
  m.px_height = glyph.px_height;
  int ox = std::max(0, (size - glyph.width) / 2);
  int oy = std::max(0, (size - glyph.height) / 2);
  for (int y = 0; y < glyph.height && oy + y < size; ++y)
    for (int x = 0; x < glyph.width && ox + x < size; ++x)
      if (glyph.at(x, y)) m.mask[size_t(oy + y) * size + ox + x] = 1;
  for (const PixelBox& b : glyph.char_boxes) {
    PixelBox shifted{std::min(b.x0 + ox, size - 1), std::min(b.y0 + oy, size - 1),
                     std::min(b.x1 + ox, size - 1), std::min(b.y1 + oy, size - 1)};
    m.char_boxes.push_back(shifted);
  }
  m.baseline_y = std::min(glyph.baseline_y + oy, size - 1);
  s.m = m;
  return s;
}

}  // namespace

TEST_CASE("compose_masked: zero mask reproduces x bit-exactly") {
  Rng rng(1);
  RasterImage x = random_image(rng, 8, 6);
  RasterImage gx = random_image(rng, 8, 6);
  std::vector<uint8_t> m(48, 0);
  RasterImage out = compose_masked(gx, m, x);
  CHECK(out.data == x.data);
}

TEST_CASE("compose_masked: all-ones mask reproduces gx bit-exactly") {
  Rng rng(2);
  RasterImage x = random_image(rng, 8, 6);
  RasterImage gx = random_image(rng, 8, 6);
  std::vector<uint8_t> m(48, 1);
  RasterImage out = compose_masked(gx, m, x);
  CHECK(out.data == gx.data);
}

TEST_CASE("compose_masked: checkerboard matches the per-pixel formula") {
  Rng rng(3);
  RasterImage x = random_image(rng, 9, 7);
  RasterImage gx = random_image(rng, 9, 7);
  std::vector<uint8_t> m(63);
  for (int y = 0; y < 7; ++y)
    for (int xx = 0; xx < 9; ++xx) m[size_t(y) * 9 + xx] = (xx + y) % 2;
  RasterImage out = compose_masked(gx, m, x);
  for (int y = 0; y < 7; ++y)
    for (int xx = 0; xx < 9; ++xx)
      for (int c = 0; c < 3; ++c) {
        float expect = m[size_t(y) * 9 + xx] ? gx.at(xx, y, c) : x.at(xx, y, c);
        CHECK(out.at(xx, y, c) == expect);
      }
}

TEST_CASE("compose_masked: rejects shape mismatch and non-binary masks") {
  RasterImage x(4, 4, 3, 0.5f), gx(4, 5, 3, 0.5f);
  std::vector<uint8_t> m(16, 0);
  CHECK_THROWS_AS(compose_masked(gx, m, x), InvalidArgument);
  RasterImage gx2(4, 4, 3, 0.5f);
  m[3] = 2;
  CHECK_THROWS_AS(compose_masked(gx2, m, x), InvalidArgument);
}

TEST_CASE("feature_loss: identical batches give exactly zero") {
  TinyGan gan;
  Rng rng(5);
  Tensor<float> batch = random_batch(rng, 3, 16);
  double lf = feature_loss(gan.store, gan.rstore, batch, batch, 12);
  CHECK(lf == 0.0);
}

TEST_CASE("feature_loss: constant feature critic cancels out") {
  TinyGan gan;
  // Zero both DF layers except the final bias: D_F(.) == bias, constant.
  gan.store.value("DF/fc1_w").fill(0.f);
  gan.store.value("DF/fc1_b").fill(0.f);
  gan.store.value("DF/fc2_w").fill(0.f);
  gan.store.value("DF/fc2_b").fill(1.37f);
  Rng rng(6);
  Tensor<float> fake = random_batch(rng, 4, 16);
  Tensor<float> real = random_batch(rng, 4, 16);
  double lf = feature_loss(gan.store, gan.rstore, fake, real, 12);
  CHECK(std::abs(lf) < 1e-6);
}

TEST_CASE("feature_loss: equals the per-sample critic mean difference") {
  TinyGan gan;
  Rng rng(7);
  Tensor<float> fake = random_batch(rng, 3, 16);
  Tensor<float> real = random_batch(rng, 2, 16);
  double lf = feature_loss(gan.store, gan.rstore, fake, real, 12);

  // Independent re-evaluation: run each sample through F and D_F alone.
  auto critic_value = [&](const Tensor<float>& batch, int64_t n) {
    Tensor<float> one({1, 3, 16, 16});
    std::copy_n(batch.data.data() + n * 3 * 16 * 16, 3 * 16 * 16,
                one.data.data());
    Graph<float> g(&gan.store);
    auto f = nets::build_feature_extractor(g, g.constant(one, "x"));
    auto d = nets::build_feature_discriminator(g, f);
    g.forward({});
    return double(g.value(d)[0]);
  };
  double mean_fake = (critic_value(fake, 0) + critic_value(fake, 1) +
                      critic_value(fake, 2)) / 3.0;
  double mean_real = (critic_value(real, 0) + critic_value(real, 1)) / 2.0;
  CHECK(lf == doctest::Approx(mean_fake - mean_real).epsilon(1e-5));
}

TEST_CASE("feature_loss: empty batch rejected") {
  TinyGan gan;
  Tensor<float> empty({0, 3, 16, 16});
  Tensor<float> ok({1, 3, 16, 16});
  CHECK_THROWS_AS(feature_loss(gan.store, gan.rstore, empty, ok, 12),
                  InvalidArgument);
}

TEST_CASE("semantic_loss: a saturated recognizer on the right class is ~0") {
  TinyGan gan;
  // Constant logits: zero trunk and fc weights, huge bias on class 0.
  for (const char* name : {"R/c1_w", "R/c1_b", "R/c2_w", "R/c2_b", "R/c3_w",
                           "R/c3_b", "R/fc_w"})
    gan.rstore.value(name).fill(0.f);
  gan.rstore.value("R/fc_b").data = {40.f, 0.f, 0.f};
  Rng rng(8);
  Tensor<float> composed = random_batch(rng, 2, 16);
  std::vector<CropBox> boxes = {{0, 1, 1, 9, 9}, {1, 2, 2, 11, 11}};
  Tensor<float> onehot({2, 3});
  onehot[0] = 1.f;  // both chars are class 0
  onehot[3] = 1.f;
  double ls = semantic_loss(gan.rstore, composed, boxes, onehot, 12);
  CHECK(ls < 1e-6);
}

TEST_CASE("semantic_loss: uniform recognizer gives ln K per character") {
  TinyGan gan;
  for (const auto& name : gan.rstore.names()) gan.rstore.value(name).fill(0.f);
  Rng rng(9);
  Tensor<float> composed = random_batch(rng, 1, 16);
  std::vector<CropBox> boxes = {{0, 0, 0, 15, 15}};
  Tensor<float> onehot({1, 3});
  onehot[1] = 1.f;
  double ls = semantic_loss(gan.rstore, composed, boxes, onehot, 12);
  CHECK(ls == doctest::Approx(std::log(3.0)).epsilon(1e-6));
}

TEST_CASE("semantic_loss: scripted probabilities reproduce the formula") {
  // Constant logits log([0.5, 0.25, 0.25]): softmax returns exactly these
  // probabilities. Two chars with true classes 0 and 1:
  // loss = -(ln 0.5 + ln 0.25)/2.
  TinyGan gan;
  for (const char* name : {"R/c1_w", "R/c1_b", "R/c2_w", "R/c2_b", "R/c3_w",
                           "R/c3_b", "R/fc_w"})
    gan.rstore.value(name).fill(0.f);
  gan.rstore.value("R/fc_b").data = {float(std::log(0.5)),
                                     float(std::log(0.25)),
                                     float(std::log(0.25))};
  Rng rng(10);
  Tensor<float> composed = random_batch(rng, 2, 16);
  std::vector<CropBox> boxes = {{0, 1, 1, 10, 10}, {1, 1, 1, 10, 10}};
  Tensor<float> onehot({2, 3});
  onehot[0] = 1.f;      // char 1: class 0, p = 0.5
  onehot[3 + 1] = 1.f;  // char 2: class 1, p = 0.25
  double ls = semantic_loss(gan.rstore, composed, boxes, onehot, 12);
  double expect = -(std::log(0.5) + std::log(0.25)) / 2.0;
  CHECK(ls == doctest::Approx(expect).epsilon(1e-5));
}

TEST_CASE("semantic_loss: char box outside the crop is rejected") {
  TinyGan gan;
  Rng rng(11);
  Tensor<float> composed = random_batch(rng, 1, 16);
  std::vector<CropBox> boxes = {{0, 4, 4, 18, 9}};  // x1 beyond 15
  Tensor<float> onehot({1, 3});
  onehot[0] = 1.f;
  CHECK_THROWS_AS(semantic_loss(gan.rstore, composed, boxes, onehot, 12),
                  InvalidArgument);
}

TEST_CASE("discriminator_step: clips weights, leaves G and R untouched") {
  TinyGan gan;
  GanTrainer trainer(gan.cfg, &gan.store, &gan.rstore);
  Rng rng(12);
  Tensor<float> fake = random_batch(rng, 4, 16);
  Tensor<float> real = random_batch(rng, 4, 16);

  auto g_before = gan.store.value("G/b1_w").data;
  auto r_before = gan.store.value("R/c1_w").data;
  std::string r_ckpt_before = checkpoint_bytes(gan.rstore);

  // Oracle: evaluate the loss terms at the pre-step parameters.
  double w_before = trainer.eval_wasserstein(fake, real);
  double lf_before = trainer.eval_feature_loss(fake, real);

  LossReport report = trainer.discriminator_step(fake, real);
  CHECK(report.l_d == doctest::Approx(-w_before).epsilon(1e-6));
  CHECK(report.l_f == doctest::Approx(lf_before).epsilon(1e-6));
  CHECK(report.wasserstein == doctest::Approx(w_before).epsilon(1e-6));

  for (const auto& name : GanTrainer::critic_params(gan.store))
    for (float v : gan.store.value(name).data)
      CHECK(std::abs(v) <= gan.cfg.clip_c + 1e-9f);

  CHECK(gan.store.value("G/b1_w").data == g_before);       // bit identical
  CHECK(gan.store.value("R/c1_w").data == r_before);       // frozen trunk
  CHECK(checkpoint_bytes(gan.rstore) == r_ckpt_before);    // frozen store
}

TEST_CASE("generator_step: updates only G; zero mask means zero update") {
  TinyGan gan;
  GanTrainer trainer(gan.cfg, &gan.store, &gan.rstore);
  Font font = Font::load(testutil::dejavu_sans());
  Rng rng(13);

  std::vector<TrainingSample> samples;
  for (const char* t : {"A", "B", "C", "A"})
    samples.push_back(make_sample(rng, font, t, 16));
  GanBatch batch = pack_batch(samples, {0, 1, 2, 3}, 16, gan.cfg.alphabet);

  auto d_before = gan.store.value("D/c1_w").data;
  auto df_before = gan.store.value("DF/fc1_w").data;
  auto r_before = gan.store.value("R/c1_w").data;
  auto g_before = gan.store.value("G/b1_w").data;

  LossReport report = trainer.generator_step(batch);
  CHECK(std::isfinite(report.l_g));
  CHECK(report.l_s > 0);
  CHECK(gan.store.value("D/c1_w").data == d_before);
  CHECK(gan.store.value("DF/fc1_w").data == df_before);
  CHECK(gan.store.value("R/c1_w").data == r_before);
  CHECK(gan.store.value("G/b1_w").data != g_before);  // G did move

  // All-zero mask: the composed batch is independent of G, so the update
  // must leave G unchanged.
  GanBatch zero = batch;
  zero.m3.fill(0.f);
  zero.one_minus_m3.fill(1.f);
  zero.char_boxes.clear();
  zero.onehot = Tensor<float>::zeros({0, 3});
  auto g_now = gan.store.value("G/b1_w").data;
  trainer.generator_step(zero);
  CHECK(gan.store.value("G/b1_w").data == g_now);
}

TEST_CASE("generator_step: lambda_s = 0 equals the pure adversarial update") {
  Font font = Font::load(testutil::dejavu_sans());
  auto run = [&](bool with_boxes) {
    TinyGan gan(77);
    gan.cfg.lambda_s = 0.0;
    GanTrainer trainer(gan.cfg, &gan.store, &gan.rstore);
    Rng rng(14);
    std::vector<TrainingSample> samples;
    for (const char* t : {"A", "B", "C", "A"})
      samples.push_back(make_sample(rng, font, t, 16));
    GanBatch batch = pack_batch(samples, {0, 1, 2, 3}, 16, gan.cfg.alphabet);
    if (!with_boxes) {
      batch.char_boxes.clear();
      batch.onehot = Tensor<float>::zeros({0, 3});
    }
    trainer.generator_step(batch);
    return gan.store.value("G/b1_w").data;
  };
  CHECK(run(true) == run(false));
}

TEST_CASE("pack_batch: text-free sample rejected, spaces skipped") {
  Font font = Font::load(testutil::dejavu_sans());
  Rng rng(15);
  TrainingSample sample = make_sample(rng, font, "A B", 24);
  GanBatch batch = pack_batch({sample}, {0}, 16, "ABC");
  CHECK(batch.char_boxes.size() == 2);  // two letters, no box for the space
  CHECK(batch.onehot.shape[0] == 2);

  TrainingSample bad = make_sample(rng, font, "xyz", 24);  // not in alphabet
  CHECK_THROWS_AS(pack_batch({bad}, {0}, 16, "ABC"), InvalidArgument);
}

TEST_CASE("train: logs, checkpoints, determinism, empty-Y error") {
  testutil::TempDir dir("gan");
  Font font = Font::load(testutil::dejavu_sans());

  auto build_data = [&](uint64_t seed) {
    Rng rng(seed);
    std::vector<TrainingSample> samples;
    for (int i = 0; i < 8; ++i)
      samples.push_back(
          make_sample(rng, font, i % 2 ? "A" : "B", 16));
    std::vector<RasterImage> reals;
    for (int i = 0; i < 8; ++i) {
      RasterImage r(16, 16, 3, float(rng.uniform(0, 0.3)));
      reals.push_back(r);
    }
    return std::pair{samples, RealCropSet::from_images(reals, 16)};
  };

  auto run = [&](const std::string& tag) {
    auto [samples, reals] = build_data(42);
    GanConfig cfg;
    cfg.scale = 0.25;
    cfg.input_size = 16;
    cfg.batch_size = 4;
    cfg.char_size = 12;
    cfg.alphabet = "AB";
    cfg.iterations = 2;
    cfg.critic_steps = 2;
    cfg.seed = 9;
    cfg.checkpoint_path = dir.file(tag + ".ckpt");
    cfg.log_path = dir.file(tag + ".log");
    ParameterStore<float> store, rstore;
    Rng rng(5);
    GanTrainer::init_params(store, cfg, rng);
    nets::init_recognizer(rstore, 2, cfg.char_size, rng);
    TrainResult result = train(cfg, store, rstore, samples, reals);
    CHECK(result.iterations_run == 2);
    CHECK(result.log.size() == 2);
    return checkpoint_bytes(store);
  };
  std::string a = run("a");
  std::string b = run("b");
  CHECK(a == b);  // same seed -> identical checkpoints

  // Log file has the header plus one row per iteration.
  std::ifstream log(dir.file("a.log"));
  std::string line;
  int rows = 0;
  while (std::getline(log, line)) ++rows;
  CHECK(rows == 3);

  auto [samples, reals] = build_data(42);
  GanConfig cfg;
  cfg.input_size = 16;
  cfg.alphabet = "AB";
  ParameterStore<float> store, rstore;
  Rng rng(5);
  GanTrainer::init_params(store, cfg, rng);
  nets::init_recognizer(rstore, 2, cfg.char_size, rng);
  CHECK_THROWS_AS(
      train(cfg, store, rstore, samples, RealCropSet{}), InvalidArgument);
}

TEST_CASE("train: divergence restores the last good checkpoint") {
  testutil::TempDir dir("gan");
  Font font = Font::load(testutil::dejavu_sans());
  Rng rng(21);
  std::vector<TrainingSample> samples;
  for (int i = 0; i < 4; ++i) samples.push_back(make_sample(rng, font, "A", 16));
  std::vector<RasterImage> reals(4, RasterImage(16, 16, 3, 0.1f));

  GanConfig cfg;
  cfg.scale = 0.25;
  cfg.input_size = 16;
  cfg.batch_size = 2;
  cfg.char_size = 12;
  cfg.alphabet = "A";
  cfg.iterations = 2;
  cfg.critic_steps = 1;
  cfg.checkpoint_path = dir.file("diverge.ckpt");
  ParameterStore<float> store, rstore;
  Rng init_rng(5);
  GanTrainer::init_params(store, cfg, init_rng);
  nets::init_recognizer(rstore, 1, cfg.char_size, init_rng);
  // Poison one generator weight so the first forward pass blows up.
  store.value("G/b3_w")[0] = std::numeric_limits<float>::infinity();
  try {
    train(cfg, store, rstore, samples, RealCropSet::from_images(reals, 16));
    FAIL("expected divergence");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("checkpoint") != std::string::npos);
  }
  // The store was reloaded from the checkpoint written before iteration 0
  // (which still contains the poisoned value, proving the reload ran) and
  // must match the file byte for byte.
  std::ifstream ck(dir.file("diverge.ckpt"), std::ios::binary);
  std::string file_bytes((std::istreambuf_iterator<char>(ck)), {});
  CHECK(checkpoint_bytes(store) == file_bytes);
  CHECK(store.value("G/b3_w")[0] ==
        std::numeric_limits<float>::infinity());
}

TEST_CASE("infer_appearance: zero mask is the identity, values stay in range") {
  TinyGan gan;
  Rng rng(31);
  RasterImage x = random_image(rng, 20, 14);
  std::vector<uint8_t> zero_mask(20 * 14, 0);
  RasterImage out = infer_appearance(gan.store, gan.cfg, x, zero_mask);
  CHECK(out.data == x.data);  // bit exact

  std::vector<uint8_t> mask = random_mask(rng, 20, 14);
  RasterImage out2 = infer_appearance(gan.store, gan.cfg, x, mask);
  for (float v : out2.data) {
    CHECK(v >= 0.f);
    CHECK(v <= 1.f);
  }
  // Differs from x only inside the mask support.
  for (int y = 0; y < 14; ++y)
    for (int xx = 0; xx < 20; ++xx)
      if (!mask[size_t(y) * 20 + xx])
        for (int c = 0; c < 3; ++c) CHECK(out2.at(xx, y, c) == x.at(xx, y, c));

  ParameterStore<float> empty;
  CHECK_THROWS_AS(infer_appearance(empty, gan.cfg, x, mask), InvalidArgument);
}

TEST_CASE("critic: estimate reaches 0.9x the true distance on point masses") {
  // Two linearly separable toy distributions: flat 0.3 and flat 0.7
  // images. The true 1-Lipschitz Wasserstein distance between the two
  // point masses is the L2 distance of the images.
  const int S = 16;
  GanConfig cfg;
  cfg.scale = 0.25;
  cfg.input_size = S;
  cfg.clip_c = 0.05f;
  cfg.learning_rate = 5e-4f;  // fast saturation for the unit test
  cfg.seed = 17;
  ParameterStore<float> store, rstore;
  Rng rng(17);
  GanTrainer::init_params(store, cfg, rng);
  nets::init_recognizer(rstore, 2, cfg.char_size, rng);
  GanTrainer trainer(cfg, &store, &rstore);

  Tensor<float> fake({4, 3, S, S});
  fake.fill(0.3f);
  Tensor<float> real({4, 3, S, S});
  real.fill(0.7f);
  const double true_distance = 0.4 * std::sqrt(3.0 * S * S);

  double w = 0;
  for (int step = 0; step < 400; ++step)
    w = trainer.discriminator_step(fake, real).wasserstein;
  CHECK(w >= 0.9 * true_distance);
}

TEST_CASE("generator shapes: full-scale translation stack") {
  ParameterStore<float> store;
  Rng rng(1);
  nets::init_generator(store, 1.0, rng);
  Graph<float> g(&store);
  auto in = g.input({1, 4, 256, 256});
  std::vector<std::vector<int64_t>> blocks;
  nets::build_generator(g, in, 1.0, &blocks);
  REQUIRE(blocks.size() == 7);
  const int64_t sizes[7] = {256, 128, 64, 64, 128, 256, 256};
  const int64_t chans[7] = {64, 128, 256, 256, 128, 64, 3};
  for (int i = 0; i < 7; ++i) {
    CHECK(blocks[size_t(i)][1] == chans[i]);
    CHECK(blocks[size_t(i)][2] == sizes[i]);
    CHECK(blocks[size_t(i)][3] == sizes[i]);
  }
}

TEST_CASE("generator output: values in [0,1], shape matches input spatially") {
  TinyGan gan;
  Graph<float> g(&gan.store);
  auto in = g.input({2, 4, 16, 16});
  auto out = nets::build_generator(g, in, gan.cfg.scale);
  CHECK(g.shape(out) == std::vector<int64_t>{2, 3, 16, 16});
  Rng rng(3);
  Tensor<float> x({2, 4, 16, 16});
  for (float& v : x.data) v = float(rng.uniform(-1, 2));
  g.forward({{in, x}});
  for (float v : g.value(out).data) {
    CHECK(v >= 0.f);
    CHECK(v <= 1.f);
  }
}

TEST_CASE("full scale-1/4 generator graph passes the gradient check") {
  // 64-bit replica of the generator at a tiny input, sampled coordinates.
  ParameterStore<double> store;
  Rng rng(7);
  auto add_conv = [&](const std::string& name, int cout, int cin, int k) {
    store.add(name + "_w",
              Tensor<double>::uniform_init({cout, cin, k, k},
                                           std::sqrt(3.0 / (cin * k * k)), rng));
    store.add(name + "_b", Tensor<double>::uniform_init({cout}, 0.1, rng));
  };
  auto add_deconv = [&](const std::string& name, int cin, int cout, int k) {
    store.add(name + "_w",
              Tensor<double>::uniform_init({cin, cout, k, k},
                                           std::sqrt(3.0 / (cin * k * k)), rng));
    store.add(name + "_b", Tensor<double>::uniform_init({cout}, 0.1, rng));
  };
  const int c1 = 4, c2 = 6, c3 = 8;  // miniature channel plan
  add_conv("G/b1", c1, 4, 7);
  add_conv("G/b2", c2, c1, 3);
  add_conv("G/b3", c3, c2, 3);
  add_conv("G/b4r1c1", c3, c3, 3);
  add_conv("G/b4r1c2", c3, c3, 3);
  add_conv("G/b4r2c1", c3, c3, 3);
  add_conv("G/b4r2c2", c3, c3, 3);
  add_deconv("G/b5", c3, c2, 3);
  add_deconv("G/b6", c2, c1, 3);
  add_deconv("G/b7", c1, 3, 7);

  Graph<double> g(&store);
  auto in = g.input({1, 4, 8, 8});
  auto conv = [&](int x, const std::string& n, int s, int p) {
    return g.conv2d(x, g.param(n + "_w"), g.param(n + "_b"), s, p, n);
  };
  auto deconv = [&](int x, const std::string& n, int s, int p, int op) {
    return g.conv_transpose2d(x, g.param(n + "_w"), g.param(n + "_b"), s, p,
                              op, n);
  };
  int h = g.leaky_relu(conv(in, "G/b1", 1, 3), 0.2);
  h = g.leaky_relu(conv(h, "G/b2", 2, 1), 0.2);
  h = g.leaky_relu(conv(h, "G/b3", 2, 1), 0.2);
  for (const char* b : {"G/b4r1", "G/b4r2"}) {
    int inner = g.leaky_relu(conv(h, std::string(b) + "c1", 1, 1), 0.2);
    inner = conv(inner, std::string(b) + "c2", 1, 1);
    h = g.leaky_relu(g.add(h, inner), 0.2);
  }
  h = g.leaky_relu(deconv(h, "G/b5", 2, 1, 1), 0.2);
  h = g.leaky_relu(deconv(h, "G/b6", 2, 1, 1), 0.2);
  auto out = g.reduce_mean(g.logistic(deconv(h, "G/b7", 1, 3, 0)));

  Rng xr(9);
  Tensor<double> x({1, 4, 8, 8});
  for (double& v : x.data) v = xr.uniform(0, 1);
  double err = grad_check(g, out, {{in, x}}, 1e-5, /*sample_coords=*/24);
  CHECK(err < 1e-4);
}
