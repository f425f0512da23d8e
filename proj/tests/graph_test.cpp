#include <doctest.h>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "textsynth/graph.hpp"

using namespace textsynth;

namespace {

Tensor<double> random_tensor(std::vector<int64_t> shape, Rng& rng,
                             double scale = 1.0) {
  Tensor<double> t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(-scale, scale);
  return t;
}

// Independent direct convolution used as the arithmetic oracle.
Tensor<double> naive_conv(const Tensor<double>& x, const Tensor<double>& w,
                          const Tensor<double>& b, int stride, int pad) {
  int64_t N = x.shape[0], Ci = x.shape[1], H = x.shape[2], W = x.shape[3];
  int64_t Co = w.shape[0], kh = w.shape[2], kw = w.shape[3];
  int64_t oh = (H + 2 * pad - kh) / stride + 1;
  int64_t ow = (W + 2 * pad - kw) / stride + 1;
  Tensor<double> y({N, Co, oh, ow});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t co = 0; co < Co; ++co)
      for (int64_t oy = 0; oy < oh; ++oy)
        for (int64_t ox = 0; ox < ow; ++ox) {
          double acc = b[size_t(co)];
          for (int64_t ci = 0; ci < Ci; ++ci)
            for (int64_t ky = 0; ky < kh; ++ky)
              for (int64_t kx = 0; kx < kw; ++kx) {
                int64_t sy = oy * stride - pad + ky;
                int64_t sx = ox * stride - pad + kx;
                if (sy < 0 || sx < 0 || sy >= H || sx >= W) continue;
                acc += w[size_t(((co * Ci + ci) * kh + ky) * kw + kx)] *
                       x[size_t(((n * Ci + ci) * H + sy) * W + sx)];
              }
          y[size_t(((n * Co + co) * oh + oy) * ow + ox)] = acc;
        }
  return y;
}

}  // namespace

TEST_CASE("conv2d: 1x1 identity kernel with zero bias reproduces the input") {
  ParameterStore<double> store;
  store.add("w", Tensor<double>::full({1, 1, 1, 1}, 1.0));
  store.add("b", Tensor<double>::zeros({1}));
  Graph<double> g(&store);
  auto x = g.input({2, 1, 5, 5});
  auto y = g.conv2d(x, g.param("w"), g.param("b"), 1, 0);
  Rng rng(1);
  Tensor<double> xin = random_tensor({2, 1, 5, 5}, rng);
  g.forward({{x, xin}});
  CHECK(g.value(y).data == xin.data);
}

TEST_CASE("conv2d: 3x3 kernel on a 4x4 input matches direct arithmetic") {
  // Literal hand case first: all-ones 3x3 kernel over a ramp, pad 1.
  ParameterStore<double> store;
  store.add("w", Tensor<double>::full({1, 1, 3, 3}, 1.0));
  store.add("b", Tensor<double>::zeros({1}));
  Graph<double> g(&store);
  auto x = g.input({1, 1, 4, 4});
  auto y = g.conv2d(x, g.param("w"), g.param("b"), 1, 1);
  Tensor<double> xin({1, 1, 4, 4});
  for (int i = 0; i < 16; ++i) xin[size_t(i)] = i;
  g.forward({{x, xin}});
  // Top-left output: sum of the 2x2 corner {0,1,4,5} = 10.
  CHECK(g.value(y)[0] == doctest::Approx(10.0));
  // Center output at (1,1): sum of 3x3 block {0,1,2,4,5,6,8,9,10} = 45.
  CHECK(g.value(y)[size_t(1 * 4 + 1)] == doctest::Approx(45.0));

  // Randomized against the independent direct loop.
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    ParameterStore<double> s2;
    s2.add("w", random_tensor({2, 3, 3, 3}, rng));
    s2.add("b", random_tensor({2}, rng));
    Graph<double> g2(&s2);
    auto x2 = g2.input({2, 3, 6, 6});
    int stride = trial % 2 ? 2 : 1;
    auto y2 = g2.conv2d(x2, g2.param("w"), g2.param("b"), stride, 1);
    Tensor<double> xin2 = random_tensor({2, 3, 6, 6}, rng);
    g2.forward({{x2, xin2}});
    Tensor<double> expect =
        naive_conv(xin2, s2.value("w"), s2.value("b"), stride, 1);
    REQUIRE(g2.value(y2).shape == expect.shape);
    for (int64_t i = 0; i < expect.numel(); ++i)
      CHECK(g2.value(y2)[size_t(i)] == doctest::Approx(expect[size_t(i)]).epsilon(1e-12));
  }
}

TEST_CASE("graph: shape mismatches are reported with the node label") {
  ParameterStore<double> store;
  store.add("w", Tensor<double>::zeros({4, 3, 3, 3}));
  store.add("b", Tensor<double>::zeros({4}));
  Graph<double> g(&store);
  auto x = g.input({1, 2, 8, 8});  // 2 channels, weight expects 3
  try {
    g.conv2d(x, g.param("w"), g.param("b"), 1, 1, "block1");
    FAIL("expected shape error");
  } catch (const InvalidArgument& e) {
    std::string msg = e.what();
    CHECK(msg.find("block1") != std::string::npos);
    CHECK(msg.find("2") != std::string::npos);
    CHECK(msg.find("3") != std::string::npos);
  }
}

TEST_CASE("graph: non-finite values are trapped") {
  ParameterStore<double> store;
  Graph<double> g(&store);
  auto x = g.input({2});
  auto y = g.logistic(x);
  Tensor<double> bad({2});
  bad.data = {1.0, std::numeric_limits<double>::quiet_NaN()};
  CHECK_THROWS_AS(g.forward({{x, bad}}), NumericError);
  (void)y;
}

TEST_CASE("sample_mean backward: gradient of each element is 1/N") {
  ParameterStore<double> store;
  store.add("x", Tensor<double>::full({1, 3, 4, 4}, 2.0));
  Graph<double> g(&store);
  auto x = g.param("x");
  auto y = g.reduce_mean(g.sample_mean(x));
  g.forward({});
  g.backward(y);
  for (int64_t i = 0; i < 48; ++i)
    CHECK(store.grad("x")[size_t(i)] == doctest::Approx(1.0 / 48.0));
}

TEST_CASE("leaky_relu backward: slope alpha on negative inputs") {
  ParameterStore<double> store;
  store.add("x", Tensor<double>::full({4}, -1.5));
  Graph<double> g(&store);
  auto y = g.reduce_mean(g.leaky_relu(g.param("x"), 0.2));
  g.forward({});
  g.backward(y);
  for (int64_t i = 0; i < 4; ++i)
    CHECK(store.grad("x")[size_t(i)] == doctest::Approx(0.2 / 4.0));
}

TEST_CASE("grad_check: every primitive against central differences") {
  Rng rng(11);
  int cases = 0;
  auto check_graph = [&](auto build, std::vector<int64_t> xshape) {
    ParameterStore<double> store;
    store.add("x", random_tensor(xshape, rng, 0.7));
    Graph<double> g(&store);
    auto out = build(g, store);
    double err = grad_check(g, out, {}, 1e-5);
    CHECK(err < 1e-4);
    ++cases;
  };

  for (int t = 0; t < 3; ++t) {
    // conv2d (stride 1 and 2)
    check_graph(
        [&](Graph<double>& g, ParameterStore<double>& s) {
          s.add("w", random_tensor({2, 2, 3, 3}, rng, 0.5));
          s.add("b", random_tensor({2}, rng, 0.3));
          return g.reduce_mean(
              g.conv2d(g.param("x"), g.param("w"), g.param("b"), 1 + t % 2, 1));
        },
        {2, 2, 5, 5});
    // transposed conv
    check_graph(
        [&](Graph<double>& g, ParameterStore<double>& s) {
          s.add("w", random_tensor({2, 3, 3, 3}, rng, 0.5));
          s.add("b", random_tensor({3}, rng, 0.3));
          int stride = 1 + t % 2;
          return g.reduce_mean(g.conv_transpose2d(
              g.param("x"), g.param("w"), g.param("b"), stride, 1,
              stride - 1));
        },
        {2, 2, 4, 4});
    // linear + logistic
    check_graph(
        [&](Graph<double>& g, ParameterStore<double>& s) {
          s.add("w", random_tensor({6, 3}, rng, 0.5));
          s.add("b", random_tensor({3}, rng, 0.3));
          return g.reduce_mean(
              g.logistic(g.linear(g.param("x"), g.param("w"), g.param("b"))));
        },
        {4, 6});
    // leaky relu (inputs away from the kink)
    check_graph(
        [&](Graph<double>& g, ParameterStore<double>& s) {
          (void)s;
          return g.reduce_mean(g.leaky_relu(g.param("x"), 0.2));
        },
        {3, 7});
    // elementwise add/sub/mul chain
    check_graph(
        [&](Graph<double>& g, ParameterStore<double>& s) {
          s.add("y", random_tensor({3, 4}, rng, 0.8));
          auto a = g.param("x");
          auto b = g.param("y");
          return g.reduce_mean(g.mul(g.add(a, b), g.sub(a, g.scale(b, 0.5))));
        },
        {3, 4});
    // concat + pooling
    check_graph(
        [&](Graph<double>& g, ParameterStore<double>& s) {
          s.add("y", random_tensor({2, 3, 4, 4}, rng, 0.8));
          auto cat = g.concat_channels(g.param("x"), g.param("y"));
          return g.reduce_mean(g.global_avg_pool(cat));
        },
        {2, 2, 4, 4});
    // softmax cross entropy
    check_graph(
        [&](Graph<double>& g, ParameterStore<double>& s) {
          (void)s;
          Tensor<double> onehot({4, 5});
          for (int i = 0; i < 4; ++i) onehot[size_t(i * 5 + (i * 2) % 5)] = 1.0;
          return g.softmax_cross_entropy(g.param("x"), g.constant(onehot));
        },
        {4, 5});
    // crop_resize
    check_graph(
        [&](Graph<double>& g, ParameterStore<double>& s) {
          (void)s;
          std::vector<CropBox> boxes = {{0, 0.7, 0.4, 4.2, 5.1},
                                        {1, 1.0, 2.0, 5.0, 6.0}};
          return g.reduce_mean(g.crop_resize(g.param("x"), boxes, 4, 6));
        },
        {2, 3, 8, 8});
  }
  CHECK(cases >= 20);  // at least 20 randomized primitive checks
}

TEST_CASE("grad_check: exactly linear graph is exact to 1e-10") {
  Rng rng(17);
  ParameterStore<double> store;
  store.add("w", random_tensor({5, 1}, rng));
  store.add("b", Tensor<double>::zeros({1}));
  Graph<double> g(&store);
  auto x = g.input({3, 5});
  auto y = g.reduce_mean(g.linear(x, g.param("w"), g.param("b")));
  Tensor<double> xin = random_tensor({3, 5}, rng);
  CHECK(grad_check(g, y, {{x, xin}}, 1e-5) < 1e-10);
}

TEST_CASE("grad_check harness flags a deliberately wrong gradient") {
  // Same comparison loop as grad_check, with the analytic value scaled by
  // 1.5 to emulate a buggy backward rule.
  Rng rng(23);
  ParameterStore<double> store;
  store.add("w", random_tensor({4, 2}, rng));
  store.add("b", random_tensor({2}, rng));
  Graph<double> g(&store);
  auto x = g.input({3, 4});
  auto y = g.reduce_mean(g.logistic(g.linear(x, g.param("w"), g.param("b"))));
  Tensor<double> xin = random_tensor({3, 4}, rng);
  store.zero_grads();
  g.forward({{x, xin}});
  g.backward(y);
  double max_rel = 0;
  Tensor<double>& w = store.value("w");
  for (int64_t c = 0; c < w.numel(); ++c) {
    double wrong_analytic = 1.5 * store.grad("w")[size_t(c)];
    double saved = w[size_t(c)];
    w[size_t(c)] = saved + 1e-5;
    g.forward({{x, xin}});
    double up = g.value(y)[0];
    w[size_t(c)] = saved - 1e-5;
    g.forward({{x, xin}});
    double down = g.value(y)[0];
    w[size_t(c)] = saved;
    double numeric = (up - down) / 2e-5;
    max_rel = std::max(max_rel,
                       std::abs(wrong_analytic - numeric) /
                           std::max({1.0, std::abs(wrong_analytic),
                                     std::abs(numeric)}));
  }
  CHECK(max_rel > 1e-2);
}

TEST_CASE("backward of a sum of losses equals the sum of backwards") {
  Rng rng(29);
  ParameterStore<double> store;
  store.add("w", random_tensor({4, 4}, rng));
  store.add("b", random_tensor({4}, rng));

  auto build = [&](Graph<double>& g, int which) {
    auto x = g.input({2, 4});
    auto h = g.linear(x, g.param("w"), g.param("b"));
    auto l1 = g.reduce_mean(g.logistic(h));
    auto l2 = g.reduce_mean(g.mul(h, h));
    if (which == 1) return std::pair{x, l1};
    if (which == 2) return std::pair{x, l2};
    return std::pair{x, g.add(l1, l2)};
  };
  Tensor<double> xin = random_tensor({2, 4}, rng);

  Graph<double> gsum(&store);
  auto [xs, lsum] = build(gsum, 0);
  store.zero_grads();
  gsum.forward({{xs, xin}});
  gsum.backward(lsum);
  Tensor<double> grad_sum = store.grad("w");

  store.zero_grads();
  Graph<double> g1(&store);
  auto [x1, l1] = build(g1, 1);
  g1.forward({{x1, xin}});
  g1.backward(l1);
  Graph<double> g2(&store);
  auto [x2, l2] = build(g2, 2);
  g2.forward({{x2, xin}});
  g2.backward(l2);  // grads accumulate across the two backwards

  for (int64_t i = 0; i < grad_sum.numel(); ++i)
    CHECK(store.grad("w")[size_t(i)] ==
          doctest::Approx(grad_sum[size_t(i)]).epsilon(1e-12));
}

TEST_CASE("concat backward splits gradients exactly") {
  Rng rng(31);
  ParameterStore<double> store;
  store.add("a", random_tensor({1, 2, 3, 3}, rng));
  store.add("c", random_tensor({1, 3, 3, 3}, rng));
  Graph<double> g(&store);
  auto cat = g.concat_channels(g.param("a"), g.param("c"));
  auto loss = g.reduce_mean(g.mul(cat, cat));
  store.zero_grads();
  g.forward({});
  g.backward(loss);
  // Reassemble the split gradients and compare with the upstream value:
  // d(mean(z^2))/dz = 2z/numel.
  const Tensor<double>& z = g.value(cat);
  std::vector<double> upstream(size_t(z.numel()));
  for (int64_t i = 0; i < z.numel(); ++i)
    upstream[size_t(i)] = 2.0 * z[size_t(i)] / double(z.numel());
  const auto& ga = store.grad("a");
  const auto& gc = store.grad("c");
  for (int64_t i = 0; i < ga.numel(); ++i)
    CHECK(ga[size_t(i)] == doctest::Approx(upstream[size_t(i)]).epsilon(1e-12));
  for (int64_t i = 0; i < gc.numel(); ++i)
    CHECK(gc[size_t(i)] ==
          doctest::Approx(upstream[size_t(ga.numel() + i)]).epsilon(1e-12));
}

TEST_CASE("forward/backward are bit-deterministic across thread counts") {
  Rng rng(37);
  ParameterStore<float> store;
  store.add("w1", random_tensor({8, 3, 3, 3}, rng, 0.3).cast<float>());
  store.add("b1", random_tensor({8}, rng, 0.1).cast<float>());
  store.add("w2", random_tensor({8, 8, 3, 3}, rng, 0.3).cast<float>());
  store.add("b2", random_tensor({8}, rng, 0.1).cast<float>());
  Tensor<float> xin = random_tensor({2, 3, 16, 16}, rng).cast<float>();

  auto run = [&](int threads) {
#ifdef _OPENMP
    omp_set_num_threads(threads);
#else
    (void)threads;
#endif
    Graph<float> g(&store);
    auto x = g.input({2, 3, 16, 16});
    auto h = g.leaky_relu(g.conv2d(x, g.param("w1"), g.param("b1"), 2, 1), 0.2f);
    auto y = g.reduce_mean(g.conv2d(h, g.param("w2"), g.param("b2"), 1, 1));
    store.zero_grads();
    g.forward({{x, xin}});
    g.backward(y);
    std::pair<std::vector<float>, std::vector<float>> out{
        g.value(y).data, store.grad("w1").data};
    return out;
  };
  auto r1 = run(1);
  auto r4 = run(4);
#ifdef _OPENMP
  omp_set_num_threads(omp_get_num_procs());
#endif
  CHECK(r1.first == r4.first);    // bit-identical values
  CHECK(r1.second == r4.second);  // bit-identical gradients
}

TEST_CASE("backward before forward is rejected") {
  ParameterStore<double> store;
  store.add("x", Tensor<double>::full({2}, 1.0));
  Graph<double> g(&store);
  auto y = g.reduce_mean(g.param("x"));
  CHECK_THROWS_AS(g.backward(y), InvalidArgument);
}
