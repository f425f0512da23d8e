#include <doctest.h>

#include "textsynth/optimizer.hpp"

using namespace textsynth;

TEST_CASE("rmsprop: zero gradient leaves parameters unchanged") {
  ParameterStore<double> store;
  store.add("w", Tensor<double>::full({4}, 1.5));
  RmsProp<double> opt({"w"}, 1e-2, 0.9);
  std::vector<double> before = store.value("w").data;
  opt.step(store);  // grads are zero
  CHECK(store.value("w").data == before);
}

TEST_CASE("rmsprop: constant gradient drives |update| toward lr") {
  // acc converges to g^2, so the step approaches lr * sign(g).
  ParameterStore<double> store;
  store.add("w", Tensor<double>::zeros({2}));
  RmsProp<double> opt({"w"}, 1e-3, 0.9);
  double prev0 = 0, prev1 = 0, step0 = 0, step1 = 0;
  for (int it = 0; it < 400; ++it) {
    store.grad("w").data = {0.5, -2.0};
    prev0 = store.value("w")[0];
    prev1 = store.value("w")[1];
    opt.step(store);
    step0 = store.value("w")[0] - prev0;
    step1 = store.value("w")[1] - prev1;
  }
  CHECK(std::abs(std::abs(step0) - 1e-3) < 1e-5);  // within 1%
  CHECK(std::abs(std::abs(step1) - 1e-3) < 1e-5);
  CHECK(step0 < 0);  // against the gradient sign
  CHECK(step1 > 0);
}

TEST_CASE("rmsprop: identical seeds give identical trajectories") {
  auto run = [] {
    Rng rng(77);
    ParameterStore<double> store;
    store.add("w", Tensor<double>::uniform_init({8}, 0.5, rng));
    RmsProp<double> opt({"w"}, 5e-3, 0.9);
    for (int it = 0; it < 50; ++it) {
      for (int64_t i = 0; i < 8; ++i)
        store.grad("w")[size_t(i)] = rng.uniform(-1, 1);
      opt.step(store);
    }
    return store.value("w").data;
  };
  CHECK(run() == run());
}

TEST_CASE("rmsprop: shape mismatch rejected") {
  ParameterStore<double> store;
  store.add("w", Tensor<double>::zeros({4}));
  store.grads.at("w") = Tensor<double>::zeros({3});
  RmsProp<double> opt({"w"}, 1e-3, 0.9);
  CHECK_THROWS_AS(opt.step(store), InvalidArgument);
}

TEST_CASE("clip_weights: clamps exactly to [-c, c]") {
  ParameterStore<float> store;
  Tensor<float> w({5});
  w.data = {0.005f, -0.005f, 0.02f, -0.02f, 0.01f};
  store.add("w", w);
  clip_weights<float>(store, {"w"}, 0.01f);
  CHECK(store.value("w").data ==
        std::vector<float>{0.005f, -0.005f, 0.01f, -0.01f, 0.01f});

  Rng rng(3);
  store.add("r", Tensor<float>::uniform_init({100}, 1.f, rng));
  clip_weights<float>(store, {"r"}, 0.01f);
  for (float v : store.value("r").data) CHECK(std::abs(v) <= 0.01f);
  CHECK_THROWS_AS(clip_weights<float>(store, {"r"}, 0.f), InvalidArgument);
}
