#include <doctest.h>

#include "textsynth/tensor.hpp"

using namespace textsynth;

TEST_CASE("tensor: shape bookkeeping") {
  Tensor<float> t({2, 3, 4});
  CHECK(t.numel() == 24);
  CHECK(t.dim(1) == 3);
  CHECK(shape_numel({}) == 1);
  CHECK(shape_str({2, 3}) == "[2,3]");
}

TEST_CASE("tensor: fill and finite checks") {
  Tensor<double> t({4});
  t.fill(2.5);
  CHECK(t.all_finite());
  t[2] = std::numeric_limits<double>::infinity();
  CHECK(!t.all_finite());
  t[2] = std::nan("");
  CHECK(!t.all_finite());
}

TEST_CASE("tensor: uniform init respects the limit and the seed") {
  Rng a(5), b(5);
  auto t1 = Tensor<float>::uniform_init({100}, 0.25f, a);
  auto t2 = Tensor<float>::uniform_init({100}, 0.25f, b);
  CHECK(t1.data == t2.data);
  for (float v : t1.data) CHECK(std::abs(v) <= 0.25f);
}

TEST_CASE("tensor: cast between precisions") {
  Tensor<float> t({3});
  t.data = {1.f, -2.f, 0.5f};
  Tensor<double> d = t.cast<double>();
  CHECK(d.data == std::vector<double>{1.0, -2.0, 0.5});
}
