// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "textsynth/tensor.hpp"

namespace textsynth {

// Named parameters shared by every graph built over the store. Gradients
// accumulate here during backward passes.
template <typename T>
struct ParameterStore {
  std::map<std::string, Tensor<T>> values;
  std::map<std::string, Tensor<T>> grads;

  void add(const std::string& name, Tensor<T> init) {
    if (values.count(name))
      throw InvalidArgument("parameter already registered: " + name);
    grads.emplace(name, Tensor<T>::zeros(init.shape));
    values.emplace(name, std::move(init));
  }
  bool has(const std::string& name) const { return values.count(name) > 0; }
  Tensor<T>& value(const std::string& name) {
    auto it = values.find(name);
    if (it == values.end()) throw InvalidArgument("unknown parameter: " + name);
    return it->second;
  }
  Tensor<T>& grad(const std::string& name) {
    auto it = grads.find(name);
    if (it == grads.end()) throw InvalidArgument("unknown parameter: " + name);
    return it->second;
  }
  void zero_grads() {
    for (auto& [name, g] : grads) g.fill(T(0));
  }
  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [name, v] : values) out.push_back(name);
    return out;
  }
};

// One character crop: source sample index and an inclusive pixel box in
// that sample's coordinates.
struct CropBox {
  int sample = 0;
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

namespace detail {

// All matmuls accumulate with a fixed k-order per output element, so
// results are identical for any thread count.

// C[M,N] += A[M,K] * B[K,N]
template <typename T>
void matmul_nn_acc(const T* A, const T* B, T* C, int64_t M, int64_t K,
                   int64_t N) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (M > 1)
#endif
  for (int64_t i = 0; i < M; ++i) {
    T* c = C + i * N;
    const T* a = A + i * K;
    for (int64_t k = 0; k < K; ++k) {
      T av = a[k];
      if (av == T(0)) continue;
      const T* b = B + k * N;
      for (int64_t j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

// C[M,N] += A[M,K] * B[N,K]^T
template <typename T>
void matmul_nt_acc(const T* A, const T* B, T* C, int64_t M, int64_t K,
                   int64_t N) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (M > 1)
#endif
  for (int64_t i = 0; i < M; ++i) {
    const T* a = A + i * K;
    for (int64_t j = 0; j < N; ++j) {
      const T* b = B + j * K;
      T s = T(0);
      for (int64_t k = 0; k < K; ++k) s += a[k] * b[k];
      C[i * N + j] += s;
    }
  }
}

// C[K,N] += A[M,K]^T * B[M,N]
template <typename T>
void matmul_tn_acc(const T* A, const T* B, T* C, int64_t M, int64_t K,
                   int64_t N) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (K > 1)
#endif
  for (int64_t k = 0; k < K; ++k) {
    T* c = C + k * N;
    for (int64_t m = 0; m < M; ++m) {
      T av = A[m * K + k];
      if (av == T(0)) continue;
      const T* b = B + m * N;
      for (int64_t j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

// Geometry of the underlying correlation y = V * o: V is [A, B, kh, kw],
// o is the B-channel side, y the A-channel side. Both conv2d (o = input)
// and transposed conv2d (o = output) are expressed through it.
struct ConvGeom {
  int64_t a_channels = 0, b_channels = 0;
  int kh = 0, kw = 0, stride = 1, pad = 0;
  int64_t oh = 0, ow = 0;  // o-grid spatial size
  int64_t yh = 0, yw = 0;  // y-grid spatial size
};

// cols[(b*kh+ky)*kw+kx][ty*yw+tx] = o[b][ty*s-p+ky][tx*s-p+kx] (0 outside).
template <typename T>
void im2col(const T* o, const ConvGeom& g, T* cols) {
  const int64_t plane = g.oh * g.ow;
  for (int64_t b = 0; b < g.b_channels; ++b) {
    for (int ky = 0; ky < g.kh; ++ky) {
      for (int kx = 0; kx < g.kw; ++kx) {
        T* row = cols + ((b * g.kh + ky) * g.kw + kx) * (g.yh * g.yw);
        for (int64_t ty = 0; ty < g.yh; ++ty) {
          int64_t sy = ty * g.stride - g.pad + ky;
          for (int64_t tx = 0; tx < g.yw; ++tx) {
            int64_t sx = tx * g.stride - g.pad + kx;
            row[ty * g.yw + tx] =
                (sy >= 0 && sy < g.oh && sx >= 0 && sx < g.ow)
                    ? o[b * plane + sy * g.ow + sx]
                    : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_acc(const T* cols, const ConvGeom& g, T* o) {
  const int64_t plane = g.oh * g.ow;
  for (int64_t b = 0; b < g.b_channels; ++b) {
    for (int ky = 0; ky < g.kh; ++ky) {
      for (int kx = 0; kx < g.kw; ++kx) {
        const T* row = cols + ((b * g.kh + ky) * g.kw + kx) * (g.yh * g.yw);
        for (int64_t ty = 0; ty < g.yh; ++ty) {
          int64_t sy = ty * g.stride - g.pad + ky;
          if (sy < 0 || sy >= g.oh) continue;
          for (int64_t tx = 0; tx < g.yw; ++tx) {
            int64_t sx = tx * g.stride - g.pad + kx;
            if (sx < 0 || sx >= g.ow) continue;
            o[b * plane + sy * g.ow + sx] += row[ty * g.yw + tx];
          }
        }
      }
    }
  }
}

}  // namespace detail

// Reverse-mode differentiable graph over typed tensor operations. Nodes
// are created through the builder methods; creation order is a valid
// topological order. Output shapes are derived at build time, so shape
// mismatches surface before any data flows.
template <typename T>
class Graph {
public:
  using NodeId = int;

  explicit Graph(ParameterStore<T>* store = nullptr) : store_(store) {}

  NodeId input(std::vector<int64_t> shape, std::string label = "input") {
    Node n;
    n.op = Op::kInput;
    n.shape = std::move(shape);
    n.label = std::move(label);
    return push(std::move(n));
  }

  NodeId param(const std::string& name) {
    if (!store_) throw InvalidArgument("graph has no parameter store");
    Node n;
    n.op = Op::kParam;
    n.shape = store_->value(name).shape;
    n.pname = name;
    n.label = name;
    return push(std::move(n));
  }

  NodeId constant(Tensor<T> value, std::string label = "const") {
    Node n;
    n.op = Op::kConst;
    n.shape = value.shape;
    n.value = std::move(value);
    n.label = std::move(label);
    return push(std::move(n));
  }

  // x [N,Ci,H,W] (*) w [Co,Ci,kh,kw] + b [Co] -> [N,Co,oh,ow]
  NodeId conv2d(NodeId x, NodeId w, NodeId b, int stride, int pad,
                std::string label = "conv2d") {
    const auto& xs = shape(x);
    const auto& ws = shape(w);
    require(xs.size() == 4 && ws.size() == 4, label, "rank-4 input and weight");
    require(xs[1] == ws[1], label,
            "input channels " + std::to_string(xs[1]) + " vs weight " +
                std::to_string(ws[1]));
    require(shape(b) == std::vector<int64_t>{ws[0]}, label, "bias shape");
    int64_t oh = (xs[2] + 2 * pad - ws[2]) / stride + 1;
    int64_t ow = (xs[3] + 2 * pad - ws[3]) / stride + 1;
    require(oh >= 1 && ow >= 1, label, "kernel larger than padded input");
    Node n;
    n.op = Op::kConv2d;
    n.inputs = {x, w, b};
    n.stride = stride;
    n.pad = pad;
    n.shape = {xs[0], ws[0], oh, ow};
    n.label = std::move(label);
    return push(std::move(n));
  }

  // x [N,Ci,H,W] (*T) w [Ci,Co,kh,kw] + b [Co] -> [N,Co,(H-1)s+kh-2p+op,...]
  NodeId conv_transpose2d(NodeId x, NodeId w, NodeId b, int stride, int pad,
                          int output_pad, std::string label = "deconv2d") {
    const auto& xs = shape(x);
    const auto& ws = shape(w);
    require(xs.size() == 4 && ws.size() == 4, label, "rank-4 input and weight");
    require(xs[1] == ws[0], label, "input channels vs weight");
    require(shape(b) == std::vector<int64_t>{ws[1]}, label, "bias shape");
    require(output_pad >= 0 && output_pad < stride, label,
            "output padding must be in [0, stride)");
    int64_t oh = (xs[2] - 1) * stride + ws[2] - 2 * pad + output_pad;
    int64_t ow = (xs[3] - 1) * stride + ws[3] - 2 * pad + output_pad;
    require(oh >= 1 && ow >= 1, label, "empty output");
    Node n;
    n.op = Op::kConvT2d;
    n.inputs = {x, w, b};
    n.stride = stride;
    n.pad = pad;
    n.out_pad = output_pad;
    n.shape = {xs[0], ws[1], oh, ow};
    n.label = std::move(label);
    return push(std::move(n));
  }

  NodeId leaky_relu(NodeId x, T alpha, std::string label = "leaky_relu") {
    Node n;
    n.op = Op::kLeakyRelu;
    n.inputs = {x};
    n.alpha = alpha;
    n.shape = shape(x);
    n.label = std::move(label);
    return push(std::move(n));
  }

  NodeId logistic(NodeId x, std::string label = "logistic") {
    Node n;
    n.op = Op::kLogistic;
    n.inputs = {x};
    n.shape = shape(x);
    n.label = std::move(label);
    return push(std::move(n));
  }

  // x [N,D] * w [D,M] + b [M] -> [N,M]
  NodeId linear(NodeId x, NodeId w, NodeId b, std::string label = "linear") {
    const auto& xs = shape(x);
    const auto& ws = shape(w);
    require(xs.size() == 2 && ws.size() == 2, label, "rank-2 input and weight");
    require(xs[1] == ws[0], label,
            "inner dims " + std::to_string(xs[1]) + " vs " +
                std::to_string(ws[0]));
    require(shape(b) == std::vector<int64_t>{ws[1]}, label, "bias shape");
    Node n;
    n.op = Op::kLinear;
    n.inputs = {x, w, b};
    n.shape = {xs[0], ws[1]};
    n.label = std::move(label);
    return push(std::move(n));
  }

  // [N,C,H,W] -> [N, C*H*W]
  NodeId flatten(NodeId x, std::string label = "flatten") {
    const auto& xs = shape(x);
    require(!xs.empty(), label, "non-empty shape");
    int64_t rest = 1;
    for (size_t i = 1; i < xs.size(); ++i) rest *= xs[i];
    Node n;
    n.op = Op::kReshape;
    n.inputs = {x};
    n.shape = {xs[0], rest};
    n.label = std::move(label);
    return push(std::move(n));
  }

  NodeId add(NodeId a, NodeId b, std::string label = "add") {
    return binary(Op::kAdd, a, b, std::move(label));
  }
  NodeId sub(NodeId a, NodeId b, std::string label = "sub") {
    return binary(Op::kSub, a, b, std::move(label));
  }
  NodeId mul(NodeId a, NodeId b, std::string label = "mul") {
    return binary(Op::kMul, a, b, std::move(label));
  }

  NodeId scale(NodeId x, T s, std::string label = "scale") {
    Node n;
    n.op = Op::kScale;
    n.inputs = {x};
    n.scale_v = s;
    n.shape = shape(x);
    n.label = std::move(label);
    return push(std::move(n));
  }

  NodeId concat_channels(NodeId a, NodeId b, std::string label = "concat") {
    const auto& as = shape(a);
    const auto& bs = shape(b);
    require(as.size() == 4 && bs.size() == 4, label, "rank-4 inputs");
    require(as[0] == bs[0] && as[2] == bs[2] && as[3] == bs[3], label,
            "batch/spatial dims must match: " + shape_str(as) + " vs " +
                shape_str(bs));
    Node n;
    n.op = Op::kConcatC;
    n.inputs = {a, b};
    n.shape = {as[0], as[1] + bs[1], as[2], as[3]};
    n.label = std::move(label);
    return push(std::move(n));
  }

  // [N,C,H,W] -> [N,C], mean over the spatial plane.
  NodeId global_avg_pool(NodeId x, std::string label = "gap") {
    const auto& xs = shape(x);
    require(xs.size() == 4, label, "rank-4 input");
    Node n;
    n.op = Op::kGlobalAvgPool;
    n.inputs = {x};
    n.shape = {xs[0], xs[1]};
    n.label = std::move(label);
    return push(std::move(n));
  }

  // [N, ...] -> [N], mean over everything but the batch dim.
  NodeId sample_mean(NodeId x, std::string label = "sample_mean") {
    const auto& xs = shape(x);
    require(!xs.empty(), label, "non-empty shape");
    Node n;
    n.op = Op::kSampleMean;
    n.inputs = {x};
    n.shape = {xs[0]};
    n.label = std::move(label);
    return push(std::move(n));
  }

  // [...] -> [1], mean over all elements.
  NodeId reduce_mean(NodeId x, std::string label = "reduce_mean") {
    Node n;
    n.op = Op::kReduceMean;
    n.inputs = {x};
    n.shape = {1};
    n.label = std::move(label);
    return push(std::move(n));
  }

  // logits [N,K], one-hot targets [N,K] (constant) -> [1] mean cross
  // entropy. No gradient flows into the targets.
  NodeId softmax_cross_entropy(NodeId logits, NodeId onehot,
                               std::string label = "softmax_ce") {
    const auto& ls = shape(logits);
    require(ls.size() == 2, label, "rank-2 logits");
    require(shape(onehot) == ls, label, "target shape must match logits");
    Node n;
    n.op = Op::kSoftmaxCE;
    n.inputs = {logits, onehot};
    n.shape = {1};
    n.label = std::move(label);
    return push(std::move(n));
  }

  // x [N,C,H,W] + M boxes -> [M,C,out_h,out_w], bilinear, border-clamped.
  NodeId crop_resize(NodeId x, std::vector<CropBox> boxes, int out_h,
                     int out_w, std::string label = "crop_resize") {
    const auto& xs = shape(x);
    require(xs.size() == 4, label, "rank-4 input");
    require(!boxes.empty() && out_h >= 1 && out_w >= 1, label,
            "at least one box and a positive output size");
    for (const CropBox& bx : boxes)
      require(bx.sample >= 0 && bx.sample < xs[0] && bx.x1 >= bx.x0 &&
                  bx.y1 >= bx.y0 && bx.x0 >= 0 && bx.y0 >= 0 &&
                  bx.x1 <= double(xs[3] - 1) && bx.y1 <= double(xs[2] - 1),
              label, "char box outside crop");
    Node n;
    n.op = Op::kCropResize;
    n.inputs = {x};
    n.crop_h = out_h;
    n.crop_w = out_w;
    n.shape = {int64_t(boxes.size()), xs[1], out_h, out_w};
    n.boxes = std::move(boxes);
    n.label = std::move(label);
    return push(std::move(n));
  }

  const std::vector<int64_t>& shape(NodeId id) const {
    return nodes_.at(id).shape;
  }

  // Evaluates every node in creation order. Inputs are matched by id and
  // must agree with the declared shapes.
  void forward(const std::vector<std::pair<NodeId, Tensor<T>>>& inputs) {
    for (const auto& [id, tensor] : inputs) {
      Node& n = nodes_.at(id);
      if (n.op != Op::kInput)
        throw InvalidArgument("forward: node " + n.label + " is not an input");
      if (tensor.shape != n.shape)
        throw InvalidArgument("forward: input " + n.label + " expects " +
                              shape_str(n.shape) + ", got " +
                              shape_str(tensor.shape));
      n.value = tensor;
      n.fed = true;
    }
    for (size_t i = 0; i < nodes_.size(); ++i) eval(int(i));
    forward_done_ = true;
  }

  // Reverse-mode sweep from `output` seeded with `seed` (defaults to 1
  // for scalar outputs). Parameter gradients accumulate into the store;
  // input gradients stay readable via grad().
  void backward(NodeId output, Tensor<T> seed = Tensor<T>()) {
    if (!forward_done_)
      throw InvalidArgument("backward called before forward");
    if (seed.numel() == 0) seed = Tensor<T>::full(nodes_.at(output).shape, T(1));
    if (seed.shape != nodes_.at(output).shape)
      throw InvalidArgument("backward: seed shape mismatch");
    for (Node& n : nodes_) {
      n.grad = Tensor<T>::zeros(n.shape);
      n.grad_live = false;
    }
    nodes_.at(output).grad = std::move(seed);
    nodes_.at(output).grad_live = true;
    for (int i = int(nodes_.size()) - 1; i >= 0; --i) {
      if (!nodes_[size_t(i)].grad_live) continue;
      if (!nodes_[size_t(i)].grad.all_finite())
        throw NumericError("non-finite gradient at node " + nodes_[size_t(i)].label);
      eval_grad(i);
    }
    for (Node& n : nodes_) {
      if (n.op == Op::kParam && n.grad_live) {
        Tensor<T>& g = store_->grad(n.pname);
        for (int64_t k = 0; k < g.numel(); ++k) g[size_t(k)] += n.grad[size_t(k)];
      }
    }
  }

  const Tensor<T>& value(NodeId id) const { return nodes_.at(id).value; }
  const Tensor<T>& grad(NodeId id) const { return nodes_.at(id).grad; }
  ParameterStore<T>* store() const { return store_; }
  size_t node_count() const { return nodes_.size(); }

private:
  enum class Op {
    kInput, kParam, kConst, kConv2d, kConvT2d, kLeakyRelu, kLogistic,
    kLinear, kReshape, kAdd, kSub, kMul, kScale, kConcatC, kGlobalAvgPool,
    kSampleMean, kReduceMean, kSoftmaxCE, kCropResize,
  };

  struct Node {
    Op op = Op::kInput;
    std::vector<NodeId> inputs;
    std::vector<int64_t> shape;
    Tensor<T> value;
    Tensor<T> grad;
    bool grad_live = false;
    bool fed = false;
    int stride = 1, pad = 0, out_pad = 0;
    T alpha = T(0);
    T scale_v = T(1);
    std::string pname;
    std::vector<CropBox> boxes;
    int crop_h = 0, crop_w = 0;
    std::string label;
  };

  NodeId push(Node n) {
    nodes_.push_back(std::move(n));
    return NodeId(nodes_.size() - 1);
  }

  NodeId binary(Op op, NodeId a, NodeId b, std::string label) {
    require(shape(a) == shape(b), label,
            "operand shapes differ: " + shape_str(shape(a)) + " vs " +
                shape_str(shape(b)));
    Node n;
    n.op = op;
    n.inputs = {a, b};
    n.shape = shape(a);
    n.label = std::move(label);
    return push(std::move(n));
  }

  static void require(bool ok, const std::string& label, const std::string& msg) {
    if (!ok) throw InvalidArgument("graph node " + label + ": " + msg);
  }

  detail::ConvGeom geom(const Node& n) const {
    detail::ConvGeom g;
    const auto& ws = nodes_.at(n.inputs[1]).shape;
    if (n.op == Op::kConv2d) {
      const auto& xs = nodes_.at(n.inputs[0]).shape;
      g.a_channels = ws[0];
      g.b_channels = ws[1];
      g.kh = int(ws[2]);
      g.kw = int(ws[3]);
      g.oh = xs[2];
      g.ow = xs[3];
      g.yh = n.shape[2];
      g.yw = n.shape[3];
    } else {  // transposed: o-grid is the output
      g.a_channels = ws[0];
      g.b_channels = ws[1];
      g.kh = int(ws[2]);
      g.kw = int(ws[3]);
      g.oh = n.shape[2];
      g.ow = n.shape[3];
      const auto& xs = nodes_.at(n.inputs[0]).shape;
      g.yh = xs[2];
      g.yw = xs[3];
    }
    g.stride = n.stride;
    g.pad = n.pad;
    return g;
  }

  void eval(NodeId id);
  void eval_grad(NodeId id);
  void add_grad(NodeId id, const Tensor<T>& g) {
    Node& n = nodes_.at(id);
    for (int64_t i = 0; i < g.numel(); ++i) n.grad[size_t(i)] += g[size_t(i)];
    n.grad_live = true;
  }

  std::vector<Node> nodes_;
  ParameterStore<T>* store_ = nullptr;
  bool forward_done_ = false;
};

template <typename T>
void Graph<T>::eval(NodeId id) {
  Node& n = nodes_.at(id);
  switch (n.op) {
    case Op::kInput:
      if (!n.fed) throw InvalidArgument("forward: input " + n.label + " not fed");
      break;
    case Op::kParam:
      n.value = store_->value(n.pname);
      break;
    case Op::kConst:
      break;
    case Op::kConv2d: {
      const Tensor<T>& x = nodes_[n.inputs[0]].value;
      const Tensor<T>& w = nodes_[n.inputs[1]].value;
      const Tensor<T>& b = nodes_[n.inputs[2]].value;
      detail::ConvGeom g = geom(n);
      const int64_t N = n.shape[0];
      const int64_t K = g.b_channels * g.kh * g.kw;
      const int64_t Ny = g.yh * g.yw;
      n.value = Tensor<T>::zeros(n.shape);
      std::vector<T> cols(size_t(K * Ny));
      for (int64_t s = 0; s < N; ++s) {
        detail::im2col(x.data.data() + s * g.b_channels * g.oh * g.ow, g,
                       cols.data());
        T* out = n.value.data.data() + s * g.a_channels * Ny;
        detail::matmul_nn_acc(w.data.data(), cols.data(), out, g.a_channels,
                              K, Ny);
        for (int64_t a = 0; a < g.a_channels; ++a)
          for (int64_t j = 0; j < Ny; ++j) out[a * Ny + j] += b[size_t(a)];
      }
      break;
    }
    case Op::kConvT2d: {
      const Tensor<T>& x = nodes_[n.inputs[0]].value;
      const Tensor<T>& w = nodes_[n.inputs[1]].value;
      const Tensor<T>& b = nodes_[n.inputs[2]].value;
      detail::ConvGeom g = geom(n);
      const int64_t N = n.shape[0];
      const int64_t K = g.b_channels * g.kh * g.kw;
      const int64_t Ny = g.yh * g.yw;
      n.value = Tensor<T>::zeros(n.shape);
      std::vector<T> cols(size_t(K * Ny));
      for (int64_t s = 0; s < N; ++s) {
        std::fill(cols.begin(), cols.end(), T(0));
        // dcols = W^T * x_s, then scatter into the o-grid (the output).
        detail::matmul_tn_acc(w.data.data(),
                              x.data.data() + s * g.a_channels * Ny,
                              cols.data(), g.a_channels, K, Ny);
        T* out = n.value.data.data() + s * g.b_channels * g.oh * g.ow;
        detail::col2im_acc(cols.data(), g, out);
        const int64_t plane = g.oh * g.ow;
        for (int64_t c = 0; c < g.b_channels; ++c)
          for (int64_t j = 0; j < plane; ++j) out[c * plane + j] += b[size_t(c)];
      }
      break;
    }
    case Op::kLeakyRelu: {
      const Tensor<T>& x = nodes_[n.inputs[0]].value;
      n.value = Tensor<T>::zeros(n.shape);
      for (int64_t i = 0; i < x.numel(); ++i)
        n.value[size_t(i)] = x[size_t(i)] > T(0) ? x[size_t(i)] : n.alpha * x[size_t(i)];
      break;
    }
    case Op::kLogistic: {
      const Tensor<T>& x = nodes_[n.inputs[0]].value;
      n.value = Tensor<T>::zeros(n.shape);
      for (int64_t i = 0; i < x.numel(); ++i)
        n.value[size_t(i)] = T(1) / (T(1) + std::exp(-x[size_t(i)]));
      break;
    }
    case Op::kLinear: {
      const Tensor<T>& x = nodes_[n.inputs[0]].value;
      const Tensor<T>& w = nodes_[n.inputs[1]].value;
      const Tensor<T>& b = nodes_[n.inputs[2]].value;
      const int64_t N = n.shape[0], M = n.shape[1], D = x.shape[1];
      n.value = Tensor<T>::zeros(n.shape);
      detail::matmul_nn_acc(x.data.data(), w.data.data(), n.value.data.data(),
                            N, D, M);
      for (int64_t i = 0; i < N; ++i)
        for (int64_t j = 0; j < M; ++j) n.value[size_t(i * M + j)] += b[size_t(j)];
      break;
    }
    case Op::kReshape: {
      n.value = nodes_[n.inputs[0]].value;
      n.value.shape = n.shape;
      break;
    }
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul: {
      const Tensor<T>& a = nodes_[n.inputs[0]].value;
      const Tensor<T>& b = nodes_[n.inputs[1]].value;
      n.value = Tensor<T>::zeros(n.shape);
      for (int64_t i = 0; i < a.numel(); ++i) {
        switch (n.op) {
          case Op::kAdd: n.value[size_t(i)] = a[size_t(i)] + b[size_t(i)]; break;
          case Op::kSub: n.value[size_t(i)] = a[size_t(i)] - b[size_t(i)]; break;
          default: n.value[size_t(i)] = a[size_t(i)] * b[size_t(i)]; break;
        }
      }
      break;
    }
    case Op::kScale: {
      const Tensor<T>& x = nodes_[n.inputs[0]].value;
      n.value = Tensor<T>::zeros(n.shape);
      for (int64_t i = 0; i < x.numel(); ++i)
        n.value[size_t(i)] = n.scale_v * x[size_t(i)];
      break;
    }
    case Op::kConcatC: {
      const Tensor<T>& a = nodes_[n.inputs[0]].value;
      const Tensor<T>& b = nodes_[n.inputs[1]].value;
      n.value = Tensor<T>::zeros(n.shape);
      const int64_t N = n.shape[0], plane = n.shape[2] * n.shape[3];
      const int64_t ca = a.shape[1], cb = b.shape[1];
      for (int64_t s = 0; s < N; ++s) {
        std::copy_n(a.data.data() + s * ca * plane, ca * plane,
                    n.value.data.data() + s * (ca + cb) * plane);
        std::copy_n(b.data.data() + s * cb * plane, cb * plane,
                    n.value.data.data() + s * (ca + cb) * plane + ca * plane);
      }
      break;
    }
    case Op::kGlobalAvgPool: {
      const Tensor<T>& x = nodes_[n.inputs[0]].value;
      const int64_t N = x.shape[0], C = x.shape[1], plane = x.shape[2] * x.shape[3];
      n.value = Tensor<T>::zeros(n.shape);
      for (int64_t s = 0; s < N; ++s)
        for (int64_t c = 0; c < C; ++c) {
          T acc = T(0);
          const T* p = x.data.data() + (s * C + c) * plane;
          for (int64_t j = 0; j < plane; ++j) acc += p[j];
          n.value[size_t(s * C + c)] = acc / T(plane);
        }
      break;
    }
    case Op::kSampleMean: {
      const Tensor<T>& x = nodes_[n.inputs[0]].value;
      const int64_t N = x.shape[0], rest = x.numel() / std::max<int64_t>(1, N);
      n.value = Tensor<T>::zeros(n.shape);
      for (int64_t s = 0; s < N; ++s) {
        T acc = T(0);
        for (int64_t j = 0; j < rest; ++j) acc += x[size_t(s * rest + j)];
        n.value[size_t(s)] = acc / T(rest);
      }
      break;
    }
    case Op::kReduceMean: {
      const Tensor<T>& x = nodes_[n.inputs[0]].value;
      T acc = T(0);
      for (int64_t i = 0; i < x.numel(); ++i) acc += x[size_t(i)];
      n.value = Tensor<T>::zeros(n.shape);
      n.value[0] = acc / T(x.numel());
      break;
    }
    case Op::kSoftmaxCE: {
      const Tensor<T>& logits = nodes_[n.inputs[0]].value;
      const Tensor<T>& target = nodes_[n.inputs[1]].value;
      const int64_t N = logits.shape[0], K = logits.shape[1];
      T total = T(0);
      for (int64_t s = 0; s < N; ++s) {
        const T* row = logits.data.data() + s * K;
        T mx = row[0];
        for (int64_t k = 1; k < K; ++k) mx = std::max(mx, row[k]);
        T lse = T(0);
        for (int64_t k = 0; k < K; ++k) lse += std::exp(row[k] - mx);
        lse = std::log(lse) + mx;
        T dotp = T(0);
        for (int64_t k = 0; k < K; ++k) dotp += target[size_t(s * K + k)] * row[k];
        total += lse - dotp;
      }
      n.value = Tensor<T>::zeros(n.shape);
      n.value[0] = total / T(N);
      break;
    }
    case Op::kCropResize: {
      const Tensor<T>& x = nodes_[n.inputs[0]].value;
      const int64_t C = x.shape[1], H = x.shape[2], W = x.shape[3];
      const int64_t oh = n.crop_h, ow = n.crop_w;
      n.value = Tensor<T>::zeros(n.shape);
      for (size_t m = 0; m < n.boxes.size(); ++m) {
        const CropBox& bx = n.boxes[m];
        for (int64_t oy = 0; oy < oh; ++oy) {
          double sy = oh > 1 ? bx.y0 + (bx.y1 - bx.y0) * double(oy) / (oh - 1)
                             : (bx.y0 + bx.y1) / 2;
          int64_t y0 = int64_t(sy);
          int64_t y1 = std::min(y0 + 1, H - 1);
          double fy = sy - double(y0);
          for (int64_t ox = 0; ox < ow; ++ox) {
            double sx = ow > 1 ? bx.x0 + (bx.x1 - bx.x0) * double(ox) / (ow - 1)
                               : (bx.x0 + bx.x1) / 2;
            int64_t x0 = int64_t(sx);
            int64_t x1 = std::min(x0 + 1, W - 1);
            double fx = sx - double(x0);
            for (int64_t c = 0; c < C; ++c) {
              const T* p = x.data.data() + (bx.sample * C + c) * H * W;
              double v = double(p[y0 * W + x0]) * (1 - fx) * (1 - fy) +
                         double(p[y0 * W + x1]) * fx * (1 - fy) +
                         double(p[y1 * W + x0]) * (1 - fx) * fy +
                         double(p[y1 * W + x1]) * fx * fy;
              n.value[size_t(((m * C + c) * oh + oy) * ow + ox)] = T(v);
            }
          }
        }
      }
      break;
    }
  }
  if (!n.value.all_finite())
    throw NumericError("non-finite value after node " + n.label);
}

template <typename T>
void Graph<T>::eval_grad(NodeId id) {
  Node& n = nodes_.at(id);
  const Tensor<T>& dy = n.grad;
  switch (n.op) {
    case Op::kInput:
    case Op::kParam:
    case Op::kConst:
      break;
    case Op::kConv2d: {
      Node& xn = nodes_[n.inputs[0]];
      Node& wn = nodes_[n.inputs[1]];
      Node& bn = nodes_[n.inputs[2]];
      detail::ConvGeom g = geom(n);
      const int64_t N = n.shape[0];
      const int64_t K = g.b_channels * g.kh * g.kw;
      const int64_t Ny = g.yh * g.yw;
      std::vector<T> cols(size_t(K * Ny));
      for (int64_t s = 0; s < N; ++s) {
        const T* dys = dy.data.data() + s * g.a_channels * Ny;
        // dX: scatter W^T * dy.
        std::fill(cols.begin(), cols.end(), T(0));
        detail::matmul_tn_acc(wn.value.data.data(), dys, cols.data(),
                              g.a_channels, K, Ny);
        detail::col2im_acc(cols.data(), g,
                           xn.grad.data.data() + s * g.b_channels * g.oh * g.ow);
        // dW += dy * cols(x)^T.
        detail::im2col(xn.value.data.data() + s * g.b_channels * g.oh * g.ow,
                       g, cols.data());
        detail::matmul_nt_acc(dys, cols.data(), wn.grad.data.data(),
                              g.a_channels, Ny, K);
        for (int64_t a = 0; a < g.a_channels; ++a) {
          T acc = T(0);
          for (int64_t j = 0; j < Ny; ++j) acc += dys[a * Ny + j];
          bn.grad[size_t(a)] += acc;
        }
      }
      xn.grad_live = wn.grad_live = bn.grad_live = true;
      break;
    }
    case Op::kConvT2d: {
      Node& xn = nodes_[n.inputs[0]];
      Node& wn = nodes_[n.inputs[1]];
      Node& bn = nodes_[n.inputs[2]];
      detail::ConvGeom g = geom(n);
      const int64_t N = n.shape[0];
      const int64_t K = g.b_channels * g.kh * g.kw;
      const int64_t Ny = g.yh * g.yw;
      const int64_t plane = g.oh * g.ow;
      std::vector<T> cols(size_t(K * Ny));
      for (int64_t s = 0; s < N; ++s) {
        const T* dos = dy.data.data() + s * g.b_channels * plane;
        // dX = conv forward of dOut.
        detail::im2col(dos, g, cols.data());
        detail::matmul_nn_acc(wn.value.data.data(), cols.data(),
                              xn.grad.data.data() + s * g.a_channels * Ny,
                              g.a_channels, K, Ny);
        // dW += x * cols(dOut)^T (adjoint pairing swaps the roles).
        detail::matmul_nt_acc(xn.value.data.data() + s * g.a_channels * Ny,
                              cols.data(), wn.grad.data.data(), g.a_channels,
                              Ny, K);
        for (int64_t c = 0; c < g.b_channels; ++c) {
          T acc = T(0);
          for (int64_t j = 0; j < plane; ++j) acc += dos[c * plane + j];
          bn.grad[size_t(c)] += acc;
        }
      }
      xn.grad_live = wn.grad_live = bn.grad_live = true;
      break;
    }
    case Op::kLeakyRelu: {
      Node& xn = nodes_[n.inputs[0]];
      for (int64_t i = 0; i < dy.numel(); ++i)
        xn.grad[size_t(i)] +=
            dy[size_t(i)] * (xn.value[size_t(i)] > T(0) ? T(1) : n.alpha);
      xn.grad_live = true;
      break;
    }
    case Op::kLogistic: {
      Node& xn = nodes_[n.inputs[0]];
      for (int64_t i = 0; i < dy.numel(); ++i) {
        T y = n.value[size_t(i)];
        xn.grad[size_t(i)] += dy[size_t(i)] * y * (T(1) - y);
      }
      xn.grad_live = true;
      break;
    }
    case Op::kLinear: {
      Node& xn = nodes_[n.inputs[0]];
      Node& wn = nodes_[n.inputs[1]];
      Node& bn = nodes_[n.inputs[2]];
      const int64_t N = n.shape[0], M = n.shape[1], D = xn.shape[1];
      // dX += dY * W^T ; dW += X^T * dY ; db += colsum(dY)
      detail::matmul_nt_acc(dy.data.data(), wn.value.data.data(),
                            xn.grad.data.data(), N, M, D);
      detail::matmul_tn_acc(xn.value.data.data(), dy.data.data(),
                            wn.grad.data.data(), N, D, M);
      for (int64_t i = 0; i < N; ++i)
        for (int64_t j = 0; j < M; ++j) bn.grad[size_t(j)] += dy[size_t(i * M + j)];
      xn.grad_live = wn.grad_live = bn.grad_live = true;
      break;
    }
    case Op::kReshape: {
      Node& xn = nodes_[n.inputs[0]];
      for (int64_t i = 0; i < dy.numel(); ++i) xn.grad[size_t(i)] += dy[size_t(i)];
      xn.grad_live = true;
      break;
    }
    case Op::kAdd: {
      add_grad(n.inputs[0], dy);
      add_grad(n.inputs[1], dy);
      break;
    }
    case Op::kSub: {
      Node& an = nodes_[n.inputs[0]];
      Node& bn = nodes_[n.inputs[1]];
      for (int64_t i = 0; i < dy.numel(); ++i) {
        an.grad[size_t(i)] += dy[size_t(i)];
        bn.grad[size_t(i)] -= dy[size_t(i)];
      }
      an.grad_live = bn.grad_live = true;
      break;
    }
    case Op::kMul: {
      Node& an = nodes_[n.inputs[0]];
      Node& bn = nodes_[n.inputs[1]];
      for (int64_t i = 0; i < dy.numel(); ++i) {
        an.grad[size_t(i)] += dy[size_t(i)] * bn.value[size_t(i)];
        bn.grad[size_t(i)] += dy[size_t(i)] * an.value[size_t(i)];
      }
      an.grad_live = bn.grad_live = true;
      break;
    }
    case Op::kScale: {
      Node& xn = nodes_[n.inputs[0]];
      for (int64_t i = 0; i < dy.numel(); ++i)
        xn.grad[size_t(i)] += n.scale_v * dy[size_t(i)];
      xn.grad_live = true;
      break;
    }
    case Op::kConcatC: {
      Node& an = nodes_[n.inputs[0]];
      Node& bn = nodes_[n.inputs[1]];
      const int64_t N = n.shape[0], plane = n.shape[2] * n.shape[3];
      const int64_t ca = an.shape[1], cb = bn.shape[1];
      for (int64_t s = 0; s < N; ++s) {
        const T* src = dy.data.data() + s * (ca + cb) * plane;
        T* da = an.grad.data.data() + s * ca * plane;
        T* db = bn.grad.data.data() + s * cb * plane;
        for (int64_t i = 0; i < ca * plane; ++i) da[i] += src[i];
        for (int64_t i = 0; i < cb * plane; ++i) db[i] += src[ca * plane + i];
      }
      an.grad_live = bn.grad_live = true;
      break;
    }
    case Op::kGlobalAvgPool: {
      Node& xn = nodes_[n.inputs[0]];
      const int64_t N = xn.shape[0], C = xn.shape[1],
                    plane = xn.shape[2] * xn.shape[3];
      for (int64_t s = 0; s < N; ++s)
        for (int64_t c = 0; c < C; ++c) {
          T g = dy[size_t(s * C + c)] / T(plane);
          T* p = xn.grad.data.data() + (s * C + c) * plane;
          for (int64_t j = 0; j < plane; ++j) p[j] += g;
        }
      xn.grad_live = true;
      break;
    }
    case Op::kSampleMean: {
      Node& xn = nodes_[n.inputs[0]];
      const int64_t N = xn.shape[0], rest = xn.value.numel() / std::max<int64_t>(1, N);
      for (int64_t s = 0; s < N; ++s) {
        T g = dy[size_t(s)] / T(rest);
        for (int64_t j = 0; j < rest; ++j) xn.grad[size_t(s * rest + j)] += g;
      }
      xn.grad_live = true;
      break;
    }
    case Op::kReduceMean: {
      Node& xn = nodes_[n.inputs[0]];
      T g = dy[0] / T(xn.value.numel());
      for (int64_t i = 0; i < xn.value.numel(); ++i) xn.grad[size_t(i)] += g;
      xn.grad_live = true;
      break;
    }
    case Op::kSoftmaxCE: {
      Node& ln = nodes_[n.inputs[0]];
      const Tensor<T>& target = nodes_[n.inputs[1]].value;
      const int64_t N = ln.shape[0], K = ln.shape[1];
      const T g = dy[0] / T(N);
      for (int64_t s = 0; s < N; ++s) {
        const T* row = ln.value.data.data() + s * K;
        T mx = row[0];
        for (int64_t k = 1; k < K; ++k) mx = std::max(mx, row[k]);
        T denom = T(0);
        for (int64_t k = 0; k < K; ++k) denom += std::exp(row[k] - mx);
        for (int64_t k = 0; k < K; ++k) {
          T p = std::exp(row[k] - mx) / denom;
          ln.grad[size_t(s * K + k)] += g * (p - target[size_t(s * K + k)]);
        }
      }
      ln.grad_live = true;
      break;
    }
    case Op::kCropResize: {
      Node& xn = nodes_[n.inputs[0]];
      const int64_t C = xn.shape[1], H = xn.shape[2], W = xn.shape[3];
      const int64_t oh = n.crop_h, ow = n.crop_w;
      for (size_t m = 0; m < n.boxes.size(); ++m) {
        const CropBox& bx = n.boxes[m];
        for (int64_t oy = 0; oy < oh; ++oy) {
          double sy = oh > 1 ? bx.y0 + (bx.y1 - bx.y0) * double(oy) / (oh - 1)
                             : (bx.y0 + bx.y1) / 2;
          int64_t y0 = int64_t(sy);
          int64_t y1 = std::min(y0 + 1, H - 1);
          double fy = sy - double(y0);
          for (int64_t ox = 0; ox < ow; ++ox) {
            double sx = ow > 1 ? bx.x0 + (bx.x1 - bx.x0) * double(ox) / (ow - 1)
                               : (bx.x0 + bx.x1) / 2;
            int64_t x0 = int64_t(sx);
            int64_t x1 = std::min(x0 + 1, W - 1);
            double fx = sx - double(x0);
            for (int64_t c = 0; c < C; ++c) {
              T g = dy[size_t(((m * C + c) * oh + oy) * ow + ox)];
              T* p = xn.grad.data.data() + (bx.sample * C + c) * H * W;
              p[y0 * W + x0] += g * T((1 - fx) * (1 - fy));
              p[y0 * W + x1] += g * T(fx * (1 - fy));
              p[y1 * W + x0] += g * T((1 - fx) * fy);
              p[y1 * W + x1] += g * T(fx * fy);
            }
          }
        }
      }
      xn.grad_live = true;
      break;
    }
  }
}

// Central-difference comparison of analytic parameter gradients for a
// scalar-output graph. Checks every coordinate, or `sample_coords` random
// ones per parameter when positive. Returns the max relative error.
template <typename T>
double grad_check(Graph<T>& graph, typename Graph<T>::NodeId output,
                  const std::vector<std::pair<typename Graph<T>::NodeId, Tensor<T>>>& inputs,
                  double epsilon, int64_t sample_coords = 0,
                  uint64_t seed = 7) {
  ParameterStore<T>* store = graph.store();
  if (!store) throw InvalidArgument("grad_check: graph has no parameters");
  store->zero_grads();
  graph.forward(inputs);
  if (graph.value(output).numel() != 1)
    throw InvalidArgument("grad_check: output must be scalar");
  graph.backward(output);

  std::map<std::string, Tensor<T>> analytic = store->grads;
  Rng rng(seed);
  double max_rel = 0;
  for (const std::string& name : store->names()) {
    Tensor<T>& value = store->value(name);
    const Tensor<T>& grad = analytic.at(name);
    std::vector<int64_t> coords;
    if (sample_coords > 0 && value.numel() > sample_coords) {
      for (int64_t i = 0; i < sample_coords; ++i)
        coords.push_back(int64_t(rng.uniform_index(uint64_t(value.numel()))));
    } else {
      coords.resize(size_t(value.numel()));
      for (size_t i = 0; i < coords.size(); ++i) coords[i] = int64_t(i);
    }
    for (int64_t c : coords) {
      T saved = value[size_t(c)];
      value[size_t(c)] = saved + T(epsilon);
      graph.forward(inputs);
      double up = double(graph.value(output)[0]);
      value[size_t(c)] = saved - T(epsilon);
      graph.forward(inputs);
      double down = double(graph.value(output)[0]);
      value[size_t(c)] = saved;
      double numeric = (up - down) / (2 * epsilon);
      double a = double(grad[size_t(c)]);
      double rel = std::abs(a - numeric) /
                   std::max({1.0, std::abs(a), std::abs(numeric)});
      max_rel = std::max(max_rel, rel);
    }
  }
  graph.forward(inputs);  // restore clean values
  return max_rel;
}

}  // namespace textsynth
