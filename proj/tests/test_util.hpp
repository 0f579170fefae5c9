#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "coreset/coreset_all.hpp"

namespace testutil {

using namespace coreset;

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(CORESET_FIXTURE_DIR) / name; }

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("coreset_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

template <typename M = MatrixD>
M random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  M m(rows, cols);
  for (auto& x : m.data()) x = static_cast<typename M::value_type>(dist(rng));
  return m;
}

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  Tensor t(shape);
  for (auto& x : t.data()) x = dist(rng);
  return t;
}

inline LayerSpec fc(const std::string& id, const std::string& input, std::size_t in, std::size_t out) {
  LayerSpec l;
  l.id = id;
  l.kind = LayerKind::FullyConnected;
  l.inputs = {input};
  l.in_features = in;
  l.filters = out;
  return l;
}

inline LayerSpec conv(const std::string& id, const std::string& input, std::size_t c, std::size_t n, std::size_t k,
                      std::size_t stride = 1, std::size_t pad = 0) {
  LayerSpec l;
  l.id = id;
  l.kind = LayerKind::Conv;
  l.inputs = {input};
  l.channels = c;
  l.filters = n;
  l.kernel_h = l.kernel_w = k;
  l.stride = stride;
  l.pad = pad;
  return l;
}

inline LayerSpec simple(const std::string& id, LayerKind kind, const std::string& input) {
  LayerSpec l;
  l.id = id;
  l.kind = kind;
  l.inputs = {input};
  return l;
}

inline LayerSpec pool(const std::string& id, const std::string& input, std::size_t window) {
  LayerSpec l = simple(id, LayerKind::MaxPool, input);
  l.window = window;
  l.stride = window;
  return l;
}

// input(in) -> fc1 -> relu1 -> fc2 -> softmax, random weights.
inline Network mlp(std::size_t in, std::size_t hidden, std::size_t classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Network net;
  net.input_shape = {in};
  net.layers = {fc("fc1", "input", in, hidden), simple("relu1", LayerKind::Relu, "fc1"), fc("fc2", "relu1", hidden, classes),
                simple("softmax", LayerKind::Softmax, "fc2")};
  net.params["fc1"] = random_matrix<Matrix>(hidden, in + 1, rng, 0.5);
  net.params["fc2"] = random_matrix<Matrix>(classes, hidden + 1, rng, 0.5);
  return net;
}

// input(1,6,6) -> conv1(3x3, pad 1) -> relu -> pool 2 -> conv2(3x3, pad 1) -> relu -> flatten -> fc -> softmax
inline Network small_cnn(std::size_t c1, std::size_t c2, std::size_t classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Network net;
  net.input_shape = {1, 6, 6};
  net.layers = {conv("conv1", "input", 1, c1, 3, 1, 1),
                simple("relu1", LayerKind::Relu, "conv1"),
                pool("pool1", "relu1", 2),
                conv("conv2", "pool1", c1, c2, 3, 1, 1),
                simple("relu2", LayerKind::Relu, "conv2"),
                simple("flatten", LayerKind::Flatten, "relu2"),
                fc("fc", "flatten", c2 * 9, classes),
                simple("softmax", LayerKind::Softmax, "fc")};
  net.params["conv1"] = random_matrix<Matrix>(c1, 10, rng, 0.5);
  net.params["conv2"] = random_matrix<Matrix>(c2, c1 * 9 + 1, rng, 0.3);
  net.params["fc"] = random_matrix<Matrix>(classes, c2 * 9 + 1, rng, 0.3);
  return net;
}

// Labels each input with the network's own prediction, so the reference accuracy is 1.
inline EvalSet self_labelled(const Network& net, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  EvalSet eval;
  eval.input_shape = net.input_shape;
  eval.class_count = net.layers.back().kind == LayerKind::Softmax ? net.layers[net.layers.size() - 2].filters
                                                                 : net.layers.back().filters;
  for (std::size_t i = 0; i < count; ++i) {
    Tensor x = random_tensor(net.input_shape, rng);
    eval.labels.push_back(argmax(forward(net, x)));
    eval.inputs.push_back(std::move(x));
  }
  return eval;
}

inline double max_abs_diff(std::span<const float> a, std::span<const float> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

}  // namespace testutil
