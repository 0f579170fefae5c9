#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "coreset/error.hpp"
#include "coreset/tensor.hpp"
#include "json.hpp"

namespace coreset {

enum class LayerKind { Conv, FullyConnected, Relu, MaxPool, AvgPool, Flatten, Softmax, ResidualAdd };

inline std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::FullyConnected: return "fc";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::AvgPool: return "avgpool";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Softmax: return "softmax";
    case LayerKind::ResidualAdd: return "residual-add";
  }
  return "?";
}

inline LayerKind parse_layer_kind(std::string_view s) {
  for (auto k : {LayerKind::Conv, LayerKind::FullyConnected, LayerKind::Relu, LayerKind::MaxPool, LayerKind::AvgPool,
                 LayerKind::Flatten, LayerKind::Softmax, LayerKind::ResidualAdd})
    if (to_string(k) == s) return k;
  fail(ErrorKind::Format, "unknown layer kind '" + std::string(s) + "'");
}

/// Name of the implicit graph source.
inline constexpr std::string_view kInputId = "input";

struct LayerSpec {
  std::string id;
  LayerKind kind = LayerKind::Relu;
  std::vector<std::string> inputs;

  // conv / fc
  std::size_t filters = 0;
  // conv
  std::size_t channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;
  std::size_t pad = 0;
  // fc
  std::size_t in_features = 0;
  // pools
  std::size_t window = 0;

  bool parametric() const noexcept { return kind == LayerKind::Conv || kind == LayerKind::FullyConnected; }

  /// Column count of the layer's weight matrix, bias column included.
  std::size_t weight_cols() const {
    if (kind == LayerKind::Conv) return channels * kernel_h * kernel_w + 1;
    if (kind == LayerKind::FullyConnected) return in_features + 1;
    return 0;
  }

  std::size_t dense_param_count() const { return filters * weight_cols(); }

  bool operator==(const LayerSpec&) const = default;
};

enum class CoresetMethod { K, S, A };

inline char to_char(CoresetMethod m) {
  switch (m) {
    case CoresetMethod::K: return 'K';
    case CoresetMethod::S: return 'S';
    case CoresetMethod::A: return 'A';
  }
  return '?';
}

inline CoresetMethod parse_method(std::string_view s) {
  if (s == "K" || s == "k") return CoresetMethod::K;
  if (s == "S" || s == "s") return CoresetMethod::S;
  if (s == "A" || s == "a") return CoresetMethod::A;
  fail(ErrorKind::Validation, "unknown coreset method '" + std::string(s) + "'");
}

// Factorized layer W ~= mixer * basis. The mixer is N x r and maps the r coreset
// responses back to the N outputs; the basis is r x (P+1) and acts on the lowered
// input. Rows of the mixer and columns of the basis that are exactly zero are listed
// in the dropped sets; they stay in the matrices but are not stored or counted.
struct CoresetLayer {
  std::string layer_id;
  CoresetMethod method = CoresetMethod::K;
  Matrix mixer;
  Matrix basis;
  std::vector<std::size_t> dropped_rows;
  std::vector<std::size_t> dropped_cols;
  double lambda = 0.0;

  std::size_t rank() const noexcept { return mixer.cols(); }

  bool operator==(const CoresetLayer&) const = default;
};

using LayerPayload = std::variant<Matrix, CoresetLayer>;

struct Network {
  Shape input_shape;
  std::vector<LayerSpec> layers;  // topological order; the last layer is the output
  std::map<std::string, LayerPayload> params;
  nlohmann::json metadata = nlohmann::json::object();

  const LayerSpec& layer(std::string_view id) const {
    for (const auto& l : layers)
      if (l.id == id) return l;
    fail(ErrorKind::Validation, "no layer named '" + std::string(id) + "'");
  }
  LayerSpec& layer(std::string_view id) {
    return const_cast<LayerSpec&>(static_cast<const Network&>(*this).layer(id));
  }

  std::size_t index_of(std::string_view id) const {
    for (std::size_t i = 0; i < layers.size(); ++i)
      if (layers[i].id == id) return i;
    fail(ErrorKind::Validation, "no layer named '" + std::string(id) + "'");
  }

  std::vector<std::string> parametric_ids() const {
    std::vector<std::string> ids;
    for (const auto& l : layers)
      if (l.parametric()) ids.push_back(l.id);
    return ids;
  }

  std::vector<std::string> consumers(std::string_view id) const {
    std::vector<std::string> out;
    for (const auto& l : layers)
      if (std::find(l.inputs.begin(), l.inputs.end(), id) != l.inputs.end()) out.push_back(l.id);
    return out;
  }

  const Matrix& dense_weights(std::string_view id) const {
    auto it = params.find(std::string(id));
    require(it != params.end(), ErrorKind::Validation, "layer '" + std::string(id) + "' has no weights");
    const auto* m = std::get_if<Matrix>(&it->second);
    require(m != nullptr, ErrorKind::Validation, "layer '" + std::string(id) + "' is not dense");
    return *m;
  }

  bool is_dense() const {
    return std::all_of(params.begin(), params.end(),
                       [](const auto& kv) { return std::holds_alternative<Matrix>(kv.second); });
  }

  std::size_t dense_param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.dense_param_count();
    return n;
  }

  bool operator==(const Network&) const = default;
};

inline Matrix densify_payload(const LayerPayload& p) {
  if (const auto* m = std::get_if<Matrix>(&p)) return *m;
  const auto& c = std::get<CoresetLayer>(p);
  return matmul(c.mixer, c.basis);
}

/// Returns the output shape of every layer (and of the input), validating the graph
/// and the weight payloads along the way.
inline std::map<std::string, Shape> infer_shapes(const Network& net) {
  require(!net.input_shape.empty(), ErrorKind::Validation, "network has no input shape");
  require(!net.layers.empty(), ErrorKind::Validation, "network has no layers");
  std::map<std::string, Shape> shapes;
  shapes[std::string(kInputId)] = net.input_shape;

  for (const auto& l : net.layers) {
    auto where = "layer '" + l.id + "': ";
    require(!l.id.empty() && l.id != kInputId, ErrorKind::Validation, "invalid layer id '" + l.id + "'");
    require(!shapes.contains(l.id), ErrorKind::Validation, "duplicate layer id '" + l.id + "'");
    const std::size_t want_inputs = l.kind == LayerKind::ResidualAdd ? 2 : 1;
    require(l.inputs.size() == want_inputs, ErrorKind::Validation,
            where + "expects " + std::to_string(want_inputs) + " input(s)");
    for (const auto& in : l.inputs)
      require(shapes.contains(in), ErrorKind::Validation,
              where + "input '" + in + "' is not defined earlier (graph must be topologically ordered)");
    const Shape& in = shapes.at(l.inputs.front());

    Shape out;
    switch (l.kind) {
      case LayerKind::Conv: {
        require(in.size() == 3, ErrorKind::Validation, where + "conv input must be (C,H,W)");
        require(l.filters > 0 && l.kernel_h > 0 && l.kernel_w > 0 && l.stride > 0, ErrorKind::Validation,
                where + "conv geometry must be positive");
        require(in[0] == l.channels, ErrorKind::Validation,
                where + "expects " + std::to_string(l.channels) + " channels, input has " + std::to_string(in[0]));
        require(in[1] + 2 * l.pad >= l.kernel_h && in[2] + 2 * l.pad >= l.kernel_w, ErrorKind::Validation,
                where + "kernel larger than padded input");
        out = {l.filters, (in[1] + 2 * l.pad - l.kernel_h) / l.stride + 1,
               (in[2] + 2 * l.pad - l.kernel_w) / l.stride + 1};
        break;
      }
      case LayerKind::FullyConnected:
        require(l.filters > 0, ErrorKind::Validation, where + "fc needs at least one output");
        require(shape_size(in) == l.in_features, ErrorKind::Validation,
                where + "expects " + std::to_string(l.in_features) + " inputs, got " + std::to_string(shape_size(in)));
        out = {l.filters};
        break;
      case LayerKind::MaxPool:
      case LayerKind::AvgPool:
        require(in.size() == 3, ErrorKind::Validation, where + "pool input must be (C,H,W)");
        require(l.window > 0 && l.stride > 0 && in[1] >= l.window && in[2] >= l.window, ErrorKind::Validation,
                where + "bad pool geometry");
        out = {in[0], (in[1] - l.window) / l.stride + 1, (in[2] - l.window) / l.stride + 1};
        break;
      case LayerKind::Flatten: out = {shape_size(in)}; break;
      case LayerKind::Relu:
      case LayerKind::Softmax: out = in; break;
      case LayerKind::ResidualAdd:
        require(shapes.at(l.inputs[1]) == in, ErrorKind::Shape, where + "residual-add inputs differ in shape");
        out = in;
        break;
    }
    if (l.kind == LayerKind::Softmax) require(in.size() == 1, ErrorKind::Validation, where + "softmax needs a vector");

    if (l.parametric()) {
      auto it = net.params.find(l.id);
      require(it != net.params.end(), ErrorKind::Validation, where + "missing weights");
      const std::size_t rows = l.filters, cols = l.weight_cols();
      if (const auto* m = std::get_if<Matrix>(&it->second)) {
        require(m->rows() == rows && m->cols() == cols, ErrorKind::Shape,
                where + "weights are " + std::to_string(m->rows()) + "x" + std::to_string(m->cols()) + ", expected " +
                    std::to_string(rows) + "x" + std::to_string(cols));
        require(all_finite(m->data()), ErrorKind::Validation, where + "non-finite weight");
      } else {
        const auto& c = std::get<CoresetLayer>(it->second);
        require(c.mixer.rows() == rows && c.basis.cols() == cols && c.mixer.cols() == c.basis.rows() &&
                    c.mixer.cols() > 0,
                ErrorKind::Shape, where + "coreset factors do not match layer geometry");
        require(all_finite(c.mixer.data()) && all_finite(c.basis.data()), ErrorKind::Validation,
                where + "non-finite coreset factor");
      }
    }
    shapes[l.id] = std::move(out);
  }

  for (std::size_t i = 0; i + 1 < net.layers.size(); ++i)
    require(!net.consumers(net.layers[i].id).empty(), ErrorKind::Validation,
            "layer '" + net.layers[i].id + "' has no consumer; the network must have a single output");
  for (const auto& [id, _] : net.params)
    require(shapes.contains(id) && net.layer(id).parametric(), ErrorKind::Validation,
            "weights given for unknown or non-parametric layer '" + id + "'");
  return shapes;
}

inline void validate(const Network& net) { (void)infer_shapes(net); }

}  // namespace coreset
