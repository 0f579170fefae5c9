#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "coreset/error.hpp"
#include "coreset/network.hpp"
#include "coreset/parallel.hpp"
#include "coreset/tensor.hpp"

namespace coreset {

struct EvalSet {
  Shape input_shape;
  std::size_t class_count = 0;
  std::vector<Tensor> inputs;
  std::vector<std::size_t> labels;

  std::size_t size() const noexcept { return labels.size(); }

  bool operator==(const EvalSet&) const = default;
};

inline void validate(const EvalSet& eval) {
  require(!eval.labels.empty(), ErrorKind::Validation, "empty evaluation set");
  require(eval.inputs.size() == eval.labels.size(), ErrorKind::Validation, "evaluation set inputs/labels differ in count");
  require(eval.class_count > 0, ErrorKind::Validation, "evaluation set has no classes");
  for (std::size_t i = 0; i < eval.size(); ++i) {
    require(eval.inputs[i].shape() == eval.input_shape, ErrorKind::Validation,
            "sample " + std::to_string(i) + " has shape " + shape_string(eval.inputs[i].shape()));
    require(eval.labels[i] < eval.class_count, ErrorKind::Validation,
            "sample " + std::to_string(i) + " label " + std::to_string(eval.labels[i]) + " >= class count " +
                std::to_string(eval.class_count));
  }
}

namespace detail {

inline Matrix apply_linear(const LayerPayload& payload, const Matrix& cols) {
  if (const auto* w = std::get_if<Matrix>(&payload)) return matmul(*w, cols);
  const auto& c = std::get<CoresetLayer>(payload);
  return matmul(c.mixer, matmul(c.basis, cols));
}

inline Tensor run_layer(const Network& net, const LayerSpec& l, const std::vector<const Tensor*>& in) {
  const Tensor& x = *in.front();
  switch (l.kind) {
    case LayerKind::Conv: {
      require(x.rank() == 3 && x.dim(0) == l.channels, ErrorKind::Shape,
              "layer '" + l.id + "': input shape " + shape_string(x.shape()));
      const Matrix cols = im2col(x, l.kernel_h, l.kernel_w, l.stride, l.pad);
      Matrix y = apply_linear(net.params.at(l.id), cols);
      const std::size_t oh = (x.dim(1) + 2 * l.pad - l.kernel_h) / l.stride + 1;
      const std::size_t ow = (x.dim(2) + 2 * l.pad - l.kernel_w) / l.stride + 1;
      return Tensor({l.filters, oh, ow}, std::vector<float>(y.values()));
    }
    case LayerKind::FullyConnected: {
      require(x.size() == l.in_features, ErrorKind::Shape,
              "layer '" + l.id + "': input has " + std::to_string(x.size()) + " features");
      std::vector<float> col(x.values());
      col.push_back(1.0f);
      const std::size_t n = col.size();
      Matrix y = apply_linear(net.params.at(l.id), Matrix(n, 1, std::move(col)));
      return Tensor({l.filters}, std::vector<float>(y.values()));
    }
    case LayerKind::Relu: return relu(x);
    case LayerKind::MaxPool: return maxpool2d(x, l.window, l.stride);
    case LayerKind::AvgPool: return avgpool2d(x, l.window, l.stride);
    case LayerKind::Flatten: return x.reshaped({x.size()});
    case LayerKind::Softmax: return Tensor(x.shape(), softmax(x.data()));
    case LayerKind::ResidualAdd: {
      const Tensor& y = *in[1];
      require(x.shape() == y.shape(), ErrorKind::Shape, "layer '" + l.id + "': residual inputs differ in shape");
      Tensor out = x;
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
      return out;
    }
  }
  fail(ErrorKind::Validation, "unhandled layer kind");
}

}  // namespace detail

/// Runs the network and returns the output of every layer named in `taps` (plus the
/// final output under the id of the last layer).
inline std::map<std::string, Tensor> forward_with_taps(const Network& net, const Tensor& input,
                                                       const std::set<std::string>& taps = {}) {
  require(input.shape() == net.input_shape, ErrorKind::Shape,
          "input shape " + shape_string(input.shape()) + " does not match network input " +
              shape_string(net.input_shape));
  // Values are released once their last consumer has run.
  std::map<std::string, std::size_t> last_use;
  for (std::size_t i = 0; i < net.layers.size(); ++i)
    for (const auto& in : net.layers[i].inputs) last_use[in] = i;

  std::map<std::string, Tensor> values;
  values.emplace(std::string(kInputId), input);
  std::map<std::string, Tensor> tapped;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    std::vector<const Tensor*> in;
    for (const auto& id : l.inputs) {
      auto it = values.find(id);
      require(it != values.end(), ErrorKind::Validation, "layer '" + l.id + "' reads undefined value '" + id + "'");
      in.push_back(&it->second);
    }
    Tensor out = detail::run_layer(net, l, in);
    for (const auto& id : l.inputs)
      if (last_use[id] == i && !taps.contains(id)) values.erase(id);
    if (taps.contains(l.id)) tapped[l.id] = out;
    values[l.id] = std::move(out);
  }
  tapped[net.layers.back().id] = std::move(values.at(net.layers.back().id));
  return tapped;
}

/// Class-score vector (the output of the last layer, flattened).
inline std::vector<float> forward(const Network& net, const Tensor& input) {
  auto out = forward_with_taps(net, input);
  return out.at(net.layers.back().id).values();
}

/// Indices of ceil(s * S) samples drawn without replacement from a seeded generator,
/// returned in ascending order. s == 1 selects every sample.
inline std::vector<std::size_t> sample_subset(std::size_t total, double fraction, std::uint64_t seed) {
  require(fraction > 0.0 && fraction <= 1.0, ErrorKind::Validation, "subset fraction must lie in (0, 1]");
  const auto count = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(total) - 1e-9));
  require(count > 0, ErrorKind::Validation, "subset is empty");
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), 0);
  if (count < total) {
    // Partial Fisher-Yates with an explicitly defined draw, so subsets agree across
    // standard library implementations.
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint64_t span = total - i;
      const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % span;
      std::uint64_t draw;
      do draw = rng();
      while (draw >= limit);
      std::swap(idx[i], idx[i + draw % span]);
    }
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

/// Per-sample correctness (argmax == label) for the given sample indices.
inline std::vector<char> correct_predictions(const Network& net, const EvalSet& eval,
                                             const std::vector<std::size_t>& indices) {
  std::vector<char> hits(indices.size(), 0);
  parallel_for(indices.size(), [&](std::size_t k) {
    const std::size_t i = indices[k];
    const auto scores = forward(net, eval.inputs[i]);
    hits[k] = argmax(scores) == eval.labels[i] ? 1 : 0;
  });
  return hits;
}

inline double accuracy_on(const Network& net, const EvalSet& eval, const std::vector<std::size_t>& indices) {
  require(!indices.empty(), ErrorKind::Validation, "subset is empty");
  const auto hits = correct_predictions(net, eval, indices);
  std::size_t n = 0;
  for (char h : hits) n += static_cast<std::size_t>(h);
  return static_cast<double>(n) / static_cast<double>(indices.size());
}

/// Top-1 accuracy over a seeded random subset of ceil(s * S) samples.
inline double accuracy(const Network& net, const EvalSet& eval, double subset_fraction = 1.0,
                       std::uint64_t seed = 0) {
  require(eval.size() > 0, ErrorKind::Validation, "empty evaluation set");
  return accuracy_on(net, eval, sample_subset(eval.size(), subset_fraction, seed));
}

enum class StatsMode {
  MaxPooled,       // per filter: max over spatial positions
  FeatureMapNorm,  // per filter: Frobenius norm of the whole response map
};

// Per-sample, per-filter activation scalars of one parametric layer.
struct ActivationStats {
  std::string layer_id;
  std::string tap_id;
  StatsMode mode = StatsMode::MaxPooled;
  MatrixD samples;  // S x N

  std::size_t filter_count() const noexcept { return samples.cols(); }

  /// Mean activation norm per filter, (1/S) sum_j |a_fj|.
  std::vector<double> mean_norm() const {
    std::vector<double> mean(samples.cols(), 0.0);
    for (std::size_t j = 0; j < samples.rows(); ++j)
      for (std::size_t f = 0; f < samples.cols(); ++f) mean[f] += std::abs(samples(j, f));
    for (double& m : mean) m /= static_cast<double>(samples.rows());
    return mean;
  }

  /// Mean squared activation per filter; the pruning ranking statistic.
  std::vector<double> mean_square() const {
    std::vector<double> mean(samples.cols(), 0.0);
    for (std::size_t j = 0; j < samples.rows(); ++j)
      for (std::size_t f = 0; f < samples.cols(); ++f) mean[f] += samples(j, f) * samples(j, f);
    for (double& m : mean) m /= static_cast<double>(samples.rows());
    return mean;
  }

  /// Normalized importance i_f = mean_norm_f / sum_p mean_norm_p.
  std::vector<double> importance() const {
    auto mean = mean_norm();
    const double total = std::accumulate(mean.begin(), mean.end(), 0.0);
    require(total > 0.0, ErrorKind::Validation,
            "importance undefined for layer '" + layer_id + "': every filter has zero mean activation");
    for (double& m : mean) m /= total;
    return mean;
  }
};

/// The value statistics are recorded on: the ReLU that directly consumes the layer, if
/// any, else the layer's own output.
inline std::string stats_tap(const Network& net, const std::string& layer_id) {
  for (const auto& c : net.consumers(layer_id))
    if (net.layer(c).kind == LayerKind::Relu) return c;
  return layer_id;
}

inline ActivationStats record_stats(const Network& net, const EvalSet& eval, const std::string& layer_id,
                                    StatsMode mode = StatsMode::MaxPooled) {
  require(eval.size() > 0, ErrorKind::Validation, "empty evaluation set");
  const auto& spec = net.layer(layer_id);
  require(spec.parametric(), ErrorKind::Validation, "layer '" + layer_id + "' is not parametric");

  ActivationStats stats;
  stats.layer_id = layer_id;
  stats.tap_id = stats_tap(net, layer_id);
  stats.mode = mode;
  stats.samples = MatrixD(eval.size(), spec.filters);
  const std::set<std::string> taps{stats.tap_id};
  parallel_for(eval.size(), [&](std::size_t j) {
    const auto values = forward_with_taps(net, eval.inputs[j], taps);
    const Tensor& t = values.at(stats.tap_id);
    const std::size_t n = spec.filters;
    const std::size_t per_filter = t.size() / n;
    for (std::size_t f = 0; f < n; ++f) {
      auto map = t.data().subspan(f * per_filter, per_filter);
      double v;
      if (spec.kind == LayerKind::FullyConnected) {
        v = map[0];
      } else if (mode == StatsMode::MaxPooled) {
        v = *std::max_element(map.begin(), map.end());
      } else {
        double s = 0.0;
        for (float a : map) s += static_cast<double>(a) * a;
        v = std::sqrt(s);
      }
      stats.samples(j, f) = v;
    }
  });
  return stats;
}

}  // namespace coreset
