#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "coreset/codec.hpp"
#include "coreset/coreset.hpp"
#include "coreset/error.hpp"
#include "coreset/network.hpp"
#include "coreset/pruning.hpp"

namespace coreset {

struct LayerReport {
  std::string id;
  std::size_t filters = 0;         // N_k of the original network
  std::size_t kept_filters = 0;    // N*_k after pruning
  std::size_t coreset_rank = 0;    // Ñ_k, 0 when the layer stayed dense
  char method = '-';               // K, S, A, or '-' for dense
  double lambda = 0.0;
  std::size_t dropped_rows = 0;
  std::size_t dropped_cols = 0;
  std::size_t dense_params = 0;    // original N_k (C_k h_k w_k + 1)
  std::size_t pruned_params = 0;   // dense size after pruning
  std::size_t compressed_params = 0;
  std::size_t bytes = 0;           // serialized payload bytes
  std::string note;

  bool operator==(const LayerReport&) const = default;
};

struct CompressionReport {
  std::vector<LayerReport> layers;
  std::string method;
  bool prune = false;
  double prune_budget = 0.0;
  double coreset_budget = 0.0;
  double subset_fraction = 1.0;
  std::uint64_t seed = 0;
  unsigned quantize_bits = 32;
  bool prune_budget_unmet = false;

  std::size_t total_dense_params = 0;
  std::size_t total_pruned_params = 0;
  std::size_t total_compressed_params = 0;
  std::size_t total_bytes = 0;
  std::size_t unquantized_bytes = 0;

  double accuracy_original = 0.0;
  double accuracy_pruned = 0.0;
  double accuracy_coreset = 0.0;
  std::optional<double> accuracy_quantized;

  double compression_ratio() const {
    return total_compressed_params ? static_cast<double>(total_dense_params) / static_cast<double>(total_compressed_params)
                                   : 0.0;
  }
  double byte_ratio() const {
    return total_bytes ? static_cast<double>(unquantized_bytes) / static_cast<double>(total_bytes) : 0.0;
  }

  void recompute_totals() {
    total_dense_params = total_pruned_params = total_compressed_params = total_bytes = 0;
    for (const auto& l : layers) {
      total_dense_params += l.dense_params;
      total_pruned_params += l.pruned_params;
      total_compressed_params += l.compressed_params;
      total_bytes += l.bytes;
    }
  }

  bool operator==(const CompressionReport&) const = default;
};

// Per-matrix quantized storage of one layer, keyed by role ("weights", "mixer", "basis").
using LayerQuantization = std::map<std::string, QuantizedBlock>;

struct CompressedContainer {
  Network net;  // pruned topology; payloads hold the (dequantized) values used for inference
  std::vector<PruneMask> masks;
  std::map<std::string, LayerQuantization> quantized;
  CompressionReport report;

  bool operator==(const CompressedContainer&) const = default;
};

// Which entries of a payload matrix are stored. Dropped mixer rows and basis columns
// are implicit zeros; the bias column (last column of dense weights and of the basis)
// is kept at full precision when quantizing.
struct MatrixLayout {
  std::string role;
  const Matrix* matrix = nullptr;
  std::vector<std::size_t> skip_rows;
  std::vector<std::size_t> skip_cols;
  bool has_bias_column = false;

  bool skipped_row(std::size_t r) const { return std::binary_search(skip_rows.begin(), skip_rows.end(), r); }
  bool skipped_col(std::size_t c) const { return std::binary_search(skip_cols.begin(), skip_cols.end(), c); }

  std::size_t stored_entries() const {
    return (matrix->rows() - skip_rows.size()) * (matrix->cols() - skip_cols.size());
  }

  /// Stored entries in row-major order, split into quantizable values and the bias column.
  void split(std::vector<float>& values, std::vector<float>& bias) const {
    const std::size_t bias_col = matrix->cols() - 1;
    for (std::size_t r = 0; r < matrix->rows(); ++r) {
      if (skipped_row(r)) continue;
      for (std::size_t c = 0; c < matrix->cols(); ++c) {
        if (skipped_col(c)) continue;
        if (has_bias_column && c == bias_col)
          bias.push_back((*matrix)(r, c));
        else
          values.push_back((*matrix)(r, c));
      }
    }
  }

  /// Inverse of split: writes stored entries back into `out` (skipped entries are zero).
  void merge(Matrix& out, const std::vector<float>& values, const std::vector<float>& bias) const {
    const std::size_t bias_col = out.cols() - 1;
    std::size_t vi = 0, bi = 0;
    for (std::size_t r = 0; r < out.rows(); ++r)
      for (std::size_t c = 0; c < out.cols(); ++c) {
        if (skipped_row(r) || skipped_col(c)) {
          out(r, c) = 0.0f;
          continue;
        }
        if (has_bias_column && c == bias_col) {
          require(bi < bias.size(), ErrorKind::Format, role + ": too few bias values");
          out(r, c) = bias[bi++];
        } else {
          require(vi < values.size(), ErrorKind::Format, role + ": too few quantized values");
          out(r, c) = values[vi++];
        }
      }
    require(vi == values.size() && bi == bias.size(), ErrorKind::Format, role + ": value count mismatch");
  }
};

inline std::vector<MatrixLayout> payload_layouts(const LayerPayload& payload) {
  if (const auto* w = std::get_if<Matrix>(&payload)) return {{"weights", w, {}, {}, true}};
  const auto& c = std::get<CoresetLayer>(payload);
  const bool bias_kept = !std::binary_search(c.dropped_cols.begin(), c.dropped_cols.end(), c.basis.cols() - 1);
  return {{"mixer", &c.mixer, c.dropped_rows, {}, false}, {"basis", &c.basis, {}, c.dropped_cols, bias_kept}};
}

/// Serialized bytes of a layer payload, quantized or not.
inline std::size_t payload_bytes(const LayerPayload& payload, const LayerQuantization* q) {
  std::size_t bytes = 0;
  for (const auto& layout : payload_layouts(payload)) {
    if (q != nullptr && q->contains(layout.role))
      bytes += q->at(layout.role).byte_size();
    else
      bytes += 4 * layout.stored_entries();
  }
  return bytes;
}

// Line-oriented key=value rendering of a report, used for diffing and re-reading.
inline std::string report_to_kv(const CompressionReport& r) {
  std::ostringstream os;
  os.precision(17);
  auto acc = [](const std::optional<double>& v) -> std::string {
    if (!v) return "none";
    std::ostringstream s;
    s.precision(17);
    s << *v;
    return s.str();
  };
  os << "method=" << r.method << "\n"
     << "prune=" << (r.prune ? 1 : 0) << "\n"
     << "prune_budget=" << r.prune_budget << "\n"
     << "coreset_budget=" << r.coreset_budget << "\n"
     << "subset_fraction=" << r.subset_fraction << "\n"
     << "seed=" << r.seed << "\n"
     << "quantize_bits=" << r.quantize_bits << "\n"
     << "prune_budget_unmet=" << (r.prune_budget_unmet ? 1 : 0) << "\n"
     << "accuracy_original=" << r.accuracy_original << "\n"
     << "accuracy_pruned=" << r.accuracy_pruned << "\n"
     << "accuracy_coreset=" << r.accuracy_coreset << "\n"
     << "accuracy_quantized=" << acc(r.accuracy_quantized) << "\n"
     << "total_dense_params=" << r.total_dense_params << "\n"
     << "total_pruned_params=" << r.total_pruned_params << "\n"
     << "total_compressed_params=" << r.total_compressed_params << "\n"
     << "total_bytes=" << r.total_bytes << "\n"
     << "unquantized_bytes=" << r.unquantized_bytes << "\n"
     << "compression_ratio=" << r.compression_ratio() << "\n"
     << "byte_ratio=" << r.byte_ratio() << "\n"
     << "layer_count=" << r.layers.size() << "\n";
  for (std::size_t i = 0; i < r.layers.size(); ++i) {
    const auto& l = r.layers[i];
    const std::string p = "layer." + std::to_string(i) + ".";
    os << p << "id=" << l.id << "\n"
       << p << "filters=" << l.filters << "\n"
       << p << "kept_filters=" << l.kept_filters << "\n"
       << p << "coreset_rank=" << l.coreset_rank << "\n"
       << p << "method=" << l.method << "\n"
       << p << "lambda=" << l.lambda << "\n"
       << p << "dropped_rows=" << l.dropped_rows << "\n"
       << p << "dropped_cols=" << l.dropped_cols << "\n"
       << p << "dense_params=" << l.dense_params << "\n"
       << p << "pruned_params=" << l.pruned_params << "\n"
       << p << "compressed_params=" << l.compressed_params << "\n"
       << p << "bytes=" << l.bytes << "\n"
       << p << "note=" << l.note << "\n";
  }
  return os.str();
}

inline std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::Format, "report line " + std::to_string(lineno) + " has no '='");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

inline CompressionReport report_from_kv(const std::string& text) {
  const auto kv = parse_kv(text);
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    require(it != kv.end(), ErrorKind::Format, "report is missing key '" + key + "'");
    return it->second;
  };
  auto num = [&](const std::string& key) {
    try {
      return std::stod(get(key));
    } catch (const std::logic_error&) {
      fail(ErrorKind::Format, "report key '" + key + "' is not a number");
    }
  };
  auto count = [&](const std::string& key) {
    try {
      return static_cast<std::size_t>(std::stoull(get(key)));
    } catch (const std::logic_error&) {
      fail(ErrorKind::Format, "report key '" + key + "' is not an integer");
    }
  };

  CompressionReport r;
  r.method = get("method");
  r.prune = count("prune") != 0;
  r.prune_budget = num("prune_budget");
  r.coreset_budget = num("coreset_budget");
  r.subset_fraction = num("subset_fraction");
  r.seed = count("seed");
  r.quantize_bits = static_cast<unsigned>(count("quantize_bits"));
  r.prune_budget_unmet = count("prune_budget_unmet") != 0;
  r.accuracy_original = num("accuracy_original");
  r.accuracy_pruned = num("accuracy_pruned");
  r.accuracy_coreset = num("accuracy_coreset");
  if (get("accuracy_quantized") != "none") r.accuracy_quantized = num("accuracy_quantized");
  r.unquantized_bytes = count("unquantized_bytes");
  const std::size_t n = count("layer_count");
  for (std::size_t i = 0; i < n; ++i) {
    const std::string p = "layer." + std::to_string(i) + ".";
    LayerReport l;
    l.id = get(p + "id");
    l.filters = count(p + "filters");
    l.kept_filters = count(p + "kept_filters");
    l.coreset_rank = count(p + "coreset_rank");
    const auto& m = get(p + "method");
    require(m.size() == 1, ErrorKind::Format, "report key '" + p + "method' must be one character");
    l.method = m[0];
    l.lambda = num(p + "lambda");
    l.dropped_rows = count(p + "dropped_rows");
    l.dropped_cols = count(p + "dropped_cols");
    l.dense_params = count(p + "dense_params");
    l.pruned_params = count(p + "pruned_params");
    l.compressed_params = count(p + "compressed_params");
    l.bytes = count(p + "bytes");
    l.note = get(p + "note");
    r.layers.push_back(std::move(l));
  }
  r.recompute_totals();
  require(r.total_dense_params == count("total_dense_params") &&
              r.total_compressed_params == count("total_compressed_params") && r.total_bytes == count("total_bytes") &&
              r.total_pruned_params == count("total_pruned_params"),
          ErrorKind::Validation, "report totals do not equal the sum of the layer entries");
  return r;
}

/// Human-readable table.
inline std::string report_to_text(const CompressionReport& r) {
  std::ostringstream os;
  char buf[256];
  os << "method " << r.method << (r.prune ? " with activation pruning" : "") << ", budgets prune=" << r.prune_budget
     << " coreset=" << r.coreset_budget << ", seed " << r.seed << "\n";
  std::snprintf(buf, sizeof buf, "%-10s %6s %6s %6s %3s %8s %10s %10s %12s %10s\n", "layer", "N", "N*", "rank", "m",
                "lambda", "dense", "pruned", "compressed", "bytes");
  os << buf;
  for (const auto& l : r.layers) {
    std::snprintf(buf, sizeof buf, "%-10s %6zu %6zu %6zu %3c %8.3g %10zu %10zu %12zu %10zu\n", l.id.c_str(), l.filters,
                  l.kept_filters, l.coreset_rank, l.method, l.lambda, l.dense_params, l.pruned_params,
                  l.compressed_params, l.bytes);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "%-10s %6s %6s %6s %3s %8s %10zu %10zu %12zu %10zu\n", "total", "", "", "", "", "",
                r.total_dense_params, r.total_pruned_params, r.total_compressed_params, r.total_bytes);
  os << buf;
  std::snprintf(buf, sizeof buf, "compression ratio %.3fx (parameters)", r.compression_ratio());
  os << buf;
  if (r.quantize_bits < 32) {
    std::snprintf(buf, sizeof buf, ", %.3fx bytes from %u-bit quantization (no retraining)", r.byte_ratio(),
                  r.quantize_bits);
    os << buf;
  }
  os << "\n";
  std::snprintf(buf, sizeof buf, "accuracy original %.4f, pruned %.4f, coreset %.4f", r.accuracy_original,
                r.accuracy_pruned, r.accuracy_coreset);
  os << buf;
  if (r.accuracy_quantized) {
    std::snprintf(buf, sizeof buf, ", quantized %.4f", *r.accuracy_quantized);
    os << buf;
  }
  os << "\n";
  if (r.prune_budget_unmet) os << "warning: pruning budget could not be met; pruning was skipped\n";
  return os.str();
}

}  // namespace coreset
