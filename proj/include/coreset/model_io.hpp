#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "coreset/container.hpp"
#include "coreset/error.hpp"
#include "coreset/inference.hpp"
#include "coreset/network.hpp"
#include "json.hpp"

namespace coreset {

static_assert(std::endian::native == std::endian::little, "blob I/O assumes a little-endian host");

inline constexpr const char* kNetworkFormat = "coreset-network";
inline constexpr const char* kEvalSetFormat = "coreset-evalset";
inline constexpr const char* kContainerFormat = "coreset-container";
inline constexpr int kFormatVersion = 1;

namespace io {

namespace fs = std::filesystem;
using nlohmann::json;

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Format, "cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const fs::path& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorKind::Format, "cannot write '" + path.string() + "'");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  require(out.good(), ErrorKind::Format, "write failed for '" + path.string() + "'");
}

inline void write_file(const fs::path& path, const std::string& text) { write_file(path, text.data(), text.size()); }

inline json read_manifest(const fs::path& path, const char* format) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Format, "malformed manifest '" + path.string() + "': " + e.what());
  }
  require(j.is_object() && j.value("format", "") == format, ErrorKind::Format,
          "'" + path.string() + "' is not a " + format + " manifest");
  require(j.value("version", 0) == kFormatVersion, ErrorKind::Format,
          "'" + path.string() + "' has unsupported version");
  return j;
}

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  require(j.contains(key), ErrorKind::Format, where + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::Format, where + ": field '" + key + "' has the wrong type");
  }
}

/// Sibling blob path: "<dir>/<stem>.bin".
inline fs::path blob_path_for(const fs::path& manifest) {
  fs::path p = manifest;
  return p.replace_extension(".bin");
}

class BlobWriter {
 public:
  std::size_t offset() const noexcept { return bytes_.size(); }

  void put(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  json floats(std::span<const float> v) {
    json ref = {{"offset", offset()}, {"bytes", v.size() * 4}};
    put(v.data(), v.size() * 4);
    return ref;
  }
  void u8(std::uint8_t v) { put(&v, 1); }
  void u16(std::uint16_t v) { put(&v, 2); }

  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class BlobReader {
 public:
  BlobReader(std::string data, std::string name) : data_(std::move(data)), name_(std::move(name)) {}

  std::size_t size() const noexcept { return data_.size(); }

  /// Checked view of [offset, offset + bytes) for the named tensor.
  std::span<const std::uint8_t> range(std::size_t offset, std::size_t bytes, const std::string& what) const {
    require(offset <= data_.size() && bytes <= data_.size() - offset, ErrorKind::Format,
            what + ": size mismatch, needs bytes [" + std::to_string(offset) + ", " + std::to_string(offset + bytes) +
                ") but blob '" + name_ + "' has " + std::to_string(data_.size()));
    return {reinterpret_cast<const std::uint8_t*>(data_.data()) + offset, bytes};
  }

  std::vector<float> floats(const json& ref, std::size_t expected_count, const std::string& what) const {
    const auto offset = field<std::size_t>(ref, "offset", what);
    const auto bytes = field<std::size_t>(ref, "bytes", what);
    require(bytes == expected_count * 4, ErrorKind::Format,
            what + ": size mismatch, manifest gives " + std::to_string(bytes) + " bytes for " +
                std::to_string(expected_count) + " floats");
    auto src = range(offset, bytes, what);
    std::vector<float> out(expected_count);
    if (bytes) std::memcpy(out.data(), src.data(), bytes);
    require(all_finite<float>(out), ErrorKind::Validation, what + ": non-finite value");
    return out;
  }

 private:
  std::string data_;
  std::string name_;
};

inline json layer_to_json(const LayerSpec& l) {
  json j = {{"id", l.id}, {"kind", std::string(to_string(l.kind))}, {"inputs", l.inputs}};
  switch (l.kind) {
    case LayerKind::Conv:
      j["filters"] = l.filters;
      j["channels"] = l.channels;
      j["kernel"] = {l.kernel_h, l.kernel_w};
      j["stride"] = l.stride;
      j["pad"] = l.pad;
      break;
    case LayerKind::FullyConnected:
      j["filters"] = l.filters;
      j["in_features"] = l.in_features;
      break;
    case LayerKind::MaxPool:
    case LayerKind::AvgPool:
      j["window"] = l.window;
      j["stride"] = l.stride;
      break;
    default: break;
  }
  return j;
}

inline LayerSpec layer_from_json(const json& j) {
  require(j.is_object(), ErrorKind::Format, "layer entry is not an object");
  LayerSpec l;
  l.id = field<std::string>(j, "id", "layer");
  const std::string where = "layer '" + l.id + "'";
  l.kind = parse_layer_kind(field<std::string>(j, "kind", where));
  l.inputs = field<std::vector<std::string>>(j, "inputs", where);
  switch (l.kind) {
    case LayerKind::Conv: {
      l.filters = field<std::size_t>(j, "filters", where);
      l.channels = field<std::size_t>(j, "channels", where);
      const auto k = field<std::vector<std::size_t>>(j, "kernel", where);
      require(k.size() == 2, ErrorKind::Format, where + ": kernel must be [h, w]");
      l.kernel_h = k[0];
      l.kernel_w = k[1];
      l.stride = field<std::size_t>(j, "stride", where);
      l.pad = field<std::size_t>(j, "pad", where);
      break;
    }
    case LayerKind::FullyConnected:
      l.filters = field<std::size_t>(j, "filters", where);
      l.in_features = field<std::size_t>(j, "in_features", where);
      break;
    case LayerKind::MaxPool:
    case LayerKind::AvgPool:
      l.window = field<std::size_t>(j, "window", where);
      l.stride = field<std::size_t>(j, "stride", where);
      break;
    default: break;
  }
  return l;
}

inline std::vector<LayerSpec> layers_from_json(const json& j) {
  require(j.is_array(), ErrorKind::Format, "'layers' must be an array");
  std::vector<LayerSpec> layers;
  for (const auto& l : j) layers.push_back(layer_from_json(l));
  return layers;
}

inline json layers_to_json(const std::vector<LayerSpec>& layers) {
  json arr = json::array();
  for (const auto& l : layers) arr.push_back(layer_to_json(l));
  return arr;
}

inline void write_manifest_and_blob(const fs::path& manifest_path, json manifest, const std::vector<std::uint8_t>& blob) {
  const fs::path blob_path = blob_path_for(manifest_path);
  manifest["blob"] = blob_path.filename().string();
  write_file(manifest_path, manifest.dump(2) + "\n");
  write_file(blob_path, blob.data(), blob.size());
}

inline BlobReader open_blob(const fs::path& manifest_path, const json& manifest) {
  const auto name = field<std::string>(manifest, "blob", manifest_path.string());
  const fs::path p = manifest_path.parent_path() / name;
  return BlobReader(read_file(p), p.string());
}

}  // namespace io

// ---------------------------------------------------------------------------
// Dense networks

inline void save_network(const Network& net, const std::filesystem::path& path) {
  require(net.is_dense(), ErrorKind::Validation, "save_network: network has compressed layers; save a container instead");
  validate(net);
  io::BlobWriter blob;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& l : net.layers) {
    if (!l.parametric()) continue;
    const Matrix& w = net.dense_weights(l.id);
    auto ref = blob.floats(w.data());
    tensors.push_back({{"layer", l.id},
                       {"dtype", "f32"},
                       {"shape", {w.rows(), w.cols()}},
                       {"offset", ref["offset"]},
                       {"bytes", ref["bytes"]}});
  }
  nlohmann::json m = {{"format", kNetworkFormat},
                      {"version", kFormatVersion},
                      {"blob", ""},
                      {"input_shape", net.input_shape},
                      {"layers", io::layers_to_json(net.layers)},
                      {"tensors", tensors},
                      {"metadata", net.metadata}};
  io::write_manifest_and_blob(path, std::move(m), blob.bytes());
}

inline Network load_network(const std::filesystem::path& path) {
  const auto m = io::read_manifest(path, kNetworkFormat);
  Network net;
  net.input_shape = io::field<Shape>(m, "input_shape", path.string());
  net.layers = io::layers_from_json(io::field<nlohmann::json>(m, "layers", path.string()));
  if (m.contains("metadata")) net.metadata = m.at("metadata");
  const auto blob = io::open_blob(path, m);
  for (const auto& t : io::field<nlohmann::json>(m, "tensors", path.string())) {
    const auto id = io::field<std::string>(t, "layer", "tensor");
    const std::string what = "tensor '" + id + "'";
    require(io::field<std::string>(t, "dtype", what) == "f32", ErrorKind::Format, what + ": only f32 is supported");
    const auto shape = io::field<std::vector<std::size_t>>(t, "shape", what);
    require(shape.size() == 2, ErrorKind::Format, what + ": weights must be 2-d");
    require(!net.params.contains(id), ErrorKind::Format, what + ": duplicate tensor");
    net.params[id] = Matrix(shape[0], shape[1], blob.floats(t, shape[0] * shape[1], what));
  }
  validate(net);
  return net;
}

// ---------------------------------------------------------------------------
// Evaluation sets

inline void save_evalset(const EvalSet& eval, const std::filesystem::path& path) {
  validate(eval);
  io::BlobWriter blob;
  std::vector<float> all;
  for (const auto& x : eval.inputs) all.insert(all.end(), x.data().begin(), x.data().end());
  auto ref = blob.floats(all);
  nlohmann::json m = {{"format", kEvalSetFormat},
                      {"version", kFormatVersion},
                      {"blob", ""},
                      {"input_shape", eval.input_shape},
                      {"class_count", eval.class_count},
                      {"count", eval.size()},
                      {"labels", eval.labels},
                      {"inputs", {{"dtype", "f32"}, {"offset", ref["offset"]}, {"bytes", ref["bytes"]}}}};
  io::write_manifest_and_blob(path, std::move(m), blob.bytes());
}

inline EvalSet load_evalset(const std::filesystem::path& path) {
  const auto m = io::read_manifest(path, kEvalSetFormat);
  EvalSet eval;
  eval.input_shape = io::field<Shape>(m, "input_shape", path.string());
  eval.class_count = io::field<std::size_t>(m, "class_count", path.string());
  eval.labels = io::field<std::vector<std::size_t>>(m, "labels", path.string());
  const auto count = io::field<std::size_t>(m, "count", path.string());
  require(count == eval.labels.size(), ErrorKind::Format, "evaluation set count does not match its labels");
  require(count > 0, ErrorKind::Validation, "empty evaluation set");
  const std::size_t per = shape_size(eval.input_shape);
  const auto blob = io::open_blob(path, m);
  const auto values = blob.floats(io::field<nlohmann::json>(m, "inputs", path.string()), count * per, "inputs");
  for (std::size_t i = 0; i < count; ++i)
    eval.inputs.emplace_back(eval.input_shape,
                             std::vector<float>(values.begin() + static_cast<long>(i * per),
                                                values.begin() + static_cast<long>((i + 1) * per)));
  validate(eval);
  return eval;
}

// ---------------------------------------------------------------------------
// Compressed containers

namespace io {

inline json write_quantized(BlobWriter& blob, const QuantizedBlock& q) {
  json j;
  j["encoding"] = "huffman";
  j["codebook"] = blob.floats(q.codebook);
  j["codebook"]["count"] = q.codebook.size();
  const std::size_t table_offset = blob.offset();
  const auto counts = q.table.counts();
  blob.u8(q.table.max_length());
  for (auto c : counts) blob.u16(c);
  for (auto s : q.table.canonical_symbols()) blob.u8(s);
  j["table"] = {{"offset", table_offset}, {"bytes", blob.offset() - table_offset}};
  j["stream"] = {{"offset", blob.offset()},
                 {"bytes", q.stream.bytes.size()},
                 {"bits", q.stream.bits},
                 {"symbols", q.symbol_count}};
  blob.put(q.stream.bytes.data(), q.stream.bytes.size());
  j["raw"] = blob.floats(q.raw);
  j["raw"]["count"] = q.raw.size();
  return j;
}

inline QuantizedBlock read_quantized(const BlobReader& blob, const json& j, const std::string& what) {
  QuantizedBlock q;
  const auto& cb = field<json>(j, "codebook", what);
  q.codebook = blob.floats(cb, field<std::size_t>(cb, "count", what), what + " codebook");
  require(q.codebook.size() <= 256, ErrorKind::Format, what + ": codebook larger than 256 entries");

  const auto& tj = field<json>(j, "table", what);
  auto table = blob.range(field<std::size_t>(tj, "offset", what), field<std::size_t>(tj, "bytes", what), what + " table");
  const bool has_symbols = !q.codebook.empty();
  std::vector<std::uint16_t> counts;
  std::vector<std::uint8_t> symbols;
  require(table.size() >= 1, ErrorKind::Format, what + ": empty Huffman table");
  const std::size_t max_len = table[0];
  require(table.size() >= 1 + 2 * max_len, ErrorKind::Format, what + ": truncated Huffman table");
  std::size_t used = 0;
  for (std::size_t i = 0; i < max_len; ++i) {
    std::uint16_t c;
    std::memcpy(&c, table.data() + 1 + 2 * i, 2);
    counts.push_back(c);
    used += c;
  }
  require(table.size() == 1 + 2 * max_len + used, ErrorKind::Format, what + ": Huffman table size mismatch");
  symbols.assign(table.begin() + static_cast<long>(1 + 2 * max_len), table.end());
  if (has_symbols) q.table = HuffmanTable::from_canonical(counts, symbols, q.codebook.size());

  const auto& sj = field<json>(j, "stream", what);
  auto stream = blob.range(field<std::size_t>(sj, "offset", what), field<std::size_t>(sj, "bytes", what), what + " stream");
  q.stream.bytes.assign(stream.begin(), stream.end());
  q.stream.bits = field<std::size_t>(sj, "bits", what);
  require((q.stream.bits + 7) / 8 == q.stream.bytes.size(), ErrorKind::Format, what + ": stream length mismatch");
  q.symbol_count = field<std::size_t>(sj, "symbols", what);

  const auto& rj = field<json>(j, "raw", what);
  q.raw = blob.floats(rj, field<std::size_t>(rj, "count", what), what + " raw");
  return q;
}

inline LayerPayload empty_payload_like(const json& p, const LayerSpec& spec, const std::string& what) {
  const auto enc = field<std::string>(p, "encoding", what);
  if (enc == "dense") return Matrix(spec.filters, spec.weight_cols());
  require(enc == "coreset", ErrorKind::Format, what + ": unknown payload encoding '" + enc + "'");
  CoresetLayer c;
  c.layer_id = spec.id;
  c.method = parse_method(field<std::string>(p, "method", what));
  c.lambda = field<double>(p, "lambda", what);
  const auto rank = field<std::size_t>(p, "rank", what);
  require(rank >= 1, ErrorKind::Format, what + ": rank must be positive");
  c.mixer = Matrix(spec.filters, rank);
  c.basis = Matrix(rank, spec.weight_cols());
  c.dropped_rows = field<std::vector<std::size_t>>(p, "dropped_rows", what);
  c.dropped_cols = field<std::vector<std::size_t>>(p, "dropped_cols", what);
  auto check_set = [&](const std::vector<std::size_t>& s, std::size_t limit, const char* name) {
    for (std::size_t i = 0; i < s.size(); ++i)
      require(s[i] < limit && (i == 0 || s[i] > s[i - 1]), ErrorKind::Format,
              what + ": " + name + " must be sorted, unique and in range");
  };
  check_set(c.dropped_rows, spec.filters, "dropped_rows");
  check_set(c.dropped_cols, spec.weight_cols(), "dropped_cols");
  return c;
}

inline Matrix& matrix_for_role(LayerPayload& p, const std::string& role) {
  if (auto* m = std::get_if<Matrix>(&p)) {
    require(role == "weights", ErrorKind::Format, "dense payload has no '" + role + "' matrix");
    return *m;
  }
  auto& c = std::get<CoresetLayer>(p);
  if (role == "mixer") return c.mixer;
  require(role == "basis", ErrorKind::Format, "coreset payload has no '" + role + "' matrix");
  return c.basis;
}

}  // namespace io

inline void save_compressed(const CompressedContainer& c, const std::filesystem::path& path) {
  validate(c.net);
  io::BlobWriter blob;
  nlohmann::json payloads = nlohmann::json::array();
  for (const auto& l : c.net.layers) {
    if (!l.parametric()) continue;
    const LayerPayload& payload = c.net.params.at(l.id);
    const auto qit = c.quantized.find(l.id);
    const LayerQuantization* q = qit == c.quantized.end() ? nullptr : &qit->second;
    nlohmann::json p = {{"layer", l.id}};
    if (const auto* cl = std::get_if<CoresetLayer>(&payload)) {
      p["encoding"] = "coreset";
      p["method"] = std::string(1, to_char(cl->method));
      p["lambda"] = cl->lambda;
      p["rank"] = cl->rank();
      p["dropped_rows"] = cl->dropped_rows;
      p["dropped_cols"] = cl->dropped_cols;
    } else {
      p["encoding"] = "dense";
    }
    const std::size_t start = blob.offset();
    nlohmann::json mats = nlohmann::json::array();
    for (const auto& layout : payload_layouts(payload)) {
      nlohmann::json mj;
      if (q != nullptr && q->contains(layout.role)) {
        mj = io::write_quantized(blob, q->at(layout.role));
      } else {
        std::vector<float> values, bias;
        MatrixLayout plain = layout;
        plain.has_bias_column = false;
        plain.split(values, bias);
        mj = {{"encoding", "f32"}, {"data", blob.floats(values)}};
      }
      mj["role"] = layout.role;
      mj["shape"] = {layout.matrix->rows(), layout.matrix->cols()};
      mj["bias_column"] = layout.has_bias_column;
      mats.push_back(std::move(mj));
    }
    p["matrices"] = std::move(mats);
    p["bytes"] = blob.offset() - start;
    payloads.push_back(std::move(p));
  }

  nlohmann::json masks = nlohmann::json::array();
  for (const auto& m : c.masks)
    masks.push_back({{"layer", m.layer_id}, {"filter_count", m.filter_count}, {"keep", m.keep}});

  nlohmann::json m = {{"format", kContainerFormat},
                      {"version", kFormatVersion},
                      {"blob", ""},
                      {"input_shape", c.net.input_shape},
                      {"layers", io::layers_to_json(c.net.layers)},
                      {"payloads", payloads},
                      {"masks", masks},
                      {"metadata", c.net.metadata},
                      {"report", report_to_kv(c.report)}};
  io::write_manifest_and_blob(path, std::move(m), blob.bytes());
}

inline CompressedContainer load_compressed(const std::filesystem::path& path) {
  const auto m = io::read_manifest(path, kContainerFormat);
  CompressedContainer c;
  c.net.input_shape = io::field<Shape>(m, "input_shape", path.string());
  c.net.layers = io::layers_from_json(io::field<nlohmann::json>(m, "layers", path.string()));
  if (m.contains("metadata")) c.net.metadata = m.at("metadata");
  const auto blob = io::open_blob(path, m);

  std::size_t payload_total = 0;
  for (const auto& p : io::field<nlohmann::json>(m, "payloads", path.string())) {
    const auto id = io::field<std::string>(p, "layer", "payload");
    const std::string what = "payload '" + id + "'";
    const LayerSpec& spec = c.net.layer(id);
    require(spec.parametric(), ErrorKind::Format, what + ": layer is not parametric");
    require(!c.net.params.contains(id), ErrorKind::Format, what + ": duplicate payload");
    LayerPayload payload = io::empty_payload_like(p, spec, what);
    const auto layouts = payload_layouts(payload);
    const auto& mats = io::field<nlohmann::json>(p, "matrices", what);
    require(mats.is_array() && mats.size() == layouts.size(), ErrorKind::Format, what + ": wrong number of matrices");

    std::map<std::string, std::pair<std::vector<float>, std::vector<float>>> decoded;
    LayerQuantization quant;
    std::size_t bytes = 0;
    for (std::size_t i = 0; i < layouts.size(); ++i) {
      const auto& mj = mats[i];
      const auto& layout = layouts[i];
      const std::string mwhat = what + " " + layout.role;
      require(io::field<std::string>(mj, "role", mwhat) == layout.role, ErrorKind::Format, mwhat + ": role out of order");
      const auto shape = io::field<std::vector<std::size_t>>(mj, "shape", mwhat);
      require(shape.size() == 2 && shape[0] == layout.matrix->rows() && shape[1] == layout.matrix->cols(),
              ErrorKind::Shape, mwhat + ": shape does not match the layer geometry");
      const auto enc = io::field<std::string>(mj, "encoding", mwhat);
      if (enc == "f32") {
        const auto& ref = io::field<nlohmann::json>(mj, "data", mwhat);
        decoded[layout.role] = {blob.floats(ref, layout.stored_entries(), mwhat), {}};
        bytes += io::field<std::size_t>(ref, "bytes", mwhat);
      } else {
        require(enc == "huffman", ErrorKind::Format, mwhat + ": unknown matrix encoding '" + enc + "'");
        require(io::field<bool>(mj, "bias_column", mwhat) == layout.has_bias_column, ErrorKind::Format,
                mwhat + ": bias column flag mismatch");
        QuantizedBlock q = io::read_quantized(blob, mj, mwhat);
        decoded[layout.role] = {q.decode_values(), q.raw};
        bytes += q.byte_size();
        quant[layout.role] = std::move(q);
      }
    }
    for (const auto& layout : layouts) {
      Matrix& target = io::matrix_for_role(payload, layout.role);
      MatrixLayout l = layout;
      l.matrix = &target;
      if (!quant.contains(layout.role)) l.has_bias_column = false;
      const auto& [values, bias] = decoded.at(layout.role);
      l.merge(target, values, bias);
    }
    require(bytes == io::field<std::size_t>(p, "bytes", what), ErrorKind::Format, what + ": byte count mismatch");
    payload_total += bytes;
    c.net.params[id] = std::move(payload);
    if (!quant.empty()) c.quantized[id] = std::move(quant);
  }
  require(payload_total == blob.size(), ErrorKind::Format,
          "container blob has " + std::to_string(blob.size()) + " bytes but payloads account for " +
              std::to_string(payload_total));

  for (const auto& mj : io::field<nlohmann::json>(m, "masks", path.string())) {
    PruneMask mask;
    mask.layer_id = io::field<std::string>(mj, "layer", "mask");
    mask.filter_count = io::field<std::size_t>(mj, "filter_count", "mask");
    mask.keep = io::field<std::vector<std::size_t>>(mj, "keep", "mask");
    c.masks.push_back(std::move(mask));
  }
  c.report = report_from_kv(io::field<std::string>(m, "report", path.string()));
  validate(c.net);
  for (const auto& l : c.report.layers) {
    auto it = c.net.params.find(l.id);
    require(it != c.net.params.end(), ErrorKind::Validation, "report names unknown layer '" + l.id + "'");
    const auto qit = c.quantized.find(l.id);
    require(payload_bytes(it->second, qit == c.quantized.end() ? nullptr : &qit->second) == l.bytes,
            ErrorKind::Validation, "report bytes for layer '" + l.id + "' differ from the stored payload");
  }
  return c;
}

/// Network with every coreset payload multiplied out.
inline Network densify(const Network& net) {
  Network out = net;
  for (auto& [id, p] : out.params) p = densify_payload(p);
  return out;
}

inline void save_report(const CompressionReport& r, const std::filesystem::path& path) {
  io::write_file(path, report_to_kv(r));
}

inline CompressionReport load_report(const std::filesystem::path& path) { return report_from_kv(io::read_file(path)); }

/// "<dir>/<stem>.report.txt" next to a container manifest.
inline std::filesystem::path report_path_for(const std::filesystem::path& container) {
  std::filesystem::path p = container;
  return p.replace_extension(".report.txt");
}

}  // namespace coreset
