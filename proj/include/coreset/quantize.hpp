#pragma once

#include <cstdint>
#include <string>

#include "coreset/codec.hpp"
#include "coreset/container.hpp"
#include "coreset/error.hpp"
#include "coreset/inference.hpp"

namespace coreset {

struct QuantizeOptions {
  unsigned bits = 8;           // 32 bypasses quantization
  double accuracy_slack = 0.005;
  std::uint64_t seed = 0;
};

// Quantizes every stored matrix of every layer with its own codebook of at most 2^bits
// centroids and Huffman-packs the indices. Bias columns stay at 32 bits, and a matrix is
// left as plain floats when coding would not make it smaller. Accuracy is re-measured on
// the full evaluation set after each layer; exceeding the slack relative to the input
// container's accuracy aborts with the layer named. There is no retraining.
inline CompressedContainer quantize_container(const CompressedContainer& in, const EvalSet& eval,
                                              const QuantizeOptions& opt) {
  require(in.quantized.empty(), ErrorKind::Validation, "container is already quantized");
  if (opt.bits == 32) return in;
  require(opt.bits >= 1 && opt.bits <= 8, ErrorKind::Validation, "quantization bits must be 32 or lie in [1, 8]");
  require(opt.accuracy_slack >= 0.0, ErrorKind::Validation, "accuracy slack must be >= 0");

  CompressedContainer out = in;
  const double reference = accuracy(in.net, eval);
  std::uint64_t block_seed = opt.seed;
  for (const auto& l : in.net.layers) {
    if (!l.parametric()) continue;
    LayerPayload payload = in.net.params.at(l.id);
    LayerQuantization quant;
    // Layouts point into `payload`; each matrix is replaced in place after coding.
    for (const auto& layout : payload_layouts(payload)) {
      std::vector<float> values, bias;
      layout.split(values, bias);
      QuantizedBlock q = quantize_block(values, bias, opt.bits, block_seed++);
      if (q.byte_size() >= 4 * layout.stored_entries()) continue;
      Matrix& target = const_cast<Matrix&>(*layout.matrix);
      layout.merge(target, q.decode_values(), q.raw);
      quant[layout.role] = std::move(q);
    }
    out.net.params[l.id] = std::move(payload);
    if (!quant.empty()) out.quantized[l.id] = std::move(quant);

    const double acc = accuracy(out.net, eval);
    require(reference - acc <= opt.accuracy_slack + 1e-12, ErrorKind::Budget,
            "quantizing layer '" + l.id + "' drops accuracy to " + std::to_string(acc) + " from " +
                std::to_string(reference) + ", beyond the slack of " + std::to_string(opt.accuracy_slack));
  }

  auto& r = out.report;
  r.quantize_bits = opt.bits;
  r.unquantized_bytes = in.report.total_bytes;
  for (auto& lr : r.layers) {
    const auto qit = out.quantized.find(lr.id);
    lr.bytes = payload_bytes(out.net.params.at(lr.id), qit == out.quantized.end() ? nullptr : &qit->second);
  }
  r.recompute_totals();
  r.accuracy_quantized = accuracy(out.net, eval);
  return out;
}

}  // namespace coreset
