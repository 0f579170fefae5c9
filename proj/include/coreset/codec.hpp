#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "coreset/error.hpp"

namespace coreset {

// Scalar k-means codebook. Centroids are strictly increasing; assignment i indexes the
// centroid of value i.
struct Codebook {
  std::vector<float> centroids;
  std::vector<std::uint8_t> assignments;
  std::vector<double> sse_history;  // within-cluster SSE after each assignment step

  std::size_t k() const noexcept { return centroids.size(); }

  std::vector<float> dequantized() const {
    std::vector<float> out(assignments.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = centroids[assignments[i]];
    return out;
  }
};

inline std::size_t distinct_count(std::span<const float> values) {
  return std::set<float>(values.begin(), values.end()).size();
}

namespace detail {

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Index of the nearest of `sorted` centroids (ties go to the lower centroid).
inline std::size_t nearest(const std::vector<double>& sorted, double x) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), x);
  if (it == sorted.begin()) return 0;
  if (it == sorted.end()) return sorted.size() - 1;
  const std::size_t hi = static_cast<std::size_t>(it - sorted.begin());
  return (x - sorted[hi - 1] <= sorted[hi] - x) ? hi - 1 : hi;
}


// One Lloyd run from a k-means++ start drawn from `rng`.
inline Codebook kmeans_single(std::span<const float> values, std::size_t k, std::mt19937_64& rng,
                              std::size_t max_iters) {
  const std::size_t n = values.size();
  std::vector<double> centers;
  centers.push_back(values[static_cast<std::size_t>(detail::uniform01(rng) * static_cast<double>(n))]);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (centers.size() < k) {
    double total = 0.0;
    const double c = centers.back();
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (values[i] - c) * (values[i] - c));
      total += d2[i];
    }
    double target = detail::uniform01(rng) * total;
    std::size_t pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      target -= d2[i];
      if (target < 0.0) {
        pick = i;
        break;
      }
    }
    if (d2[pick] <= 0.0)  // rounding fell through to a covered value
      pick = static_cast<std::size_t>(std::max_element(d2.begin(), d2.end()) - d2.begin());
    centers.push_back(values[pick]);
  }
  std::sort(centers.begin(), centers.end());

  Codebook cb;
  std::vector<std::size_t> assign(n, 0);
  std::vector<double> sums(k), counts(k);
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    bool changed = iter == 0;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = detail::nearest(centers, values[i]);
      changed |= a != assign[i];
      assign[i] = a;
      sse += (values[i] - centers[a]) * (values[i] - centers[a]);
    }
    cb.sse_history.push_back(sse);
    if (!changed) break;

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      sums[assign[i]] += values[i];
      counts[assign[i]] += 1.0;
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centers[c] = sums[c] / counts[c];
        continue;
      }
      // Empty cluster: move it onto the worst-served value.
      std::size_t worst = 0;
      double worst_err = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double e = (values[i] - centers[assign[i]]) * (values[i] - centers[assign[i]]);
        if (e > worst_err) worst_err = e, worst = i;
      }
      centers[c] = values[worst];
    }
    // Keep centers sorted; assignments are recomputed from scratch next round.
    std::sort(centers.begin(), centers.end());
  }

  cb.centroids.resize(k);
  for (std::size_t c = 0; c < k; ++c) cb.centroids[c] = static_cast<float>(centers[c]);
  for (std::size_t c = 1; c < k; ++c)
    require(cb.centroids[c] > cb.centroids[c - 1], ErrorKind::Convergence,
            "kmeans_quantize: centroids collapsed to equal values");
  // Final assignment against the stored float centroids.
  std::vector<double> fc(cb.centroids.begin(), cb.centroids.end());
  cb.assignments.resize(n);
  for (std::size_t i = 0; i < n; ++i) cb.assignments[i] = static_cast<std::uint8_t>(detail::nearest(fc, values[i]));
  return cb;
}

inline double codebook_sse(std::span<const float> values, const Codebook& cb) {
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = static_cast<double>(values[i]) - cb.centroids[cb.assignments[i]];
    s += d * d;
  }
  return s;
}

}  // namespace detail

/// Lloyd's algorithm from `restarts` seeded k-means++ starts; the lowest final SSE wins
/// (earliest start on ties). Within one run the SSE never increases.
inline Codebook kmeans_quantize(std::span<const float> values, std::size_t k, std::uint64_t seed,
                                std::size_t max_iters = 100, std::size_t restarts = 8) {
  require(!values.empty(), ErrorKind::Validation, "kmeans_quantize: no values");
  require(k >= 1 && k <= 256, ErrorKind::Validation, "kmeans_quantize: k must lie in [1, 256]");
  require(restarts >= 1, ErrorKind::Validation, "kmeans_quantize: restarts must be >= 1");
  require(k <= distinct_count(values), ErrorKind::Validation,
          "kmeans_quantize: k exceeds the number of distinct values");
  std::mt19937_64 rng(seed);
  Codebook best = detail::kmeans_single(values, k, rng, max_iters);
  double best_sse = detail::codebook_sse(values, best);
  for (std::size_t r = 1; r < restarts; ++r) {
    Codebook cb = detail::kmeans_single(values, k, rng, max_iters);
    const double e = detail::codebook_sse(values, cb);
    if (e < best_sse) {
      best_sse = e;
      best = std::move(cb);
    }
  }
  return best;
}

// Canonical Huffman code, described by the code length of every symbol (0 = unused).
struct HuffmanTable {
  std::vector<std::uint8_t> lengths;  // indexed by symbol

  std::uint8_t max_length() const {
    return lengths.empty() ? 0 : *std::max_element(lengths.begin(), lengths.end());
  }

  /// Number of codes of each length 1..max_length.
  std::vector<std::uint16_t> counts() const {
    std::vector<std::uint16_t> c(max_length(), 0);
    for (auto l : lengths)
      if (l) ++c[l - 1];
    return c;
  }

  /// Used symbols ordered by (length, symbol): the canonical code order.
  std::vector<std::uint8_t> canonical_symbols() const {
    std::vector<std::uint8_t> s;
    for (std::size_t sym = 0; sym < lengths.size(); ++sym)
      if (lengths[sym]) s.push_back(static_cast<std::uint8_t>(sym));
    std::stable_sort(s.begin(), s.end(), [&](auto a, auto b) { return lengths[a] < lengths[b]; });
    return s;
  }

  /// Canonical codes (right-aligned) per symbol.
  std::vector<std::uint32_t> codes() const {
    std::vector<std::uint32_t> code(lengths.size(), 0);
    std::uint32_t next = 0;
    std::uint8_t len = 0;
    for (auto sym : canonical_symbols()) {
      next <<= (lengths[sym] - len);
      len = lengths[sym];
      code[sym] = next++;
    }
    return code;
  }

  double kraft_sum() const {
    double s = 0.0;
    for (auto l : lengths)
      if (l) s += std::ldexp(1.0, -static_cast<int>(l));
    return s;
  }

  /// Serialized size: max length byte, u16 count per length, one byte per used symbol.
  std::size_t serialized_bytes() const { return 1 + 2 * static_cast<std::size_t>(max_length()) + canonical_symbols().size(); }

  /// Rebuilds a table from its serialized (counts, canonical symbols) form.
  static HuffmanTable from_canonical(const std::vector<std::uint16_t>& counts, const std::vector<std::uint8_t>& symbols,
                                     std::size_t alphabet) {
    HuffmanTable t;
    t.lengths.assign(alphabet, 0);
    std::size_t k = 0;
    for (std::size_t len = 1; len <= counts.size(); ++len)
      for (std::uint16_t c = 0; c < counts[len - 1]; ++c) {
        require(k < symbols.size() && symbols[k] < alphabet, ErrorKind::Format, "corrupt Huffman table");
        t.lengths[symbols[k++]] = static_cast<std::uint8_t>(len);
      }
    require(k == symbols.size(), ErrorKind::Format, "corrupt Huffman table");
    require(t.kraft_sum() <= 1.0 + 1e-12, ErrorKind::Format, "Huffman table violates the Kraft inequality");
    return t;
  }

  bool operator==(const HuffmanTable&) const = default;
};

/// Optimal code lengths for the empirical distribution of `symbols` over [0, alphabet).
inline HuffmanTable huffman_table(std::span<const std::uint8_t> symbols, std::size_t alphabet) {
  require(!symbols.empty(), ErrorKind::Validation, "huffman: empty symbol stream");
  require(alphabet >= 1 && alphabet <= 256, ErrorKind::Validation, "huffman: alphabet must lie in [1, 256]");
  std::vector<std::uint64_t> freq(alphabet, 0);
  for (auto s : symbols) {
    require(s < alphabet, ErrorKind::Validation, "huffman: symbol outside alphabet");
    ++freq[s];
  }
  HuffmanTable t;
  t.lengths.assign(alphabet, 0);

  // Nodes: leaves [0, alphabet), internal nodes appended. Ties break on creation order,
  // which makes the tree deterministic.
  struct Node {
    std::uint64_t weight;
    std::size_t id;
  };
  auto later = [](const Node& a, const Node& b) { return a.weight != b.weight ? a.weight > b.weight : a.id > b.id; };
  std::priority_queue<Node, std::vector<Node>, decltype(later)> heap(later);
  std::vector<std::size_t> parent(alphabet, 0);
  for (std::size_t s = 0; s < alphabet; ++s)
    if (freq[s]) heap.push({freq[s], s});
  if (heap.size() == 1) {
    t.lengths[heap.top().id] = 1;
    return t;
  }
  std::size_t next_id = alphabet;
  while (heap.size() > 1) {
    const Node a = heap.top();
    heap.pop();
    const Node b = heap.top();
    heap.pop();
    parent.push_back(0);
    parent[a.id] = next_id;
    parent[b.id] = next_id;
    heap.push({a.weight + b.weight, next_id++});
  }
  const std::size_t root = next_id - 1;
  for (std::size_t s = 0; s < alphabet; ++s) {
    if (!freq[s]) continue;
    std::size_t depth = 0;
    for (std::size_t n = s; n != root; n = parent[n]) ++depth;
    require(depth <= 32, ErrorKind::Validation, "huffman: code length exceeds 32 bits");
    t.lengths[s] = static_cast<std::uint8_t>(depth);
  }
  return t;
}

struct BitStream {
  std::vector<std::uint8_t> bytes;
  std::size_t bits = 0;

  bool operator==(const BitStream&) const = default;
};

/// Packs codes most-significant bit first; the final byte is zero padded.
inline BitStream huffman_encode(std::span<const std::uint8_t> symbols, const HuffmanTable& table) {
  const auto codes = table.codes();
  BitStream out;
  for (auto s : symbols) {
    require(s < table.lengths.size() && table.lengths[s] > 0, ErrorKind::Validation, "huffman: symbol has no code");
    const std::uint32_t code = codes[s];
    for (int b = table.lengths[s] - 1; b >= 0; --b) {
      if (out.bits % 8 == 0) out.bytes.push_back(0);
      if ((code >> b) & 1u) out.bytes.back() |= static_cast<std::uint8_t>(0x80u >> (out.bits % 8));
      ++out.bits;
    }
  }
  return out;
}

inline std::vector<std::uint8_t> huffman_decode(const BitStream& stream, const HuffmanTable& table, std::size_t count) {
  const auto counts = table.counts();
  const auto symbols = table.canonical_symbols();
  require(stream.bytes.size() * 8 >= stream.bits, ErrorKind::Format, "huffman: bitstream shorter than its bit count");
  std::vector<std::uint8_t> out;
  out.reserve(count);
  std::size_t pos = 0;
  while (out.size() < count) {
    // Canonical decode: walk lengths, comparing the running code against the first
    // code of each length.
    std::uint32_t code = 0, first = 0;
    std::size_t index = 0;
    bool found = false;
    for (std::size_t len = 1; len <= counts.size(); ++len) {
      require(pos < stream.bits, ErrorKind::Format, "huffman: bitstream ended mid-symbol");
      code = (code << 1) | ((stream.bytes[pos / 8] >> (7 - pos % 8)) & 1u);
      ++pos;
      const std::uint32_t n = counts[len - 1];
      if (code - first < n) {
        out.push_back(symbols[index + (code - first)]);
        found = true;
        break;
      }
      index += n;
      first = (first + n) << 1;
    }
    require(found, ErrorKind::Format, "huffman: invalid code in bitstream");
  }
  return out;
}

inline double empirical_entropy_bits(std::span<const std::uint8_t> symbols) {
  std::vector<double> freq(256, 0.0);
  for (auto s : symbols) freq[s] += 1.0;
  double h = 0.0;
  const double n = static_cast<double>(symbols.size());
  for (double f : freq)
    if (f > 0) h -= (f / n) * std::log2(f / n);
  return h;
}

// One quantized matrix payload: the codebook, its canonical Huffman table, the coded
// centroid indices of the quantized entries, and entries kept at full precision.
struct QuantizedBlock {
  std::vector<float> codebook;
  HuffmanTable table;
  BitStream stream;
  std::size_t symbol_count = 0;
  std::vector<float> raw;

  std::size_t byte_size() const {
    return 4 * codebook.size() + table.serialized_bytes() + stream.bytes.size() + 4 * raw.size();
  }

  std::vector<float> decode_values() const {
    const auto idx = huffman_decode(stream, table, symbol_count);
    std::vector<float> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      require(idx[i] < codebook.size(), ErrorKind::Format, "quantized index outside codebook");
      out[i] = codebook[idx[i]];
    }
    return out;
  }

  bool operator==(const QuantizedBlock&) const = default;
};

/// Quantizes `values` to at most 2^bits centroids and Huffman-codes the indices.
inline QuantizedBlock quantize_block(std::span<const float> values, std::vector<float> raw, unsigned bits,
                                     std::uint64_t seed) {
  require(bits >= 1 && bits <= 8, ErrorKind::Validation, "quantization bits must lie in [1, 8]");
  QuantizedBlock q;
  q.raw = std::move(raw);
  q.symbol_count = values.size();
  if (values.empty()) return q;
  const std::size_t k = std::min<std::size_t>(std::size_t{1} << bits, distinct_count(values));
  Codebook cb = kmeans_quantize(values, k, seed);
  q.codebook = std::move(cb.centroids);
  q.table = huffman_table(cb.assignments, q.codebook.size());
  q.stream = huffman_encode(cb.assignments, q.table);
  return q;
}

}  // namespace coreset
