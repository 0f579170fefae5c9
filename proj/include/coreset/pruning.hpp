#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "coreset/error.hpp"
#include "coreset/inference.hpp"
#include "coreset/network.hpp"

namespace coreset {

struct PruneMask {
  std::string layer_id;
  std::size_t filter_count = 0;    // N_k of the layer the mask was made for
  std::vector<std::size_t> keep;   // sorted retained filter indices

  static PruneMask keep_all(const std::string& id, std::size_t n) {
    PruneMask m{id, n, std::vector<std::size_t>(n)};
    std::iota(m.keep.begin(), m.keep.end(), 0);
    return m;
  }

  /// Mask retaining the first `count` filters of `order`.
  static PruneMask top(const std::string& id, std::size_t n, const std::vector<std::size_t>& order,
                       std::size_t count) {
    PruneMask m{id, n, std::vector<std::size_t>(order.begin(), order.begin() + static_cast<long>(count))};
    std::sort(m.keep.begin(), m.keep.end());
    return m;
  }

  bool operator==(const PruneMask&) const = default;
};

/// Filter indices by descending mean squared activation; ties keep ascending index.
inline std::vector<std::size_t> rank_filters(const ActivationStats& stats) {
  require(stats.samples.rows() > 0 && stats.filter_count() > 0, ErrorKind::Validation, "empty activation statistics");
  const auto score = stats.mean_square();
  std::vector<std::size_t> order(score.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  return order;
}

// A parametric layer that reads the pruned layer's channels, and how many of its
// weight columns each channel occupies.
struct ChannelConsumer {
  std::string layer_id;
  std::size_t block = 1;
};

struct PrunePlan {
  bool prunable = false;
  std::string reason;
  std::vector<ChannelConsumer> consumers;
};

/// Follows the layer's output through channel-preserving layers to the parametric layers
/// that consume it. Outputs reaching a residual-add, a softmax or the network output
/// make the layer unprunable.
inline PrunePlan prune_plan(const Network& net, const std::string& layer_id) {
  const auto& spec = net.layer(layer_id);
  if (!spec.parametric()) return {false, "not a parametric layer", {}};
  validate(net);
  PrunePlan plan{true, "", {}};
  std::vector<std::string> frontier{layer_id};
  while (!frontier.empty()) {
    const std::string id = frontier.back();
    frontier.pop_back();
    const auto users = net.consumers(id);
    if (users.empty()) return {false, "output reaches the network output", {}};
    for (const auto& u : users) {
      const auto& l = net.layer(u);
      switch (l.kind) {
        case LayerKind::Relu:
        case LayerKind::MaxPool:
        case LayerKind::AvgPool:
        case LayerKind::Flatten: frontier.push_back(u); break;
        case LayerKind::Conv: plan.consumers.push_back({u, l.kernel_h * l.kernel_w}); break;
        // Flatten keeps channel-major order, so each channel is a contiguous block.
        case LayerKind::FullyConnected: plan.consumers.push_back({u, l.in_features / spec.filters}); break;
        case LayerKind::ResidualAdd: return {false, "output feeds residual-add '" + u + "'", {}};
        case LayerKind::Softmax: return {false, "output feeds softmax '" + u + "'", {}};
      }
    }
  }
  return plan;
}

/// Removes pruned filters (weight rows) and the matching input columns of every
/// consumer. The bias column is never touched.
inline Network apply_prune(const Network& net, const PruneMask& mask) {
  const auto& spec = net.layer(mask.layer_id);
  require(!mask.keep.empty(), ErrorKind::Validation, "prune mask for '" + mask.layer_id + "' is empty");
  require(spec.filters == mask.filter_count, ErrorKind::Validation,
          "prune mask for '" + mask.layer_id + "' was made for " + std::to_string(mask.filter_count) +
              " filters, layer has " + std::to_string(spec.filters));
  for (std::size_t i = 0; i < mask.keep.size(); ++i)
    require(mask.keep[i] < spec.filters && (i == 0 || mask.keep[i] > mask.keep[i - 1]), ErrorKind::Validation,
            "prune mask for '" + mask.layer_id + "' must be sorted, unique and in range");
  const PrunePlan plan = prune_plan(net, mask.layer_id);
  require(plan.prunable, ErrorKind::Validation, "layer '" + mask.layer_id + "' cannot be pruned: " + plan.reason);

  Network out = net;
  {
    const Matrix& w = net.dense_weights(mask.layer_id);
    Matrix kept(mask.keep.size(), w.cols());
    for (std::size_t i = 0; i < mask.keep.size(); ++i) {
      auto src = w.row(mask.keep[i]);
      std::copy(src.begin(), src.end(), kept.row(i).begin());
    }
    out.params[mask.layer_id] = std::move(kept);
    out.layer(mask.layer_id).filters = mask.keep.size();
  }
  for (const auto& c : plan.consumers) {
    const Matrix& w = net.dense_weights(c.layer_id);
    std::vector<std::size_t> cols;
    for (std::size_t ch : mask.keep)
      for (std::size_t b = 0; b < c.block; ++b) cols.push_back(ch * c.block + b);
    cols.push_back(w.cols() - 1);
    Matrix kept(w.rows(), cols.size());
    for (std::size_t r = 0; r < w.rows(); ++r)
      for (std::size_t j = 0; j < cols.size(); ++j) kept(r, j) = w(r, cols[j]);
    out.params[c.layer_id] = std::move(kept);
    auto& l = out.layer(c.layer_id);
    if (l.kind == LayerKind::Conv)
      l.channels = mask.keep.size();
    else
      l.in_features = mask.keep.size() * c.block;
  }
  validate(out);
  return out;
}

// Accuracy predicate shared by the pruning and coreset searches: a candidate passes when
// its accuracy is within `budget` of a fixed reference. The search runs on `subset`; the
// final answer is verified on `full`.
struct BudgetCheck {
  double budget = 0.005;
  std::vector<std::size_t> subset;
  std::vector<std::size_t> full;
  double reference_subset = 0.0;
  double reference_full = 0.0;

  static constexpr double kSlack = 1e-12;

  bool passes_subset(const Network& candidate, const EvalSet& eval) const {
    return accuracy_on(candidate, eval, subset) >= reference_subset - budget - kSlack;
  }
  bool passes_full(const Network& candidate, const EvalSet& eval) const {
    return accuracy_on(candidate, eval, full) >= reference_full - budget - kSlack;
  }

  /// References taken from `reference_net` itself.
  static BudgetCheck against(const Network& reference_net, const EvalSet& eval, double budget, double subset_fraction,
                             std::uint64_t seed) {
    BudgetCheck c;
    c.budget = budget;
    c.full = sample_subset(eval.size(), 1.0, seed);
    c.subset = sample_subset(eval.size(), subset_fraction, seed);
    c.reference_full = accuracy_on(reference_net, eval, c.full);
    c.reference_subset = c.subset == c.full ? c.reference_full : accuracy_on(reference_net, eval, c.subset);
    return c;
  }
};

struct PruneSearchResult {
  PruneMask mask;
  std::size_t evaluations = 0;
  std::size_t fallback_steps = 0;  // linear increments needed after the binary search
};

// Smallest N* in [1, N] whose top-N* mask passes the budget, by binary search on the
// subset (monotonicity assumed), then verified on the full set with a linear fallback.
inline PruneSearchResult search_prune_count(const Network& net, const std::string& layer_id, const EvalSet& eval,
                                            const BudgetCheck& check) {
  require(check.budget >= 0.0, ErrorKind::Validation, "prune budget must be >= 0");
  const auto& spec = net.layer(layer_id);
  const std::size_t n = spec.filters;
  const auto order = rank_filters(record_stats(net, eval, layer_id));

  PruneSearchResult result;
  std::map<std::size_t, bool> memo;
  auto passes = [&](std::size_t count) {
    if (auto it = memo.find(count); it != memo.end()) return it->second;
    ++result.evaluations;
    const bool ok = check.passes_subset(apply_prune(net, PruneMask::top(layer_id, n, order, count)), eval);
    memo[count] = ok;
    return ok;
  };

  std::size_t lo = 1, hi = n;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (passes(mid))
      hi = mid;
    else
      lo = mid + 1;
  }
  std::size_t count = lo;
  while (true) {
    ++result.evaluations;
    if (check.passes_full(apply_prune(net, PruneMask::top(layer_id, n, order, count)), eval)) break;
    ++result.fallback_steps;
    require(++count <= n, ErrorKind::Budget,
            "layer '" + layer_id + "': keeping all " + std::to_string(n) +
                " filters fails the accuracy budget (stale reference?)");
  }
  result.mask = PruneMask::top(layer_id, n, order, count);
  return result;
}

/// Convenience form: the reference is the accuracy of `net` itself.
inline PruneMask search_prune_count(const Network& net, const std::string& layer_id, double budget,
                                    const EvalSet& eval, double subset_fraction, std::uint64_t seed) {
  return search_prune_count(net, layer_id, eval, BudgetCheck::against(net, eval, budget, subset_fraction, seed)).mask;
}

}  // namespace coreset
