#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coreset/container.hpp"
#include "coreset/coreset.hpp"
#include "coreset/decomp.hpp"
#include "coreset/error.hpp"
#include "coreset/inference.hpp"
#include "coreset/model_io.hpp"
#include "coreset/network.hpp"
#include "coreset/pruning.hpp"
#include "coreset/quantize.hpp"

namespace coreset {

struct PipelineConfig {
  CoresetMethod method = CoresetMethod::S;
  bool prune = false;
  double prune_budget = 0.005;
  double coreset_budget = 0.005;
  std::vector<double> lambda_grid{1.0, 1.25, 1.5};
  bool single_lambda = false;  // one lambda for the whole network instead of per layer
  double subset_fraction = 1.0;
  std::uint64_t seed = 0;
  SolverOptions solver;
  unsigned quantize_bits = 32;  // 32 = no quantization
  double quantize_slack = 0.005;
};

inline void validate(const PipelineConfig& cfg) {
  require(cfg.prune_budget >= 0.0 && cfg.coreset_budget >= 0.0, ErrorKind::Validation, "budgets must be >= 0");
  require(cfg.subset_fraction > 0.0 && cfg.subset_fraction <= 1.0, ErrorKind::Validation,
          "subset fraction must lie in (0, 1]");
  if (cfg.method == CoresetMethod::S) {
    require(!cfg.lambda_grid.empty(), ErrorKind::Validation, "method S needs a non-empty lambda grid");
    for (double l : cfg.lambda_grid) require(l >= 0.0, ErrorKind::Validation, "lambda values must be >= 0");
  }
  require(cfg.quantize_bits == 32 || (cfg.quantize_bits >= 1 && cfg.quantize_bits <= 8), ErrorKind::Validation,
          "quantization bits must be 32 or lie in [1, 8]");
  require(cfg.solver.tol > 0.0 && cfg.solver.max_iters > 0, ErrorKind::Validation, "invalid solver options");
}

struct StageTimings {
  double prune_seconds = 0.0;
  double coreset_seconds = 0.0;
  double quantize_seconds = 0.0;
};

// ---------------------------------------------------------------------------
// Stage 1: activation-based pruning

struct PruneStageResult {
  Network net;
  std::vector<PruneMask> masks;  // one per parametric layer, topological order
  bool budget_unmet = false;
  double accuracy_original = 0.0;
  double accuracy_pruned = 0.0;
};

/// Parametric layers by descending dense size, ties in topological order.
inline std::vector<std::string> prune_order(const Network& net) {
  auto ids = net.parametric_ids();
  std::stable_sort(ids.begin(), ids.end(), [&](const std::string& a, const std::string& b) {
    return net.layer(a).dense_param_count() > net.layer(b).dense_param_count();
  });
  return ids;
}

inline PruneStageResult run_prune_stage(const Network& net, const PipelineConfig& cfg, const EvalSet& eval) {
  PruneStageResult r;
  r.net = net;
  for (const auto& id : net.parametric_ids()) r.masks.push_back(PruneMask::keep_all(id, net.layer(id).filters));
  const BudgetCheck check = BudgetCheck::against(net, eval, cfg.prune_budget, cfg.subset_fraction, cfg.seed);
  r.accuracy_original = r.accuracy_pruned = check.reference_full;
  if (!cfg.prune) return r;

  Network current = net;
  std::vector<PruneMask> masks = r.masks;
  try {
    // Every layer is charged against the original accuracy; each accepted step is
    // verified on the full set, so the running network always satisfies the budget.
    for (const auto& id : prune_order(net)) {
      if (!prune_plan(current, id).prunable) continue;
      PruneSearchResult found = search_prune_count(current, id, eval, check);
      current = apply_prune(current, found.mask);
      for (auto& m : masks)
        if (m.layer_id == id) m = found.mask;
    }
    require(check.passes_full(current, eval), ErrorKind::Budget, "pruned network misses the pruning budget");
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Budget) throw;
    r.budget_unmet = true;
    return r;
  }
  r.net = std::move(current);
  r.masks = std::move(masks);
  r.accuracy_pruned = accuracy_on(r.net, eval, check.full);
  return r;
}

// ---------------------------------------------------------------------------
// Stage 2: coreset compression

struct LayerOutcome {
  std::string id;
  std::size_t rank = 0;  // 0: left dense
  double lambda = 0.0;
  double objective = 0.0;
  std::size_t evaluations = 0;
  std::string note;
};

struct CoresetStageResult {
  Network net;
  std::vector<LayerOutcome> layers;
  double accuracy_reference = 0.0;
  double accuracy_final = 0.0;
};

namespace detail {

inline Network with_payload(const Network& net, const std::string& id, LayerPayload payload) {
  Network out = net;
  out.params[id] = std::move(payload);
  return out;
}

struct LayerCandidate {
  CoresetLayer layer;
  std::size_t params = 0;
  double objective = 0.0;
  std::size_t evaluations = 0;
};

// Smallest rank in [1, max_rank] that passes the budget: binary search on the subset,
// verified on the full set with a linear fallback. Returns nothing when no rank passes
// or the passing rank is not smaller than the dense layer.
template <typename Build>
std::optional<LayerCandidate> search_rank(const Network& current, const std::string& id, const EvalSet& eval,
                                          const BudgetCheck& check, std::size_t max_rank, Build&& build) {
  const std::size_t dense = current.layer(id).dense_param_count();
  std::map<std::size_t, std::pair<CoresetLayer, double>> built;
  std::size_t evaluations = 0;
  auto get = [&](std::size_t r) -> const std::pair<CoresetLayer, double>& {
    auto it = built.find(r);
    if (it == built.end()) it = built.emplace(r, build(r)).first;
    return it->second;
  };
  std::map<std::size_t, bool> memo;
  auto passes = [&](std::size_t r) {
    if (auto it = memo.find(r); it != memo.end()) return it->second;
    ++evaluations;
    const bool ok = check.passes_subset(with_payload(current, id, get(r).first), eval);
    memo[r] = ok;
    return ok;
  };

  std::size_t lo = 1, hi = max_rank;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (passes(mid))
      hi = mid;
    else
      lo = mid + 1;
  }
  for (std::size_t r = lo; r <= max_rank; ++r) {
    const auto& [layer, objective] = get(r);
    if (param_count(layer) >= dense) return std::nullopt;
    ++evaluations;
    if (check.passes_full(with_payload(current, id, layer), eval))
      return LayerCandidate{layer, param_count(layer), objective, evaluations};
  }
  return std::nullopt;
}

}  // namespace detail

inline CoresetStageResult run_coreset_stage(const Network& net, const PipelineConfig& cfg, const EvalSet& eval);

namespace detail {

inline CoresetStageResult run_coreset_stage_per_layer(const Network& net, const PipelineConfig& cfg,
                                                      const EvalSet& eval) {
  const BudgetCheck check = BudgetCheck::against(net, eval, cfg.coreset_budget, cfg.subset_fraction, cfg.seed);
  CoresetStageResult result;
  result.accuracy_reference = check.reference_full;
  Network current = net;

  for (const auto& id : net.parametric_ids()) {
    LayerOutcome outcome;
    outcome.id = id;
    const Matrix& w = current.dense_weights(id);
    const std::size_t max_rank = std::min(w.rows() - 1, w.cols());
    if (w.rows() < 2) {
      outcome.note = "single filter";
      result.layers.push_back(outcome);
      continue;
    }

    std::optional<LayerCandidate> best;
    try {
      const MatrixD wd = MatrixD::cast(w);
      auto consider = [&](std::optional<LayerCandidate> cand) {
        if (cand && (!best || cand->params < best->params)) best = std::move(cand);
      };
      switch (cfg.method) {
        case CoresetMethod::K: {
          const SvdResult full = jacobi_svd(wd);
          consider(search_rank(current, id, eval, check, max_rank, [&](std::size_t r) {
            const Factorization f = truncated_svd(wd, full, r);
            return std::pair{package_factorization(id, CoresetMethod::K, f), f.objective};
          }));
          break;
        }
        case CoresetMethod::S:
          for (double lambda : cfg.lambda_grid)
            consider(search_rank(current, id, eval, check, max_rank, [&](std::size_t r) {
              const Factorization f = sparse_factorization(wd, r, lambda, cfg.solver);
              return std::pair{package_factorization(id, CoresetMethod::S, f, lambda), f.objective};
            }));
          break;
        case CoresetMethod::A: {
          const ActivationStats stats = record_stats(current, eval, id);
          const MatrixD importance = importance_matrix(stats, w.cols());
          consider(search_rank(current, id, eval, check, max_rank, [&](std::size_t r) {
            const Factorization f = weighted_lowrank_em(wd, importance, r, cfg.solver);
            return std::pair{package_factorization(id, CoresetMethod::A, f), f.objective};
          }));
          break;
        }
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Shape || e.kind() == ErrorKind::Format) throw;
      outcome.note = std::string("solver failure: ") + e.what();
    }

    if (best) {
      outcome.rank = best->layer.rank();
      outcome.lambda = best->layer.lambda;
      outcome.objective = best->objective;
      outcome.evaluations = best->evaluations;
      current.params[id] = std::move(best->layer);
    } else if (outcome.note.empty()) {
      outcome.note = "no smaller coreset within budget";
    }
    result.layers.push_back(outcome);
  }
  result.accuracy_final = accuracy_on(current, eval, check.full);
  result.net = std::move(current);
  return result;
}

inline std::size_t total_params(const Network& net) {
  std::size_t n = 0;
  for (const auto& [id, p] : net.params) n += param_count(p);
  return n;
}

}  // namespace detail

// Shallow-to-deep, each layer gets the smallest rank whose network (earlier layers
// already compressed, later layers dense) stays within the coreset budget of `net`.
inline CoresetStageResult run_coreset_stage(const Network& net, const PipelineConfig& cfg, const EvalSet& eval) {
  validate(cfg);
  if (cfg.method != CoresetMethod::S || !cfg.single_lambda || cfg.lambda_grid.size() == 1)
    return detail::run_coreset_stage_per_layer(net, cfg, eval);
  std::optional<CoresetStageResult> best;
  std::size_t best_params = 0;
  for (double lambda : cfg.lambda_grid) {
    PipelineConfig one = cfg;
    one.lambda_grid = {lambda};
    CoresetStageResult r = detail::run_coreset_stage_per_layer(net, one, eval);
    const std::size_t params = detail::total_params(r.net);
    if (!best || params < best_params) {
      best_params = params;
      best = std::move(r);
    }
  }
  return std::move(*best);
}

// ---------------------------------------------------------------------------

/// Prune stage, coreset stage, optional quantization; assembles the report.
inline CompressedContainer compress(const Network& net, const PipelineConfig& cfg, const EvalSet& eval,
                                    StageTimings* timings = nullptr) {
  validate(cfg);
  validate(net);
  require(net.is_dense(), ErrorKind::Validation, "compress expects a dense network");
  validate(eval);
  require(eval.input_shape == net.input_shape, ErrorKind::Shape, "evaluation set shape does not match the network input");
  using clock = std::chrono::steady_clock;
  StageTimings t;

  auto t0 = clock::now();
  PruneStageResult pruned = run_prune_stage(net, cfg, eval);
  auto t1 = clock::now();
  CoresetStageResult cs = run_coreset_stage(pruned.net, cfg, eval);
  auto t2 = clock::now();
  t.prune_seconds = std::chrono::duration<double>(t1 - t0).count();
  t.coreset_seconds = std::chrono::duration<double>(t2 - t1).count();

  CompressedContainer c;
  c.net = std::move(cs.net);
  c.masks = pruned.masks;
  auto& r = c.report;
  r.method = std::string(1, to_char(cfg.method));
  r.prune = cfg.prune;
  r.prune_budget = cfg.prune_budget;
  r.coreset_budget = cfg.coreset_budget;
  r.subset_fraction = cfg.subset_fraction;
  r.seed = cfg.seed;
  r.quantize_bits = 32;
  r.prune_budget_unmet = pruned.budget_unmet;
  r.accuracy_original = pruned.accuracy_original;
  r.accuracy_pruned = pruned.accuracy_pruned;
  r.accuracy_coreset = cs.accuracy_final;

  for (const auto& outcome : cs.layers) {
    LayerReport lr;
    lr.id = outcome.id;
    lr.filters = net.layer(outcome.id).filters;
    lr.kept_filters = c.net.layer(outcome.id).filters;
    lr.dense_params = net.layer(outcome.id).dense_param_count();
    lr.pruned_params = c.net.layer(outcome.id).dense_param_count();
    const LayerPayload& p = c.net.params.at(outcome.id);
    if (const auto* cl = std::get_if<CoresetLayer>(&p)) {
      lr.coreset_rank = cl->rank();
      lr.method = to_char(cl->method);
      lr.lambda = cl->lambda;
      lr.dropped_rows = cl->dropped_rows.size();
      lr.dropped_cols = cl->dropped_cols.size();
    }
    lr.compressed_params = param_count(p);
    lr.bytes = payload_bytes(p, nullptr);
    lr.note = outcome.note;
    r.layers.push_back(std::move(lr));
  }
  r.recompute_totals();
  r.unquantized_bytes = r.total_bytes;

  if (cfg.quantize_bits != 32) {
    auto t3 = clock::now();
    c = quantize_container(c, eval, {cfg.quantize_bits, cfg.quantize_slack, cfg.seed});
    t.quantize_seconds = std::chrono::duration<double>(clock::now() - t3).count();
  }
  if (timings) *timings = t;
  return c;
}

}  // namespace coreset
