#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "coreset/decomp.hpp"
#include "coreset/error.hpp"
#include "coreset/inference.hpp"
#include "coreset/network.hpp"

namespace coreset {

/// Entries below this magnitude make a mixer row or basis column count as null.
inline constexpr double kNullThreshold = 1e-8;

/// Row-constant N x cols matrix whose row f holds the normalized importance of filter f.
inline MatrixD importance_matrix(const std::vector<double>& importance, std::size_t cols) {
  MatrixD m(importance.size(), cols);
  for (std::size_t f = 0; f < importance.size(); ++f)
    for (std::size_t c = 0; c < cols; ++c) m(f, c) = importance[f];
  return m;
}

inline MatrixD importance_matrix(const ActivationStats& stats, std::size_t cols) {
  return importance_matrix(stats.importance(), cols);
}

namespace detail {

inline void register_null_structure(CoresetLayer& c) {
  for (std::size_t i = 0; i < c.mixer.rows(); ++i) {
    auto row = c.mixer.row(i);
    if (std::all_of(row.begin(), row.end(), [](float v) { return std::abs(v) < kNullThreshold; })) {
      std::fill(row.begin(), row.end(), 0.0f);
      c.dropped_rows.push_back(i);
    }
  }
  for (std::size_t j = 0; j < c.basis.cols(); ++j) {
    bool null = true;
    for (std::size_t k = 0; k < c.basis.rows() && null; ++k) null = std::abs(c.basis(k, j)) < kNullThreshold;
    if (!null) continue;
    for (std::size_t k = 0; k < c.basis.rows(); ++k) c.basis(k, j) = 0.0f;
    c.dropped_cols.push_back(j);
  }
}

}  // namespace detail

/// Packages a factorization as mixer = U diag(S) and basis = V^T.
inline CoresetLayer package_factorization(const std::string& layer_id, CoresetMethod method,
                                          const Factorization& f, double lambda = 0.0) {
  CoresetLayer c;
  c.layer_id = layer_id;
  c.method = method;
  c.lambda = lambda;
  c.mixer = Matrix(f.u.rows(), f.rank);
  for (std::size_t i = 0; i < f.u.rows(); ++i)
    for (std::size_t k = 0; k < f.rank; ++k) c.mixer(i, k) = static_cast<float>(f.u(i, k) * f.s[k]);
  c.basis = Matrix(f.rank, f.v.rows());
  for (std::size_t k = 0; k < f.rank; ++k)
    for (std::size_t j = 0; j < f.v.rows(); ++j) c.basis(k, j) = static_cast<float>(f.v(j, k));
  detail::register_null_structure(c);
  return c;
}

struct CoresetRequest {
  CoresetMethod method = CoresetMethod::K;
  std::size_t rank = 1;
  std::optional<double> lambda;               // required for S
  const ActivationStats* stats = nullptr;     // required for A
  SolverOptions solver;
};

/// Sparse factorization used for method S. lambda is measured in units of the layer's
/// RMS weight, so one grid serves layers of any scale: sspca runs on W / rms and V is
/// scaled back. The surviving entries of V are then refit by least squares.
/// `objective` is the penalized objective at the returned point.
inline Factorization sparse_factorization(const MatrixD& w, std::size_t r, double lambda,
                                          const SolverOptions& opt = {}) {
  const double rms = w.empty() ? 0.0 : frobenius_norm(w) / std::sqrt(static_cast<double>(w.size()));
  if (rms == 0.0) return sspca(w, r, lambda, opt);
  MatrixD scaled = w;
  for (auto& x : scaled.data()) x /= rms;
  Factorization f = sspca(scaled, r, lambda, opt);
  for (auto& x : f.v.data()) x *= rms;
  for (auto& o : f.objective_history) o *= rms * rms;
  refit_support(w, f);
  f.objective = sspca_objective(w, f, lambda * rms);
  return f;
}

/// Runs the decomposition selected by `req.method` on the layer's weight matrix.
inline Factorization decompose(const Matrix& weights, const CoresetRequest& req) {
  const MatrixD w = MatrixD::cast(weights);
  switch (req.method) {
    case CoresetMethod::K: return truncated_svd(w, req.rank);
    case CoresetMethod::S:
      require(req.lambda.has_value(), ErrorKind::Validation, "method S requires lambda");
      return sparse_factorization(w, req.rank, *req.lambda, req.solver);
    case CoresetMethod::A: {
      require(req.stats != nullptr, ErrorKind::Validation, "method A requires activation statistics");
      require(req.stats->filter_count() == weights.rows(), ErrorKind::Shape,
              "activation statistics cover " + std::to_string(req.stats->filter_count()) + " filters, layer has " +
                  std::to_string(weights.rows()));
      return weighted_lowrank_em(w, importance_matrix(*req.stats, weights.cols()), req.rank, req.solver);
    }
  }
  fail(ErrorKind::Validation, "unknown coreset method");
}

inline CoresetLayer build_coreset(const std::string& layer_id, const Matrix& weights, const CoresetRequest& req) {
  require(req.rank >= 1 && req.rank < weights.rows(), ErrorKind::Validation,
          "layer '" + layer_id + "': coreset rank " + std::to_string(req.rank) + " must lie in [1, " +
              std::to_string(weights.rows()) + ")");
  const Factorization f = decompose(weights, req);
  return package_factorization(layer_id, req.method, f, req.lambda.value_or(0.0));
}

inline Matrix densify(const CoresetLayer& c) { return matmul(c.mixer, c.basis); }

/// Stored parameters: rank * (P+1) + N * rank, less the dropped mixer rows and basis columns.
inline std::size_t param_count(const CoresetLayer& c) {
  const std::size_t r = c.rank();
  return r * c.basis.cols() + c.mixer.rows() * r - (c.dropped_rows.size() + c.dropped_cols.size()) * r;
}

inline std::size_t byte_size(const CoresetLayer& c) { return 4 * param_count(c); }

inline std::size_t param_count(const LayerPayload& p) {
  if (const auto* m = std::get_if<Matrix>(&p)) return m->size();
  return param_count(std::get<CoresetLayer>(p));
}

}  // namespace coreset
