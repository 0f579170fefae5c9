#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "coreset/error.hpp"
#include "coreset/tensor.hpp"

namespace coreset {

/// W ~= U diag(S) V^T with U: N x r, V: P x r. All factors are held in double.
struct Factorization {
  MatrixD u;
  std::vector<double> s;
  MatrixD v;
  std::size_t rank = 0;
  double objective = 0.0;
  std::vector<double> objective_history;  // one entry per solver iterate, starting at the initial point
  std::size_t iterations = 0;

  MatrixD reconstruct() const {
    MatrixD us = u;
    for (std::size_t i = 0; i < us.rows(); ++i)
      for (std::size_t k = 0; k < rank; ++k) us(i, k) *= s[k];
    MatrixD out(u.rows(), v.rows());
    for (std::size_t i = 0; i < u.rows(); ++i)
      for (std::size_t k = 0; k < rank; ++k) {
        const double a = us(i, k);
        if (a == 0.0) continue;
        for (std::size_t j = 0; j < v.rows(); ++j) out(i, j) += a * v(j, k);
      }
    return out;
  }
};

struct SolverOptions {
  double tol = 1e-6;  // relative objective change
  std::size_t max_iters = 200;
};

// Full thin SVD of a dense matrix by one-sided (Hestenes) Jacobi rotations.
// Singular values come back in non-increasing order; left vectors belonging to zero
// singular values are completed to an orthonormal set.
struct SvdResult {
  MatrixD u;  // m x k
  std::vector<double> s;
  MatrixD v;  // n x k, k = min(m, n)
  std::size_t sweeps = 0;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline void rotate_rows(MatrixD& m, std::size_t p, std::size_t q, double c, double s) {
  auto rp = m.row(p);
  auto rq = m.row(q);
  for (std::size_t i = 0; i < rp.size(); ++i) {
    const double x = rp[i], y = rq[i];
    rp[i] = c * x - s * y;
    rq[i] = s * x + c * y;
  }
}

// Orthonormal completion: replaces rows of `basis` flagged in `missing` by unit vectors
// orthogonal to every other row.
inline void complete_orthonormal_rows(MatrixD& basis, const std::vector<bool>& missing) {
  const std::size_t dim = basis.cols();
  std::size_t probe = 0;
  for (std::size_t r = 0; r < basis.rows(); ++r) {
    if (!missing[r]) continue;
    for (; probe < dim; ++probe) {
      std::vector<double> cand(dim, 0.0);
      cand[probe] = 1.0;
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t o = 0; o < basis.rows(); ++o) {
          if (o == r || (missing[o] && o > r)) continue;
          const double proj = dot(cand, basis.row(o));
          for (std::size_t i = 0; i < dim; ++i) cand[i] -= proj * basis(o, i);
        }
      const double n = std::sqrt(dot(cand, cand));
      if (n > 1e-6) {
        for (std::size_t i = 0; i < dim; ++i) basis(r, i) = cand[i] / n;
        ++probe;
        break;
      }
    }
  }
}

// Jacobi on the rows of `g` (each row is one column of the matrix being decomposed).
// `vt` accumulates the same rotations. Returns the sweep count.
inline std::size_t jacobi_orthogonalize_rows(MatrixD& g, MatrixD& vt) {
  constexpr std::size_t kMaxSweeps = 80;
  constexpr double kTol = 1e-15;
  const std::size_t n = g.rows();
  std::vector<double> norms(n);
  for (std::size_t sweep = 1; sweep <= kMaxSweeps; ++sweep) {
    for (std::size_t i = 0; i < n; ++i) norms[i] = dot(g.row(i), g.row(i));
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = norms[p], beta = norms[q];
        if (alpha == 0.0 || beta == 0.0) continue;
        const double gamma = dot(g.row(p), g.row(q));
        if (std::abs(gamma) <= kTol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate_rows(g, p, q, c, s);
        rotate_rows(vt, p, q, c, s);
        norms[p] = alpha - t * gamma;
        norms[q] = beta + t * gamma;
      }
    if (!rotated) return sweep;
  }
  fail(ErrorKind::Convergence, "Jacobi SVD did not converge in " + std::to_string(kMaxSweeps) + " sweeps");
}

}  // namespace detail

/// `right_start`, when given, is an orthogonal n x n matrix whose columns seed the
/// right singular basis (used to warm-start repeated decompositions of nearby matrices).
inline SvdResult jacobi_svd(const MatrixD& a, const MatrixD* right_start = nullptr) {
  require(a.rows() > 0 && a.cols() > 0, ErrorKind::Shape, "SVD of empty matrix");
  require(all_finite(a.data()), ErrorKind::Validation, "SVD input has non-finite entries");
  if (a.rows() < a.cols()) {
    SvdResult t = jacobi_svd(a.transposed(), nullptr);
    return {std::move(t.v), std::move(t.s), std::move(t.u), t.sweeps};
  }
  const std::size_t m = a.rows(), n = a.cols();

  MatrixD g, vt;
  if (right_start != nullptr && right_start->rows() == n && right_start->cols() == n) {
    g = matmul(a, *right_start).transposed();
    vt = right_start->transposed();
  } else {
    g = a.transposed();
    vt = MatrixD::identity(n);
  }
  const std::size_t sweeps = detail::jacobi_orthogonalize_rows(g, vt);

  std::vector<double> sigma(n);
  for (std::size_t i = 0; i < n; ++i) sigma[i] = std::sqrt(detail::dot(g.row(i), g.row(i)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  const double cutoff = (sigma[order[0]] > 0 ? sigma[order[0]] : 1.0) * 1e-13 * static_cast<double>(m);
  MatrixD ut(n, m);
  MatrixD vsorted(n, n);
  std::vector<double> s(n);
  std::vector<bool> missing(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    s[k] = sigma[src];
    auto vrow = vt.row(src);
    std::copy(vrow.begin(), vrow.end(), vsorted.row(k).begin());
    if (s[k] > cutoff) {
      for (std::size_t i = 0; i < m; ++i) ut(k, i) = g(src, i) / s[k];
    } else {
      missing[k] = true;
    }
  }
  detail::complete_orthonormal_rows(ut, missing);
  return {ut.transposed(), std::move(s), vsorted.transposed(), sweeps};
}

namespace detail {

inline Factorization truncate(const SvdResult& svd, std::size_t r) {
  Factorization f;
  f.rank = r;
  f.u = MatrixD(svd.u.rows(), r);
  f.v = MatrixD(svd.v.rows(), r);
  f.s.assign(svd.s.begin(), svd.s.begin() + static_cast<long>(r));
  for (std::size_t i = 0; i < svd.u.rows(); ++i)
    for (std::size_t k = 0; k < r; ++k) f.u(i, k) = svd.u(i, k);
  for (std::size_t j = 0; j < svd.v.rows(); ++j)
    for (std::size_t k = 0; k < r; ++k) f.v(j, k) = svd.v(j, k);
  return f;
}

inline void check_rank(const MatrixD& w, std::size_t r) {
  const std::size_t limit = std::min(w.rows(), w.cols());
  require(r >= 1 && r <= limit, ErrorKind::Validation,
          "rank " + std::to_string(r) + " outside [1, " + std::to_string(limit) + "]");
}

// Cholesky solve of a * x = b; false when a is not numerically positive definite.
inline bool solve_spd(MatrixD a, const std::vector<double>& b, std::vector<double>& x) {
  const std::size_t n = a.rows();
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, a(i, i));
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > 1e-12 * scale)) return false;
    a(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double t = a(i, j);
      for (std::size_t k = 0; k < j; ++k) t -= a(i, k) * a(j, k);
      a(i, j) = t / a(j, j);
    }
  }
  x = b;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) x[i] -= a(i, k) * x[k];
    x[i] /= a(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) x[i] -= a(k, i) * x[k];
    x[i] /= a(i, i);
  }
  return true;
}

inline bool converged(double previous, double current, double tol) {
  if (previous <= 0.0) return true;
  return std::abs(previous - current) / previous < tol;
}

}  // namespace detail

/// Best rank-r approximation in Frobenius norm. The reported objective is the explicit
/// squared residual.
inline Factorization truncated_svd(const MatrixD& w, std::size_t r) {
  detail::check_rank(w, r);
  Factorization f = detail::truncate(jacobi_svd(w), r);
  f.objective = frobenius_distance_squared(w, f.reconstruct());
  f.objective_history = {f.objective};
  return f;
}

/// Truncation of an already-computed full SVD (avoids re-decomposing when scanning ranks).
inline Factorization truncated_svd(const MatrixD& w, const SvdResult& full, std::size_t r) {
  detail::check_rank(w, r);
  Factorization f = detail::truncate(full, r);
  f.objective = frobenius_distance_squared(w, f.reconstruct());
  f.objective_history = {f.objective};
  return f;
}

inline double sspca_objective(const MatrixD& w, const Factorization& f, double lambda) {
  double l1 = 0.0;
  for (double v : f.v.data()) l1 += std::abs(v);
  return frobenius_distance_squared(w, f.reconstruct()) + lambda * l1;
}

// Structured sparse factorization:
//   min ||W - M V^T||_F^2 + lambda * ||V||_1   subject to ||M_k||_2 = 1 for every column k.
// Alternates an exact coordinate-descent lasso over the entries of V with an exact
// per-column update of M on the unit sphere; both steps are block minimizations, so
// the objective never increases. The result is reported as U = M, S = 1, V = V (the
// column scale of M U'S' lives in V).
inline Factorization sspca(const MatrixD& w, std::size_t r, double lambda, const SolverOptions& opt = {}) {
  require(lambda >= 0.0 && std::isfinite(lambda), ErrorKind::Validation, "sspca: lambda must be >= 0");
  detail::check_rank(w, r);
  const std::size_t n = w.rows(), p = w.cols();

  const Factorization init = truncated_svd(w, r);
  MatrixD mix = init.u;  // n x r, unit columns
  MatrixD v = init.v;    // p x r
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t k = 0; k < r; ++k) v(j, k) *= init.s[k];

  Factorization f;
  f.rank = r;
  f.s.assign(r, 1.0);
  auto evaluate = [&] {
    f.u = mix;
    f.v = v;
    return sspca_objective(w, f, lambda);
  };
  double obj = evaluate();
  f.objective_history = {obj};

  const double half_lambda = 0.5 * lambda;
  for (std::size_t iter = 1; iter <= opt.max_iters; ++iter) {
    // V-step: lasso per row of V. gram = M^T M, corr = W^T M.
    const MatrixD gram = matmul_tn(mix, mix);
    const MatrixD corr = matmul_tn(w, mix);
    for (std::size_t j = 0; j < p; ++j) {
      auto vj = v.row(j);
      for (int sweep = 0; sweep < 100; ++sweep) {
        double max_delta = 0.0;
        for (std::size_t k = 0; k < r; ++k) {
          const double gkk = gram(k, k);
          if (gkk <= 0.0) continue;
          double rho = corr(j, k);
          for (std::size_t l = 0; l < r; ++l)
            if (l != k) rho -= gram(k, l) * vj[l];
          double updated = 0.0;
          if (rho > half_lambda)
            updated = (rho - half_lambda) / gkk;
          else if (rho < -half_lambda)
            updated = (rho + half_lambda) / gkk;
          max_delta = std::max(max_delta, std::abs(updated - vj[k]));
          vj[k] = updated;
        }
        if (max_delta <= 1e-13) break;
      }
    }

    // M-step: column k of M maximizes m^T (W - sum_{l != k} M_l V_l^T) v_k on the sphere.
    const MatrixD wv = matmul(w, v);
    const MatrixD vtv = matmul_tn(v, v);
    for (std::size_t k = 0; k < r; ++k) {
      if (vtv(k, k) == 0.0) continue;
      std::vector<double> target(n);
      for (std::size_t i = 0; i < n; ++i) {
        double t = wv(i, k);
        for (std::size_t l = 0; l < r; ++l)
          if (l != k) t -= mix(i, l) * vtv(l, k);
        target[i] = t;
      }
      const double norm = std::sqrt(detail::dot(target, target));
      if (norm <= 0.0) continue;
      for (std::size_t i = 0; i < n; ++i) mix(i, k) = target[i] / norm;
    }

    const double next = evaluate();
    f.objective_history.push_back(next);
    f.iterations = iter;
    const bool done = detail::converged(obj, next, opt.tol);
    obj = next;
    if (done) break;
  }
  f.objective = obj;
  return f;
}

// Refits the nonzero entries of each row of V by least squares with M fixed, keeping
// the sparsity pattern. Removes the shrinkage the l1 penalty puts on surviving entries.
inline void refit_support(const MatrixD& w, Factorization& f) {
  const std::size_t r = f.rank;
  MatrixD us = f.u;
  for (std::size_t i = 0; i < us.rows(); ++i)
    for (std::size_t k = 0; k < r; ++k) us(i, k) *= f.s[k];
  const MatrixD gram = matmul_tn(us, us);
  const MatrixD corr = matmul_tn(w, us);
  std::vector<std::size_t> support;
  for (std::size_t j = 0; j < f.v.rows(); ++j) {
    support.clear();
    for (std::size_t k = 0; k < r; ++k)
      if (f.v(j, k) != 0.0) support.push_back(k);
    if (support.empty()) continue;
    const std::size_t m = support.size();
    MatrixD a(m, m);
    std::vector<double> b(m);
    for (std::size_t x = 0; x < m; ++x) {
      b[x] = corr(j, support[x]);
      for (std::size_t y = 0; y < m; ++y) a(x, y) = gram(support[x], support[y]);
    }
    std::vector<double> sol;
    if (!detail::solve_spd(a, b, sol)) continue;
    for (std::size_t x = 0; x < m; ++x) f.v(j, support[x]) = sol[x];
  }
}

inline double weighted_objective(const MatrixD& w, const MatrixD& importance, const MatrixD& recon) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double d = importance.data()[i] * (w.data()[i] - recon.data()[i]);
    s += d * d;
  }
  return s;
}

// Weighted low-rank approximation min ||I (.) (W - U S V^T)||_F^2 by EM: the E-step
// imputes X = A (.) W + (1 - A) (.) R with A = (I / max I)^2 in [0, 1], the M-step
// takes the rank-r truncated SVD of X. Starts from the unweighted truncated SVD.
inline Factorization weighted_lowrank_em(const MatrixD& w, const MatrixD& importance, std::size_t r,
                                         const SolverOptions& opt = {}) {
  require(importance.rows() == w.rows() && importance.cols() == w.cols(), ErrorKind::Shape,
          "weighted_lowrank_em: importance shape differs from W");
  detail::check_rank(w, r);
  double peak = 0.0;
  for (double x : importance.data()) {
    require(x >= 0.0 && std::isfinite(x), ErrorKind::Validation, "weighted_lowrank_em: importance must be >= 0");
    peak = std::max(peak, x);
  }
  require(peak > 0.0, ErrorKind::Validation, "weighted_lowrank_em: importance matrix is all zero");

  MatrixD alpha(w.rows(), w.cols());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double a = importance.data()[i] / peak;
    alpha.data()[i] = a * a;
  }

  SvdResult svd = jacobi_svd(w);
  Factorization f = detail::truncate(svd, r);
  MatrixD recon = f.reconstruct();
  double obj = weighted_objective(w, importance, recon);
  f.objective_history = {obj};

  // Right basis for warm starts, square in the orientation jacobi_svd works in.
  const bool tall = w.rows() >= w.cols();
  auto warm_basis = [&](const SvdResult& s) -> std::optional<MatrixD> {
    const MatrixD& basis = tall ? s.v : s.u;
    if (basis.rows() != basis.cols()) return std::nullopt;
    return basis;
  };
  std::optional<MatrixD> warm = warm_basis(svd);

  MatrixD x(w.rows(), w.cols());
  for (std::size_t iter = 1; iter <= opt.max_iters; ++iter) {
    if (obj == 0.0) break;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double a = alpha.data()[i];
      x.data()[i] = a * w.data()[i] + (1.0 - a) * recon.data()[i];
    }
    if (tall) {
      svd = jacobi_svd(x, warm ? &*warm : nullptr);
    } else {
      SvdResult t = jacobi_svd(x.transposed(), warm ? &*warm : nullptr);
      svd = {std::move(t.v), std::move(t.s), std::move(t.u), t.sweeps};
    }
    warm = warm_basis(svd);
    Factorization next = detail::truncate(svd, r);
    MatrixD next_recon = next.reconstruct();
    const double next_obj = weighted_objective(w, importance, next_recon);
    next.objective_history = std::move(f.objective_history);
    next.objective_history.push_back(next_obj);
    next.iterations = iter;
    f = std::move(next);
    recon = std::move(next_recon);
    const bool done = detail::converged(obj, next_obj, opt.tol);
    obj = next_obj;
    if (done) break;
  }
  f.objective = obj;
  return f;
}

inline Factorization truncated_svd(const Matrix& w, std::size_t r) { return truncated_svd(MatrixD::cast(w), r); }

}  // namespace coreset
