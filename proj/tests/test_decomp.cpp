#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "test_util.hpp"

using namespace coreset;
using testutil::random_matrix;

namespace {

Eigen::MatrixXd to_eigen(const MatrixD& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

Eigen::VectorXd oracle_singular_values(const MatrixD& m) {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(to_eigen(m)).singularValues();
}

double discarded_energy(const Eigen::VectorXd& s, std::size_t r) {
  double e = 0.0;
  for (Eigen::Index i = static_cast<Eigen::Index>(r); i < s.size(); ++i) e += s(i) * s(i);
  return e;
}

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

double orthonormality_error(const MatrixD& q) {
  const MatrixD g = matmul_tn(q, q);
  double e = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) e = std::max(e, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
  return e;
}

void expect_non_increasing(const std::vector<double>& h, double tol = 1e-9) {
  for (std::size_t i = 1; i < h.size(); ++i) EXPECT_LE(h[i], h[i - 1] * (1 + tol) + 1e-15) << "step " << i;
}

// Plain gradient descent with backtracking on ||I (.) (W - U V^T)||^2, best of several starts.
double gradient_descent_weighted(const MatrixD& w, const MatrixD& imp, std::size_t r, std::uint64_t seed) {
  const std::size_t n = w.rows(), p = w.cols();
  std::mt19937_64 rng(seed);
  auto objective = [&](const MatrixD& u, const MatrixD& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < p; ++j) {
        double rec = 0.0;
        for (std::size_t k = 0; k < r; ++k) rec += u(i, k) * v(j, k);
        const double d = imp(i, j) * (w(i, j) - rec);
        s += d * d;
      }
    return s;
  };
  double best = std::numeric_limits<double>::infinity();
  for (int start = 0; start < 8; ++start) {
    MatrixD u = random_matrix(n, r, rng), v = random_matrix(p, r, rng);
    double f = objective(u, v), step = 0.1;
    for (int it = 0; it < 20000; ++it) {
      MatrixD gu(n, r), gv(p, r);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) {
          double rec = 0.0;
          for (std::size_t k = 0; k < r; ++k) rec += u(i, k) * v(j, k);
          const double g = -2.0 * imp(i, j) * imp(i, j) * (w(i, j) - rec);
          for (std::size_t k = 0; k < r; ++k) {
            gu(i, k) += g * v(j, k);
            gv(j, k) += g * u(i, k);
          }
        }
      const double gnorm = frobenius_norm_squared(gu) + frobenius_norm_squared(gv);
      if (gnorm < 1e-26) break;
      for (;;) {
        MatrixD nu = u, nv = v;
        for (std::size_t i = 0; i < nu.size(); ++i) nu.data()[i] -= step * gu.data()[i];
        for (std::size_t i = 0; i < nv.size(); ++i) nv.data()[i] -= step * gv.data()[i];
        const double nf = objective(nu, nv);
        if (nf <= f - 0.5 * step * gnorm) {
          u = std::move(nu);
          v = std::move(nv);
          f = nf;
          step *= 1.5;
          break;
        }
        step *= 0.5;
        if (step < 1e-18) break;
      }
      if (step < 1e-18) break;
    }
    best = std::min(best, f);
  }
  return best;
}

}  // namespace

TEST(JacobiSvd, MatchesEigenOnRandomMatrices) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    std::uniform_int_distribution<std::size_t> dim(1, 20);
    const MatrixD a = random_matrix(dim(rng), dim(rng), rng);
    const SvdResult svd = jacobi_svd(a);
    const auto oracle = oracle_singular_values(a);
    ASSERT_EQ(svd.s.size(), static_cast<std::size_t>(oracle.size()));
    for (std::size_t i = 0; i < svd.s.size(); ++i) EXPECT_NEAR(svd.s[i], oracle(static_cast<Eigen::Index>(i)), 1e-10);
    EXPECT_LE(orthonormality_error(svd.u), 1e-10);
    EXPECT_LE(orthonormality_error(svd.v), 1e-10);
  }
}

TEST(TruncatedSvd, DiagonalExample) {
  const MatrixD w{{3, 0, 0}, {0, 2, 0}, {0, 0, 1}};
  const Factorization f = truncated_svd(w, 2);
  EXPECT_NEAR(std::sqrt(frobenius_distance_squared(w, f.reconstruct())), 1.0, 1e-12);
  EXPECT_NEAR(f.objective, 1.0, 1e-12);
}

TEST(TruncatedSvd, ExactRankOne) {
  const MatrixD w{{2, 4}, {1, 2}};
  EXPECT_LE(std::sqrt(frobenius_distance_squared(w, truncated_svd(w, 1).reconstruct())), 1e-5);
}

TEST(TruncatedSvd, ResidualMatchesOracleTail) {
  std::mt19937_64 rng(32);
  const MatrixD w = random_matrix(8, 5, rng);
  const Factorization f = truncated_svd(w, 3);
  const auto s = oracle_singular_values(w);
  EXPECT_LE(rel(frobenius_distance_squared(w, f.reconstruct()), s(3) * s(3) + s(4) * s(4)), 1e-6);
}

TEST(TruncatedSvd, InvariantsOnRandomShapes) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 25; ++trial) {
    std::uniform_int_distribution<std::size_t> dim(1, 16);
    const MatrixD w = random_matrix(dim(rng), dim(rng), rng);
    const std::size_t full = std::min(w.rows(), w.cols());
    const double total = frobenius_norm_squared(w);
    double previous = std::numeric_limits<double>::infinity();
    for (std::size_t r = 1; r <= full; ++r) {
      const Factorization f = truncated_svd(w, r);
      double kept = 0.0;
      for (double v : f.s) kept += v * v;
      EXPECT_LE(rel(f.objective + kept, total), 1e-4);
      EXPECT_LE(orthonormality_error(f.u), 1e-4);
      EXPECT_LE(orthonormality_error(f.v), 1e-4);
      EXPECT_TRUE(std::is_sorted(f.s.rbegin(), f.s.rend()));
      EXPECT_LE(f.objective, previous + 1e-12);
      previous = f.objective;
    }
  }
}

TEST(TruncatedSvd, RankOutOfRangeThrows) {
  const MatrixD w(3, 2, 1.0);
  EXPECT_THROW(truncated_svd(w, 0), Error);
  EXPECT_THROW(truncated_svd(w, 3), Error);
}

TEST(TruncatedSvd, ZeroMatrix) {
  const MatrixD w(4, 3);
  const Factorization f = truncated_svd(w, 2);
  EXPECT_EQ(f.objective, 0.0);
  EXPECT_LE(orthonormality_error(f.u), 1e-12);
}

TEST(Sspca, ZeroLambdaOnOrthogonalRowsMatchesSvd) {
  const MatrixD w{{2, 0, 0, 0}, {0, 0, -1.5, 0}, {0, 0.5, 0, 0}};
  for (std::size_t r = 1; r <= 3; ++r) {
    const double svd = truncated_svd(w, r).objective, sp = sspca(w, r, 0.0).objective;
    EXPECT_LE(std::abs(sp - svd), 1e-3 * std::max(svd, 1e-12)) << "r=" << r;
  }
}

TEST(Sspca, HugeLambdaZeroesV) {
  std::mt19937_64 rng(34);
  const MatrixD w = random_matrix(5, 7, rng);
  const Factorization f = sspca(w, 2, 1e6);
  for (double v : f.v.data()) EXPECT_EQ(v, 0.0);
  EXPECT_NEAR(f.objective, frobenius_norm_squared(w), 1e-9);
}

TEST(Sspca, SparsityEngagesOnDuplicateRows) {
  const MatrixD w{{1.0, 0.2, -0.3, 0.05}, {1.0, 0.2, -0.3, 0.05}, {0.1, -0.4, 0.2, 0.6}};
  const Factorization f = sspca(w, 1, 1.0);
  EXPECT_TRUE(std::any_of(f.v.data().begin(), f.v.data().end(), [](double v) { return v == 0.0; }));
  EXPECT_LE(f.objective, sspca(w, 1, 1e6).objective);
}

TEST(Sspca, MixerColumnsStayUnitNorm) {
  std::mt19937_64 rng(35);
  const MatrixD w = random_matrix(6, 9, rng);
  const Factorization f = sspca(w, 3, 0.5);
  for (std::size_t k = 0; k < 3; ++k) {
    double n = 0.0;
    for (std::size_t i = 0; i < 6; ++i) n += f.u(i, k) * f.u(i, k);
    EXPECT_NEAR(n, 1.0, 1e-9);
  }
  EXPECT_NEAR(f.objective, sspca_objective(w, f, 0.5), 1e-9);
}

TEST(Sspca, ObjectiveMonotoneAndRejectsNegativeLambda) {
  std::mt19937_64 rng(36);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixD w = random_matrix(7, 6, rng);
    for (double lambda : {0.1, 0.7, 2.0}) expect_non_increasing(sspca(w, 3, lambda).objective_history);
  }
  EXPECT_THROW(sspca(MatrixD(2, 2, 1.0), 1, -0.1), Error);
}

TEST(Sspca, AllZeroInputGivesZeroV) {
  const Factorization f = sspca(MatrixD(4, 3), 2, 1.0);
  for (double v : f.v.data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(f.objective, 0.0);
}

TEST(Sspca, RefitKeepsSupportAndNeverWorsensFit) {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixD w = random_matrix(8, 10, rng);
    Factorization f = sspca(w, 3, 1.5);
    const double before = frobenius_distance_squared(w, f.reconstruct());
    const MatrixD support = f.v;
    refit_support(w, f);
    for (std::size_t i = 0; i < support.size(); ++i) EXPECT_EQ(support.data()[i] == 0.0, f.v.data()[i] == 0.0);
    EXPECT_LE(frobenius_distance_squared(w, f.reconstruct()), before * (1 + 1e-12) + 1e-15);
  }
}

TEST(WeightedEm, UniformWeightsReduceToSvd) {
  std::mt19937_64 rng(38);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixD w = random_matrix(7, 5, rng);
    for (std::size_t r = 1; r < 5; ++r) {
      const double em = weighted_lowrank_em(w, MatrixD(7, 5, 1.0), r).objective;
      EXPECT_LE(std::abs(em - truncated_svd(w, r).objective), 1e-6);
    }
  }
}

TEST(WeightedEm, ZeroWeightRowIsFree) {
  std::mt19937_64 rng(39);
  const MatrixD u = random_matrix(5, 2, rng), v = random_matrix(4, 2, rng);
  MatrixD w = matmul(u, v.transposed());
  for (std::size_t j = 0; j < 4; ++j) w(2, j) = (j % 2 ? -1.0 : 1.0) * (j + 1);  // arbitrary row that breaks the rank
  MatrixD imp(5, 4, 1.0);
  for (std::size_t j = 0; j < 4; ++j) imp(2, j) = 0.0;
  const Factorization f = weighted_lowrank_em(w, imp, 2, {1e-15, 50000});
  EXPECT_LE(weighted_objective(w, imp, f.reconstruct()), 1e-6);
}

TEST(WeightedEm, MatchesGradientDescentOracle) {
  std::mt19937_64 rng(40);
  for (int trial = 0; trial < 3; ++trial) {
    const MatrixD w = random_matrix(6, 4, rng);
    MatrixD imp(6, 4);
    std::uniform_real_distribution<double> u(0.2, 1.0);
    for (auto& x : imp.data()) x = u(rng);
    const double em = weighted_lowrank_em(w, imp, 2, {1e-15, 50000}).objective;
    const double gd = gradient_descent_weighted(w, imp, 2, 100 + trial);
    EXPECT_LE(rel(em, gd), 1e-3) << "em=" << em << " gd=" << gd;
  }
}

TEST(WeightedEm, ObjectiveMonotone) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixD w = random_matrix(8, 6, rng);
    MatrixD imp(8, 6);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (auto& x : imp.data()) x = u(rng);
    const Factorization f = weighted_lowrank_em(w, imp, 1 + trial % 4);
    expect_non_increasing(f.objective_history);
    EXPECT_NEAR(f.objective, weighted_objective(w, imp, f.reconstruct()), 1e-9 * std::max(1.0, f.objective));
  }
}

TEST(WeightedEm, RecoversMissingEntries) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 5; ++trial) {
    const MatrixD u = random_matrix(10, 2, rng), v = random_matrix(8, 2, rng);
    const MatrixD truth = matmul(u, v.transposed());
    MatrixD observed = truth, imp(10, 8, 1.0);
    std::vector<std::pair<std::size_t, std::size_t>> hidden;
    for (std::size_t k = 0; k < 8; ++k) {
      const std::size_t i = (3 * k + trial) % 10, j = (5 * k + 2 * trial) % 8;
      imp(i, j) = 0.0;
      observed(i, j) = 0.0;
      hidden.emplace_back(i, j);
    }
    const Factorization f = weighted_lowrank_em(observed, imp, 2, {1e-15, 20000});
    const MatrixD rec = f.reconstruct();
    for (auto [i, j] : hidden) EXPECT_NEAR(rec(i, j), truth(i, j), 1e-2) << "trial " << trial;
  }
}

TEST(WeightedEm, InputErrors) {
  const MatrixD w(3, 3, 1.0);
  EXPECT_THROW(weighted_lowrank_em(w, MatrixD(3, 2, 1.0), 1), Error);
  EXPECT_THROW(weighted_lowrank_em(w, MatrixD(3, 3, 0.0), 1), Error);
  MatrixD negative(3, 3, 1.0);
  negative(1, 1) = -1.0;
  EXPECT_THROW(weighted_lowrank_em(w, negative, 1), Error);
}

TEST(Solvers, ObjectiveNonIncreasingInRank) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const MatrixD w = random_matrix(6, 4, rng);
    MatrixD imp(6, 4);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (auto& x : imp.data()) x = u(rng);
    double svd_prev = INFINITY, sp_prev = INFINITY, em_prev = INFINITY;
    for (std::size_t r = 1; r <= 4; ++r) {
      const double svd = truncated_svd(w, r).objective;
      const double sp = sspca(w, r, 0.3).objective;
      const double em = weighted_lowrank_em(w, imp, r).objective;
      EXPECT_LE(svd, svd_prev + 1e-12);
      EXPECT_LE(sp, sp_prev * (1 + 1e-6) + 1e-12) << "seed " << seed << " r " << r;
      EXPECT_LE(em, em_prev * (1 + 1e-6) + 1e-12) << "seed " << seed << " r " << r;
      svd_prev = svd;
      sp_prev = sp;
      em_prev = em;
    }
  }
}
