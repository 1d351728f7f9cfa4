#include "cidcast/selection.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace cidcast;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd standardised(MatrixXd X) {
  for (Index j = 0; j < X.cols(); ++j) {
    const double mean = X.col(j).mean();
    X.col(j).array() -= mean;
    X.col(j) /= std::sqrt(X.col(j).squaredNorm() / static_cast<double>(X.rows()));
  }
  return X;
}

MatrixXd random_matrix(std::mt19937_64& rng, Index n, Index m) {
  std::normal_distribution<double> z;
  MatrixXd X(n, m);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j) X(i, j) = z(rng);
  return X;
}

// Greedy trace recomputed with plain loops and normal equations solved by
// Gauss-Jordan elimination.
std::vector<Index> naive_greedy(const MatrixXd& X, const VectorXd& y, int steps) {
  const Index n = X.rows(), m = X.cols();
  std::vector<Index> chosen;
  std::vector<double> r(y.data(), y.data() + n);
  for (int s = 0; s < steps; ++s) {
    Index best = -1;
    double best_v = -1;
    for (Index j = 0; j < m; ++j) {
      if (std::find(chosen.begin(), chosen.end(), j) != chosen.end()) continue;
      double dot = 0;
      for (Index i = 0; i < n; ++i) dot += X(i, j) * r[i];
      if (std::abs(dot) > best_v) {
        best_v = std::abs(dot);
        best = j;
      }
    }
    chosen.push_back(best);
    const std::size_t k = chosen.size();
    std::vector<std::vector<double>> a(k, std::vector<double>(k + 1, 0.0));
    for (std::size_t p = 0; p < k; ++p) {
      for (std::size_t q = 0; q < k; ++q)
        for (Index i = 0; i < n; ++i) a[p][q] += X(i, chosen[p]) * X(i, chosen[q]);
      for (Index i = 0; i < n; ++i) a[p][k] += X(i, chosen[p]) * y(i);
    }
    for (std::size_t p = 0; p < k; ++p) {
      std::size_t piv = p;
      for (std::size_t q = p + 1; q < k; ++q)
        if (std::abs(a[q][p]) > std::abs(a[piv][p])) piv = q;
      std::swap(a[p], a[piv]);
      for (std::size_t q = 0; q < k; ++q) {
        if (q == p) continue;
        const double f = a[q][p] / a[p][p];
        for (std::size_t c = p; c <= k; ++c) a[q][c] -= f * a[p][c];
      }
    }
    for (Index i = 0; i < n; ++i) {
      double fit = 0;
      for (std::size_t p = 0; p < k; ++p) fit += X(i, chosen[p]) * a[p][k] / a[p][p];
      r[static_cast<std::size_t>(i)] = y(i) - fit;
    }
  }
  return chosen;
}

}  // namespace

TEST(Omp, MatchesNaiveGreedy) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    MatrixXd X = standardised(random_matrix(rng, 40, 12));
    VectorXd y = X * random_matrix(rng, 12, 1) + 0.5 * random_matrix(rng, 40, 1);
    OmpOptions opt;
    opt.n_feat = 6;
    opt.tol = 0;
    auto r = omp_select(X, y, opt);
    ASSERT_EQ(r.selected.size(), 6u);
    EXPECT_EQ(r.selected, naive_greedy(X, y, 6));
  }
}

TEST(Omp, OrthonormalColumnsRankByCorrelation) {
  std::mt19937_64 rng(9);
  MatrixXd Q = random_matrix(rng, 30, 8).householderQr().householderQ() * MatrixXd::Identity(30, 8);
  VectorXd y = random_matrix(rng, 30, 1);
  OmpOptions opt;
  opt.n_feat = 4;
  opt.tol = 0;
  auto r = omp_select(Q, y, opt);
  VectorXd corr = (Q.transpose() * y).cwiseAbs();
  std::vector<Index> order(8);
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return corr(a) > corr(b); });
  order.resize(4);
  EXPECT_EQ(r.selected, order);
}

TEST(Omp, ExactSparseSignal) {
  std::mt19937_64 rng(1);
  MatrixXd X = standardised(random_matrix(rng, 60, 10));
  VectorXd y = 2 * X.col(3) - X.col(7);
  auto r = omp_select(X, y);
  ASSERT_EQ(r.selected.size(), 2u);
  EXPECT_EQ(r.selected[0], 3);
  EXPECT_EQ(r.selected[1], 7);
  EXPECT_LT(r.rss_trace.back(), 1e-20);
  EXPECT_NEAR(r.coef(3), 2.0, 1e-10);
  EXPECT_NEAR(r.coef(7), -1.0, 1e-10);
}

TEST(Omp, EdgeCases) {
  MatrixXd X = MatrixXd::Identity(4, 3);
  EXPECT_TRUE(omp_select(X, VectorXd::Zero(4)).selected.empty());
  EXPECT_THROW(omp_select(MatrixXd(0, 3), VectorXd(0)), std::invalid_argument);
  OmpOptions bad;
  bad.n_feat = 0;
  EXPECT_THROW(omp_select(X, VectorXd::Ones(4), bad), std::invalid_argument);
}

TEST(Omp, SkipsCollinearCandidate) {
  std::mt19937_64 rng(3);
  MatrixXd X = standardised(random_matrix(rng, 50, 4));
  X.col(1) = X.col(0);
  VectorXd y = X.col(0) + 0.3 * X.col(2) + 0.1 * random_matrix(rng, 50, 1);
  OmpOptions opt;
  opt.tol = 0;
  auto r = omp_select(X, y, opt);
  EXPECT_EQ(std::count(r.selected.begin(), r.selected.end(), 1), 0);
  EXPECT_EQ(r.skipped, std::vector<Index>{1});
}

TEST(OmpProperty, RssMonotoneResidualOrthogonalOlsLimit) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    MatrixXd X = standardised(random_matrix(rng, 35, 9));
    VectorXd y = random_matrix(rng, 35, 1);
    OmpOptions opt;
    opt.n_feat = 9;
    opt.tol = 0;
    auto r = omp_select(X, y, opt);
    for (std::size_t k = 1; k < r.rss_trace.size(); ++k) EXPECT_LE(r.rss_trace[k], r.rss_trace[k - 1]);
    VectorXd resid = y - X * r.coef;
    for (Index j : r.selected) EXPECT_LT(std::abs(X.col(j).dot(resid)), 1e-8);
    const double ols = (y - X * X.colPivHouseholderQr().solve(y)).squaredNorm();
    EXPECT_NEAR(r.rss_trace.back(), ols, 1e-9 * (1 + ols));
  }
}

TEST(Lasso, ZeroAboveLambdaMax) {
  std::mt19937_64 rng(4);
  MatrixXd X = standardised(random_matrix(rng, 30, 6));
  VectorXd y = random_matrix(rng, 30, 1);
  const double lmax = lasso_lambda_max(X, y);
  auto path = lasso_path(X, y, {lmax, 2 * lmax});
  EXPECT_TRUE((path[0].coef.array() == 0.0).all());
  EXPECT_TRUE((path[1].coef.array() == 0.0).all());
}

TEST(Lasso, SingleColumnSoftThreshold) {
  std::mt19937_64 rng(8);
  MatrixXd X = standardised(random_matrix(rng, 25, 1));
  VectorXd y = 3 * X.col(0);
  // With unit-variance x the solution is soft(3, lambda).
  for (double lambda : {0.0, 0.5, 1.0, 2.9, 3.5}) {
    auto fit = lasso_path(X, y, {lambda}).back();
    EXPECT_NEAR(fit.coef(0), std::max(0.0, 3.0 - lambda), 1e-10);
  }
}

TEST(Lasso, DuplicateColumnsOneActive) {
  std::mt19937_64 rng(12);
  MatrixXd X = standardised(random_matrix(rng, 40, 5));
  X.col(3) = X.col(1);
  VectorXd y = X.col(1) + 0.5 * X.col(2) + 0.1 * random_matrix(rng, 40, 1);
  auto grid = lasso_lambda_grid(lasso_lambda_max(X, y), 50, 1e-3);
  for (const auto& fit : lasso_path(X, y, grid)) EXPECT_EQ(fit.coef(3), 0.0);
}

TEST(Lasso, KktOnRandomInstances) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    MatrixXd X = standardised(random_matrix(rng, 50, 15));
    VectorXd y = X.leftCols(4) * random_matrix(rng, 4, 1) + random_matrix(rng, 50, 1);
    y.array() -= y.mean();
    auto r = lasso_select(X, y);
    const VectorXd g = X.transpose() * (y - X * r.coef) / 50.0;
    for (Index j = 0; j < 15; ++j) {
      if (r.coef(j) == 0.0) {
        EXPECT_LE(std::abs(g(j)), r.lambda + 1e-6);
      } else {
        EXPECT_NEAR(g(j), r.lambda * (r.coef(j) > 0 ? 1 : -1), 1e-6);
      }
    }
    EXPECT_EQ(r.lambdas.size(), 100u);
    EXPECT_NEAR(r.lambdas.back(), 1e-3 * r.lambdas.front(), 1e-12);
  }
}

TEST(Lasso, Errors) {
  EXPECT_THROW(lasso_select(MatrixXd::Ones(3, 2), VectorXd::Ones(3)), std::invalid_argument);
}

TEST(Lasso, ShuffledFoldsDeterministic) {
  std::mt19937_64 rng(2);
  MatrixXd X = standardised(random_matrix(rng, 40, 8));
  VectorXd y = X.col(0) + random_matrix(rng, 40, 1);
  LassoOptions opt;
  opt.shuffle = true;
  opt.seed = 99;
  auto a = lasso_select(X, y, opt);
  auto b = lasso_select(X, y, opt);
  EXPECT_EQ(a.cv_error, b.cv_error);
}
