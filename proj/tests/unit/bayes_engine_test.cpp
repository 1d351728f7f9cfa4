#include "cidcast/bayes_engine.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace cidcast;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_matrix(std::mt19937_64& rng, Index n, Index m) {
  std::normal_distribution<double> z;
  MatrixXd X(n, m);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j) X(i, j) = z(rng);
  return X;
}

// Batch-means Monte-Carlo standard error of the mean of a series.
double batch_se(const VectorXd& x, int batches = 50) {
  const Index len = x.size() / batches;
  VectorXd means(batches);
  for (int b = 0; b < batches; ++b) means(b) = x.segment(b * len, len).mean();
  const double mu = means.mean();
  return std::sqrt((means.array() - mu).square().sum() / (batches - 1) / batches);
}

}  // namespace

TEST(EmpiricalPrior, IdentityDesign) {
  VectorXd y(3);
  y << 1.5, -2.0, 0.25;
  auto p = empirical_prior(MatrixXd::Identity(3, 3), y);
  EXPECT_TRUE(p.mu_w.isApprox(y, 1e-12));
  EXPECT_DOUBLE_EQ(p.alpha, 1.5);
  EXPECT_DOUBLE_EQ(p.beta, 0.5);
  // Zero residual: spreads hit the floor.
  EXPECT_TRUE((p.sigma_w.array() == 1e-6).all());
}

TEST(EmpiricalPrior, SimpleRegression) {
  std::mt19937_64 rng(3);
  MatrixXd X = random_matrix(rng, 200, 1);
  VectorXd y = 2 * X.col(0) + 0.5 * random_matrix(rng, 200, 1);
  auto p = empirical_prior(X, y);
  const double sxx = X.col(0).squaredNorm();
  const double slope = X.col(0).dot(y) / sxx;
  const double rss = (y - slope * X.col(0)).squaredNorm();
  EXPECT_NEAR(p.mu_w(0), slope, 1e-12);
  EXPECT_NEAR(p.sigma_w(0), std::sqrt(rss / 200 / sxx), 1e-12);
  EXPECT_NEAR(p.mu_w(0), 2.0, 3 * p.sigma_w(0));

  EmpiricalPriorOptions as_std;
  as_std.spread_is_variance = false;
  EXPECT_NEAR(empirical_prior(X, y, as_std).sigma_w(0), rss / 200 / sxx, 1e-12);
}

TEST(EmpiricalPrior, RankDeficientWarns) {
  std::mt19937_64 rng(3);
  MatrixXd X = random_matrix(rng, 20, 3);
  X.col(2) = X.col(1);
  std::vector<std::string> warnings;
  auto p = empirical_prior(X, random_matrix(rng, 20, 1), {}, &warnings);
  EXPECT_EQ(warnings.size(), 1u);
  EXPECT_TRUE(p.mu_w.allFinite());
}

TEST(LogPosterior, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(10);
  MatrixXd X = random_matrix(rng, 30, 4);
  VectorXd y = random_matrix(rng, 30, 1);
  auto model = make_model(X, y, empirical_prior(X, y));
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 10; ++k) {
    VectorXd theta(5);
    for (Index i = 0; i < 5; ++i) theta(i) = u(rng);
    VectorXd grad;
    log_target(model, theta, grad);
    for (Index i = 0; i < 5; ++i) {
      const double h = 1e-6;
      VectorXd a = theta, b = theta, g;
      a(i) += h;
      b(i) -= h;
      const double fd = (log_target(model, a, g) - log_target(model, b, g)) / (2 * h);
      EXPECT_LT(std::abs(fd - grad(i)), 1e-5 * std::max(1.0, std::abs(grad(i))));
    }
  }
}

TEST(LogPosterior, ZeroDataIsPrior) {
  Prior p;
  p.mu_w = VectorXd::Constant(2, 0.5);
  p.sigma_w = VectorXd::Constant(2, 2.0);
  auto model = make_model(MatrixXd(0, 2), VectorXd(0), p);
  VectorXd w(2);
  w << 1.0, -1.0;
  const double sigma = 1.7;
  const double z1 = 0.25, z2 = 0.75;
  const double expected = -2 * std::log(std::sqrt(2 * M_PI)) - 2 * std::log(2.0) - 0.5 * (z1 * z1 + z2 * z2) +
                          1.5 * std::log(0.5) - std::lgamma(1.5) + 0.5 * std::log(sigma) - 0.5 * sigma;
  EXPECT_NEAR(log_posterior(model, w, sigma), expected, 1e-12);
  EXPECT_THROW(log_posterior(model, w, 0.0), std::domain_error);
}

TEST(LogPosterior, SignFlipSymmetry) {
  std::mt19937_64 rng(4);
  MatrixXd X = random_matrix(rng, 15, 3);
  VectorXd y = random_matrix(rng, 15, 1);
  auto prior = empirical_prior(X, y);
  auto flipped = prior;
  flipped.mu_w = -prior.mu_w;
  auto a = make_model(X, y, prior);
  auto b = make_model(X, -y, flipped);
  VectorXd w = random_matrix(rng, 3, 1);
  EXPECT_NEAR(log_posterior(a, w, 0.8), log_posterior(b, -w, 0.8), 1e-10);
}

TEST(Nuts, StandardNormal) {
  NutsOptions opt;
  opt.num_samples = 10000;
  opt.seed = 1;
  auto run = nuts_sample(
      [](const VectorXd& t, VectorXd& g) {
        g = -t;
        return -0.5 * t.squaredNorm();
      },
      VectorXd::Zero(2), opt);
  for (Index d = 0; d < 2; ++d) {
    const auto col = run.draws.col(d).array();
    const double var = (col - col.mean()).square().mean();
    EXPECT_NEAR(var, 1.0, 0.05);
  }
  EXPECT_GT(run.diagnostics.mean_accept, 0.6);
  EXPECT_EQ(run.diagnostics.energy.size(), 10000u);
}

TEST(Nuts, ConstantOffsetLeavesDrawsUnchanged) {
  NutsOptions opt;
  opt.num_samples = 500;
  opt.burn_in = 200;
  opt.seed = 9;
  auto target = [](double offset) {
    return [offset](const VectorXd& t, VectorXd& g) {
      g = -t.cwiseProduct(VectorXd::LinSpaced(t.size(), 1.0, 3.0));
      return offset + 0.5 * t.dot(g);
    };
  };
  VectorXd x0(3);
  x0 << 0.3, -0.2, 0.1;
  const auto a = nuts_sample(target(0.0), x0, opt);
  const auto b = nuts_sample(target(0.75), x0, opt);
  EXPECT_TRUE(a.draws.isApprox(b.draws, 1e-9));
}

TEST(Nuts, NonFiniteGradientThrows) {
  NutsOptions opt;
  opt.num_samples = 10;
  EXPECT_THROW(nuts_sample(
                   [](const VectorXd& t, VectorXd& g) {
                     g = VectorXd::Constant(t.size(), NAN);
                     return 0.0;
                   },
                   VectorXd::Zero(1), opt),
               std::runtime_error);
}

TEST(Sampler, ConjugateFixedSigma) {
  std::mt19937_64 rng(17);
  MatrixXd X = random_matrix(rng, 40, 3);
  VectorXd y = X * VectorXd::LinSpaced(3, -1, 1) + 0.7 * random_matrix(rng, 40, 1);
  Prior p;
  p.mu_w = VectorXd::Constant(3, 0.2);
  p.sigma_w = VectorXd::Constant(3, 0.5);
  auto model = make_model(X, y, p);
  model.fixed_sigma = 0.7;

  const MatrixXd precision = model.gram / 0.49 + MatrixXd(p.sigma_w.array().square().inverse().matrix().asDiagonal());
  const MatrixXd cov = precision.inverse();
  const VectorXd mean = cov * (model.xty / 0.49 + p.mu_w.cwiseQuotient(p.sigma_w.cwiseProduct(p.sigma_w)));

  SamplerOptions opt;
  opt.samples = 10000;
  auto s = sample_posterior(model, opt, 5);
  for (Index i = 0; i < 3; ++i) {
    const VectorXd col = s.w.col(i);
    EXPECT_LT(std::abs(col.mean() - mean(i)), 3 * batch_se(col)) << i;
    for (Index j = 0; j <= i; ++j) {
      const VectorXd prod = (s.w.col(i).array() - mean(i)) * (s.w.col(j).array() - mean(j));
      EXPECT_LT(std::abs(prod.mean() - cov(i, j)), 3 * batch_se(prod)) << i << "," << j;
    }
  }
}

TEST(Sampler, SeededDeterminismAndPositiveSigma) {
  std::mt19937_64 rng(2);
  MatrixXd X = random_matrix(rng, 50, 2);
  VectorXd y = X.col(0) + random_matrix(rng, 50, 1);
  auto model = make_model(X, y, empirical_prior(X, y));
  SamplerOptions opt;
  opt.samples = 500;
  auto a = sample_posterior(model, opt, 42);
  auto b = sample_posterior(model, opt, 42);
  EXPECT_TRUE(a.w == b.w);
  EXPECT_TRUE(a.sigma == b.sigma);
  EXPECT_TRUE((a.sigma.array() > 0).all());
  EXPECT_TRUE(a.w.allFinite());
}

TEST(Sampler, PosteriorContracts) {
  std::mt19937_64 rng(8);
  std::vector<double> spread;
  for (int n : {50, 200, 800}) {
    MatrixXd X = random_matrix(rng, n, 2);
    VectorXd y = X * VectorXd::Constant(2, 0.5) + random_matrix(rng, n, 1);
    auto model = make_model(X, y, empirical_prior(X, y));
    SamplerOptions opt;
    opt.samples = 2000;
    auto s = sample_posterior(model, opt, 3);
    const auto col = s.w.col(0).array();
    spread.push_back(std::sqrt((col - col.mean()).square().mean()));
  }
  EXPECT_GT(spread[0], spread[1]);
  EXPECT_GT(spread[1], spread[2]);
}

TEST(Ppd, SingleDrawAndMoments) {
  PosteriorSamples s;
  s.w = MatrixXd(1, 2);
  s.w << 1.0, 2.0;
  s.sigma = VectorXd::Constant(1, 0.5);
  VectorXd x(2);
  x << 3.0, -1.0;
  auto ppd = estimate_ppd(s, x);
  EXPECT_DOUBLE_EQ(ppd.means(0), 1.0);
  EXPECT_DOUBLE_EQ(ppd.stds(0), 0.5);
  EXPECT_NEAR(ppd.cdf(1.0), 0.5, 1e-15);

  std::mt19937_64 rng(6);
  s.w = random_matrix(rng, 100, 2);
  s.sigma = random_matrix(rng, 100, 1).cwiseAbs().array() + 0.1;
  ppd = estimate_ppd(s, x);
  EXPECT_NEAR(ppd.mean(), (s.w * x).mean(), 1e-12);
  EXPECT_GE(ppd.variance() + 1e-12, s.sigma.array().square().mean());
  auto back = ppd.destandardised(10.0, 2.0);
  EXPECT_NEAR(back.mean(), 10 + 2 * ppd.mean(), 1e-12);
}

TEST(SplitRhat, ConvergedChainsNearOne) {
  std::mt19937_64 rng(1);
  std::vector<MatrixXd> chains{random_matrix(rng, 1000, 2), random_matrix(rng, 1000, 2)};
  auto r = split_rhat(chains);
  EXPECT_LT((r.array() - 1).abs().maxCoeff(), 0.02);
  chains[1].array() += 3.0;
  EXPECT_GT(split_rhat(chains)(0), 1.5);
}
