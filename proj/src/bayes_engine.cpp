#include "cidcast/bayes_engine.hpp"

#include <boost/math/constants/constants.hpp>
#include <cmath>
#include <stdexcept>

namespace cidcast {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))

double normal_cdf(double z) { return 0.5 * std::erfc(-z * boost::math::constants::one_div_root_two<double>()); }

}  // namespace

Prior empirical_prior(const MatrixXd& X, const VectorXd& y, const EmpiricalPriorOptions& options,
                      std::vector<std::string>* warnings) {
  const Index n = X.rows();
  const Index m = X.cols();
  if (n == 0) throw std::invalid_argument("empirical prior needs observations");
  Prior prior;
  prior.beta = options.beta;
  prior.alpha = options.beta + 1.0;
  if (m == 0) return prior;

  MatrixXd G = X.transpose() * X;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(G, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 1e-12 * std::max(hi, 1.0))) {
    G.diagonal().array() += options.jitter;
    if (warnings) warnings->push_back("rank-deficient X^T X: added diagonal jitter to the OLS system");
  }
  Eigen::LDLT<MatrixXd> ldlt(G);
  const MatrixXd C = ldlt.solve(MatrixXd::Identity(m, m));
  prior.mu_w = C * (X.transpose() * y);
  const double S = (y - X * prior.mu_w).dot(y);
  const VectorXd spread = (S / static_cast<double>(n)) * C.diagonal().array().max(0.0).matrix();
  prior.sigma_w = options.spread_is_variance ? VectorXd(spread.array().sqrt()) : spread;
  prior.sigma_w = prior.sigma_w.array().max(options.sigma_floor);
  return prior;
}

ModelSpec make_model(const MatrixXd& X, const VectorXd& y, Prior prior) {
  if (X.rows() != y.size()) throw std::invalid_argument("X and y lengths differ");
  if (prior.mu_w.size() != X.cols() || prior.sigma_w.size() != X.cols()) {
    throw std::invalid_argument("prior dimension does not match X");
  }
  ModelSpec model;
  model.gram = X.transpose() * X;
  model.xty = X.transpose() * y;
  model.yty = y.squaredNorm();
  model.n = static_cast<double>(X.rows());
  model.prior = std::move(prior);
  return model;
}

double log_posterior(const ModelSpec& model, const VectorXd& w, double sigma, VectorXd* grad_w, double* grad_sigma) {
  if (!(sigma > 0.0)) throw std::domain_error("log_posterior: sigma must be positive");
  const auto& p = model.prior;
  const VectorXd gw = model.gram * w;
  const double rss = model.yty - 2.0 * w.dot(model.xty) + w.dot(gw);
  const double s2 = sigma * sigma;
  double lp = -model.n * (kLogSqrt2Pi + std::log(sigma)) - 0.5 * rss / s2;

  const VectorXd z = (w - p.mu_w).cwiseQuotient(p.sigma_w);
  lp += -static_cast<double>(w.size()) * kLogSqrt2Pi - p.sigma_w.array().log().sum() - 0.5 * z.squaredNorm();
  lp += p.alpha * std::log(p.beta) - std::lgamma(p.alpha) + (p.alpha - 1.0) * std::log(sigma) - p.beta * sigma;

  if (grad_w) *grad_w = (model.xty - gw) / s2 - z.cwiseQuotient(p.sigma_w);
  if (grad_sigma) *grad_sigma = -model.n / sigma + rss / (s2 * sigma) + (p.alpha - 1.0) / sigma - p.beta;
  return lp;
}

double log_target(const ModelSpec& model, const VectorXd& theta, VectorXd& grad) {
  const Index m = model.dim();
  const auto& p = model.prior;
  if (model.fixed_sigma) {
    const double s2 = *model.fixed_sigma * *model.fixed_sigma;
    const VectorXd gw = model.gram * theta;
    const double rss = model.yty - 2.0 * theta.dot(model.xty) + theta.dot(gw);
    const VectorXd z = (theta - p.mu_w).cwiseQuotient(p.sigma_w);
    grad = (model.xty - gw) / s2 - z.cwiseQuotient(p.sigma_w);
    return -0.5 * rss / s2 - 0.5 * z.squaredNorm();
  }
  const double log_sigma = theta(m);
  const double sigma = std::exp(log_sigma);
  if (!(sigma > 0.0) || !std::isfinite(sigma)) return -INFINITY;
  VectorXd gw;
  double gs = 0.0;
  const double lp = log_posterior(model, theta.head(m), sigma, &gw, &gs);
  grad.resize(m + 1);
  grad.head(m) = gw;
  grad(m) = gs * sigma + 1.0;
  return lp + log_sigma;
}

PosteriorSamples sample_posterior(const ModelSpec& model, const SamplerOptions& options, std::uint64_t seed,
                                  const VectorXd* w_start, std::optional<double> sigma_start) {
  const Index m = model.dim();
  const bool fixed = model.fixed_sigma.has_value();
  VectorXd theta0(fixed ? m : m + 1);
  theta0.head(m) = w_start ? *w_start : model.prior.mu_w;
  if (!fixed) {
    double s = 1.0;
    if (sigma_start) {
      s = *sigma_start;
    } else if (model.n > 0.0) {
      const VectorXd w = theta0.head(m);
      const double rss = model.yty - 2.0 * w.dot(model.xty) + w.dot(model.gram * w);
      s = std::sqrt(std::max(rss, 0.0) / model.n);
    }
    theta0(m) = std::log(std::max(s, 1e-3));
  }

  NutsOptions nuts;
  nuts.num_samples = options.samples;
  nuts.burn_in = options.burn_in;
  nuts.init_step = options.init_step;
  nuts.target_accept = options.target_accept;
  nuts.max_depth = options.max_depth;
  nuts.delta_max = options.delta_max;
  nuts.seed = seed;
  auto run = nuts_sample([&](const VectorXd& t, VectorXd& g) { return log_target(model, t, g); }, theta0, nuts);

  PosteriorSamples out;
  out.w = run.draws.leftCols(m);
  out.sigma = fixed ? VectorXd::Constant(options.samples, *model.fixed_sigma)
                    : VectorXd(run.draws.col(m).array().exp());
  out.diagnostics = std::move(run.diagnostics);
  return out;
}

double PredictiveMixture::variance() const {
  const double mu = mean();
  return (stds.array().square() + means.array().square()).mean() - mu * mu;
}

double PredictiveMixture::pdf(double x) const {
  const auto z = (x - means.array()) / stds.array();
  return ((-0.5 * z.square()).exp() / stds.array()).mean() * boost::math::constants::one_div_root_two_pi<double>();
}

double PredictiveMixture::cdf(double x) const {
  double sum = 0.0;
  for (Index i = 0; i < means.size(); ++i) sum += normal_cdf((x - means(i)) / stds(i));
  return sum / static_cast<double>(means.size());
}

PredictiveMixture PredictiveMixture::destandardised(double y_mean, double y_std) const {
  PredictiveMixture out;
  out.means = (means.array() * y_std + y_mean).matrix();
  out.stds = stds * y_std;
  return out;
}

PredictiveMixture estimate_ppd(const PosteriorSamples& samples, const VectorXd& x_new) {
  if (samples.sigma.size() == 0) throw std::invalid_argument("estimate_ppd: no samples");
  if (samples.w.cols() != x_new.size()) throw std::invalid_argument("estimate_ppd: dimension mismatch");
  PredictiveMixture out;
  out.means = samples.w * x_new;
  out.stds = samples.sigma;
  return out;
}

VectorXd split_rhat(const std::vector<MatrixXd>& chains) {
  if (chains.empty()) throw std::invalid_argument("split_rhat: no chains");
  const Index len = chains.front().rows() / 2;
  const Index dim = chains.front().cols();
  if (len < 2) throw std::invalid_argument("split_rhat: chains too short");
  std::vector<MatrixXd> halves;
  for (const auto& c : chains) {
    if (c.cols() != dim || c.rows() / 2 != len) throw std::invalid_argument("split_rhat: chains differ in shape");
    halves.push_back(c.topRows(len));
    halves.push_back(c.middleRows(c.rows() - len, len));
  }
  const double k = static_cast<double>(halves.size());
  const double nl = static_cast<double>(len);
  VectorXd out(dim);
  for (Index d = 0; d < dim; ++d) {
    VectorXd means(halves.size());
    double within = 0.0;
    for (std::size_t i = 0; i < halves.size(); ++i) {
      const auto col = halves[i].col(d);
      means(static_cast<Index>(i)) = col.mean();
      within += (col.array() - col.mean()).square().sum() / (nl - 1.0);
    }
    within /= k;
    const double between = nl * (means.array() - means.mean()).square().sum() / (k - 1.0);
    const double var_plus = (nl - 1.0) / nl * within + between / nl;
    out(d) = within > 0.0 ? std::sqrt(var_plus / within) : 1.0;
  }
  return out;
}

}  // namespace cidcast
