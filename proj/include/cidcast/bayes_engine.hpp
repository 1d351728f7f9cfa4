#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cidcast/nuts.hpp"

namespace cidcast {

/// Independent normal prior on the weights and Gamma(alpha, beta) (rate
/// parametrisation) on the noise standard deviation.
struct Prior {
  Eigen::VectorXd mu_w;
  Eigen::VectorXd sigma_w;  // standard deviations
  double alpha = 1.5;
  double beta = 0.5;
};

struct EmpiricalPriorOptions {
  double beta = 0.5;
  // The OLS-based spread (1/n) S C_jj is a variance; take its square root.
  // When false the value is used as a standard deviation directly.
  bool spread_is_variance = true;
  double sigma_floor = 1e-6;
  double jitter = 1e-8;
};

/// Prior centred on the OLS estimate with spreads from the OLS covariance.
/// A rank-deficient X^T X gets a jitter on its diagonal and a warning.
Prior empirical_prior(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const EmpiricalPriorOptions& options = {},
                      std::vector<std::string>* warnings = nullptr);

/// Linear-Gaussian model in sufficient-statistic form.
struct ModelSpec {
  Eigen::MatrixXd gram;    // X^T X
  Eigen::VectorXd xty;     // X^T y
  double yty = 0.0;
  double n = 0.0;
  Prior prior;
  std::optional<double> fixed_sigma;  // test mode: sigma is a point mass

  Eigen::Index dim() const { return gram.rows(); }
};

ModelSpec make_model(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Prior prior);

/// log N(y | Xw, sigma^2) + log N(w | mu_w, sigma_w^2) + log Gamma(sigma | alpha, beta),
/// with normalising constants of each factor and without the evidence.
/// Gradients are optional outputs.
double log_posterior(const ModelSpec& model, const Eigen::VectorXd& w, double sigma, Eigen::VectorXd* grad_w = nullptr,
                     double* grad_sigma = nullptr);

/// Sampler target over theta = (w, log sigma) including the log-Jacobian;
/// over theta = w alone when sigma is fixed.
double log_target(const ModelSpec& model, const Eigen::VectorXd& theta, Eigen::VectorXd& grad);

struct SamplerOptions {
  int samples = 4000;
  int burn_in = 500;
  double init_step = 1e-3;
  double target_accept = 0.8;
  int max_depth = 10;
  double delta_max = 1000.0;
};

struct PosteriorSamples {
  Eigen::MatrixXd w;      // N x m
  Eigen::VectorXd sigma;  // N
  NutsDiagnostics diagnostics;
};

/// NUTS draws started at the prior mean and the OLS residual scale.
PosteriorSamples sample_posterior(const ModelSpec& model, const SamplerOptions& options, std::uint64_t seed,
                                  const Eigen::VectorXd* w_start = nullptr, std::optional<double> sigma_start = {});

/// Equal-weight Gaussian mixture estimate of the posterior predictive density.
struct PredictiveMixture {
  Eigen::VectorXd means;
  Eigen::VectorXd stds;

  std::size_t size() const { return static_cast<std::size_t>(means.size()); }
  double mean() const { return means.mean(); }
  double variance() const;
  double pdf(double x) const;
  double cdf(double x) const;
  /// Maps a mixture for standardised targets back to original units.
  PredictiveMixture destandardised(double y_mean, double y_std) const;
};

PredictiveMixture estimate_ppd(const PosteriorSamples& samples, const Eigen::VectorXd& x_new);

}  // namespace cidcast
