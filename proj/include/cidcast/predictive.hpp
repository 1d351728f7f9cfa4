#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "cidcast/bayes_engine.hpp"

namespace cidcast {

/// Mixture density tabulated on an even grid spanning
/// [min(mu_i - 8 sigma_i), max(mu_i + 8 sigma_i)].
struct DensityGrid {
  const PredictiveMixture* mixture = nullptr;
  Eigen::VectorXd x;
  Eigen::VectorXd density;
  Eigen::VectorXd cdf;  // trapezoidal integral of the tabulated density
  double dx = 0.0;

  double lo() const { return x(0); }
  double hi() const { return x(x.size() - 1); }
};

/// The mixture must outlive the grid.
DensityGrid make_density_grid(const PredictiveMixture& mixture, int points = 4096);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  double mass = 0.0;  // exact mixture probability

  double width() const { return upper - lower; }
};

/// Region where the density is at least p_cut, as disjoint intervals
/// (ascending) with their total exact probability alpha.
struct HdiSet {
  double p_cut = 0.0;
  double alpha = 0.0;
  std::vector<Interval> intervals;

  bool contains(double y) const;
};

HdiSet hdi_at_cut(const DensityGrid& grid, double p_cut);

/// Density levels whose grid mass reaches alpha = 1/count, 2/count, ..., 1
/// (descending in p_cut; the last level is 0).
std::vector<double> cut_schedule(const DensityGrid& grid, int count = 100);

/// Cut level whose grid mass reaches `alpha`.
double cut_for_alpha(const DensityGrid& grid, double alpha);

/// HDI whose exact probability equals `alpha`, by bisection on the cut.
HdiSet hdi_for_alpha(const DensityGrid& grid, double alpha, double tol = 1e-10);

struct PredictionInterval {
  double lower = 0.0;
  double upper = 0.0;
  double alpha = 0.0;
  double p_cut = 0.0;
  bool fallback = false;  // no fusion of sub-intervals occurred
  int fusion_events = 0;
};

struct PiOptions {
  int levels = 100;
  double fallback_alpha = 0.9;
  double tie_tol = 1e-9;
};

/// Walks the cut schedule from high to low density. Whenever the interval
/// count drops, every interval of the level just before is a candidate; the
/// candidate with the largest mass-to-width ratio wins (leftmost on ties).
/// Without any fusion the HDI at `fallback_alpha` is returned.
PredictionInterval select_pi(const DensityGrid& grid, const PiOptions& options = {});

/// Median within the interval: F(y) - F(lower) = alpha / 2.
double point_estimate(const PredictiveMixture& mixture, const PredictionInterval& interval);

struct SignProbabilities {
  double minus = 0.0;
  double plus = 0.0;
};

/// P(Y < threshold) and its complement from the exact mixture CDF.
SignProbabilities sign_probabilities(const PredictiveMixture& mixture, double threshold);

/// +1 if p_plus > p0, -1 if 1 - p_plus > p0, otherwise the sign of the live
/// spread (zero counts as +1). Throws if the fallback is needed but the live
/// index is undefined.
int sign_spread(double p_plus, double p0, std::optional<double> live_idfull, double p_da);
int sign_rest(double p_plus);

std::vector<double> default_alpha_grid();  // 0.05, 0.10, ..., 0.95

struct ForecastSummary {
  double y_hat = 0.0;
  PredictionInterval interval;
  std::vector<double> alpha_grid;
  std::vector<HdiSet> hdi_family;  // one per alpha_grid entry
  std::optional<SignProbabilities> spread;
  std::optional<SignProbabilities> rest;
};

struct SummaryOptions {
  int grid_points = 4096;
  PiOptions pi;
  std::vector<double> alpha_grid = default_alpha_grid();
};

ForecastSummary summarise(const PredictiveMixture& mixture, std::optional<double> p_da,
                          std::optional<double> live_idfull, const SummaryOptions& options = {});

}  // namespace cidcast
