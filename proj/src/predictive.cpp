#include "cidcast/predictive.hpp"

#include <algorithm>
#include <boost/math/constants/constants.hpp>
#include <cmath>
#include <stdexcept>

namespace cidcast {

using Eigen::Index;
using Eigen::VectorXd;

namespace {

// Runs of grid points with density >= cut; ends refined by linear
// interpolation of the density. Masses are left at zero.
std::vector<Interval> runs(const DensityGrid& g, double cut) {
  std::vector<Interval> out;
  const Index K = g.x.size();
  const auto& d = g.density;
  Index i = 0;
  while (i < K) {
    if (d(i) < cut) {
      ++i;
      continue;
    }
    Interval iv;
    iv.lower = i == 0 ? g.x(0) : std::min(g.x(i), g.x(i - 1) + (cut - d(i - 1)) / (d(i) - d(i - 1)) * g.dx);
    Index j = i;
    while (j + 1 < K && d(j + 1) >= cut) ++j;
    iv.upper = j == K - 1 ? g.x(K - 1) : std::max(g.x(j), g.x(j) + (d(j) - cut) / (d(j) - d(j + 1)) * g.dx);
    out.push_back(iv);
    i = j + 1;
  }
  return out;
}

HdiSet with_masses(const DensityGrid& g, double cut, std::vector<Interval> intervals) {
  HdiSet out;
  out.p_cut = cut;
  for (auto& iv : intervals) {
    iv.mass = g.mixture->cdf(iv.upper) - g.mixture->cdf(iv.lower);
    out.alpha += iv.mass;
  }
  out.intervals = std::move(intervals);
  return out;
}

// Grid density values sorted descending with their cumulative grid mass.
struct MassProfile {
  std::vector<double> levels;
  std::vector<double> cumulative;
};

MassProfile mass_profile(const DensityGrid& g) {
  MassProfile p;
  p.levels.assign(g.density.data(), g.density.data() + g.density.size());
  std::sort(p.levels.begin(), p.levels.end(), std::greater<>());
  p.cumulative.resize(p.levels.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < p.levels.size(); ++k) {
    sum += p.levels[k];
    p.cumulative[k] = sum;
  }
  for (auto& c : p.cumulative) c /= sum;
  return p;
}

double level_for(const MassProfile& p, double alpha) {
  if (alpha >= 1.0) return 0.0;
  auto it = std::lower_bound(p.cumulative.begin(), p.cumulative.end(), alpha);
  if (it == p.cumulative.end()) return 0.0;
  return p.levels[static_cast<std::size_t>(it - p.cumulative.begin())];
}

}  // namespace

DensityGrid make_density_grid(const PredictiveMixture& mixture, int points) {
  if (points < 2) throw std::invalid_argument("density grid needs at least two points");
  if (mixture.size() == 0) throw std::invalid_argument("density grid: empty mixture");
  if (!(mixture.stds.array() > 0.0).all()) throw std::invalid_argument("density grid: non-positive component std");
  DensityGrid g;
  g.mixture = &mixture;
  const double lo = (mixture.means.array() - 8.0 * mixture.stds.array()).minCoeff();
  const double hi = (mixture.means.array() + 8.0 * mixture.stds.array()).maxCoeff();
  g.x = VectorXd::LinSpaced(points, lo, hi);
  g.dx = (hi - lo) / (points - 1);
  g.density = VectorXd::Zero(points);
  for (Index i = 0; i < mixture.means.size(); ++i) {
    const double mu = mixture.means(i);
    const double s = mixture.stds(i);
    const auto a = std::max<Index>(0, static_cast<Index>(std::floor((mu - 8.0 * s - lo) / g.dx)));
    const auto b = std::min<Index>(points - 1, static_cast<Index>(std::ceil((mu + 8.0 * s - lo) / g.dx)));
    if (b < a) continue;
    // exp(-z^2/2) along an even grid by a multiplicative recurrence,
    // re-anchored with an exact exp every kBlock points.
    constexpr Index kBlock = 64;
    const double dz = g.dx / s;
    const double c = std::exp(-dz * dz);
    for (Index k0 = a; k0 <= b; k0 += kBlock) {
      const double z0 = (g.x(k0) - mu) / s;
      double e = std::exp(-0.5 * z0 * z0);
      double r = std::exp(-z0 * dz - 0.5 * dz * dz);
      const Index end = std::min(b + 1, k0 + kBlock);
      for (Index k = k0; k < end; ++k) {
        g.density(k) += e / s;
        e *= r;
        r *= c;
      }
    }
  }
  g.density *= boost::math::constants::one_div_root_two_pi<double>() / static_cast<double>(mixture.size());
  g.cdf.resize(points);
  g.cdf(0) = 0.0;
  for (Index k = 1; k < points; ++k) g.cdf(k) = g.cdf(k - 1) + 0.5 * (g.density(k) + g.density(k - 1)) * g.dx;
  return g;
}

bool HdiSet::contains(double y) const {
  return std::any_of(intervals.begin(), intervals.end(),
                     [y](const Interval& iv) { return y >= iv.lower && y <= iv.upper; });
}

HdiSet hdi_at_cut(const DensityGrid& grid, double p_cut) {
  if (p_cut < 0.0) throw std::invalid_argument("hdi_at_cut: negative cut");
  return with_masses(grid, p_cut, runs(grid, p_cut));
}

std::vector<double> cut_schedule(const DensityGrid& grid, int count) {
  const auto profile = mass_profile(grid);
  std::vector<double> out;
  for (int k = 1; k <= count; ++k) out.push_back(level_for(profile, static_cast<double>(k) / count));
  return out;
}

double cut_for_alpha(const DensityGrid& grid, double alpha) { return level_for(mass_profile(grid), alpha); }

HdiSet hdi_for_alpha(const DensityGrid& grid, double alpha, double tol) {
  double lo = 0.0;                      // alpha(lo) >= target
  double hi = grid.density.maxCoeff();  // alpha(hi) <= target
  HdiSet best = hdi_at_cut(grid, lo);
  if (best.alpha <= alpha) return best;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    HdiSet h = hdi_at_cut(grid, mid);
    if (h.alpha >= alpha) {
      lo = mid;
      best = std::move(h);
    } else {
      hi = mid;
    }
    if (std::abs(best.alpha - alpha) <= tol || hi - lo <= 1e-15 * hi) break;
  }
  return best;
}

PredictionInterval select_pi(const DensityGrid& grid, const PiOptions& options) {
  const auto levels = cut_schedule(grid, options.levels);
  std::vector<std::vector<Interval>> topology;
  topology.reserve(levels.size());
  for (double cut : levels) topology.push_back(runs(grid, cut));

  PredictionInterval best;
  double best_ratio = -1.0;
  for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
    if (topology[k + 1].size() >= topology[k].size()) continue;
    ++best.fusion_events;
    const auto candidates = with_masses(grid, levels[k], topology[k]);
    for (const auto& iv : candidates.intervals) {
      if (!(iv.width() > 0.0)) continue;
      const double ratio = iv.mass / iv.width();
      const bool tie = best_ratio > 0.0 && std::abs(ratio - best_ratio) <= options.tie_tol * best_ratio;
      if ((!tie && ratio > best_ratio) || (tie && iv.lower < best.lower)) {
        best_ratio = ratio;
        best.lower = iv.lower;
        best.upper = iv.upper;
        best.alpha = iv.mass;
        best.p_cut = levels[k];
      }
    }
  }
  if (best.fusion_events > 0 && best_ratio > 0.0) return best;

  const auto hdi = hdi_for_alpha(grid, options.fallback_alpha);
  const auto widest = std::max_element(hdi.intervals.begin(), hdi.intervals.end(),
                                       [](const Interval& a, const Interval& b) { return a.mass < b.mass; });
  best.lower = widest->lower;
  best.upper = widest->upper;
  best.alpha = widest->mass;
  best.p_cut = hdi.p_cut;
  best.fallback = true;
  return best;
}

double point_estimate(const PredictiveMixture& mixture, const PredictionInterval& interval) {
  const double f_lo = mixture.cdf(interval.lower);
  const double half = 0.5 * (mixture.cdf(interval.upper) - f_lo);
  double a = interval.lower, b = interval.upper;
  for (int it = 0; it < 200 && b - a > 1e-12 * std::max(1.0, std::abs(a) + std::abs(b)); ++it) {
    const double mid = 0.5 * (a + b);
    if (mixture.cdf(mid) - f_lo < half) {
      a = mid;
    } else {
      b = mid;
    }
  }
  return 0.5 * (a + b);
}

SignProbabilities sign_probabilities(const PredictiveMixture& mixture, double threshold) {
  if (!std::isfinite(threshold)) throw std::invalid_argument("sign probabilities need a finite threshold");
  SignProbabilities p;
  p.minus = mixture.cdf(threshold);
  p.plus = 1.0 - p.minus;
  return p;
}

int sign_spread(double p_plus, double p0, std::optional<double> live_idfull, double p_da) {
  if (!(p0 >= 0.5 && p0 <= 1.0)) throw std::invalid_argument("sign_spread: p0 must lie in [0.5, 1]");
  if (p_plus > p0) return 1;
  if (1.0 - p_plus > p0) return -1;
  if (!live_idfull) throw std::runtime_error("sign_spread: live IDFull undefined for the fallback");
  return *live_idfull - p_da >= 0.0 ? 1 : -1;
}

int sign_rest(double p_plus) { return p_plus >= 0.5 ? 1 : -1; }

std::vector<double> default_alpha_grid() {
  std::vector<double> out;
  for (int k = 1; k <= 19; ++k) out.push_back(k / 20.0);
  return out;
}

ForecastSummary summarise(const PredictiveMixture& mixture, std::optional<double> p_da,
                          std::optional<double> live_idfull, const SummaryOptions& options) {
  const auto grid = make_density_grid(mixture, options.grid_points);
  ForecastSummary out;
  out.interval = select_pi(grid, options.pi);
  out.y_hat = point_estimate(mixture, out.interval);
  out.alpha_grid = options.alpha_grid;
  const auto profile = mass_profile(grid);
  for (double a : options.alpha_grid) out.hdi_family.push_back(hdi_at_cut(grid, level_for(profile, a)));
  if (p_da) out.spread = sign_probabilities(mixture, *p_da);
  if (live_idfull) out.rest = sign_probabilities(mixture, *live_idfull);
  return out;
}

}  // namespace cidcast
