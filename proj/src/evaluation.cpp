#include "cidcast/evaluation.hpp"

#include <algorithm>
#include <boost/math/constants/constants.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cidcast {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void tally(SignAccuracy& acc, const ForecastRecord& r, double p0) {
  if (r.live_idfull || r.p_plus_spread > p0 || 1.0 - r.p_plus_spread > p0) {
    acc.spread += spread_correct(sign_spread(r.p_plus_spread, p0, r.live_idfull, r.p_da), r.y_true, r.p_da);
    ++acc.n_spread;
  }
  if (!r.live_idfull) return;
  acc.live_spread += spread_correct(*r.live_idfull - r.p_da >= 0.0 ? 1 : -1, r.y_true, r.p_da);
  ++acc.n_live;
  if (r.p_plus_rest) {
    const double rest = r.y_true - *r.live_idfull;
    const int s = sign_rest(*r.p_plus_rest);
    acc.rest += rest == 0.0 || (rest > 0.0) == (s > 0);
    ++acc.n_rest;
  }
}

void finish(SignAccuracy& acc) {
  acc.spread = acc.n_spread ? acc.spread / static_cast<double>(acc.n_spread) : kNaN;
  acc.rest = acc.n_rest ? acc.rest / static_cast<double>(acc.n_rest) : kNaN;
  acc.live_spread = acc.n_live ? acc.live_spread / static_cast<double>(acc.n_live) : kNaN;
}

}  // namespace

double mae(const std::vector<double>& errors) {
  if (errors.empty()) throw std::invalid_argument("mae: no errors");
  double sum = 0.0;
  for (double e : errors) sum += std::abs(e);
  return sum / static_cast<double>(errors.size());
}

double normal_abs_mean(double m, double s) {
  if (s == 0.0) return std::abs(m);
  const double z = m / s;
  return m * std::erf(z * boost::math::constants::one_div_root_two<double>()) +
         2.0 * s * boost::math::constants::one_div_root_two_pi<double>() * std::exp(-0.5 * z * z);
}

double crps(const PredictiveMixture& mixture, double y_true) {
  const auto n = static_cast<Eigen::Index>(mixture.size());
  if (n == 0) throw std::invalid_argument("crps: empty mixture");
  const auto& mu = mixture.means;
  const auto& sd = mixture.stds;
  double first = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) first += normal_abs_mean(mu(i) - y_true, sd(i));
  first /= static_cast<double>(n);

  const Eigen::VectorXd var = sd.array().square();
  double diag = 0.0, off = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    diag += normal_abs_mean(0.0, std::sqrt(2.0 * var(i)));
    for (Eigen::Index j = i + 1; j < n; ++j) off += normal_abs_mean(mu(i) - mu(j), std::sqrt(var(i) + var(j)));
  }
  const double pair = (diag + 2.0 * off) / (static_cast<double>(n) * static_cast<double>(n));
  return first - 0.5 * pair;
}

CoverageCurve empirical_coverage(const std::vector<ForecastRecord>& records, const std::vector<double>& alpha_grid) {
  CoverageCurve c;
  c.alpha = alpha_grid;
  c.coverage.assign(alpha_grid.size(), 0.0);
  c.n = records.size();
  if (records.empty()) return c;
  for (const auto& r : records) {
    for (std::size_t k = 0; k < alpha_grid.size(); ++k) {
      if (alpha_grid[k] >= 1.0) {
        c.coverage[k] += 1.0;
        continue;
      }
      std::size_t idx = r.alpha_grid.size();
      for (std::size_t q = 0; q < r.alpha_grid.size(); ++q) {
        if (std::abs(r.alpha_grid[q] - alpha_grid[k]) < 1e-9) idx = q;
      }
      if (idx == r.alpha_grid.size() || idx >= r.hdi_family.size()) {
        throw std::invalid_argument("empirical_coverage: record lacks an HDI at alpha " + std::to_string(alpha_grid[k]));
      }
      c.coverage[k] += r.hdi_family[idx].contains(r.y_true);
    }
  }
  for (auto& v : c.coverage) v /= static_cast<double>(records.size());
  return c;
}

double ace(const CoverageCurve& curve) {
  if (curve.alpha.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < curve.alpha.size(); ++k) sum += std::abs(curve.coverage[k] - curve.alpha[k]);
  return sum / static_cast<double>(curve.alpha.size());
}

double ace_signed(const CoverageCurve& curve) {
  if (curve.alpha.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < curve.alpha.size(); ++k) sum += curve.coverage[k] - curve.alpha[k];
  return sum / static_cast<double>(curve.alpha.size());
}

DmResult dm_test(const std::vector<double>& loss_a, const std::vector<double>& loss_b, int horizon, bool one_sided) {
  if (loss_a.size() != loss_b.size()) throw std::invalid_argument("dm_test: series lengths differ");
  const std::size_t n = loss_a.size();
  if (n < 3) throw std::invalid_argument("dm_test: need at least three observations");
  if (horizon < 1 || static_cast<std::size_t>(horizon) >= n) throw std::invalid_argument("dm_test: bad horizon");
  std::vector<double> d(n);
  double mean = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    d[t] = loss_a[t] - loss_b[t];
    mean += d[t];
  }
  const double nn = static_cast<double>(n);
  mean /= nn;
  double v = 0.0;
  for (int k = 0; k < horizon; ++k) {
    double g = 0.0;
    for (std::size_t t = static_cast<std::size_t>(k); t < n; ++t) g += (d[t] - mean) * (d[t - k] - mean);
    g /= nn;
    v += k == 0 ? g : 2.0 * g;
  }
  double scale = 0.0;
  for (double x : d) scale = std::max(scale, std::abs(x));
  // Rounding noise of a constant differential is not variance.
  const double noise = 64.0 * std::numeric_limits<double>::epsilon() * scale;
  if (!(v > noise * noise)) throw std::domain_error("dm_test: degenerate series");
  const double h = horizon;
  const double harvey = std::sqrt((nn + 1.0 - 2.0 * h + h * (h - 1.0) / nn) / nn);
  DmResult out;
  out.n = n;
  out.horizon = horizon;
  out.statistic = harvey * mean / std::sqrt(v / nn);
  const boost::math::students_t_distribution<double> t(nn - 1.0);
  if (one_sided) {
    out.p_value = boost::math::cdf(boost::math::complement(t, out.statistic));
  } else {
    out.p_value = 2.0 * boost::math::cdf(boost::math::complement(t, std::abs(out.statistic)));
  }
  return out;
}

bool spread_correct(int predicted, double y_true, double p_da) {
  const double s = y_true - p_da;
  return s == 0.0 || (s > 0.0) == (predicted > 0);
}

SignScores sign_accuracy(const std::vector<ForecastRecord>& records, double p0) {
  SignScores out;
  for (const auto& r : records) {
    tally(out.overall, r, p0);
    tally(out.by_hour[r.key.hour], r, p0);
  }
  finish(out.overall);
  for (auto& [h, acc] : out.by_hour) finish(acc);
  return out;
}

RecordScores record_scores(const ForecastRecord& r, double p0) {
  RecordScores s;
  s.abs_error = std::abs(r.y_hat - r.y_true);
  s.crps = r.crps;
  s.bench_abs_error = r.live_idfull ? std::abs(*r.live_idfull - r.y_true) : kNaN;
  s.live_spread_miss = r.live_idfull ? !spread_correct(*r.live_idfull - r.p_da >= 0.0 ? 1 : -1, r.y_true, r.p_da)
                                     : kNaN;
  if (r.live_idfull || r.p_plus_spread > p0 || 1.0 - r.p_plus_spread > p0) {
    s.spread_miss = !spread_correct(sign_spread(r.p_plus_spread, p0, r.live_idfull, r.p_da), r.y_true, r.p_da);
  } else {
    s.spread_miss = kNaN;
  }
  if (r.live_idfull && r.p_plus_rest) {
    const double rest = r.y_true - *r.live_idfull;
    s.rest_miss = !(rest == 0.0 || (rest > 0.0) == (sign_rest(*r.p_plus_rest) > 0));
  } else {
    s.rest_miss = kNaN;
  }
  return s;
}

ScoreTable score(const std::vector<ForecastRecord>& records, double p0) {
  ScoreTable table;
  auto add = [](Aggregate& a, const ForecastRecord& r, std::size_t& n_bench) {
    ++a.n;
    a.mae += std::abs(r.y_hat - r.y_true);
    a.crps += r.crps;
    if (r.live_idfull) {
      a.bench_mae += std::abs(*r.live_idfull - r.y_true);
      ++n_bench;
    }
  };
  std::size_t bench_overall = 0;
  std::map<int, std::size_t> bench_hour;
  for (const auto& r : records) {
    add(table.overall, r, bench_overall);
    add(table.by_hour[r.key.hour], r, bench_hour[r.key.hour]);
  }
  auto close = [](Aggregate& a, std::size_t n_bench) {
    if (a.n == 0) return;
    a.mae /= static_cast<double>(a.n);
    a.crps /= static_cast<double>(a.n);
    a.bench_mae = n_bench ? a.bench_mae / static_cast<double>(n_bench) : kNaN;
  };
  close(table.overall, bench_overall);
  for (auto& [h, a] : table.by_hour) close(a, bench_hour[h]);

  const auto signs = sign_accuracy(records, p0);
  table.overall.signs = signs.overall;
  for (const auto& [h, acc] : signs.by_hour) table.by_hour[h].signs = acc;

  if (!records.empty()) {
    table.coverage = empirical_coverage(records, records.front().alpha_grid);
    table.ace = ace(table.coverage);
    table.ace_signed = ace_signed(table.coverage);
  }
  return table;
}

}  // namespace cidcast
