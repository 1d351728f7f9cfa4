#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cidcast/predictive.hpp"
#include "cidcast/time.hpp"

namespace cidcast {

double mae(const std::vector<double>& errors);

/// Closed-form CRPS of an equal-weight Gaussian mixture,
/// E|Y - y| - E|Y1 - Y2| / 2, with the pair term summed over all component pairs.
double crps(const PredictiveMixture& mixture, double y_true);

/// E|X| for X ~ N(m, s^2); s = 0 gives |m|.
double normal_abs_mean(double m, double s);

/// One forecast with everything needed for scoring.
struct ForecastRecord {
  std::string scenario;
  ProductKey key;
  double y_hat = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double alpha = 0.0;
  double p_da = 0.0;
  double y_true = 0.0;
  std::optional<double> live_idfull;
  double p_plus_spread = 0.5;
  std::optional<double> p_plus_rest;
  double crps = 0.0;
  std::vector<double> alpha_grid;
  std::vector<HdiSet> hdi_family;
};

struct CoverageCurve {
  std::vector<double> alpha;
  std::vector<double> coverage;
  std::size_t n = 0;
};

/// Fraction of records whose truth lies in the HDI union at each level of
/// `alpha_grid`. alpha = 1 counts every record as covered. Records must carry
/// a family on the same grid.
CoverageCurve empirical_coverage(const std::vector<ForecastRecord>& records, const std::vector<double>& alpha_grid);

double ace(const CoverageCurve& curve);         // mean |coverage - alpha|
double ace_signed(const CoverageCurve& curve);  // mean (coverage - alpha)

struct DmResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  int horizon = 1;
};

/// Diebold-Mariano test on d = loss_a - loss_b with the Harvey small-sample
/// correction and t(n-1) p-values. A positive statistic favours b. The
/// one-sided alternative is E[d] > 0 (b more accurate).
DmResult dm_test(const std::vector<double>& loss_a, const std::vector<double>& loss_b, int horizon = 1,
                 bool one_sided = true);

/// Spread truth y - P_da; zero spreads count as correct for either sign.
bool spread_correct(int predicted, double y_true, double p_da);

struct SignAccuracy {
  double spread = 0.0;
  double rest = 0.0;
  double live_spread = 0.0;  // sign(live - P_da) as the forecast
  std::size_t n_spread = 0;
  std::size_t n_rest = 0;
  std::size_t n_live = 0;
};

struct SignScores {
  SignAccuracy overall;
  std::map<int, SignAccuracy> by_hour;
};

/// Records without a live index are left out of the rest and benchmark
/// counts, and out of the spread count whenever the p0 rule needs the live
/// fallback.
SignScores sign_accuracy(const std::vector<ForecastRecord>& records, double p0);

/// Per-record losses for the DM matrix.
struct RecordScores {
  double abs_error = 0.0;
  double bench_abs_error = 0.0;  // |live - y|, NaN without a live index
  double spread_miss = 0.0;      // 0 correct, 1 wrong (p0 = 0.5), NaN if undecidable
  double rest_miss = 0.0;
  double live_spread_miss = 0.0;
  double crps = 0.0;
};

RecordScores record_scores(const ForecastRecord& record, double p0 = 0.5);

struct Aggregate {
  std::size_t n = 0;
  double mae = 0.0;
  double bench_mae = 0.0;  // over records with a live index
  double crps = 0.0;
  SignAccuracy signs;
};

struct ScoreTable {
  Aggregate overall;
  std::map<int, Aggregate> by_hour;
  CoverageCurve coverage;
  double ace = 0.0;
  double ace_signed = 0.0;
};

ScoreTable score(const std::vector<ForecastRecord>& records, double p0 = 0.5);

}  // namespace cidcast
