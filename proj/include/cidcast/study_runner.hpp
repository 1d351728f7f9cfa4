#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cidcast/bayes_engine.hpp"
#include "cidcast/covariates.hpp"
#include "cidcast/evaluation.hpp"
#include "cidcast/feature_factory.hpp"
#include "cidcast/market_data.hpp"
#include "cidcast/merit_order.hpp"
#include "cidcast/predictive.hpp"
#include "cidcast/selection.hpp"
#include "cidcast/synthetic.hpp"

namespace cidcast {

enum class Selector { Omp, Lasso };
enum class ScenarioKind { FixedTau, FixedLag };

Selector parse_selector(std::string_view s);
std::string_view selector_name(Selector s);

/// Every tunable of a study, settable from a key = value file.
struct StudyConfig {
  std::filesystem::path data_dir = "data";
  std::filesystem::path study_dir = "study";
  Date test_start = parse_date("2022-07-01");
  int test_days = 183;
  int history_days = 365;
  int lag_hours = 1;
  std::vector<int> hours;  // empty: all hours the scenario allows
  char scenario = 'e';
  std::optional<Selector> selector;  // overrides the scenario's selector
  std::uint64_t seed = 1;
  int workers = 1;
  double audit_fraction = 0.0;

  int live_grid = 250;
  FeatureConfig features;
  CleaningOptions cleaning;
  OmpOptions omp;
  LassoOptions lasso;
  EmpiricalPriorOptions prior;
  SamplerOptions sampler;
  SummaryOptions summary;
  double p0 = 0.5;
  SynthConfig synth;

  /// Applies one setting; throws std::invalid_argument on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  /// Lines of `key = value`; `#` starts a comment.
  void read(std::istream& in);
  void load(const std::filesystem::path& path);
  /// CIDCAST_DATA_DIR and CIDCAST_STUDY_DIR override the directories.
  void apply_environment();
  /// Canonical key = value listing (every key, current values).
  std::string dump() const;
};

struct ScenarioSpec {
  char name = 'e';
  ScenarioKind kind = ScenarioKind::FixedLag;
  int tau_hour = 0;        // local clock hour of creation (fixed tau)
  int tau_day_offset = 0;  // creation day relative to delivery day
  int lag_hours = 1;
  Selector selector = Selector::Omp;
};

/// Scenarios a-d fix the creation clock time (23:00 on d-1, 05:00, 11:00,
/// 17:00); e and f fix the lag to delivery with OMP and LASSO.
ScenarioSpec scenario(char name, int lag_hours = 1);
/// Scenario named by the config, with its lag and selector override.
ScenarioSpec scenario(const StudyConfig& config);

/// Hours forecast on `day`: those whose gate closes after the creation time.
std::vector<int> scenario_hours(const ScenarioSpec& spec, Date day, const std::vector<int>& restrict = {});

Timestamp creation_time(const ScenarioSpec& spec, const ProductKey& key);

struct MarketData {
  TradeBook trades;
  CurveBook curves;
  CovariateStore covariates;
};

/// transactions.csv and covariates.csv are required, curves.csv optional.
MarketData load_market_data(const std::filesystem::path& dir);
MarketData from_synthetic(const SynthData& data);

/// One finished forecast with everything persisted for it.
struct ForecastOutput {
  ForecastRecord record;
  Timestamp tau{};
  std::vector<std::string> selected;
  std::size_t training_rows = 0;
  std::size_t candidate_features = 0;
  double p_cut = 0.0;
  bool fallback = false;
  int fusion_events = 0;
  double step_size = 0.0;
  int divergences = 0;
  std::vector<std::string> warnings;
};

/// Thrown when the product never traded, so there is nothing to score.
class NoRealisedPrice : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Design, cleaning, selection, refit, sampling and summary of one product.
ForecastOutput forecast_one(const FeatureFactory& factory, const MarketData& data, const StudyConfig& config,
                            const ScenarioSpec& spec, const ProductKey& key);

std::string to_json(const ForecastOutput& out);
ForecastOutput forecast_from_json(const std::string& text);

/// Rebuilds the design from feeds truncated at the creation time and
/// returns the names of features whose values differ (empty when clean).
std::vector<std::string> audit_forecast(const MarketData& data, const StudyConfig& config, const ScenarioSpec& spec,
                                        const ProductKey& key);

struct RunSummary {
  std::size_t planned = 0;
  std::size_t computed = 0;
  std::size_t reused = 0;
  std::size_t skipped = 0;  // no realised price to score against
  std::size_t failed = 0;
  std::size_t audited = 0;
  std::size_t audit_failures = 0;
  std::vector<std::string> errors;
};

/// Runs a scenario into `config.study_dir`: one JSON per forecast under
/// forecasts/ (existing ones are kept), then results.csv and the score files.
RunSummary run_study(const MarketData& data, const StudyConfig& config, const ScenarioSpec& spec,
                     std::ostream* log = nullptr);

/// Reads every forecast JSON of a study directory, ordered by product.
std::vector<ForecastOutput> load_forecasts(const std::filesystem::path& study_dir);

void write_results_csv(std::ostream& out, const std::vector<ForecastOutput>& forecasts);

/// Writes scores_overall.csv, scores_by_hour.csv, coverage.csv and
/// record_scores.csv; returns the table.
ScoreTable write_scores(const std::filesystem::path& study_dir, const std::vector<ForecastOutput>& forecasts,
                        double p0);

struct DmCell {
  std::string pair;   // e.g. a_vs_b
  std::string score;  // mae, spread_sign, rest_sign, crps
  std::optional<DmResult> result;
  double mean_first = 0.0;
  double mean_second = 0.0;
  std::string note;
};

/// One-sided DM tests that the first forecast series beats the second, for
/// a vs b, a vs live and b vs live. Keys must match.
std::vector<DmCell> compare_studies(const std::vector<ForecastOutput>& a, const std::vector<ForecastOutput>& b,
                                    double p0 = 0.5, int horizon = 1);

void write_compare_csv(std::ostream& out, const std::vector<DmCell>& cells);

}  // namespace cidcast
