#pragma once

#include <Eigen/Dense>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cidcast/covariates.hpp"
#include "cidcast/market_data.hpp"
#include "cidcast/merit_order.hpp"

namespace cidcast {

struct HourGroup {
  std::string name;
  std::vector<int> hours;
};

/// Day-ahead hour groups (start hours, 0-based) used for the aggregated DA
/// price statistics. Not authoritative: the exchange's own definitions may
/// differ.
std::vector<HourGroup> default_hour_groups();

enum class EtaAnchor { LiveIdFull, LiveId1 };

struct FeatureConfig {
  std::vector<HourGroup> hour_groups = default_hour_groups();
  std::vector<double> slope_deltas{500.0, 1000.0, 2000.0};
  EtaAnchor eta_anchor = EtaAnchor::LiveIdFull;
  int min_history = 30;
};

/// Base feature values of one (d, h, tau); NaN marks a missing value.
struct FeatureRow {
  ProductKey key;
  Timestamp tau{};
  std::vector<double> values;
  std::optional<double> target;  // eod IDFull when the product traded
};

/// Rows d-n .. d for a fixed hour, oldest first. Column j of X is feature
/// names[j]; missing entries are NaN. y holds eod IDFull per row with the
/// prediction row (last) withheld as NaN; its realised value is y_true.
struct DesignMatrix {
  ProductKey target;
  Timestamp tau{};
  std::vector<Date> days;
  std::vector<std::string> names;
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::optional<double> y_true;

  Eigen::Index training_rows() const { return X.rows() - 1; }
};

struct CleaningOptions {
  double max_missing_fraction = 0.2;
  double zero_variance_tol = 1e-12;
};

/// Training block and prediction row after cleaning and standardisation.
/// Training statistics (population std) define the scaling of X and y.
struct CleanDesign {
  std::vector<Eigen::Index> columns;  // into DesignMatrix columns
  std::vector<Eigen::Index> rows;     // kept training rows
  std::vector<std::string> names;
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Eigen::VectorXd x_new;
  Eigen::VectorXd x_mean;
  Eigen::VectorXd x_std;
  double y_mean = 0.0;
  double y_std = 1.0;

  double destandardise(double z) const { return y_mean + y_std * z; }
  double destandardise_scale(double s) const { return y_std * s; }
};

/// Cleaning, in order: drop features missing in the prediction row; drop
/// features missing in more than `max_missing_fraction` of training rows;
/// drop training rows with any missing feature or target; standardise with
/// training statistics; drop constant columns. `subset` restricts the
/// candidate columns (post-selection re-run). Throws std::runtime_error if
/// fewer than two training rows survive.
CleanDesign clean_and_standardise(const DesignMatrix& design, const CleaningOptions& options = {},
                                  const std::vector<Eigen::Index>* subset = nullptr);

/// Creation time shifted by whole days on the local wall clock.
Timestamp shift_days(Timestamp tau, int days);

/// Builds feature rows and design matrices from market data, auction curves
/// and covariates. Base rows are cached; the factory is safe to share
/// between threads once constructed. The sources must outlive it.
class FeatureFactory {
 public:
  FeatureFactory(const TradeBook& trades, const CurveBook& curves, const CovariateStore& covariates,
                 FeatureConfig config = {});

  /// Names of the base features (before lag differences).
  const std::vector<std::string>& base_names() const { return base_names_; }
  /// Base names followed by "dh:" and "dd:" lag differences.
  const std::vector<std::string>& names() const { return names_; }

  FeatureRow assemble_row(const ProductKey& key, Timestamp tau) const;
  /// Base row plus hourly and daily lag differences.
  std::vector<double> lagged_row(const ProductKey& key, Timestamp tau) const;
  DesignMatrix build_design(const ProductKey& key, Timestamp tau, int n) const;

  std::optional<double> target(const ProductKey& key) const;

 private:
  struct CacheKey {
    ProductKey key;
    Timestamp tau;
    bool operator==(const CacheKey&) const = default;
  };
  struct CacheHash {
    std::size_t operator()(const CacheKey& k) const noexcept {
      return std::hash<ProductKey>{}(k.key) * 1000003u ^ std::hash<long long>{}(k.tau.time_since_epoch().count());
    }
  };
  struct Sink;

  void compute(const ProductKey& key, Timestamp tau, Sink& out) const;
  const std::vector<double>& base(const ProductKey& key, Timestamp tau) const;

  const TradeBook& trades_;
  const CurveBook& curves_;
  const CovariateStore& covariates_;
  FeatureConfig config_;
  std::vector<std::string> passthrough_;
  std::vector<std::string> base_names_;
  std::vector<std::string> names_;

  mutable std::mutex cache_mutex_;
  mutable std::unordered_map<CacheKey, std::vector<double>, CacheHash> cache_;
};

}  // namespace cidcast
