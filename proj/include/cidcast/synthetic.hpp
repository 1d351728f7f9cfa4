#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cidcast/covariates.hpp"
#include "cidcast/market_data.hpp"
#include "cidcast/merit_order.hpp"

namespace cidcast {

struct SynthConfig {
  std::uint64_t seed = 1;
  Date start = parse_date("2022-01-01");
  int days = 365;

  // Day-ahead price: level + hourly/weekly profile + residual-load effect +
  // AR(1) noise over hours + jumps.
  double level = 120.0;
  double daily_amplitude = 30.0;
  double weekly_amplitude = 10.0;
  double ar = 0.7;
  double ar_sigma = 8.0;
  double jump_rate = 0.01;  // per product
  double jump_size = 60.0;
  double w_residual_load = 0.004;  // EUR/MWh per MWh of residual load

  // Energy forecasts (MWh per hour).
  double consumption = 55000.0;
  double consumption_amplitude = 9000.0;
  double solar_peak = 25000.0;
  double wind_onshore = 14000.0;
  double wind_offshore = 3000.0;
  double intraday_error = 0.08;  // relative sd of intraday vs day-ahead renewables

  // Intraday market.
  double trades_per_product = 30.0;  // expected eligible trades
  double ramp_hours = 1.5;           // e-folding time of the arrival ramp toward the gate
  double flat_share = 0.25;          // share of arrivals spread evenly over the session
  double volume_mean = 4.0;          // MWh, Gamma(shape 2)
  double random_walk_sigma = 2.0;    // EUR/MWh per sqrt(hour)
  double microstructure_sigma = 1.5;
  double w_shift = -0.0015;  // EUR/MWh per MWh of intraday renewable revision, from 08:00 on d
  double w_delta_consumption = 0.002;  // EUR/MWh per MWh of hour-to-hour consumption change
  double w_driver = 8.0;               // EUR/MWh per unit driver, in the final hour only
  double driver_ar = 0.6;

  int decoys = 8;
  double decoy_correlation = 0.95;  // between decoys

  // Feed artefacts.
  double self_trade_share = 0.02;
  double unknown_flag_share = 0.01;
  double duplicate_share = 0.01;
  double block_share = 0.02;
};

/// Validates a config; throws std::invalid_argument.
void validate(const SynthConfig& config);

/// Per-product ground truth.
struct LatentProduct {
  ProductKey key;
  double p_da = 0.0;
  double v_da = 0.0;
  double driver = 0.0;
  double fair_at_gate = 0.0;  // latent price at gate closure
  std::size_t trades = 0;     // eligible trades generated
};

struct SynthData {
  SynthConfig config;
  std::vector<Transaction> transactions;
  CurveBook curves;
  CovariateStore covariates;
  std::vector<LatentProduct> latent;
};

SynthData generate(const SynthConfig& config);

/// Writes transactions.csv, curves.csv, covariates.csv, latent.csv and
/// truth.json into `dir` (created if needed).
void write_synthetic(const SynthData& data, const std::filesystem::path& dir);

std::string truth_json(const SynthData& data);

/// y = X w + sigma e with standard normal X and e; the last row is held out
/// as (x_new, y_new).
struct RegressionProblem {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Eigen::VectorXd x_new;
  double y_new = 0.0;
  Eigen::VectorXd w;
  double sigma = 1.0;
};

RegressionProblem well_specified_problem(std::uint64_t seed, int n, int m, double sigma = 1.0);

/// Stable 64-bit seed for a sub-stream (splitmix64 over the parts).
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> parts);

}  // namespace cidcast
