#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cidcast/time.hpp"

namespace cidcast {

enum class Side { Buy, Sell };
enum class SelfTrade { Yes, No, Unknown };

/// One executed continuous-intraday trade as listed in the exchange feed.
/// Both sides of an on-exchange trade appear as separate rows sharing a
/// trade id.
struct Transaction {
  std::string trade_id;
  Side side = Side::Buy;
  double price = 0.0;   // EUR/MWh
  double volume = 0.0;  // MWh, > 0
  Timestamp execution_time{};
  Timestamp delivery_start{};
  Timestamp delivery_end{};
  SelfTrade self_trade = SelfTrade::No;
  std::string market_area;
  std::string product;
};

struct ParseIssue {
  std::size_t line = 0;  // 1-based, header is line 1
  std::string message;
};

struct ParseReport {
  std::vector<Transaction> transactions;
  std::vector<ParseIssue> skipped;
};

/// Reads a transaction CSV. Required columns: TradeId, Side, Price, Volume,
/// ExecutionTime, DeliveryStart, DeliveryEnd, SelfTrade; optional
/// DeliveryArea (or MarketArea) and Product. A missing required column
/// throws std::runtime_error; malformed rows are skipped and reported.
ParseReport parse_transactions(std::istream& in);
ParseReport parse_transactions(const std::filesystem::path& path);

void write_transactions(std::ostream& out, const std::vector<Transaction>& txs);

/// Keeps trades that are not self-trades and whose delivery period matches
/// the hourly product exactly, then drops repeated trade ids (first
/// occurrence wins). Input order is preserved.
std::vector<Transaction> filter_eligible(const std::vector<Transaction>& txs, const ProductKey& product);

/// Live indices and statistics of one product at creation time tau.
/// Price statistics are absent when no eligible trade precedes tau.
struct LiveStats {
  std::optional<double> id1;
  std::optional<double> id3;
  std::optional<double> idfull;
  std::optional<double> high;
  std::optional<double> low;
  std::optional<double> last;
  std::optional<double> deviat;
  double v_buy = 0.0;
  double v_sell = 0.0;
  Timestamp creation_time{};
};

/// Statistics over trades with execution_time <= tau. ID3 and ID1 use the
/// closed windows [start - 3h, start - 30min] and [start - 1h, start - 30min].
LiveStats live_stats(const std::vector<Transaction>& txs, const ProductKey& product, Timestamp tau);

/// Final values at gate closure (delivery start - 5 min).
LiveStats eod_stats(const std::vector<Transaction>& txs, const ProductKey& product);

/// Live statistics on an even creation-time grid from 15:00 local on the day
/// before delivery to delivery end.
struct LiveSeries {
  ProductKey product;
  std::vector<Timestamp> grid;
  std::vector<LiveStats> values;

  /// Linear interpolation where both neighbouring grid values are defined,
  /// otherwise the nearest defined value at or before tau.
  LiveStats at(Timestamp tau) const;
  /// Value at the first grid point at or after gate closure.
  const LiveStats& eod() const;
};

LiveSeries build_live_series(const std::vector<Transaction>& txs, const ProductKey& product,
                             int grid_size = 250);

/// CSV columns: tau, id1, id3, idfull, high, low, last, deviat, v_buy, v_sell.
void write_live_series(std::ostream& out, const LiveSeries& series);

/// Eligible, deduplicated trades of every hourly product, sorted by
/// execution time (ties keep feed order).
class TradeBook {
 public:
  TradeBook() = default;
  explicit TradeBook(const std::vector<Transaction>& txs);

  /// Eligible trades of the product; empty if it never traded.
  const std::vector<Transaction>& trades(const ProductKey& product) const;
  std::vector<ProductKey> products() const;
  bool empty() const { return by_period_.empty(); }
  /// Copy keeping only trades executed at or before `cutoff`.
  TradeBook truncated(Timestamp cutoff) const;

 private:
  std::map<std::pair<Timestamp, Timestamp>, std::vector<Transaction>> by_period_;
};

}  // namespace cidcast
