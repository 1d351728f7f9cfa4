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

/// When a covariate value for delivery (d, h) becomes known.
enum class Availability {
  Static,     // always (calendar, holidays, seasonality)
  Auction,    // day-ahead auction results, 13:00 on d-1
  DayAhead,   // day-ahead forecasts, 18:00 on d-1
  Intraday,   // intraday forecasts, 08:00 on d
  Daily,      // daily index for date D, known from 00:00 on D+1; latest value used
  Live,       // known only after delivery gate closure
};

Availability parse_availability(std::string_view s);
std::string_view availability_name(Availability a);

/// Instant from which a value of class `a` for product `key` may be used.
/// For Daily series `key.day` is the observation date.
Timestamp available_from(Availability a, const ProductKey& key);

/// Named hourly covariate series. CSV columns: series_name, date, hour,
/// value, availability_class.
class CovariateStore {
 public:
  void add(const std::string& name, const ProductKey& key, double value, Availability cls);

  bool has(std::string_view name) const { return series_.count(std::string(name)) > 0; }
  std::vector<std::string> names() const;
  std::optional<Availability> availability(std::string_view name) const;

  /// Value for (d, h) if it is known at tau. Daily series return the most
  /// recent observation dated at or before d that is known at tau.
  std::optional<double> get(std::string_view name, const ProductKey& key, Timestamp tau) const;
  /// Stored value regardless of availability.
  std::optional<double> raw(std::string_view name, const ProductKey& key) const;

  /// Copy without values that only become known after `cutoff`.
  CovariateStore truncated(Timestamp cutoff) const;

  static CovariateStore read(std::istream& in);
  static CovariateStore load(const std::filesystem::path& path);
  void merge(const CovariateStore& other);
  void write(std::ostream& out) const;

 private:
  struct Series {
    Availability cls = Availability::Static;
    std::map<ProductKey, double> values;
  };
  std::map<std::string, Series, std::less<>> series_;
};

}  // namespace cidcast
