#pragma once

#include <chrono>
#include <compare>
#include <cstddef>
#include <functional>
#include <string>
#include <string_view>

namespace cidcast {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;
using Date = std::chrono::sys_days;
// Civil wall-clock time in Germany (CET/CEST), minute resolution.
using LocalTime = std::chrono::local_time<std::chrono::minutes>;

/// Parses ISO-8601 timestamps such as `2022-07-01T14:03:05.250Z`,
/// `2022-07-01 14:03:05+02:00` or `2022-07-01T14:03:05` (taken as UTC).
/// Throws std::invalid_argument on malformed input.
Timestamp parse_timestamp(std::string_view text);
Date parse_date(std::string_view text);

std::string format_timestamp(Timestamp t);  // `YYYY-MM-DDTHH:MM:SS.mmmZ`
std::string format_date(Date d);            // `YYYY-MM-DD`
std::string format_local(LocalTime t);      // `YYYY-MM-DDTHH:MM`
LocalTime parse_local(std::string_view text);

/// UTC offset of German civil time at instant `t` (1 h in winter, 2 h in summer).
std::chrono::minutes berlin_offset(Timestamp t);

/// Converts wall-clock time to UTC. Non-existent spring times resolve one
/// hour later, ambiguous autumn times resolve to their first occurrence.
Timestamp local_to_utc(LocalTime t);
LocalTime utc_to_local(Timestamp t);

LocalTime at_local(Date day, std::chrono::minutes time_of_day);

/// Hourly delivery product addressed by local delivery day and hour.
struct ProductKey {
  Date day{};
  int hour = 0;

  auto operator<=>(const ProductKey&) const = default;
};

std::string format_product(const ProductKey& key);  // `YYYY-MM-DD_HH`

/// Delivery period in UTC under the no-clock-change rule: on the spring
/// change day hour 2 is a surrogate for hour 3, on the autumn change day
/// hour 2 maps to the first (summer-time) occurrence.
struct DeliveryPeriod {
  Timestamp start;
  Timestamp end;
};
DeliveryPeriod delivery_period(const ProductKey& key);

/// Inverse of delivery_period for hourly UTC periods; returns false for
/// periods that do not correspond to a product (the dropped autumn hour,
/// non-hourly blocks).
bool product_for_period(Timestamp start, Timestamp end, ProductKey& key);

inline Timestamp gate_closure(const ProductKey& key) {
  return delivery_period(key).start - std::chrono::minutes{5};
}

/// Nominal local delivery start used for creation-time arithmetic.
inline LocalTime nominal_start(const ProductKey& key) {
  return at_local(key.day, std::chrono::hours{key.hour});
}

/// True for keys that name a real delivery hour (not the spring surrogate).
bool is_canonical(const ProductKey& key);

bool is_spring_change_day(Date d);
bool is_autumn_change_day(Date d);

}  // namespace cidcast

template <>
struct std::hash<cidcast::ProductKey> {
  std::size_t operator()(const cidcast::ProductKey& k) const noexcept {
    return std::hash<long>{}(static_cast<long>(k.day.time_since_epoch().count()) * 24 + k.hour);
  }
};
