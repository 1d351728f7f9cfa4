#include "cidcast/time.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace cidcast {

namespace chr = std::chrono;

namespace {

int parse_int(std::string_view s, std::size_t pos, std::size_t len, std::string_view whole) {
  if (pos + len > s.size()) throw std::invalid_argument("truncated time value: " + std::string(whole));
  int v = 0;
  auto r = std::from_chars(s.data() + pos, s.data() + pos + len, v);
  if (r.ec != std::errc{} || r.ptr != s.data() + pos + len) {
    throw std::invalid_argument("malformed time value: " + std::string(whole));
  }
  return v;
}

Date make_date(int y, int m, int d, std::string_view whole) {
  chr::year_month_day ymd{chr::year{y}, chr::month{static_cast<unsigned>(m)},
                          chr::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw std::invalid_argument("invalid calendar date: " + std::string(whole));
  return Date{ymd};
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '"' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Last Sunday of the month, 01:00 UTC: the EU switch instant.
Timestamp eu_switch(int year, unsigned month) {
  Date last_sunday{chr::year{year} / chr::month{month} / chr::Sunday[chr::last]};
  return Timestamp{last_sunday} + chr::hours{1};
}

}  // namespace

Date parse_date(std::string_view text) {
  auto s = trim(text);
  if (s.size() < 10 || s[4] != '-' || s[7] != '-') {
    throw std::invalid_argument("malformed date: " + std::string(text));
  }
  return make_date(parse_int(s, 0, 4, text), parse_int(s, 5, 2, text), parse_int(s, 8, 2, text), text);
}

Timestamp parse_timestamp(std::string_view text) {
  auto s = trim(text);
  Date day = parse_date(s.substr(0, std::min<std::size_t>(s.size(), 10)));
  if (s.size() < 16 || (s[10] != 'T' && s[10] != ' ')) {
    throw std::invalid_argument("malformed timestamp: " + std::string(text));
  }
  int hh = parse_int(s, 11, 2, text);
  int mm = parse_int(s, 14, 2, text);
  int ss = 0;
  std::size_t pos = 16;
  if (pos < s.size() && s[pos] == ':') {
    ss = parse_int(s, pos + 1, 2, text);
    pos += 3;
  }
  long millis = 0;
  if (pos < s.size() && s[pos] == '.') {
    std::size_t start = ++pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
    std::size_t digits = pos - start;
    if (digits == 0) throw std::invalid_argument("malformed fraction: " + std::string(text));
    std::size_t used = std::min<std::size_t>(digits, 3);
    millis = parse_int(s, start, used, text);
    for (std::size_t i = used; i < 3; ++i) millis *= 10;
  }
  if (hh > 23 || mm > 59 || ss > 60) throw std::invalid_argument("time out of range: " + std::string(text));
  chr::minutes offset{0};
  if (pos < s.size()) {
    char c = s[pos];
    if (c == 'Z') {
      ++pos;
    } else if (c == '+' || c == '-') {
      int oh = parse_int(s, pos + 1, 2, text);
      std::size_t mpos = pos + 3;
      if (mpos < s.size() && s[mpos] == ':') ++mpos;
      int om = parse_int(s, mpos, 2, text);
      offset = chr::hours{oh} + chr::minutes{om};
      if (c == '-') offset = -offset;
      pos = mpos + 2;
    }
  }
  if (pos != s.size()) throw std::invalid_argument("trailing characters in timestamp: " + std::string(text));
  return Timestamp{day} + chr::hours{hh} + chr::minutes{mm} + chr::seconds{ss} +
         chr::milliseconds{millis} - offset;
}

std::string format_date(Date d) {
  chr::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()),
                unsigned(ymd.day()));
  return buf;
}

std::string format_timestamp(Timestamp t) {
  Date day = chr::floor<chr::days>(t);
  auto ms = (t - day).count();
  char buf[40];
  std::snprintf(buf, sizeof buf, "%sT%02ld:%02ld:%02ld.%03ldZ", format_date(day).c_str(),
                static_cast<long>(ms / 3600000), static_cast<long>(ms / 60000 % 60),
                static_cast<long>(ms / 1000 % 60), static_cast<long>(ms % 1000));
  return buf;
}

std::string format_local(LocalTime t) {
  auto days = chr::floor<chr::days>(t);
  auto mins = (t - days).count();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%sT%02ld:%02ld", format_date(Date{days.time_since_epoch()}).c_str(),
                static_cast<long>(mins / 60), static_cast<long>(mins % 60));
  return buf;
}

LocalTime parse_local(std::string_view text) {
  auto s = trim(text);
  Date day = parse_date(s.substr(0, std::min<std::size_t>(s.size(), 10)));
  if (s.size() != 16 || (s[10] != 'T' && s[10] != ' ')) {
    throw std::invalid_argument("malformed local time: " + std::string(text));
  }
  return at_local(day, chr::hours{parse_int(s, 11, 2, text)} + chr::minutes{parse_int(s, 14, 2, text)});
}

chr::minutes berlin_offset(Timestamp t) {
  int year = int(chr::year_month_day{chr::floor<chr::days>(t)}.year());
  return (t >= eu_switch(year, 3) && t < eu_switch(year, 10)) ? chr::hours{2} : chr::hours{1};
}

LocalTime utc_to_local(Timestamp t) {
  auto local = t + berlin_offset(t);
  return LocalTime{chr::floor<chr::minutes>(local).time_since_epoch()};
}

Timestamp local_to_utc(LocalTime t) {
  Timestamp as_utc{chr::duration_cast<chr::milliseconds>(t.time_since_epoch())};
  Timestamp summer = as_utc - chr::hours{2};
  Timestamp winter = as_utc - chr::hours{1};
  bool summer_ok = berlin_offset(summer) == chr::hours{2};
  bool winter_ok = berlin_offset(winter) == chr::hours{1};
  if (summer_ok) return summer;  // first occurrence when ambiguous
  if (winter_ok) return winter;
  // Spring gap: the wall clock jumps 02:00 -> 03:00.
  return as_utc - chr::hours{1};
}

LocalTime at_local(Date day, chr::minutes time_of_day) {
  return LocalTime{chr::duration_cast<chr::minutes>(day.time_since_epoch()) + time_of_day};
}

bool is_canonical(const ProductKey& key) {
  const auto p = delivery_period(key);
  ProductKey back;
  return product_for_period(p.start, p.end, back) && back == key;
}

bool is_spring_change_day(Date d) {
  chr::year_month_day ymd{d};
  return d == Date{ymd.year() / chr::March / chr::Sunday[chr::last]};
}

bool is_autumn_change_day(Date d) {
  chr::year_month_day ymd{d};
  return d == Date{ymd.year() / chr::October / chr::Sunday[chr::last]};
}

std::string format_product(const ProductKey& key) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%s_%02d", format_date(key.day).c_str(), key.hour);
  return buf;
}

DeliveryPeriod delivery_period(const ProductKey& key) {
  if (key.hour < 0 || key.hour > 23) throw std::out_of_range("delivery hour outside [0, 23]");
  int hour = key.hour;
  if (hour == 2 && is_spring_change_day(key.day)) hour = 3;
  Timestamp start = local_to_utc(at_local(key.day, chr::hours{hour}));
  return {start, start + chr::hours{1}};
}

bool product_for_period(Timestamp start, Timestamp end, ProductKey& key) {
  if (end - start != chr::hours{1}) return false;
  LocalTime local = utc_to_local(start);
  auto day = chr::floor<chr::days>(local);
  auto minutes = (local - day).count();
  if (minutes % 60 != 0) return false;
  ProductKey candidate{Date{day.time_since_epoch()}, static_cast<int>(minutes / 60)};
  // The second autumn 02:00 occurrence is not a product.
  if (delivery_period(candidate).start != start) return false;
  key = candidate;
  return true;
}

}  // namespace cidcast
