#pragma once

#include <charconv>
#include <chrono>
#include <compare>
#include <cstdio>
#include <string>
#include <string_view>

#include "mspm/core/error.hpp"

namespace mspm {

/// Calendar day. Ordered, hashable through its serial day number.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::chrono::sys_days days) : days_(days) {}
  constexpr Date(int year, unsigned month, unsigned day)
      : days_(std::chrono::year_month_day{std::chrono::year{year}, std::chrono::month{month},
                                          std::chrono::day{day}}) {}

  /// Parses `YYYY-MM-DD`. Throws DataError on anything else.
  static Date parse(std::string_view text) {
    auto fail = [&] { return DataError("invalid date '" + std::string(text) + "'"); };
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw fail();
    int y = 0;
    unsigned m = 0, d = 0;
    auto ok = [](std::from_chars_result r, const char* end) { return r.ec == std::errc{} && r.ptr == end; };
    const char* s = text.data();
    if (!ok(std::from_chars(s, s + 4, y), s + 4) || !ok(std::from_chars(s + 5, s + 7, m), s + 7) ||
        !ok(std::from_chars(s + 8, s + 10, d), s + 10)) {
      throw fail();
    }
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) throw fail();
    return Date(std::chrono::sys_days{ymd});
  }

  std::string to_string() const {
    std::chrono::year_month_day ymd{days_};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
  }

  constexpr std::chrono::sys_days days() const { return days_; }
  constexpr long serial() const { return days_.time_since_epoch().count(); }

  /// Monday = 1 ... Sunday = 7.
  unsigned iso_weekday() const { return std::chrono::weekday{days_}.iso_encoding(); }

  Date plus_days(long n) const { return Date(days_ + std::chrono::days{n}); }

  /// Next Monday-to-Friday day strictly after this one.
  Date next_weekday() const {
    Date d = plus_days(1);
    while (d.iso_weekday() > 5) d = d.plus_days(1);
    return d;
  }

  friend constexpr auto operator<=>(const Date&, const Date&) = default;

 private:
  std::chrono::sys_days days_{};
};

/// Inclusive date interval.
struct DateRange {
  Date first;
  Date last;

  bool contains(const Date& d) const { return first <= d && d <= last; }
  bool overlaps(const DateRange& other) const { return !(last < other.first || other.last < first); }
  friend bool operator==(const DateRange&, const DateRange&) = default;
};

}  // namespace mspm
