#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace regimevar {

/// Calendar date stored as days since 1970-01-01.
struct Date {
  std::int32_t serial = 0;
  auto operator<=>(const Date&) const = default;
};

struct CivilDate {
  int year = 1970;
  int month = 1;
  int day = 1;
};

std::int32_t days_from_civil(int year, int month, int day);
CivilDate civil_from_days(std::int32_t serial);

/// Validating constructor; throws ParseError on an impossible date.
Date make_date(int year, int month, int day);

/// Parses strict ISO-8601 (yyyy-mm-dd).
Date parse_date(const std::string& text);
std::string format_date(Date d);

/// Monday = 0 ... Sunday = 6.
int weekday_mon0(Date d);
bool is_weekend(Date d);

/// The Friday of the Monday-based week containing d.
Date friday_of_week(Date d);

}  // namespace regimevar
