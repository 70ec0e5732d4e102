#include "regimevar/dates.hpp"

#include <array>
#include <cstdio>

#include "regimevar/errors.hpp"

namespace regimevar {

std::int32_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy =
      static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return static_cast<std::int32_t>(era * 146097 + static_cast<int>(doe) -
                                   719468);
}

CivilDate civil_from_days(std::int32_t serial) {
  std::int64_t z = serial + 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return CivilDate{static_cast<int>(y + (m <= 2)), static_cast<int>(m),
                   static_cast<int>(d)};
}

namespace {

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static constexpr std::array<int, 12> lengths = {31, 28, 31, 30, 31, 30,
                                                  31, 31, 30, 31, 30, 31};
  if (m == 2 && is_leap(y)) return 29;
  return lengths[m - 1];
}

}  // namespace

Date make_date(int year, int month, int day) {
  if (month < 1 || month > 12 || day < 1 || day > days_in_month(year, month)) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "invalid date %04d-%02d-%02d", year, month,
                  day);
    throw ParseError(buf);
  }
  return Date{days_from_civil(year, month, day)};
}

Date parse_date(const std::string& text) {
  int y = 0, m = 0, d = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%d-%d-%d%c", &y, &m, &d, &tail) != 3) {
    throw ParseError("unparsable date '" + text + "' (expected yyyy-mm-dd)");
  }
  return make_date(y, m, d);
}

std::string format_date(Date d) {
  const CivilDate c = civil_from_days(d.serial);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", c.year, c.month, c.day);
  return buf;
}

int weekday_mon0(Date d) {
  // 1970-01-01 was a Thursday.
  const std::int32_t shifted = d.serial + 3;
  return static_cast<int>(((shifted % 7) + 7) % 7);
}

bool is_weekend(Date d) { return weekday_mon0(d) >= 5; }

Date friday_of_week(Date d) {
  return Date{d.serial + (4 - weekday_mon0(d))};
}

}  // namespace regimevar
