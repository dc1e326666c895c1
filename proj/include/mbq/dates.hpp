#pragma once

#include <chrono>
#include <cstdio>
#include <string>

#include "mbq/errors.hpp"

namespace mbq {

using Date = std::chrono::year_month_day;

inline Date parse_date(const std::string& s, long line = -1) {
  int y = 0, m = 0, d = 0;
  char dash1 = 0, dash2 = 0;
  if (std::sscanf(s.c_str(), "%d%c%d%c%d", &y, &dash1, &m, &dash2, &d) != 5 ||
      dash1 != '-' || dash2 != '-')
    throw parse_error("expected ISO date (YYYY-MM-DD), got '" + s + "'", line);
  const Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                  std::chrono::day{static_cast<unsigned>(d)}};
  if (!date.ok()) throw parse_error("invalid calendar date '" + s + "'", line);
  return date;
}

inline std::string format_date(Date d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(d.year()), unsigned(d.month()),
                unsigned(d.day()));
  return buf;
}

inline int days_between(Date from, Date to) {
  return (std::chrono::sys_days(to) - std::chrono::sys_days(from)).count();
}

inline Date add_days(Date d, int days) {
  return Date{std::chrono::sys_days(d) + std::chrono::days(days)};
}

}  // namespace mbq
