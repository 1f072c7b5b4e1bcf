#include "instasent/common/time.h"

#include <charconv>
#include <chrono>
#include <cstdio>

namespace instasent {
namespace {

bool ParseFixed(std::string_view s, size_t pos, size_t len, int& out) {
  if (pos + len > s.size()) return false;
  auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, out);
  return ec == std::errc() && p == s.data() + pos + len;
}

}  // namespace

std::optional<UtcSeconds> ParseTimestamp(std::string_view text) {
  if (text.empty()) return std::nullopt;
  {
    UtcSeconds v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec == std::errc() && p == text.data() + text.size()) return v;
  }
  int year, month, day, hour, minute, second;
  if (text.size() < 19 || text[4] != '-' || text[7] != '-' ||
      (text[10] != 'T' && text[10] != ' ') || text[13] != ':' || text[16] != ':')
    return std::nullopt;
  if (!ParseFixed(text, 0, 4, year) || !ParseFixed(text, 5, 2, month) ||
      !ParseFixed(text, 8, 2, day) || !ParseFixed(text, 11, 2, hour) ||
      !ParseFixed(text, 14, 2, minute) || !ParseFixed(text, 17, 2, second))
    return std::nullopt;
  size_t pos = 19;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
  }
  int offset_seconds = 0;
  if (pos == text.size()) {
    // no zone: treat as UTC
  } else if (text[pos] == 'Z' && pos + 1 == text.size()) {
  } else if ((text[pos] == '+' || text[pos] == '-') && pos + 6 == text.size() &&
             text[pos + 3] == ':') {
    int oh, om;
    if (!ParseFixed(text, pos + 1, 2, oh) || !ParseFixed(text, pos + 4, 2, om)) return std::nullopt;
    offset_seconds = (oh * 3600 + om * 60) * (text[pos] == '+' ? 1 : -1);
  } else {
    return std::nullopt;
  }
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                           std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 60) return std::nullopt;
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<UtcSeconds>(days) * 86400 + hour * 3600 + minute * 60 + second -
         offset_seconds;
}

std::string FormatIso8601(UtcSeconds t) {
  using namespace std::chrono;
  UtcSeconds days = t / 86400;
  UtcSeconds rem = t % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(rem / 3600), static_cast<int>(rem % 3600 / 60),
                static_cast<int>(rem % 60));
  return buf;
}

}  // namespace instasent
