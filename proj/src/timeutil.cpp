#include "voice_ehr/timeutil.hpp"

#include <cstdio>

#include "voice_ehr/error.hpp"

namespace voice_ehr {

namespace {

// Howard Hinnant's civil calendar conversions.
constexpr long long days_from_civil(long long y, unsigned m, unsigned d) {
  y -= m <= 2;
  const long long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long long>(doe) - 719468;
}

struct Civil {
  long long y;
  unsigned m;
  unsigned d;
};

constexpr Civil civil_from_days(long long z) {
  z += 719468;
  const long long era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const long long y = static_cast<long long>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return {y + (m <= 2), m, d};
}

int digits(std::string_view s, size_t pos, size_t n) {
  if (pos + n > s.size()) fail(ErrorCode::BadRequest, "timestamp too short");
  int v = 0;
  for (size_t i = pos; i < pos + n; ++i) {
    if (s[i] < '0' || s[i] > '9') fail(ErrorCode::BadRequest, "bad timestamp: " + std::string(s));
    v = v * 10 + (s[i] - '0');
  }
  return v;
}

}  // namespace

std::string format_rfc3339(Timestamp t) {
  using namespace std::chrono;
  const long long ms = t.time_since_epoch().count();
  long long days = ms / 86'400'000;
  long long rem = ms % 86'400'000;
  if (rem < 0) {
    rem += 86'400'000;
    --days;
  }
  const Civil c = civil_from_days(days);
  const int hh = static_cast<int>(rem / 3'600'000);
  const int mm = static_cast<int>(rem / 60'000 % 60);
  const int ss = static_cast<int>(rem / 1000 % 60);
  const int mss = static_cast<int>(rem % 1000);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02d:%02d:%02d.%03dZ", c.y, c.m, c.d, hh, mm,
                ss, mss);
  return buf;
}

Timestamp parse_rfc3339(std::string_view s) {
  const int y = digits(s, 0, 4);
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != 't') ||
      s[13] != ':' || s[16] != ':')
    fail(ErrorCode::BadRequest, "bad timestamp: " + std::string(s));
  const int mo = digits(s, 5, 2);
  const int d = digits(s, 8, 2);
  const int hh = digits(s, 11, 2);
  const int mi = digits(s, 14, 2);
  const int ss = digits(s, 17, 2);
  size_t pos = 19;
  long long ms = 0;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    int scale = 100;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
      ms += (s[pos] - '0') * scale;
      scale /= 10;
      ++pos;
    }
  }
  long long offset_min = 0;
  if (pos < s.size() && (s[pos] == 'Z' || s[pos] == 'z')) {
    ++pos;
  } else if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
    const int sign = s[pos] == '-' ? -1 : 1;
    const int oh = digits(s, pos + 1, 2);
    if (pos + 3 >= s.size() || s[pos + 3] != ':') fail(ErrorCode::BadRequest, "bad offset");
    const int om = digits(s, pos + 4, 2);
    offset_min = sign * (oh * 60 + om);
    pos += 6;
  } else {
    fail(ErrorCode::BadRequest, "timestamp lacks zone: " + std::string(s));
  }
  if (pos != s.size()) fail(ErrorCode::BadRequest, "trailing characters in timestamp");
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || hh > 23 || mi > 59 || ss > 60)
    fail(ErrorCode::BadRequest, "timestamp field out of range");

  const long long days = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d));
  const long long total =
      ((days * 24 + hh) * 60 + mi - offset_min) * 60'000LL + ss * 1000LL + ms;
  return Timestamp(std::chrono::milliseconds(total));
}

Timestamp now_utc() {
  return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

Clock system_clock() { return [] { return now_utc(); }; }

}  // namespace voice_ehr
