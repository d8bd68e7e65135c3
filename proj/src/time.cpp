#include "viper/time.hpp"

#include "viper/error.hpp"

#include <cstdio>

namespace viper {

std::string format_iso8601(Timestamp t)
{
    using namespace std::chrono;
    const auto day = floor<days>(t);
    const year_month_day ymd{day};
    const hh_mm_ss<Duration> hms{t - day};
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()), static_cast<int>(hms.subseconds().count()));
    return buf;
}

Timestamp parse_iso8601(const std::string& text)
{
    using namespace std::chrono;
    auto num = [&](std::size_t at, std::size_t len, const char* field) {
        if (at + len > text.size())
            throw ParseError(field, at, "truncated timestamp");
        int v = 0;
        for (std::size_t i = at; i < at + len; ++i) {
            if (text[i] < '0' || text[i] > '9')
                throw ParseError(field, i, "expected a digit");
            v = v * 10 + (text[i] - '0');
        }
        return v;
    };
    auto expect = [&](std::size_t at, char c) {
        if (at >= text.size() || text[at] != c)
            throw ParseError("timestamp", at, std::string("expected '") + c + "'");
    };
    const int y = num(0, 4, "year");
    expect(4, '-');
    const int mo = num(5, 2, "month");
    expect(7, '-');
    const int d = num(8, 2, "day");
    expect(10, 'T');
    const int h = num(11, 2, "hour");
    expect(13, ':');
    const int mi = num(14, 2, "minute");
    expect(16, ':');
    const int s = num(17, 2, "second");
    std::size_t p = 19;
    int ms = 0;
    if (p < text.size() && text[p] == '.') {
        ++p;
        int scale = 100;
        const std::size_t start = p;
        while (p < text.size() && text[p] >= '0' && text[p] <= '9') {
            ms += (text[p] - '0') * scale;
            scale /= 10;
            ++p;
        }
        if (p == start)
            throw ParseError("fraction", p, "expected a digit");
    }
    expect(p, 'Z');
    if (p + 1 != text.size())
        throw ParseError("timestamp", p + 1, "trailing characters");
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok())
        throw ParseError("date", 0, "invalid calendar date");
    if (h > 23 || mi > 59 || s > 59)
        throw ParseError("time", 11, "time of day out of range");
    return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s} + Duration{ms};
}

} // namespace viper
