#include "viper/nmea.hpp"

#include "viper/coords.hpp"
#include "viper/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

namespace viper::nmea {

namespace {

int hex_value(char c)
{
    if (c >= '0' && c <= '9')
        return c - '0';
    if (c >= 'A' && c <= 'F')
        return c - 'A' + 10;
    if (c >= 'a' && c <= 'f')
        return c - 'a' + 10;
    return -1;
}

std::optional<double> number(const std::string& s)
{
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v))
        return std::nullopt;
    return v;
}

std::optional<int> integer(const std::string& s)
{
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        return std::nullopt;
    return v;
}

const std::string& field(const NmeaSentence& s, std::size_t i)
{
    static const std::string empty;
    return i < s.fields.size() ? s.fields[i] : empty;
}

// Milliseconds since midnight from "hhmmss[.sss]".
std::optional<std::int64_t> time_of_day(const std::string& t)
{
    if (t.size() < 6)
        return std::nullopt;
    for (std::size_t i = 0; i < 6; ++i)
        if (t[i] < '0' || t[i] > '9')
            return std::nullopt;
    const int h = (t[0] - '0') * 10 + (t[1] - '0');
    const int m = (t[2] - '0') * 10 + (t[3] - '0');
    const int s = (t[4] - '0') * 10 + (t[5] - '0');
    if (h > 23 || m > 59 || s > 60)
        return std::nullopt;
    std::int64_t ms = 0;
    if (t.size() > 6) {
        const auto frac = number("0" + t.substr(6));
        if (!frac || t[6] != '.')
            return std::nullopt;
        ms = std::llround(*frac * 1000.0);
    }
    return ((h * 60 + m) * 60 + s) * 1000LL + ms;
}

std::optional<std::chrono::sys_days> date(const std::string& d)
{
    using namespace std::chrono;
    if (d.size() != 6)
        return std::nullopt;
    for (const char c : d)
        if (c < '0' || c > '9')
            return std::nullopt;
    const int dd = (d[0] - '0') * 10 + (d[1] - '0');
    const int mm = (d[2] - '0') * 10 + (d[3] - '0');
    const int yy = (d[4] - '0') * 10 + (d[5] - '0');
    // Two-digit years pivot at 1980.
    const year_month_day ymd{year{yy < 80 ? 2000 + yy : 1900 + yy}, month{static_cast<unsigned>(mm)},
                             day{static_cast<unsigned>(dd)}};
    if (!ymd.ok())
        return std::nullopt;
    return sys_days{ymd};
}

// Updates `out` from a (value, hemisphere) pair. Returns false on a bad field.
bool coordinate(const std::string& value, const std::string& hemi, int degree_digits, char neg, char pos,
                double& out)
{
    if (value.empty() && hemi.empty())
        return true;
    const auto mag = coords::parse_ddmm(value, degree_digits);
    if (!mag || hemi.size() != 1 || (hemi[0] != neg && hemi[0] != pos))
        return false;
    out = hemi[0] == neg ? -*mag : *mag;
    return true;
}

std::string ddmm(double deg, int degree_digits, char pos, char neg)
{
    const auto dm = coords::split_degrees(std::fabs(deg), 10000);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%0*d%02d.%04d,%c", degree_digits, dm.degrees, dm.scaled_minutes / 10000,
                  dm.scaled_minutes % 10000, deg < 0 ? neg : pos);
    return buf;
}

std::string hhmmss(Timestamp t)
{
    using namespace std::chrono;
    const auto day = floor<days>(t);
    const hh_mm_ss<Duration> hms{t - day};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02d%02d%02d.%02d", static_cast<int>(hms.hours().count()),
                  static_cast<int>(hms.minutes().count()), static_cast<int>(hms.seconds().count()),
                  static_cast<int>(hms.subseconds().count() / 10));
    return buf;
}

} // namespace

std::uint8_t checksum(std::string_view payload)
{
    std::uint8_t x = 0;
    for (const char c : payload)
        x ^= static_cast<std::uint8_t>(c);
    return x;
}

std::string_view to_string(FixQuality q)
{
    switch (q) {
    case FixQuality::gps: return "gps";
    case FixQuality::dgps: return "dgps";
    default: return "none";
    }
}

NmeaSentence parse_sentence(std::string_view line)
{
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
        line.remove_suffix(1);
    if (line.empty() || line[0] != '$')
        throw FramingError("NMEA sentence must start with '$'");
    line.remove_prefix(1);

    NmeaSentence s;
    std::string_view payload = line;
    const auto star = line.rfind('*');
    if (star != std::string_view::npos) {
        payload = line.substr(0, star);
        const auto hex = line.substr(star + 1);
        if (hex.size() == 2 && hex_value(hex[0]) >= 0 && hex_value(hex[1]) >= 0) {
            const int want = hex_value(hex[0]) * 16 + hex_value(hex[1]);
            s.checksum_ok = want == checksum(payload);
        }
    }

    std::size_t start = 0;
    std::string address;
    bool first = true;
    while (true) {
        const auto comma = payload.find(',', start);
        const auto piece = payload.substr(start, comma == std::string_view::npos ? comma : comma - start);
        if (first) {
            address = std::string(piece);
            first = false;
        } else {
            s.fields.emplace_back(piece);
        }
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    if (address.size() < 5)
        throw FramingError("NMEA address field too short: '" + address + "'");
    // Proprietary "$P..." sentences have a one-letter talker.
    const std::size_t talker_len = address[0] == 'P' && address.size() != 5 ? 1 : 2;
    s.talker = address.substr(0, talker_len);
    s.type = address.substr(talker_len);
    return s;
}

std::string make_sentence(std::string_view payload)
{
    char tail[4];
    std::snprintf(tail, sizeof tail, "*%02X", checksum(payload));
    return "$" + std::string(payload) + tail;
}

OwnFix apply_sentence(OwnFix state, const NmeaSentence& s, Diagnostics& diag)
{
    if (!s.checksum_ok) {
        ++diag.bad_checksum;
        return state;
    }
    const bool gga = s.type == "GGA";
    const bool rmc = s.type == "RMC";
    if (!gga && !rmc) {
        ++diag.ignored;
        return state;
    }

    auto bad = [&] { ++diag.bad_field; };
    const std::string& t = field(s, 0);
    const auto tod = t.empty() ? std::nullopt : time_of_day(t);
    if (!t.empty() && !tod)
        bad();

    if (!coordinate(field(s, gga ? 1 : 2), field(s, gga ? 2 : 3), 2, 'S', 'N', state.position.lat))
        bad();
    if (!coordinate(field(s, gga ? 3 : 4), field(s, gga ? 4 : 5), 3, 'W', 'E', state.position.lon))
        bad();

    std::chrono::sys_days day = std::chrono::floor<std::chrono::days>(state.updated_at);
    if (gga) {
        if (const auto& q = field(s, 5); !q.empty()) {
            if (const auto v = integer(q)) {
                state.quality = *v == 0 ? FixQuality::none : (*v == 2 ? FixQuality::dgps : FixQuality::gps);
            } else {
                bad();
            }
        }
        if (const auto& n = field(s, 6); !n.empty()) {
            if (const auto v = integer(n); v && *v >= 0)
                state.satellites = *v;
            else
                bad();
        }
        if (const auto& a = field(s, 8); !a.empty()) {
            const auto v = number(a);
            if (v && *v >= -500.0 && *v <= 100000.0)
                state.position.alt_m = *v;
            else
                bad();
        }
    } else {
        const std::string& status = field(s, 1);
        if (status == "V") {
            state.quality = FixQuality::none;
        } else if (status == "A") {
            if (state.quality == FixQuality::none)
                state.quality = FixQuality::gps;
        } else if (!status.empty()) {
            bad();
        }
        if (const auto& sp = field(s, 6); !sp.empty()) {
            const auto v = number(sp);
            if (v && *v >= 0.0)
                state.speed_knots = *v;
            else
                bad();
        }
        if (const auto& c = field(s, 7); !c.empty()) {
            if (const auto v = number(c))
                state.course_deg = geo::normalize_degrees(*v);
            else
                bad();
        }
        if (const auto& d = field(s, 8); !d.empty()) {
            if (const auto v = date(d)) {
                day = *v;
                state.has_date = true;
            } else {
                bad();
            }
        }
    }
    if (tod)
        state.updated_at = Timestamp{day} + Duration{*tod};
    state.position.time = state.updated_at;
    return state;
}

std::optional<OwnFix> FixStream::push_line(std::string_view line)
{
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n' || line.back() == ' '))
        line.remove_suffix(1);
    if (line.empty())
        return std::nullopt;
    NmeaSentence s;
    try {
        s = parse_sentence(line);
    } catch (const FramingError&) {
        ++framing_errors_;
        return std::nullopt;
    }
    if (!s.checksum_ok || (s.type != "GGA" && s.type != "RMC")) {
        state_ = apply_sentence(state_, s, diag_); // counts the reason
        return std::nullopt;
    }
    state_ = apply_sentence(state_, s, diag_);
    return state_;
}

std::string make_gga(const geo::GeoFix& fix, int satellites)
{
    char tail[64];
    std::snprintf(tail, sizeof tail, ",1,%02d,0.9,%.1f,M,0.0,M,,", satellites, fix.alt_m);
    return make_sentence("GPGGA," + hhmmss(fix.time) + "," + ddmm(fix.lat, 2, 'N', 'S') + "," +
                         ddmm(fix.lon, 3, 'E', 'W') + tail);
}

std::string make_rmc(const geo::GeoFix& fix, double course_deg, double speed_knots)
{
    using namespace std::chrono;
    const year_month_day ymd{floor<days>(fix.time)};
    char tail[64];
    std::snprintf(tail, sizeof tail, ",%.1f,%.1f,%02u%02u%02d,,,A", speed_knots, course_deg,
                  static_cast<unsigned>(ymd.day()), static_cast<unsigned>(ymd.month()),
                  static_cast<int>(ymd.year()) % 100);
    return make_sentence("GPRMC," + hhmmss(fix.time) + ",A," + ddmm(fix.lat, 2, 'N', 'S') + "," +
                         ddmm(fix.lon, 3, 'E', 'W') + tail);
}

} // namespace viper::nmea
