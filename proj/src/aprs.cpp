#include "viper/aprs.hpp"

#include "viper/coords.hpp"
#include "viper/error.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>

namespace viper::aprs {

namespace {

constexpr double kFeet = 0.3048;

bool digit(char c) { return c >= '0' && c <= '9'; }

std::string_view as_text(std::span<const std::uint8_t> bytes)
{
    return {reinterpret_cast<const char*>(bytes.data()), bytes.size()};
}

// Offsets are reported relative to the start of the info field.
[[noreturn]] void fail(const char* field, std::size_t offset, const std::string& what)
{
    throw ParseError(field, offset, what);
}

double ambiguity_center_minutes(int level)
{
    switch (level) {
    case 1: return 0.05;
    case 2: return 0.5;
    case 3: return 5.0;
    case 4: return 30.0;
    default: return 0.0;
    }
}

// Minute digit positions inside "DDMM.mm" counted from the right, in the
// order APRS masks them.
constexpr int kMaskOrder[4] = {6, 5, 3, 2};

struct PlainPosition {
    double lat = 0.0;
    double lon = 0.0;
    int ambiguity = 0;
};

PlainPosition parse_plain_position(std::string_view info, std::size_t p)
{
    if (info.size() < p + 19)
        fail("position", p, "plain position needs 19 bytes");
    std::string lat(info.substr(p, 7));
    const char ns = info[p + 7];
    std::string lon(info.substr(p + 9, 8));
    const char ew = info[p + 17];

    // Count contiguous trailing spaces in mask order.
    int level = 0;
    for (int k = 0; k < 4; ++k) {
        if (lat[static_cast<std::size_t>(kMaskOrder[k])] == ' ')
            level = k + 1;
        else
            break;
    }
    for (int k = 0; k < level; ++k) {
        lat[static_cast<std::size_t>(kMaskOrder[k])] = '0';
        lon[static_cast<std::size_t>(kMaskOrder[k]) + 1] = '0';
    }
    if (lat[4] != '.')
        fail("latitude", p + 4, "expected '.'");
    if (lon[5] != '.')
        fail("longitude", p + 14, "expected '.'");
    for (std::size_t i = 0; i < lon.size(); ++i)
        if (lon[i] == ' ')
            lon[i] = '0';

    const auto lat_deg = coords::parse_ddmm(lat, 2);
    if (!lat_deg || *lat_deg > 90.0)
        fail("latitude", p, "malformed latitude digits '" + std::string(info.substr(p, 7)) + "'");
    const auto lon_deg = coords::parse_ddmm(lon, 3);
    if (!lon_deg || *lon_deg > 180.0)
        fail("longitude", p + 9, "malformed longitude digits '" + std::string(info.substr(p + 9, 8)) + "'");
    if (ns != 'N' && ns != 'S')
        fail("latitude", p + 7, "hemisphere must be N or S");
    if (ew != 'E' && ew != 'W')
        fail("longitude", p + 17, "hemisphere must be E or W");

    const double center = ambiguity_center_minutes(level) / 60.0;
    PlainPosition out;
    out.lat = std::min(*lat_deg + center, 90.0) * (ns == 'S' ? -1.0 : 1.0);
    out.lon = std::min(*lon_deg + center, 180.0) * (ew == 'W' ? -1.0 : 1.0);
    out.ambiguity = level;
    return out;
}

// An altitude outside the fix sanity bound is dropped; the position is kept.
void set_position(AprsReport& r, geo::GeoFix fix)
{
    fix.alt_m = r.altitude_m.value_or(0.0);
    if (!fix.is_valid()) {
        fix.alt_m = 0.0;
        r.altitude_m.reset();
    }
    r.position = fix;
}

bool compressed_table(char c)
{
    return c == '/' || c == '\\' || (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'j');
}

long base91(std::string_view s, std::size_t offset, const char* field)
{
    long v = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const int c = static_cast<unsigned char>(s[i]);
        if (c < 33 || c > 123)
            fail(field, offset + i, "byte outside the base-91 alphabet");
        v = v * 91 + (c - 33);
    }
    return v;
}

void parse_compressed(std::string_view info, std::size_t p, AprsReport& r)
{
    if (info.size() < p + 13)
        fail("position", p, "compressed position needs 13 bytes");
    r.symbol.table = info[p];
    const long y = base91(info.substr(p + 1, 4), p + 1, "latitude");
    const long x = base91(info.substr(p + 5, 4), p + 5, "longitude");
    r.symbol.code = info[p + 9];
    const double lat = 90.0 - static_cast<double>(y) / 380926.0;
    const double lon = -180.0 + static_cast<double>(x) / 190463.0;
    if (lat < -90.0 || lat > 90.0)
        fail("latitude", p + 1, "compressed latitude out of range");
    if (lon < -180.0 || lon > 180.0)
        fail("longitude", p + 5, "compressed longitude out of range");

    geo::GeoFix fix;
    fix.lat = lat;
    fix.lon = lon;
    const char c = info[p + 10];
    const char s = info[p + 11];
    const int t = static_cast<unsigned char>(info[p + 12]) - 33;
    if (c != ' ') {
        const int cv = static_cast<unsigned char>(c) - 33;
        const int sv = static_cast<unsigned char>(s) - 33;
        if (cv < 0 || sv < 0 || cv > 90 || sv > 90 || t < 0 || t > 90)
            fail("cs", p + 10, "byte outside the base-91 alphabet");
        if (((t >> 3) & 0x03) == 0x02) {
            r.altitude_m = std::pow(1.002, cv * 91 + sv) * kFeet;
        } else if (cv <= 89) {
            r.course_deg = geo::normalize_degrees(cv * 4.0);
            r.speed_knots = std::pow(1.08, sv) - 1.0;
        }
        // '{' is a radio range; not used.
    }
    r.kind = PacketKind::position_compressed;
    r.comment = std::string(info.substr(p + 13));
    if (!r.altitude_m)
        r.altitude_m = parse_altitude(r.comment);
    set_position(r, fix);
}

AprsTimestamp parse_timestamp(std::string_view info, std::size_t p)
{
    if (info.size() < p + 7)
        fail("timestamp", p, "timestamp needs 7 bytes");
    for (std::size_t i = 0; i < 6; ++i)
        if (!digit(info[p + i]))
            fail("timestamp", p + i, "expected a digit");
    auto two = [&](std::size_t i) { return (info[p + i] - '0') * 10 + (info[p + i + 1] - '0'); };
    AprsTimestamp ts;
    switch (info[p + 6]) {
    case 'z':
    case '/':
        ts.format = info[p + 6] == 'z' ? AprsTimestamp::Format::dhm_zulu : AprsTimestamp::Format::dhm_local;
        ts.day = two(0);
        ts.hour = two(2);
        ts.minute = two(4);
        if (ts.day < 1 || ts.day > 31)
            fail("timestamp", p, "day out of range");
        break;
    case 'h':
        ts.format = AprsTimestamp::Format::hms;
        ts.hour = two(0);
        ts.minute = two(2);
        ts.second = two(4);
        if (ts.second > 59)
            fail("timestamp", p + 4, "second out of range");
        break;
    default:
        fail("timestamp", p + 6, "unknown timestamp format");
    }
    if (ts.hour > 23 || ts.minute > 59)
        fail("timestamp", p, "time of day out of range");
    return ts;
}

// Course/speed or PHG data extension immediately after the symbol code.
std::string_view parse_extension(std::string_view comment, AprsReport& r, std::size_t offset)
{
    if (comment.size() >= 7 && digit(comment[0]) && digit(comment[1]) && digit(comment[2]) &&
        comment[3] == '/' && digit(comment[4]) && digit(comment[5]) && digit(comment[6])) {
        const int course = (comment[0] - '0') * 100 + (comment[1] - '0') * 10 + (comment[2] - '0');
        const int speed = (comment[4] - '0') * 100 + (comment[5] - '0') * 10 + (comment[6] - '0');
        if (course <= 360) {
            r.course_deg = geo::normalize_degrees(course);
            r.speed_knots = speed;
        }
        return comment.substr(7);
    }
    if (comment.size() >= 3 && comment.substr(0, 3) == "PHG") {
        try {
            r.phg = parse_phg(comment.substr(0, std::min<std::size_t>(7, comment.size())));
        } catch (const ParseError& e) {
            throw ParseError("phg", offset + e.offset(), "PHG codes must be digits");
        }
        return comment.substr(7);
    }
    return comment;
}

AprsReport parse_position(std::string_view info, std::size_t p, AprsReport r)
{
    if (p >= info.size())
        fail("position", p, "missing position");
    const char first = info[p];
    if (digit(first)) {
        const auto pos = parse_plain_position(info, p);
        r.kind = PacketKind::position_plain;
        r.symbol = {info[p + 8], info[p + 18]};
        r.ambiguity = pos.ambiguity;
        const auto rest = parse_extension(info.substr(p + 19), r, p + 19);
        r.comment = std::string(rest);
        r.altitude_m = parse_altitude(r.comment);
        geo::GeoFix fix;
        fix.lat = pos.lat;
        fix.lon = pos.lon;
        set_position(r, fix);
        return r;
    }
    if (compressed_table(first)) {
        parse_compressed(info, p, r);
        return r;
    }
    fail("position", p, "neither a plain nor a compressed position");
}

struct MiceChar {
    int digit = -1;  // -1 for an ambiguity space
    int msg = 0;     // 0, 1 (standard) or 2 (custom)
    bool flag = false; // N, +100 or W for characters 4-6
};

MiceChar classify(char c, std::size_t index)
{
    MiceChar m;
    if (c >= '0' && c <= '9') {
        m.digit = c - '0';
    } else if (c >= 'A' && c <= 'J' && index < 3) {
        m.digit = c - 'A';
        m.msg = 2;
    } else if (c == 'K' && index < 3) {
        m.msg = 2;
    } else if (c == 'L') {
    } else if (c >= 'P' && c <= 'Y') {
        m.digit = c - 'P';
        m.msg = 1;
        m.flag = true;
    } else if (c == 'Z') {
        m.msg = 1;
        m.flag = true;
    } else {
        fail("destination", index, std::string("character '") + c + "' is not MIC-E encodable");
    }
    return m;
}

} // namespace

std::string_view to_string(PacketKind kind)
{
    switch (kind) {
    case PacketKind::position_plain: return "position_plain";
    case PacketKind::position_compressed: return "position_compressed";
    case PacketKind::mice: return "mice";
    case PacketKind::status: return "status";
    case PacketKind::other: return "other";
    }
    return "other";
}

std::string MiceStatus::name() const
{
    static const char* const standard[8] = {"Emergency", "Priority",  "Special",  "Committed",
                                            "Returning", "In Service", "En Route", "Off Duty"};
    if (type == Type::unknown)
        return "Unknown";
    if (bits == 0)
        return "Emergency";
    if (type == Type::custom)
        return "Custom-" + std::to_string(7 - bits);
    return standard[bits & 7];
}

AprsReport parse_info(std::span<const std::uint8_t> info, const ax25::Callsign& destination)
{
    if (info.empty())
        throw ParseError("data type", 0, "empty info field");
    const std::string_view text = as_text(info);
    AprsReport r;
    switch (text[0]) {
    case '!':
    case '=':
        r.messaging = text[0] == '=';
        return parse_position(text, 1, r);
    case '/':
    case '@':
        r.messaging = text[0] == '@';
        r.timestamp = parse_timestamp(text, 1);
        return parse_position(text, 8, r);
    case '`':
    case '\'':
        return decode_mice(destination, info);
    case '>':
        r.kind = PacketKind::status;
        r.comment = std::string(text.substr(1));
        return r;
    default:
        r.kind = PacketKind::other;
        r.comment = std::string(text);
        return r;
    }
}

AprsReport parse_info(std::string_view info, const ax25::Callsign& destination)
{
    return parse_info(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(info.data()),
                                                    info.size()),
                      destination);
}

std::string encode_position_plain(const AprsReport& report)
{
    if (report.kind != PacketKind::position_plain)
        throw ValidationError("encode_position_plain: report is not a plain position");
    if (!report.position)
        throw ValidationError("encode_position_plain: position missing");
    report.position->validate();

    const auto lat = coords::split_degrees(std::fabs(report.position->lat), 100);
    const auto lon = coords::split_degrees(std::fabs(report.position->lon), 100);
    char buf[64];
    std::snprintf(buf, sizeof buf, "=%02d%02d.%02d%c%c%03d%02d.%02d%c%c", lat.degrees,
                  lat.scaled_minutes / 100, lat.scaled_minutes % 100, report.position->lat < 0 ? 'S' : 'N',
                  report.symbol.table, lon.degrees, lon.scaled_minutes / 100, lon.scaled_minutes % 100,
                  report.position->lon < 0 ? 'W' : 'E', report.symbol.code);
    return std::string(buf) + report.comment;
}

MiceEncoded encode_mice(const geo::GeoFix& fix, double course_deg, double speed_knots, int msg_code,
                        const MiceOptions& opts)
{
    fix.validate();
    if (!(msg_code >= 0 && msg_code <= 7))
        throw ValidationError("MIC-E message code must be 0..7");
    const long speed = std::lround(speed_knots);
    const long course_rounded = std::lround(course_deg);
    if (!(speed_knots >= 0.0) || speed > 799)
        throw ValidationError("MIC-E speed must be within 0..799 knots");
    if (!(course_deg >= 0.0) || course_rounded > 360)
        throw ValidationError("MIC-E course must be within 0..360 degrees");
    const long course = course_rounded % 360;

    const auto lat = coords::split_degrees(std::fabs(fix.lat), 100);
    auto lon = coords::split_degrees(std::fabs(fix.lon), 100);
    if (lon.degrees >= 180) {
        // 180 degrees is outside the MIC-E longitude table.
        lon.degrees = 179;
        lon.scaled_minutes = 5999;
    }
    const int digits[6] = {lat.degrees / 10, lat.degrees % 10, lat.scaled_minutes / 1000,
                           (lat.scaled_minutes / 100) % 10, (lat.scaled_minutes / 10) % 10,
                           lat.scaled_minutes % 10};
    const bool lon_offset = lon.degrees < 10 || lon.degrees >= 100;
    const bool flags[6] = {((msg_code >> 2) & 1) != 0, ((msg_code >> 1) & 1) != 0, (msg_code & 1) != 0,
                           fix.lat >= 0.0, lon_offset, fix.lon < 0.0};

    MiceEncoded out;
    for (int i = 0; i < 6; ++i)
        out.destination += static_cast<char>((flags[i] ? 'P' : '0') + digits[i]);

    int d = lon.degrees;
    if (d < 10)
        d += 90;
    else if (d >= 100 && d <= 109)
        d -= 20;
    else if (d >= 110)
        d -= 100;
    const int m = lon.scaled_minutes / 100;
    const int h = lon.scaled_minutes % 100;

    out.info += opts.current_fix ? '`' : '\'';
    out.info += static_cast<char>(d + 28);
    out.info += static_cast<char>((m < 10 ? m + 60 : m) + 28);
    out.info += static_cast<char>(h + 28);
    const long sp = speed / 10;
    out.info += static_cast<char>((speed < 200 ? sp + 80 : sp) + 28);
    // Course hundreds are sent with the +400 offset to stay printable.
    out.info += static_cast<char>((speed % 10) * 10 + course / 100 + 4 + 28);
    out.info += static_cast<char>(course % 100 + 28);
    out.info += opts.symbol.code;
    out.info += opts.symbol.table;
    if (opts.include_altitude) {
        long v = std::lround(fix.alt_m) + 10000;
        char alt[4] = {0, 0, 0, '}'};
        for (int i = 2; i >= 0; --i) {
            alt[i] = static_cast<char>(v % 91 + 33);
            v /= 91;
        }
        out.info.append(alt, 4);
    }
    out.info += opts.comment;
    return out;
}

AprsReport decode_mice(const ax25::Callsign& destination, std::span<const std::uint8_t> info)
{
    const std::string& dest = destination.base;
    if (dest.size() != 6)
        fail("destination", dest.size(), "MIC-E destination needs six characters");
    if (info.size() < 9)
        fail("mice", info.size(), "MIC-E info field needs at least 9 bytes");
    if (info[0] != 0x60 && info[0] != 0x27)
        fail("mice", 0, "not a MIC-E data type");

    MiceChar c[6];
    for (std::size_t i = 0; i < 6; ++i)
        c[i] = classify(dest[i], i);

    AprsReport r;
    r.kind = PacketKind::mice;

    // Latitude digits with ambiguity masking from the right.
    int level = 0;
    {
        const int order[4] = {5, 4, 3, 2};
        for (int k = 0; k < 4; ++k) {
            if (c[order[k]].digit < 0)
                level = k + 1;
            else
                break;
        }
        for (int i = 0; i < 6; ++i)
            if (c[i].digit < 0 && i < 6 - level)
                fail("destination", static_cast<std::size_t>(i), "ambiguity space out of order");
    }
    auto dig = [&](int i) { return c[i].digit < 0 ? 0 : c[i].digit; };
    const int lat_deg = dig(0) * 10 + dig(1);
    const double lat_min = dig(2) * 10 + dig(3) + (dig(4) * 10 + dig(5)) / 100.0 +
                           ambiguity_center_minutes(level);
    if (lat_deg > 90 || (lat_deg == 90 && lat_min > 0.0) || lat_min >= 60.0)
        fail("destination", 0, "latitude out of range");
    const bool north = c[3].flag;
    const bool offset = c[4].flag;
    const bool west = c[5].flag;

    // Message bits.
    bool any_std = false, any_custom = false;
    int bits = 0;
    for (int i = 0; i < 3; ++i) {
        bits = (bits << 1) | (c[i].msg ? 1 : 0);
        any_std |= c[i].msg == 1;
        any_custom |= c[i].msg == 2;
    }
    MiceStatus status;
    status.bits = bits;
    status.type = any_std && any_custom ? MiceStatus::Type::unknown
                  : any_custom          ? MiceStatus::Type::custom
                                        : MiceStatus::Type::standard;
    r.mice_status = status;

    auto byte = [&](std::size_t i, const char* field) {
        const int v = static_cast<int>(info[i]) - 28;
        if (v < 0 || v > 99)
            fail(field, i, "byte outside the MIC-E range");
        return v;
    };
    int d = byte(1, "longitude");
    if (offset)
        d += 100;
    if (d >= 180 && d <= 189)
        d -= 80;
    else if (d >= 190 && d <= 199)
        d -= 190;
    int m = byte(2, "longitude");
    if (m >= 60)
        m -= 60;
    const int h = byte(3, "longitude");
    if (d > 179)
        fail("longitude", 1, "degrees out of range");
    double lon_min = m + h / 100.0 + ambiguity_center_minutes(level);
    if (lon_min >= 60.0)
        lon_min = 59.99;

    const int sp = byte(4, "speed");
    const int dc = byte(5, "speed");
    const int se = byte(6, "course");
    int speed = sp * 10 + dc / 10;
    if (speed >= 800)
        speed -= 800;
    int course = (dc % 10) * 100 + se;
    if (course >= 400)
        course -= 400;
    if (course <= 360)
        r.course_deg = geo::normalize_degrees(course);
    r.speed_knots = speed;

    r.symbol = {static_cast<char>(info[8]), static_cast<char>(info[7])};
    r.ambiguity = level;

    std::string_view rest = as_text(info.subspan(9));
    auto take_altitude = [&](std::size_t skip) {
        if (rest.size() >= skip + 4 && rest[skip + 3] == '}') {
            long v = 0;
            for (std::size_t i = 0; i < 3; ++i) {
                const int ch = static_cast<unsigned char>(rest[skip + i]);
                if (ch < 33 || ch > 123)
                    return false;
                v = v * 91 + (ch - 33);
            }
            r.altitude_m = static_cast<double>(v - 10000);
            rest = rest.substr(skip + 4);
            return true;
        }
        return false;
    };
    if (!take_altitude(0) && !rest.empty()) {
        const char t = rest[0];
        if (t == ' ' || t == '>' || t == ']' || t == '`' || t == '\'')
            take_altitude(1);
    }
    r.comment = std::string(rest);
    if (!r.altitude_m)
        r.altitude_m = parse_altitude(r.comment);

    geo::GeoFix fix;
    fix.lat = coords::dm_to_degrees(lat_deg, lat_min, !north);
    fix.lon = coords::dm_to_degrees(d, lon_min, west);
    set_position(r, fix);
    return r;
}

std::optional<double> parse_altitude(std::string_view comment)
{
    std::size_t from = 0;
    while (true) {
        const auto at = comment.find("/A=", from);
        if (at == std::string_view::npos || at + 9 > comment.size())
            return std::nullopt;
        const std::string_view v = comment.substr(at + 3, 6);
        bool ok = true;
        for (std::size_t i = 0; i < 6; ++i)
            ok &= digit(v[i]) || (i == 0 && v[i] == '-');
        if (ok && v[0] == '-' && v.size() == 6) {
            long feet = 0;
            for (std::size_t i = 1; i < 6; ++i)
                feet = feet * 10 + (v[i] - '0');
            return -static_cast<double>(feet) * kFeet;
        }
        if (ok) {
            long feet = 0;
            for (const char ch : v)
                feet = feet * 10 + (ch - '0');
            return static_cast<double>(feet) * kFeet;
        }
        from = at + 1;
    }
}

std::optional<PhgData> parse_phg(std::string_view comment)
{
    const auto at = comment.find("PHG");
    if (at == std::string_view::npos)
        return std::nullopt;
    if (at + 7 > comment.size())
        fail("phg", at + 3, "PHG needs four digit codes");
    int code[4];
    for (std::size_t i = 0; i < 4; ++i) {
        const char ch = comment[at + 3 + i];
        if (!digit(ch))
            fail("phg", at + 3 + i, std::string("non-digit PHG code '") + ch + "'");
        code[i] = ch - '0';
    }
    PhgData phg;
    phg.power_w = code[0] * code[0];
    phg.height_ft_haat = 10.0 * std::pow(2.0, code[1]);
    phg.gain_db = code[2];
    phg.directivity_deg = code[3] * 45;
    return phg;
}

std::string format_altitude(double meters)
{
    const long feet = std::lround(meters / kFeet);
    char buf[16];
    if (feet < 0)
        std::snprintf(buf, sizeof buf, "/A=-%05ld", std::min(-feet, 99999L));
    else
        std::snprintf(buf, sizeof buf, "/A=%06ld", std::min(feet, 999999L));
    return buf;
}

} // namespace viper::aprs
