#include "doctest.h"

#include "viper/aprs.hpp"
#include "viper/error.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <random>

using namespace viper;
using namespace viper::aprs;
using nlohmann::json;

namespace {

AprsReport parse_tnc2_line(const std::string& line)
{
    const auto f = ax25::parse_tnc2(line);
    return parse_info(f.info, f.destination.callsign);
}

// Independent MIC-E decoder driven by lookup tables.
struct MiceTruth {
    double lat = 0, lon = 0;
    int speed = 0, course = 0;
    int msg_bits = 0;
    char sym_code = 0, sym_table = 0;
    std::optional<double> alt_m;
};

struct DestEntry {
    int digit;
    int msg;      // 1 when the message bit is set
    bool north;   // column 4
    bool lon100;  // column 5
    bool west;    // column 6
};

const std::map<char, DestEntry>& dest_table()
{
    static const std::map<char, DestEntry> t = [] {
        std::map<char, DestEntry> m;
        for (int d = 0; d < 10; ++d) {
            m[static_cast<char>('0' + d)] = {d, 0, false, false, false};
            m[static_cast<char>('P' + d)] = {d, 1, true, true, true};
        }
        return m;
    }();
    return t;
}

MiceTruth oracle_decode(const std::string& dest, const std::string& info)
{
    const auto& t = dest_table();
    MiceTruth r;
    int digits[6];
    for (int i = 0; i < 6; ++i)
        digits[i] = t.at(dest[static_cast<std::size_t>(i)]).digit;
    r.msg_bits = t.at(dest[0]).msg * 4 + t.at(dest[1]).msg * 2 + t.at(dest[2]).msg;
    const double lat_min = digits[2] * 10 + digits[3] + digits[4] / 10.0 + digits[5] / 100.0;
    r.lat = digits[0] * 10 + digits[1] + lat_min / 60.0;
    if (!t.at(dest[3]).north)
        r.lat = -r.lat;

    auto b = [&](std::size_t i) { return static_cast<unsigned char>(info[i]) - 28; };
    int deg = b(1);
    if (t.at(dest[4]).lon100)
        deg += 100;
    if (deg >= 180 && deg <= 189)
        deg -= 80;
    else if (deg >= 190 && deg <= 199)
        deg -= 190;
    int min = b(2);
    if (min >= 60)
        min -= 60;
    const int hun = b(3);
    r.lon = deg + (min + hun / 100.0) / 60.0;
    if (t.at(dest[5]).west)
        r.lon = -r.lon;

    const int sp = b(4), dc = b(5), se = b(6);
    r.speed = sp * 10 + dc / 10;
    if (r.speed >= 800)
        r.speed -= 800;
    r.course = (dc % 10) * 100 + se;
    if (r.course >= 400)
        r.course -= 400;
    r.sym_code = info[7];
    r.sym_table = info[8];

    for (std::size_t start : {std::size_t{9}, std::size_t{10}}) {
        if (info.size() >= start + 4 && info[start + 3] == '}') {
            const int v = (info[start] - 33) * 91 * 91 + (info[start + 1] - 33) * 91 + (info[start + 2] - 33);
            r.alt_m = v - 10000.0;
            break;
        }
    }
    return r;
}

geo::GeoFix random_fix(std::mt19937_64& rng, int quadrant)
{
    std::uniform_real_distribution<double> lat(0.0, 89.99), lon(0.0, 179.99), alt(0.0, 30000.0);
    geo::GeoFix f;
    f.lat = lat(rng) * ((quadrant & 1) ? -1 : 1);
    f.lon = lon(rng) * ((quadrant & 2) ? -1 : 1);
    f.alt_m = std::round(alt(rng));
    return f;
}

// Quantization of hundredths of a minute, in degrees, plus float slack.
constexpr double kMinuteStep = 0.01 / 60.0 + 1e-9;

} // namespace

TEST_CASE("golden corpus")
{
    std::ifstream in(VIPER_TEST_DATA_DIR "/aprs_corpus.json");
    REQUIRE(in);
    const auto corpus = json::parse(in);
    for (const auto& c : corpus) {
        const std::string line = c["tnc2"];
        CAPTURE(line);
        const auto r = parse_tnc2_line(line);
        CHECK(to_string(r.kind) == c["kind"].get<std::string>());
        if (c.contains("lat")) {
            REQUIRE(r.position);
            const double tol = c.value("pos_tol", 1e-9);
            CHECK(std::abs(r.position->lat - c["lat"].get<double>()) <= tol);
            CHECK(std::abs(r.position->lon - c["lon"].get<double>()) <= tol);
        }
        if (c.contains("symbol")) {
            const std::string s = c["symbol"];
            CHECK(r.symbol.table == s[0]);
            CHECK(r.symbol.code == s[1]);
        }
        if (c.contains("comment"))
            CHECK(r.comment == c["comment"].get<std::string>());
        if (c.contains("messaging"))
            CHECK(r.messaging == c["messaging"].get<bool>());
        if (c.contains("alt_m")) {
            REQUIRE(r.altitude_m);
            CHECK(*r.altitude_m == doctest::Approx(c["alt_m"].get<double>()));
        }
        if (c.contains("course")) {
            REQUIRE(r.course_deg);
            CHECK(*r.course_deg == doctest::Approx(c["course"].get<double>()));
        }
        if (c.contains("speed")) {
            REQUIRE(r.speed_knots);
            const double tol = c.value("speed_tol", 1e-9);
            CHECK(std::abs(*r.speed_knots - c["speed"].get<double>()) <= tol);
        }
        if (c.contains("ambiguity"))
            CHECK(r.ambiguity == c["ambiguity"].get<int>());
        if (c.contains("phg")) {
            REQUIRE(r.phg);
            CHECK(r.phg->power_w == c["phg"]["power_w"].get<double>());
            CHECK(r.phg->height_ft_haat == c["phg"]["height_ft"].get<double>());
            CHECK(r.phg->gain_db == c["phg"]["gain_db"].get<double>());
            CHECK(r.phg->directivity_deg == c["phg"]["directivity_deg"].get<int>());
        }
        if (c.contains("timestamp")) {
            REQUIRE(r.timestamp);
            const auto& t = c["timestamp"];
            const auto fmt = t["format"].get<std::string>();
            CHECK(r.timestamp->format == (fmt == "hms"         ? AprsTimestamp::Format::hms
                                          : fmt == "dhm_local" ? AprsTimestamp::Format::dhm_local
                                                               : AprsTimestamp::Format::dhm_zulu));
            CHECK(r.timestamp->day == t.value("day", 0));
            CHECK(r.timestamp->hour == t.value("hour", 0));
            CHECK(r.timestamp->minute == t.value("minute", 0));
            CHECK(r.timestamp->second == t.value("second", 0));
        }
        if (c.contains("mice_bits")) {
            REQUIRE(r.mice_status);
            CHECK(r.mice_status->bits == c["mice_bits"].get<int>());
            CHECK(r.mice_status->name() == c["mice_name"].get<std::string>());
        }
    }
}

TEST_CASE("plain position encoding")
{
    AprsReport r;
    r.kind = PacketKind::position_plain;
    r.position = geo::GeoFix{38.98516667, -76.948, 0, {}};
    r.symbol = {'/', '-'};
    r.comment = "test";
    CHECK(encode_position_plain(r) == "=3859.11N/07656.88W-test");

    r.position = geo::GeoFix{-0.001, 0.001, 0, {}};
    const auto s = encode_position_plain(r);
    CHECK(s.substr(1, 8) == "0000.06S");
    CHECK(s.substr(10, 9) == "00000.06E");

    AprsReport status;
    status.kind = PacketKind::status;
    CHECK_THROWS_AS(encode_position_plain(status), ValidationError);
}

TEST_CASE("plain position round trip in every quadrant")
{
    std::mt19937_64 rng(1);
    const ax25::Callsign dest = ax25::Callsign::parse("APRS");
    for (int i = 0; i < 1000; ++i) {
        AprsReport r;
        r.kind = PacketKind::position_plain;
        r.position = random_fix(rng, i % 4);
        r.position->alt_m = 0;
        const auto back = parse_info(encode_position_plain(r), dest);
        REQUIRE(back.position);
        REQUIRE(std::abs(back.position->lat - r.position->lat) <= kMinuteStep);
        REQUIRE(std::abs(back.position->lon - r.position->lon) <= kMinuteStep);
        // Truncation never moves the fix away from the equator or meridian.
        REQUIRE(std::abs(back.position->lat) <= std::abs(r.position->lat) + 1e-9);
    }
}

TEST_CASE("MIC-E round trip and quantization")
{
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> speed(0, 799.4), course(0, 359.4);
    for (int i = 0; i < 1000; ++i) {
        const auto fix = random_fix(rng, i % 4);
        const double spd = speed(rng), crs = course(rng);
        const int msg = static_cast<int>(rng() % 8);
        const auto enc = encode_mice(fix, crs, spd, msg);
        const auto r = decode_mice(ax25::Callsign::parse(enc.destination),
                                   std::span(reinterpret_cast<const std::uint8_t*>(enc.info.data()), enc.info.size()));
        REQUIRE(r.kind == PacketKind::mice);
        REQUIRE(r.position);
        REQUIRE(std::abs(r.position->lat - fix.lat) <= kMinuteStep);
        REQUIRE(std::abs(r.position->lon - fix.lon) <= kMinuteStep);
        REQUIRE(std::abs(*r.speed_knots - spd) <= 0.5 + 1e-9);
        REQUIRE(std::abs(*r.course_deg - crs) <= 0.5 + 1e-9);
        REQUIRE(r.altitude_m);
        REQUIRE(std::abs(*r.altitude_m - fix.alt_m) <= 0.5);
        REQUIRE(r.mice_status->bits == msg);
    }
}

TEST_CASE("MIC-E zero fix")
{
    const auto enc = encode_mice(geo::GeoFix{0, 0, 0, {}}, 0, 0, 7);
    const auto r = parse_info(enc.info, ax25::Callsign::parse(enc.destination));
    REQUIRE(r.position);
    CHECK(r.position->lat == 0.0);
    CHECK(r.position->lon == 0.0);
    CHECK(*r.speed_knots == 0.0);
    CHECK(*r.course_deg == 0.0);
    CHECK(r.mice_status->name() == "Off Duty");
}

TEST_CASE("MIC-E encoder agrees with the table-lookup decoder")
{
    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) {
        const auto fix = random_fix(rng, i % 4);
        const double spd = static_cast<double>(rng() % 800);
        const double crs = static_cast<double>(rng() % 360);
        const int msg = static_cast<int>(rng() % 8);
        const auto enc = encode_mice(fix, crs, spd, msg);
        const auto truth = oracle_decode(enc.destination, enc.info);
        const auto r = parse_info(enc.info, ax25::Callsign::parse(enc.destination));
        CAPTURE(enc.destination);
        CAPTURE(enc.info);
        REQUIRE(r.position);
        REQUIRE(std::abs(r.position->lat - truth.lat) <= 1e-9);
        REQUIRE(std::abs(r.position->lon - truth.lon) <= 1e-9);
        REQUIRE(*r.speed_knots == truth.speed);
        REQUIRE(*r.course_deg == truth.course);
        REQUIRE(truth.speed == static_cast<int>(spd));
        REQUIRE(truth.course == static_cast<int>(crs));
        REQUIRE(r.mice_status->bits == truth.msg_bits);
        REQUIRE(r.symbol.code == truth.sym_code);
        REQUIRE(r.symbol.table == truth.sym_table);
        REQUIRE(truth.alt_m);
        REQUIRE(*r.altitude_m == *truth.alt_m);
    }
}

TEST_CASE("MIC-E encoder range checks")
{
    const geo::GeoFix fix{10, 10, 0, {}};
    CHECK_THROWS_AS(encode_mice(fix, 0, 800, 0), ValidationError);
    CHECK_THROWS_AS(encode_mice(fix, 0, -1, 0), ValidationError);
    CHECK_THROWS_AS(encode_mice(fix, 361, 0, 0), ValidationError);
    CHECK_THROWS_AS(encode_mice(fix, 0, 0, 8), ValidationError);
    CHECK_THROWS_AS(encode_mice(geo::GeoFix{95, 0, 0, {}}, 0, 0, 0), ValidationError);
}

TEST_CASE("MIC-E decoder rejects bad destinations")
{
    const std::string info = "`hTtoXt>/";
    const std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(info.data()), info.size());
    CHECK_THROWS_AS(decode_mice(ax25::Callsign::parse("APRS"), bytes), ParseError);
    CHECK_THROWS_AS(decode_mice(ax25::Callsign::parse("S8UY1"), bytes), ParseError);
    CHECK_THROWS_AS(decode_mice(ax25::Callsign::parse("S8UY1Q"), bytes.first(5)), ParseError);
}

TEST_CASE("altitude comment")
{
    CHECK(*parse_altitude("/A=006000") == doctest::Approx(1828.8));
    CHECK(*parse_altitude("x/A=000000y") == 0.0);
    CHECK(*parse_altitude("/A=-00100") == doctest::Approx(-30.48));
    CHECK_FALSE(parse_altitude("no altitude here"));
    CHECK_FALSE(parse_altitude("/A=12"));
    CHECK(format_altitude(1828.8) == "/A=006000");
}

TEST_CASE("PHG")
{
    const auto p = parse_phg("PHG5132");
    REQUIRE(p);
    CHECK(*p == PhgData{25, 20, 3, 90});
    CHECK(*parse_phg("PHG0000") == PhgData{0, 10, 0, 0});
    CHECK_FALSE(parse_phg("plain comment"));
    CHECK_THROWS_AS(parse_phg("PHG5x32"), ParseError);
}

TEST_CASE("malformed positions name the field and offset")
{
    const auto dest = ax25::Callsign::parse("APRS");
    try {
        parse_info("!49X3.50N/07201.75W-", dest);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.field() == "latitude");
        CHECK(e.offset() == 1);
    }
    try {
        parse_info("!4903.50N/07201.75Q-", dest);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.field() == "longitude");
        CHECK(e.offset() == 18);
    }
    CHECK_THROWS_AS(parse_info("!4903.50N/0720", dest), ParseError);
    CHECK_THROWS_AS(parse_info("/0923z4903.50N/07201.75W-", dest), ParseError);
}

TEST_CASE("arbitrary info fields never crash the parser")
{
    std::mt19937_64 rng(4);
    const ax25::Callsign dests[] = {ax25::Callsign::parse("APRS"), ax25::Callsign::parse("S8UY1Q"),
                                    ax25::Callsign::parse("T2SP0W")};
    const std::string seeds[] = {"!4903.50N/07201.75W-", "`hTtoXt>/\">q}", "!/5L!!<*e7>7P[", "@092345z", ">"};
    for (int i = 0; i < 20000; ++i) {
        std::string info;
        if (i % 2) {
            info = seeds[rng() % 5];
            for (int k = 0; k < 3; ++k)
                if (!info.empty())
                    info[rng() % info.size()] = static_cast<char>(rng());
        } else {
            info.resize(rng() % 64 + 1);
            for (auto& c : info)
                c = static_cast<char>(rng());
        }
        try {
            parse_info(info, dests[rng() % 3]);
        } catch (const viper::Error&) {
        }
    }
}
