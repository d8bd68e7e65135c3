#include "doctest.h"

#include "viper/error.hpp"
#include "viper/nmea.hpp"

#include <cstdio>
#include <string>

using namespace viper;
using namespace viper::nmea;

namespace {

// XOR over the characters between '$' and '*', formatted as two hex digits.
std::string xor_sentence(const std::string& payload)
{
    unsigned x = 0;
    for (char c : payload)
        x ^= static_cast<unsigned char>(c);
    char hh[4];
    std::snprintf(hh, sizeof hh, "%02X", x);
    return "$" + payload + "*" + hh;
}

const std::string kGga = "GPGGA,123519.00,3859.1100,N,07656.8800,W,1,08,0.9,545.4,M,46.9,M,,";
const std::string kRmc = "GPRMC,123520.00,A,3859.1200,N,07656.8900,W,022.4,084.4,230394,003.1,W";

} // namespace

TEST_CASE("checksum matches the XOR oracle")
{
    const auto line = xor_sentence(kGga);
    const auto s = parse_sentence(line);
    CHECK(s.checksum_ok);
    CHECK(s.talker == "GP");
    CHECK(s.type == "GGA");
    CHECK(s.fields.size() == 14);
    CHECK(make_sentence(kGga) == line);

    std::string corrupted = line;
    corrupted[10] = corrupted[10] == '1' ? '2' : '1';
    const auto bad = parse_sentence(corrupted);
    CHECK_FALSE(bad.checksum_ok);
    CHECK(bad.fields.size() == 14);

    CHECK_FALSE(parse_sentence("$" + kGga).checksum_ok); // missing checksum
    CHECK(parse_sentence(line + "\r\n").checksum_ok);
}

TEST_CASE("framing errors")
{
    CHECK_THROWS_AS(parse_sentence("GPGGA,1,2*00"), FramingError);
    CHECK_THROWS_AS(parse_sentence("$GPG*00"), FramingError);
    CHECK_THROWS_AS(parse_sentence(""), FramingError);
}

TEST_CASE("unknown sentence types pass through without a fix update")
{
    const auto s = parse_sentence("$GPXXX*00");
    CHECK(s.type == "XXX");
    FixStream fs;
    CHECK_FALSE(fs.push_line(xor_sentence("GPXXX,1,2")));
    CHECK(fs.diagnostics().ignored == 1);
}

TEST_CASE("GGA position and altitude")
{
    Diagnostics d;
    const auto fix = apply_sentence({}, parse_sentence(xor_sentence(kGga)), d);
    CHECK(fix.position.lat == doctest::Approx(38.98516667).epsilon(1e-9));
    CHECK(fix.position.lon == doctest::Approx(-76.948).epsilon(1e-9));
    CHECK(fix.position.alt_m == doctest::Approx(545.4));
    CHECK(fix.quality == FixQuality::gps);
    CHECK(fix.satellites == 8);
    CHECK(format_iso8601(fix.updated_at) == "1970-01-01T12:35:19.000Z");
    CHECK_FALSE(fix.usable()); // no date yet

    const auto empty_alt = apply_sentence(
        fix, parse_sentence(xor_sentence("GPGGA,123521.00,3859.1100,N,07656.8800,W,1,08,0.9,,M,,M,,")), d);
    CHECK(empty_alt.position.alt_m == doctest::Approx(545.4));
}

TEST_CASE("RMC date, course and speed; GGA reuses the date")
{
    FixStream fs;
    auto f = fs.push_line(xor_sentence(kRmc));
    REQUIRE(f);
    CHECK(f->has_date);
    CHECK(format_iso8601(f->updated_at) == "1994-03-23T12:35:20.000Z");
    CHECK(*f->speed_knots == doctest::Approx(22.4));
    CHECK(*f->course_deg == doctest::Approx(84.4));
    CHECK(f->position.time == f->updated_at);

    f = fs.push_line(xor_sentence("GPGGA,123521.50,3859.1300,N,07656.9000,W,2,09,0.9,100.0,M,,M,,"));
    REQUIRE(f);
    CHECK(format_iso8601(f->updated_at) == "1994-03-23T12:35:21.500Z");
    CHECK(f->quality == FixQuality::dgps);
    CHECK(f->usable());

    // Two-digit years from 80 onward are 19xx.
    f = fs.push_line(xor_sentence("GPRMC,000000.00,A,3859.1200,N,07656.8900,W,0,0,010124,,"));
    REQUIRE(f);
    CHECK(format_iso8601(f->updated_at) == "2024-01-01T00:00:00.000Z");
}

TEST_CASE("void RMC keeps the stale position")
{
    FixStream fs;
    fs.push_line(xor_sentence(kGga));
    const auto f = fs.push_line(xor_sentence("GPRMC,123530.00,V,,,,,,,230394,,"));
    REQUIRE(f);
    CHECK(f->quality == FixQuality::none);
    CHECK_FALSE(f->usable());
    CHECK(f->position.lat == doctest::Approx(38.98516667).epsilon(1e-9));
}

TEST_CASE("bad fields leave values and are counted")
{
    FixStream fs;
    fs.push_line(xor_sentence(kGga));
    const auto f = fs.push_line(xor_sentence("GPGGA,123522.00,38x9.1100,N,07656.8800,W,1,08,0.9,600.0,M,,M,,"));
    REQUIRE(f);
    CHECK(f->position.lat == doctest::Approx(38.98516667).epsilon(1e-9));
    CHECK(f->position.alt_m == doctest::Approx(600.0));
    CHECK(fs.diagnostics().bad_field >= 1);

    CHECK_FALSE(fs.push_line("garbage"));
    CHECK(fs.framing_errors() == 1);
    std::string bad = xor_sentence(kGga);
    bad[8] = '9';
    CHECK_FALSE(fs.push_line(bad));
    CHECK(fs.diagnostics().bad_checksum == 1);
}

TEST_CASE("generated sentences parse back")
{
    geo::GeoFix fix{-33.8688, 151.2093, 58.0, parse_iso8601("2024-05-01T14:00:07.250Z")};
    FixStream fs;
    fs.push_line(make_rmc(fix, 271.5, 3.2));
    const auto f = fs.push_line(make_gga(fix, 11));
    REQUIRE(f);
    CHECK(f->position.lat == doctest::Approx(fix.lat).epsilon(1e-6));
    CHECK(f->position.lon == doctest::Approx(fix.lon).epsilon(1e-6));
    CHECK(f->position.alt_m == doctest::Approx(58.0));
    CHECK(f->satellites == 11);
    CHECK(*f->course_deg == doctest::Approx(271.5));
    CHECK(f->updated_at == parse_iso8601("2024-05-01T14:00:07.250Z"));
    CHECK(parse_sentence(make_gga(fix)).checksum_ok);
}
