#include "doctest.h"

#include "viper/error.hpp"
#include "viper/geo.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace viper;
using namespace viper::geo;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kRad = kPi / 180.0;

struct V3 {
    double x, y, z;
};

// Textbook geodetic-to-ECEF with the prime-vertical radius of curvature.
V3 oracle_ecef(double lat_deg, double lon_deg, double h)
{
    const double a = 6378137.0;
    const double f = 1.0 / 298.257223563;
    const double e2 = 2 * f - f * f;
    const double phi = lat_deg * kRad, lam = lon_deg * kRad;
    const double n = a / std::sqrt(1 - e2 * std::sin(phi) * std::sin(phi));
    return {(n + h) * std::cos(phi) * std::cos(lam), (n + h) * std::cos(phi) * std::sin(lam),
            (n * (1 - e2) + h) * std::sin(phi)};
}

double dot(const V3& a, const V3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

// Azimuth, elevation and range by projecting onto local unit vectors.
struct Look {
    double az, el, range;
};

Look oracle_look(const GeoFix& o, const GeoFix& t)
{
    const V3 p = oracle_ecef(o.lat, o.lon, o.alt_m);
    const V3 q = oracle_ecef(t.lat, t.lon, t.alt_m);
    const V3 d{q.x - p.x, q.y - p.y, q.z - p.z};
    const double phi = o.lat * kRad, lam = o.lon * kRad;
    const V3 east{-std::sin(lam), std::cos(lam), 0};
    const V3 north{-std::sin(phi) * std::cos(lam), -std::sin(phi) * std::sin(lam), std::cos(phi)};
    const V3 up{std::cos(phi) * std::cos(lam), std::cos(phi) * std::sin(lam), std::sin(phi)};
    const double e = dot(d, east), n = dot(d, north), u = dot(d, up);
    double az = std::atan2(e, n) / kRad;
    if (az < 0)
        az += 360;
    return {az, std::atan2(u, std::hypot(e, n)) / kRad, std::sqrt(dot(d, d))};
}

// Initial great-circle bearing on a sphere.
double haversine_bearing(double lat1, double lon1, double lat2, double lon2)
{
    const double p1 = lat1 * kRad, p2 = lat2 * kRad, dl = (lon2 - lon1) * kRad;
    const double y = std::sin(dl) * std::cos(p2);
    const double x = std::cos(p1) * std::sin(p2) - std::sin(p1) * std::cos(p2) * std::cos(dl);
    double b = std::atan2(y, x) / kRad;
    return b < 0 ? b + 360 : b;
}

double angle_diff(double a, double b)
{
    double d = std::fmod(a - b + 540.0, 360.0) - 180.0;
    return std::abs(d);
}

AntennaPattern small_pattern()
{
    // Symmetric 3-row table: 10 dBi at boresight falling linearly off axis.
    std::vector<AntennaPattern::Sample> s;
    for (int el : {-90, 0, 90})
        for (int az = -180; az <= 180; az += 30)
            s.push_back({double(az), double(el), 10.0 - std::abs(az) / 10.0 - std::abs(el) / 10.0});
    return AntennaPattern::from_samples(s);
}

} // namespace

TEST_CASE("geodetic to ECEF")
{
    const auto e0 = geodetic_to_ecef({0, 0, 0, {}});
    CHECK(e0.x == doctest::Approx(6378137.0));
    CHECK(std::abs(e0.y) < 1e-9);
    CHECK(std::abs(e0.z) < 1e-9);

    const auto pole = geodetic_to_ecef({90, 123, 0, {}});
    CHECK(std::abs(pole.x) < 1e-6);
    CHECK(std::abs(pole.y) < 1e-6);
    CHECK(pole.z == doctest::Approx(wgs84::b).epsilon(1e-12));

    const auto c = geodetic_to_ecef({38.9898, -76.9390, 50, {}});
    const auto o = oracle_ecef(38.9898, -76.9390, 50);
    CHECK(std::abs(c.x - o.x) < 1e-6);
    CHECK(std::abs(c.y - o.y) < 1e-6);
    CHECK(std::abs(c.z - o.z) < 1e-6);

    CHECK_THROWS_AS(geodetic_to_ecef({91, 0, 0, {}}), ValidationError);
    CHECK_THROWS_AS(geodetic_to_ecef({0, 0, 200000, {}}), ValidationError);
}

TEST_CASE("pointing agrees with the unit-vector oracle")
{
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> lat(-80, 80), lon(-180, 180), d(-0.5, 0.5), alt(0, 30000);
    for (int i = 0; i < 500; ++i) {
        GeoFix o{lat(rng), lon(rng), alt(rng) / 10, {}};
        GeoFix t{std::clamp(o.lat + d(rng), -90.0, 90.0), o.lon + d(rng), alt(rng), {}};
        if (t.lon > 180)
            t.lon -= 360;
        if (t.lon < -180)
            t.lon += 360;
        const auto p = pointing(o, t);
        const auto q = oracle_look(o, t);
        REQUIRE(angle_diff(p.azimuth_deg, q.az) < 1e-6);
        REQUIRE(std::abs(p.elevation_deg - q.el) < 1e-6);
        REQUIRE(std::abs(p.slant_range_m - q.range) < 1e-4);
        REQUIRE(p.azimuth_deg >= 0.0);
        REQUIRE(p.azimuth_deg < 360.0);
    }
}

TEST_CASE("azimuth matches the spherical bearing at short range")
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> lat(-60, 60), lon(-179, 179), d(-0.05, 0.05);
    for (int i = 0; i < 200; ++i) {
        const GeoFix o{lat(rng), lon(rng), 0, {}};
        const GeoFix t{o.lat + d(rng), o.lon + d(rng), 0, {}};
        // The ellipsoid bends bearings by at most a few tenths of a degree.
        REQUIRE(angle_diff(pointing(o, t).azimuth_deg, haversine_bearing(o.lat, o.lon, t.lat, t.lon)) < 0.25);
    }
}

TEST_CASE("vertical and degenerate geometry")
{
    const GeoFix o{38.99, -76.94, 100, {}};
    GeoFix up = o;
    up.alt_m += 5000;
    const auto p = pointing(o, up);
    CHECK(p.elevation_deg == doctest::Approx(90.0));
    CHECK(p.azimuth_undefined);
    CHECK(p.slant_range_m == doctest::Approx(5000.0).epsilon(1e-9));

    GeoFix down = o;
    down.alt_m -= 50;
    CHECK(pointing(o, down).elevation_deg == doctest::Approx(-90.0));
    CHECK(pointing(o, down).azimuth_undefined);

    CHECK_THROWS_AS(pointing(o, o), GeometryError);
    CHECK_THROWS_AS(pointing(o, GeoFix{0, 200, 0, {}}), ValidationError);
}

TEST_CASE("curvature drop and the flat-earth bound")
{
    const GeoFix o{38.99, -76.94, 0, {}};
    const GeoFix north = offset_enu(o, 0, 9000);
    const auto p = pointing(o, north);
    CHECK(angle_diff(p.azimuth_deg, 0.0) < 1e-6);
    const double drop_deg = -9000.0 / (2 * 6371000.0) / kRad;
    CHECK(p.elevation_deg == doctest::Approx(drop_deg).epsilon(0.02));
    CHECK(p.slant_range_m == doctest::Approx(9000.0).epsilon(1e-3));

    GeoFix high = offset_enu(o, 0, 9000);
    high.alt_m = 6000;
    const double flat = std::atan2(6000.0, 9000.0) / kRad;
    const auto q = pointing(o, high);
    CHECK(q.elevation_deg < flat);
    CHECK(q.elevation_deg > flat - 0.1);
}

TEST_CASE("offset_enu displacements")
{
    const GeoFix o{45, 10, 100, {}};
    const auto moved = offset_enu(o, 3000, -4000);
    const auto p = pointing(o, moved);
    CHECK(p.slant_range_m == doctest::Approx(5000.0).epsilon(1e-3));
    CHECK(angle_diff(p.azimuth_deg, std::atan2(3000.0, -4000.0) / kRad + 360.0) < 0.05);
    CHECK(moved.alt_m == 100);
}

TEST_CASE("antenna pattern interpolation")
{
    const auto p = small_pattern();
    CHECK(p.boresight_gain_dbi() == 10.0);
    CHECK(pattern_gain(p, 0, 0) == 10.0);
    CHECK(pattern_gain(p, 30, 0) == doctest::Approx(7.0));
    CHECK(pattern_gain(p, -30, 0) == pattern_gain(p, 30, 0));
    CHECK(pattern_gain(p, 15, 0) == doctest::Approx(8.5));
    CHECK(pattern_gain(p, 15, 45) == doctest::Approx(4.0));
    CHECK(pattern_gain(p, 370, 0) == doctest::Approx(pattern_gain(p, 10, 0)));
    CHECK(pattern_gain(p, 0, 120) == doctest::Approx(1.0));
    CHECK(gain_fraction(p, 0) == 1.0);
    CHECK(gain_fraction(p, 30) == doctest::Approx(std::pow(10.0, -0.3)));
    CHECK_THROWS_AS(gain_fraction(p, -1), PreconditionError);
}

TEST_CASE("antenna pattern loading errors")
{
    CHECK_THROWS_AS(AntennaPattern::from_samples({}), ConfigError);
    std::istringstream missing_header("0,0,1\n");
    CHECK_THROWS(AntennaPattern::load_csv(missing_header));
    std::istringstream gap("az_deg,el_deg,gain_dbi\n-180,-90,0\n180,-90,0\n-180,90,0\n");
    CHECK_THROWS_AS(AntennaPattern::load_csv(gap), ConfigError);
    std::vector<AntennaPattern::Sample> off_peak;
    for (int el : {-90, 0, 90})
        for (int az : {-180, 0, 90, 180})
            off_peak.push_back({double(az), double(el), az == 90 && el == 0 ? 20.0 : 0.0});
    CHECK_THROWS_AS(AntennaPattern::from_samples(off_peak), ConfigError);
    CHECK_THROWS_AS(AntennaPattern::load_csv(std::filesystem::path("/nonexistent/pattern.csv")), ConfigError);
}

TEST_CASE("bundled sample Yagi pattern")
{
    const auto p = AntennaPattern::load_csv(std::filesystem::path(VIPER_DATA_DIR "/antenna/yagi_144_sample.csv"));
    CHECK(p.boresight_gain_dbi() == doctest::Approx(17.39));
    CHECK(gain_fraction(p, 0) == 1.0);
    // Golden value pinned from the bundled table.
    CHECK(gain_fraction(p, 15) == doctest::Approx(0.312104).epsilon(1e-5));

    // Monotone over the main lobe, then a null below 1%.
    double prev = 1.0;
    double az = 1.0;
    for (; az < 90.0; az += 1.0) {
        const double g = gain_fraction(p, az);
        if (g > prev)
            break;
        prev = g;
    }
    CHECK(prev < 0.01);
    CHECK(az > 15.0);

    for (double a = 0; a <= 180; a += 7.5)
        REQUIRE(pattern_gain(p, a, 0) == doctest::Approx(pattern_gain(p, -a, 0)));
}
