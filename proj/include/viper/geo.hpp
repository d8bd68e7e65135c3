#pragma once

// WGS-84 geodesy and antenna pointing.

#include "viper/time.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace viper::geo {

namespace wgs84 {
inline constexpr double a = 6378137.0;
inline constexpr double f = 1.0 / 298.257223563;
inline constexpr double b = a * (1.0 - f);
inline constexpr double e2 = f * (2.0 - f);
} // namespace wgs84

// Altitude is treated as height above the ellipsoid even though GPS and APRS
// report MSL; the geoid separation (< 100 m) is ignored.
struct GeoFix {
    double lat = 0.0;   // degrees, [-90, 90]
    double lon = 0.0;   // degrees, [-180, 180]
    double alt_m = 0.0; // [-500, 100000]
    Timestamp time{};

    bool is_valid() const noexcept;
    void validate() const; // throws ValidationError

    bool same_position(const GeoFix& o) const noexcept
    {
        return lat == o.lat && lon == o.lon && alt_m == o.alt_m;
    }
    bool operator==(const GeoFix&) const = default;
};

struct Ecef {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

struct Enu {
    double east = 0.0;
    double north = 0.0;
    double up = 0.0;
};

Ecef geodetic_to_ecef(const GeoFix& fix);

// Components of (target - origin) in the local east-north-up frame at origin.
Enu ecef_to_enu(const Ecef& delta, double origin_lat_deg, double origin_lon_deg);

struct PointingSolution {
    double azimuth_deg = 0.0;   // [0, 360), clockwise from true north
    double elevation_deg = 0.0; // [-90, 90]
    double slant_range_m = 0.0;
    bool azimuth_undefined = false; // target straight up or down

    bool operator==(const PointingSolution&) const = default;
};

// Throws ValidationError for invalid fixes and GeometryError when the two
// positions coincide.
PointingSolution pointing(const GeoFix& origin, const GeoFix& target);

// Moves a fix by a local east/north displacement (meters) using the
// ellipsoid's radii of curvature at the fix. Accurate for displacements of a
// few kilometers per step.
GeoFix offset_enu(const GeoFix& fix, double east_m, double north_m);

// Tabulated antenna gain on a rectangular (azimuth offset, elevation offset)
// grid. The peak must be on boresight (0, 0).
class AntennaPattern {
public:
    // Builds the grid from scattered (az, el, gain) samples. Every grid node
    // must be present exactly once and the grid must span [-180, 180] x
    // [-90, 90]. Throws ConfigError.
    struct Sample {
        double az_deg;
        double el_deg;
        double gain_dbi;
    };
    static AntennaPattern from_samples(const std::vector<Sample>& samples);

    // CSV with header "az_deg,el_deg,gain_dbi". Throws ConfigError/ParseError.
    static AntennaPattern load_csv(std::istream& in);
    static AntennaPattern load_csv(const std::filesystem::path& path);

    double boresight_gain_dbi() const { return boresight_; }
    const std::vector<double>& azimuths() const { return az_; }
    const std::vector<double>& elevations() const { return el_; }
    double node(std::size_t az_index, std::size_t el_index) const
    {
        return gain_[el_index * az_.size() + az_index];
    }

    // Bilinear interpolation; azimuth wraps into [-180, 180], elevation clamps.
    double gain_dbi(double az_off_deg, double el_off_deg) const;

private:
    std::vector<double> az_;
    std::vector<double> el_;
    std::vector<double> gain_; // row-major by elevation
    double boresight_ = 0.0;
};

double pattern_gain(const AntennaPattern& p, double az_off_deg, double el_off_deg);

// Fraction of boresight power at an azimuth deviation (elevation offset 0):
// 10^((gain(dev) - gain(0)) / 10). Throws PreconditionError for dev < 0.
double gain_fraction(const AntennaPattern& p, double deviation_deg);

double normalize_degrees(double deg); // [0, 360)

} // namespace viper::geo
