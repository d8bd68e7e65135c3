#include "viper/geo.hpp"

#include "viper/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <string>

namespace viper::geo {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::string trim(std::string s)
{
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t'))
        s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t'))
        ++i;
    return s.substr(i);
}

double parse_number(const std::string& field, const char* name, std::size_t line)
{
    const std::string t = trim(field);
    double v = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size() || !std::isfinite(v))
        throw ParseError(name, line, "not a number: '" + t + "'");
    return v;
}

} // namespace

bool GeoFix::is_valid() const noexcept
{
    return std::isfinite(lat) && std::isfinite(lon) && std::isfinite(alt_m) && lat >= -90.0 &&
           lat <= 90.0 && lon >= -180.0 && lon <= 180.0 && alt_m >= -500.0 && alt_m <= 100000.0;
}

void GeoFix::validate() const
{
    if (!is_valid())
        throw ValidationError("fix out of range: lat " + std::to_string(lat) + " lon " +
                              std::to_string(lon) + " alt " + std::to_string(alt_m));
}

Ecef geodetic_to_ecef(const GeoFix& fix)
{
    fix.validate();
    const double phi = fix.lat * kDeg;
    const double lam = fix.lon * kDeg;
    const double s = std::sin(phi);
    const double c = std::cos(phi);
    const double n = wgs84::a / std::sqrt(1.0 - wgs84::e2 * s * s);
    return {(n + fix.alt_m) * c * std::cos(lam), (n + fix.alt_m) * c * std::sin(lam),
            (n * (1.0 - wgs84::e2) + fix.alt_m) * s};
}

Enu ecef_to_enu(const Ecef& d, double origin_lat_deg, double origin_lon_deg)
{
    const double phi = origin_lat_deg * kDeg;
    const double lam = origin_lon_deg * kDeg;
    const double sp = std::sin(phi), cp = std::cos(phi);
    const double sl = std::sin(lam), cl = std::cos(lam);
    return {-sl * d.x + cl * d.y, -sp * cl * d.x - sp * sl * d.y + cp * d.z,
            cp * cl * d.x + cp * sl * d.y + sp * d.z};
}

double normalize_degrees(double deg)
{
    double r = std::fmod(deg, 360.0);
    if (r < 0.0)
        r += 360.0;
    if (r >= 360.0)
        r = 0.0;
    return r;
}

PointingSolution pointing(const GeoFix& origin, const GeoFix& target)
{
    const Ecef o = geodetic_to_ecef(origin);
    const Ecef t = geodetic_to_ecef(target);
    const Enu v = ecef_to_enu({t.x - o.x, t.y - o.y, t.z - o.z}, origin.lat, origin.lon);
    const double horizontal = std::hypot(v.east, v.north);
    const double range = std::hypot(horizontal, v.up);
    if (range < 1e-6)
        throw GeometryError("origin and target coincide");

    PointingSolution p;
    p.slant_range_m = range;
    if (horizontal < 1e-7) {
        p.azimuth_undefined = true;
        p.azimuth_deg = 0.0;
        p.elevation_deg = v.up > 0 ? 90.0 : -90.0;
        return p;
    }
    p.azimuth_deg = normalize_degrees(std::atan2(v.east, v.north) / kDeg);
    p.elevation_deg = std::atan2(v.up, horizontal) / kDeg;
    return p;
}

GeoFix offset_enu(const GeoFix& fix, double east_m, double north_m)
{
    const double phi = fix.lat * kDeg;
    const double s = std::sin(phi);
    const double w = std::sqrt(1.0 - wgs84::e2 * s * s);
    const double prime_vertical = wgs84::a / w;
    const double meridional = wgs84::a * (1.0 - wgs84::e2) / (w * w * w);
    GeoFix out = fix;
    out.lat = fix.lat + north_m / (meridional + fix.alt_m) / kDeg;
    const double cos_lat = std::max(std::cos(phi), 1e-9);
    out.lon = fix.lon + east_m / ((prime_vertical + fix.alt_m) * cos_lat) / kDeg;
    out.lat = std::clamp(out.lat, -90.0, 90.0);
    if (out.lon > 180.0)
        out.lon -= 360.0;
    if (out.lon < -180.0)
        out.lon += 360.0;
    return out;
}

AntennaPattern AntennaPattern::from_samples(const std::vector<Sample>& samples)
{
    if (samples.empty())
        throw ConfigError("antenna pattern table is empty");
    std::map<std::pair<double, double>, double> nodes;
    std::vector<double> az, el;
    for (const auto& s : samples) {
        if (!std::isfinite(s.az_deg) || !std::isfinite(s.el_deg) || !std::isfinite(s.gain_dbi))
            throw ConfigError("antenna pattern contains a non-finite value");
        if (!nodes.emplace(std::make_pair(s.az_deg, s.el_deg), s.gain_dbi).second)
            throw ConfigError("duplicate antenna pattern node (" + std::to_string(s.az_deg) + ", " +
                              std::to_string(s.el_deg) + ")");
        az.push_back(s.az_deg);
        el.push_back(s.el_deg);
    }
    std::sort(az.begin(), az.end());
    az.erase(std::unique(az.begin(), az.end()), az.end());
    std::sort(el.begin(), el.end());
    el.erase(std::unique(el.begin(), el.end()), el.end());

    if (az.size() < 2 || el.size() < 2 || az.front() != -180.0 || az.back() != 180.0 ||
        el.front() != -90.0 || el.back() != 90.0)
        throw ConfigError("antenna pattern grid must span azimuth [-180, 180] and elevation [-90, 90]");
    if (nodes.size() != az.size() * el.size())
        throw ConfigError("antenna pattern is not a complete rectangular grid");

    AntennaPattern p;
    p.az_ = std::move(az);
    p.el_ = std::move(el);
    p.gain_.resize(p.az_.size() * p.el_.size());
    for (std::size_t j = 0; j < p.el_.size(); ++j)
        for (std::size_t i = 0; i < p.az_.size(); ++i)
            p.gain_[j * p.az_.size() + i] = nodes.at({p.az_[i], p.el_[j]});

    p.boresight_ = p.gain_dbi(0.0, 0.0);
    const double peak = *std::max_element(p.gain_.begin(), p.gain_.end());
    if (peak > p.boresight_ + 1e-9)
        throw ConfigError("antenna pattern peak is not on boresight");
    return p;
}

AntennaPattern AntennaPattern::load_csv(std::istream& in)
{
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line) || trim(line) != "az_deg,el_deg,gain_dbi")
        throw ParseError("header", 1, "expected 'az_deg,el_deg,gain_dbi'");
    std::vector<Sample> samples;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty())
            continue;
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
        if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos)
            throw ParseError("row", line_no, "expected three comma-separated fields");
        samples.push_back({parse_number(line.substr(0, c1), "az_deg", line_no),
                           parse_number(line.substr(c1 + 1, c2 - c1 - 1), "el_deg", line_no),
                           parse_number(line.substr(c2 + 1), "gain_dbi", line_no)});
    }
    return from_samples(samples);
}

AntennaPattern AntennaPattern::load_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open antenna pattern " + path.string());
    return load_csv(in);
}

double AntennaPattern::gain_dbi(double az_off_deg, double el_off_deg) const
{
    if (gain_.empty())
        throw ConfigError("antenna pattern table is empty");
    double az = std::fmod(az_off_deg + 180.0, 360.0);
    if (az < 0.0)
        az += 360.0;
    az -= 180.0;
    const double el = std::clamp(el_off_deg, -90.0, 90.0);

    auto bracket = [](const std::vector<double>& axis, double v, std::size_t& lo, double& t) {
        auto it = std::upper_bound(axis.begin(), axis.end(), v);
        std::size_t hi = static_cast<std::size_t>(it - axis.begin());
        if (hi == 0)
            hi = 1;
        if (hi >= axis.size())
            hi = axis.size() - 1;
        lo = hi - 1;
        t = (v - axis[lo]) / (axis[hi] - axis[lo]);
    };
    std::size_t i = 0, j = 0;
    double tx = 0.0, ty = 0.0;
    bracket(az_, az, i, tx);
    bracket(el_, el, j, ty);
    const double g00 = node(i, j), g10 = node(i + 1, j);
    const double g01 = node(i, j + 1), g11 = node(i + 1, j + 1);
    // Exact node values when the query lands on a grid line.
    const double lower = tx == 0.0 ? g00 : (tx == 1.0 ? g10 : g00 + tx * (g10 - g00));
    const double upper = tx == 0.0 ? g01 : (tx == 1.0 ? g11 : g01 + tx * (g11 - g01));
    return ty == 0.0 ? lower : (ty == 1.0 ? upper : lower + ty * (upper - lower));
}

double pattern_gain(const AntennaPattern& p, double az_off_deg, double el_off_deg)
{
    return p.gain_dbi(az_off_deg, el_off_deg);
}

double gain_fraction(const AntennaPattern& p, double deviation_deg)
{
    if (!(deviation_deg >= 0.0))
        throw PreconditionError("deviation must be >= 0");
    return std::pow(10.0, (p.gain_dbi(deviation_deg, 0.0) - p.boresight_gain_dbi()) / 10.0);
}

} // namespace viper::geo
