#pragma once

// NMEA-0183 sentence parsing and own-position fusion (GGA and RMC only).

#include "viper/geo.hpp"
#include "viper/time.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace viper::nmea {

struct NmeaSentence {
    std::string talker; // "GP", "GN", ...
    std::string type;   // "GGA", "RMC", ...
    std::vector<std::string> fields; // after the address field
    bool checksum_ok = false;
};

// XOR of the bytes between '$' and '*' (or end of line).
std::uint8_t checksum(std::string_view payload);

// Throws FramingError when the line does not start with '$' or the address
// field is shorter than five characters. A missing or wrong checksum yields
// checksum_ok = false with the fields still populated.
NmeaSentence parse_sentence(std::string_view line);

// "$" + payload + "*hh" without line terminator.
std::string make_sentence(std::string_view payload);

enum class FixQuality { none, gps, dgps };

std::string_view to_string(FixQuality q);

struct OwnFix {
    geo::GeoFix position; // time mirrors updated_at
    std::optional<double> course_deg;
    std::optional<double> speed_knots;
    FixQuality quality = FixQuality::none;
    int satellites = 0;
    Timestamp updated_at{};
    bool has_date = false; // an RMC date has been seen

    // A GGA seen before any RMC has no date, so its time cannot be placed.
    bool usable() const { return quality != FixQuality::none && has_date; }
};

struct Diagnostics {
    std::uint64_t bad_checksum = 0;
    std::uint64_t bad_field = 0;
    std::uint64_t ignored = 0; // sentence types other than GGA/RMC
};

// Last writer wins per field. Empty fields leave the previous value; fields
// that fail to parse do the same and bump diagnostics.bad_field. GGA carries
// only time of day, so it is combined with the last RMC date (or 1970-01-01).
OwnFix apply_sentence(OwnFix state, const NmeaSentence& s, Diagnostics& diag);

// Line-oriented front end: parses each line, applies GGA/RMC and returns the
// updated fix when the sentence changed it. Framing errors are counted.
class FixStream {
public:
    std::optional<OwnFix> push_line(std::string_view line);

    const OwnFix& state() const { return state_; }
    const Diagnostics& diagnostics() const { return diag_; }
    std::uint64_t framing_errors() const { return framing_errors_; }

private:
    OwnFix state_;
    Diagnostics diag_;
    std::uint64_t framing_errors_ = 0;
};

// Sentence generators used by the simulator and tests.
std::string make_gga(const geo::GeoFix& fix, int satellites = 8);
std::string make_rmc(const geo::GeoFix& fix, double course_deg, double speed_knots);

} // namespace viper::nmea
