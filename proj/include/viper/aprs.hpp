#pragma once

// APRS information-field codec: plain and compressed position reports,
// MIC-E, status, timestamps, altitude and PHG.
//
// Compressed positions are decode-only. Ambiguous positions (spaces in the
// latitude digits) decode to the center of the ambiguity cell and set
// AprsReport::ambiguity. Transmitted timestamps are kept as metadata only;
// the tracker orders fixes by receive time.

#include "viper/ax25.hpp"
#include "viper/geo.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>

namespace viper::aprs {

enum class PacketKind { position_plain, position_compressed, mice, status, other };

std::string_view to_string(PacketKind kind);

struct Symbol {
    char table = '/';
    char code = '-';
    bool operator==(const Symbol&) const = default;
};

// Power-height-gain-directivity.
struct PhgData {
    double power_w = 0.0;
    double height_ft_haat = 0.0;
    double gain_db = 0.0;
    int directivity_deg = 0; // 0 = omnidirectional
    bool operator==(const PhgData&) const = default;
};

// MIC-E message bits A, B, C from destination characters 1-3, as a 3-bit
// value (A is the most significant). 7 = "Off Duty" ... 0 = "Emergency".
struct MiceStatus {
    enum class Type { standard, custom, unknown };
    int bits = 0;
    Type type = Type::standard;

    std::string name() const;
    bool operator==(const MiceStatus&) const = default;
};

struct AprsTimestamp {
    enum class Format { dhm_zulu, dhm_local, hms };
    Format format = Format::dhm_zulu;
    int day = 0; // 0 for hms
    int hour = 0;
    int minute = 0;
    int second = 0; // 0 for dhm
    bool operator==(const AprsTimestamp&) const = default;
};

struct AprsReport {
    PacketKind kind = PacketKind::other;
    // Present for position_plain, position_compressed and mice. alt_m is the
    // reported altitude when altitude_m is set and 0 otherwise; time is left
    // at the epoch for the caller to fill in.
    std::optional<geo::GeoFix> position;
    std::optional<double> altitude_m;
    Symbol symbol;
    std::optional<double> course_deg; // [0, 360)
    std::optional<double> speed_knots;
    std::optional<PhgData> phg;
    std::optional<MiceStatus> mice_status;
    std::optional<AprsTimestamp> timestamp;
    int ambiguity = 0;      // number of masked latitude digits
    bool messaging = false; // '=' and '@' forms
    std::string comment;
};

// Dispatches on the data-type identifier. Unknown types yield kind=other with
// the whole info field in `comment`. Throws ParseError naming the field and
// byte offset for malformed positions, timestamps, MIC-E data or PHG codes.
AprsReport parse_info(std::span<const std::uint8_t> info, const ax25::Callsign& destination);
AprsReport parse_info(std::string_view info, const ax25::Callsign& destination);

// "=DDMM.mmN/DDDMM.mmW$" + comment, minutes truncated to hundredths.
// Throws ValidationError when the report is not a plain position.
std::string encode_position_plain(const AprsReport& report);

struct MiceEncoded {
    std::string destination; // six characters
    std::string info;
};

struct MiceOptions {
    Symbol symbol{'/', 'O'};
    bool current_fix = true;      // '`' rather than '\''
    bool include_altitude = true; // "xxx}" base-91 meters above -10 km
    std::string comment;
};

// Speed rounds to whole knots in [0, 799], course to whole degrees in
// [0, 360]; msg_code is the 3-bit standard message value. Throws
// ValidationError when any of them is out of range or the fix is invalid.
MiceEncoded encode_mice(const geo::GeoFix& fix, double course_deg, double speed_knots, int msg_code,
                        const MiceOptions& opts = {});

// Throws ParseError for non MIC-E destination characters or info bytes.
AprsReport decode_mice(const ax25::Callsign& destination, std::span<const std::uint8_t> info);

// First "/A=" followed by six digits (or '-' and five digits), in meters.
std::optional<double> parse_altitude(std::string_view comment);

// First "PHG" followed by four digits. Throws ParseError when the four
// characters after "PHG" are not digits.
std::optional<PhgData> parse_phg(std::string_view comment);

// "/A=nnnnnn" with the altitude rounded to whole feet.
std::string format_altitude(double meters);

} // namespace viper::aprs
