#pragma once

// Degrees/decimal-minutes arithmetic shared by the APRS and NMEA parsers so
// both directions use one definition.

#include <optional>
#include <string_view>

namespace viper::coords {

inline double dm_to_degrees(int degrees, double minutes, bool negative)
{
    const double v = degrees + minutes / 60.0;
    return negative ? -v : v;
}

// "DDMM.mmmm" (degree_digits = 2) or "DDDMM.mmmm" (3). At least one fraction
// digit is optional; minutes must be < 60. Returns the unsigned magnitude in
// degrees, or nullopt when malformed.
std::optional<double> parse_ddmm(std::string_view text, int degree_digits);

// Whole degrees and minutes scaled by `scale` (100 = hundredths), truncated
// toward zero. A 1e-6 guard keeps values such as 38 + 59.11/60 from
// truncating to 59.10 through binary rounding.
struct DegMin {
    int degrees = 0;
    int scaled_minutes = 0;
};
DegMin split_degrees(double magnitude_deg, int scale);

} // namespace viper::coords
