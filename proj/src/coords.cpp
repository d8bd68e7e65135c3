#include "viper/coords.hpp"

#include <cctype>
#include <cmath>

namespace viper::coords {

std::optional<double> parse_ddmm(std::string_view text, int degree_digits)
{
    const auto dot = text.find('.');
    const std::string_view whole = text.substr(0, dot);
    if (whole.size() != static_cast<std::size_t>(degree_digits) + 2)
        return std::nullopt;
    for (const char c : whole)
        if (!std::isdigit(static_cast<unsigned char>(c)))
            return std::nullopt;

    int degrees = 0;
    for (int i = 0; i < degree_digits; ++i)
        degrees = degrees * 10 + (whole[static_cast<std::size_t>(i)] - '0');
    double minutes = (whole[static_cast<std::size_t>(degree_digits)] - '0') * 10 +
                     (whole[static_cast<std::size_t>(degree_digits) + 1] - '0');
    if (dot != std::string_view::npos) {
        const std::string_view frac = text.substr(dot + 1);
        if (frac.size() > 12)
            return std::nullopt;
        long long digits = 0;
        double divisor = 1.0;
        for (const char c : frac) {
            if (!std::isdigit(static_cast<unsigned char>(c)))
                return std::nullopt;
            digits = digits * 10 + (c - '0');
            divisor *= 10.0;
        }
        minutes += static_cast<double>(digits) / divisor;
    }
    if (minutes >= 60.0)
        return std::nullopt;
    return dm_to_degrees(degrees, minutes, false);
}

DegMin split_degrees(double magnitude_deg, int scale)
{
    DegMin out;
    out.degrees = static_cast<int>(std::floor(magnitude_deg));
    const double scaled = (magnitude_deg - out.degrees) * 60.0 * scale;
    out.scaled_minutes = static_cast<int>(std::floor(scaled + 1e-6));
    if (out.scaled_minutes >= 60 * scale) {
        out.scaled_minutes -= 60 * scale;
        out.degrees += 1;
    }
    return out;
}

} // namespace viper::coords
