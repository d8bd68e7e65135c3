#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace viper {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid modem, pattern, or service configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A value violates a domain invariant (callsign, frame size, fix range).
class ValidationError : public Error {
public:
    using Error::Error;
};

// A precondition on an argument does not hold.
class PreconditionError : public Error {
public:
    using Error::Error;
};

// Malformed textual or binary input. Carries the offending field and byte offset.
class ParseError : public Error {
public:
    ParseError(std::string field, std::size_t offset, const std::string& what)
        : Error(field + " at offset " + std::to_string(offset) + ": " + what),
          field_(std::move(field)), offset_(offset) {}

    const std::string& field() const noexcept { return field_; }
    std::size_t offset() const noexcept { return offset_; }

private:
    std::string field_;
    std::size_t offset_;
};

// Input is not framed the way the protocol requires (e.g. NMEA without '$').
class FramingError : public Error {
public:
    using Error::Error;
};

// Geometry without a defined answer, such as pointing at one's own position.
class GeometryError : public Error {
public:
    using Error::Error;
};

} // namespace viper
