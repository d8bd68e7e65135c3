#pragma once

// KISS TNC framing (FEND/FESC byte stuffing).

#include <cstdint>
#include <span>
#include <vector>

namespace viper::kiss {

inline constexpr std::uint8_t FEND = 0xC0;
inline constexpr std::uint8_t FESC = 0xDB;
inline constexpr std::uint8_t TFEND = 0xDC;
inline constexpr std::uint8_t TFESC = 0xDD;

inline constexpr std::uint8_t kCmdData = 0x00;

// FEND, port<<4 | 0, escaped payload, FEND. Throws ValidationError for a
// port outside 0..15.
std::vector<std::uint8_t> encode(std::span<const std::uint8_t> frame, int port = 0);

struct KissFrame {
    int port = 0;
    std::vector<std::uint8_t> payload;
};

// Streaming decoder. Bytes before the first FEND are discarded; a FESC
// followed by anything other than TFEND/TFESC drops the frame.
class Decoder {
public:
    void push(std::span<const std::uint8_t> bytes, std::vector<KissFrame>& out);

    std::uint64_t skipped_commands() const { return skipped_commands_; }
    std::uint64_t bad_escapes() const { return bad_escapes_; }

private:
    void finish(std::vector<KissFrame>& out);

    bool synced_ = false;
    bool escape_ = false;
    bool broken_ = false;
    std::vector<std::uint8_t> buf_;
    std::uint64_t skipped_commands_ = 0;
    std::uint64_t bad_escapes_ = 0;
};

} // namespace viper::kiss
