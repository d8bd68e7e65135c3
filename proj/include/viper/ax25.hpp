#pragma once

// AX.25 UI-frame layer: address fields, FCS, bit stuffing, NRZI and the
// HDLC flag hunter that turns demodulated line bits back into frames.

#include "viper/modem.hpp"
#include "viper/time.hpp"

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace viper::ax25 {

using modem::LineBits;
using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint8_t kFlag = 0x7E;
inline constexpr std::uint8_t kControlUi = 0x03;
inline constexpr std::uint8_t kPidNoLayer3 = 0xF0;
inline constexpr std::size_t kMaxInfo = 256;
inline constexpr std::size_t kMaxDigipeaters = 8;

struct Callsign {
    std::string base; // [A-Z0-9]{1,6}
    int ssid = 0;     // 0..15

    // "W3EAX-12", "APRS", "WIDE2-1", case-insensitive. Throws ValidationError.
    static Callsign parse(std::string_view text);

    bool is_valid() const noexcept;
    void validate() const; // throws ValidationError
    std::string to_string() const; // SSID 0 is omitted

    auto operator<=>(const Callsign&) const = default;
};

struct Address {
    Callsign callsign;
    // Command/response bit for destination and source; has-been-repeated
    // bit for digipeaters.
    bool flag = false;

    bool operator==(const Address&) const = default;
};

struct Ax25Frame {
    Address destination;
    Address source;
    std::vector<Address> digipeaters;
    std::uint8_t control = kControlUi;
    std::optional<std::uint8_t> pid = kPidNoLayer3; // present on UI and I frames only
    Bytes info;

    // Builds an APRS-style UI command frame.
    static Ax25Frame ui(const Callsign& source, const Callsign& destination,
                        std::vector<Callsign> path, std::string_view info);

    bool is_ui() const noexcept { return (control & ~0x10) == kControlUi; }
    void validate() const; // throws ValidationError

    bool operator==(const Ax25Frame&) const = default;
};

// A frame recovered from line bits. fcs_ok is always true for emitted events;
// raw holds the frame bytes between the flags, FCS excluded.
struct FrameEvent {
    Ax25Frame frame;
    Timestamp received_at{};
    bool fcs_ok = true;
    Bytes raw;
};

// CRC-16/X.25 (reflected 0x1021, init 0xFFFF, xorout 0xFFFF).
std::uint16_t compute_fcs(std::span<const std::uint8_t> bytes);

std::array<std::uint8_t, 7> encode_address(const Callsign& cs, bool last, bool repeated);

struct DecodedAddress {
    Callsign callsign;
    bool last = false;
    bool repeated = false;
};

// Throws ParseError when the characters are not a valid callsign.
DecodedAddress decode_address(std::span<const std::uint8_t, 7> field);

// Frame bytes between flags, without FCS.
Bytes encode_frame(const Ax25Frame& frame);
// Inverse of encode_frame. Throws ParseError.
Ax25Frame decode_frame(std::span<const std::uint8_t> bytes);

struct TxOptions {
    int preamble_flags = 32;
    int tail_flags = 2;
};

// LSB-first serialization with a 0 inserted after every run of five 1s.
LineBits stuff_bits(std::span<const std::uint8_t> bytes);

// 0 -> level transition, 1 -> hold. `level` carries the line state across calls.
LineBits nrzi_encode(std::span<const std::uint8_t> bits, std::uint8_t& level);

// Flags around already-FCS-terminated bytes, then NRZI. Lets callers build
// deliberately corrupt streams.
LineBits hdlc_linebits(std::span<const Bytes> frames_with_fcs, const TxOptions& opts = {});

LineBits frame_to_linebits(const Ax25Frame& frame, const TxOptions& opts = {});
// Consecutive frames separated by a single shared flag.
LineBits frames_to_linebits(std::span<const Ax25Frame> frames, const TxOptions& opts = {});

// Appends the 16-bit FCS, low byte first.
Bytes with_fcs(std::span<const std::uint8_t> bytes);

// Streaming HDLC receiver: NRZI decode, flag hunt, de-stuffing and FCS check.
// Partial frames are carried across push() calls.
class HdlcDecoder {
public:
    explicit HdlcDecoder(Timestamp time_base = {}, int baud = 1200);

    void push(std::span<const std::uint8_t> line_bits, std::vector<FrameEvent>& out);

    // Candidates delimited by flags (or aborted) that failed length, FCS or
    // address validation.
    std::uint64_t rejected() const { return rejected_; }
    std::uint64_t bits_consumed() const { return bit_count_; }

private:
    void on_bit(std::uint8_t bit, std::vector<FrameEvent>& out);
    void finish_candidate(std::vector<FrameEvent>& out);

    Timestamp time_base_;
    int baud_;
    std::uint64_t bit_count_ = 0;
    std::uint64_t rejected_ = 0;
    std::uint8_t prev_level_ = 0;
    bool have_level_ = false;
    int ones_ = 0;
    bool in_frame_ = false;
    std::vector<std::uint8_t> bits_;
};

std::vector<FrameEvent> linebits_to_frames(std::span<const std::uint8_t> bits,
                                           Timestamp time_base = {}, int baud = 1200,
                                           std::uint64_t* rejected = nullptr);

// TNC2 monitor format: SRC-n>DEST,DIGI1*,DIGI2:info
// Digipeaters with the has-been-repeated bit carry a '*'. Info bytes outside
// 0x20..0x7E render as <0xhh>. Non-UI frames render the same way; control and
// PID are not part of the text.
std::string to_tnc2(const Ax25Frame& frame);
// Inverse of to_tnc2 for UI frames. Throws ParseError.
Ax25Frame parse_tnc2(std::string_view line);

} // namespace viper::ax25
