#include "viper/ax25.hpp"

#include "viper/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>

namespace viper::ax25 {

namespace {

bool is_call_char(char c) { return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9'); }

// Largest legal frame: 10 addresses, control, PID, info, FCS.
constexpr std::size_t kMaxFrameBytes = 7 * (2 + kMaxDigipeaters) + 2 + kMaxInfo + 2;
// Two addresses, control and FCS.
constexpr std::size_t kMinFrameBytes = 7 * 2 + 1 + 2;

bool has_pid(std::uint8_t control)
{
    // I frames (bit 0 clear) and UI frames carry a PID byte.
    return (control & 0x01) == 0 || (control & ~0x10) == kControlUi;
}

} // namespace

Callsign Callsign::parse(std::string_view text)
{
    Callsign cs;
    const auto dash = text.find('-');
    cs.base = std::string(text.substr(0, dash));
    for (auto& c : cs.base)
        if (c >= 'a' && c <= 'z')
            c = static_cast<char>(c - 'a' + 'A');
    if (dash != std::string_view::npos) {
        const auto digits = text.substr(dash + 1);
        int v = -1;
        const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), v);
        if (digits.empty() || res.ec != std::errc{} || res.ptr != digits.data() + digits.size())
            throw ValidationError("bad SSID in callsign '" + std::string(text) + "'");
        cs.ssid = v;
    }
    cs.validate();
    return cs;
}

bool Callsign::is_valid() const noexcept
{
    return !base.empty() && base.size() <= 6 && std::all_of(base.begin(), base.end(), is_call_char) &&
           ssid >= 0 && ssid <= 15;
}

void Callsign::validate() const
{
    if (!is_valid())
        throw ValidationError("invalid callsign '" + base + "-" + std::to_string(ssid) + "'");
}

std::string Callsign::to_string() const
{
    return ssid == 0 ? base : base + "-" + std::to_string(ssid);
}

Ax25Frame Ax25Frame::ui(const Callsign& source, const Callsign& destination,
                        std::vector<Callsign> path, std::string_view info)
{
    Ax25Frame f;
    f.destination = {destination, true};
    f.source = {source, false};
    for (auto& p : path)
        f.digipeaters.push_back({std::move(p), false});
    f.info.assign(info.begin(), info.end());
    return f;
}

void Ax25Frame::validate() const
{
    destination.callsign.validate();
    source.callsign.validate();
    if (digipeaters.size() > kMaxDigipeaters)
        throw ValidationError("more than 8 digipeaters");
    for (const auto& d : digipeaters)
        d.callsign.validate();
    if (info.size() > kMaxInfo)
        throw ValidationError("info field longer than 256 bytes");
    if (has_pid(control) != pid.has_value())
        throw ValidationError("PID presence does not match control field");
}

std::uint16_t compute_fcs(std::span<const std::uint8_t> bytes)
{
    std::uint16_t crc = 0xFFFF;
    for (const std::uint8_t b : bytes) {
        crc ^= b;
        for (int k = 0; k < 8; ++k)
            crc = (crc & 1) ? static_cast<std::uint16_t>((crc >> 1) ^ 0x8408) : static_cast<std::uint16_t>(crc >> 1);
    }
    return static_cast<std::uint16_t>(crc ^ 0xFFFF);
}

std::array<std::uint8_t, 7> encode_address(const Callsign& cs, bool last, bool repeated)
{
    cs.validate();
    std::array<std::uint8_t, 7> out{};
    for (std::size_t i = 0; i < 6; ++i) {
        const char c = i < cs.base.size() ? cs.base[i] : ' ';
        out[i] = static_cast<std::uint8_t>(static_cast<std::uint8_t>(c) << 1);
    }
    out[6] = static_cast<std::uint8_t>((repeated ? 0x80 : 0x00) | 0x60 | (cs.ssid << 1) | (last ? 1 : 0));
    return out;
}

DecodedAddress decode_address(std::span<const std::uint8_t, 7> field)
{
    DecodedAddress d;
    bool padding = false;
    for (std::size_t i = 0; i < 6; ++i) {
        if (field[i] & 0x01)
            throw ParseError("address", i, "extension bit set inside callsign");
        const char c = static_cast<char>(field[i] >> 1);
        if (c == ' ') {
            padding = true;
            continue;
        }
        if (padding || !is_call_char(c))
            throw ParseError("address", i, "invalid callsign character");
        d.callsign.base.push_back(c);
    }
    if (d.callsign.base.empty())
        throw ParseError("address", 0, "empty callsign");
    d.callsign.ssid = (field[6] >> 1) & 0x0F;
    d.last = (field[6] & 0x01) != 0;
    d.repeated = (field[6] & 0x80) != 0;
    return d;
}

Bytes encode_frame(const Ax25Frame& frame)
{
    frame.validate();
    Bytes out;
    out.reserve(7 * (2 + frame.digipeaters.size()) + 2 + frame.info.size());
    auto put = [&](const Address& a, bool last) {
        const auto f = encode_address(a.callsign, last, a.flag);
        out.insert(out.end(), f.begin(), f.end());
    };
    put(frame.destination, false);
    put(frame.source, frame.digipeaters.empty());
    for (std::size_t i = 0; i < frame.digipeaters.size(); ++i)
        put(frame.digipeaters[i], i + 1 == frame.digipeaters.size());
    out.push_back(frame.control);
    if (frame.pid)
        out.push_back(*frame.pid);
    out.insert(out.end(), frame.info.begin(), frame.info.end());
    return out;
}

Ax25Frame decode_frame(std::span<const std::uint8_t> bytes)
{
    Ax25Frame f;
    std::size_t pos = 0;
    std::vector<Address> addrs;
    bool last = false;
    while (!last) {
        if (pos + 7 > bytes.size())
            throw ParseError("address", pos, "frame ends inside address field");
        if (addrs.size() == 2 + kMaxDigipeaters)
            throw ParseError("address", pos, "more than 8 digipeaters");
        const auto d = decode_address(std::span<const std::uint8_t, 7>(bytes.data() + pos, 7));
        addrs.push_back({d.callsign, d.repeated});
        last = d.last;
        pos += 7;
    }
    if (addrs.size() < 2)
        throw ParseError("address", 0, "fewer than two addresses");
    f.destination = addrs[0];
    f.source = addrs[1];
    f.digipeaters.assign(addrs.begin() + 2, addrs.end());

    if (pos >= bytes.size())
        throw ParseError("control", pos, "missing control field");
    f.control = bytes[pos++];
    if (has_pid(f.control)) {
        if (pos >= bytes.size())
            throw ParseError("pid", pos, "missing PID");
        f.pid = bytes[pos++];
    } else {
        f.pid.reset();
    }
    if (bytes.size() - pos > kMaxInfo)
        throw ParseError("info", pos, "info field longer than 256 bytes");
    f.info.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
    return f;
}

Bytes with_fcs(std::span<const std::uint8_t> bytes)
{
    Bytes out(bytes.begin(), bytes.end());
    const std::uint16_t fcs = compute_fcs(bytes);
    out.push_back(static_cast<std::uint8_t>(fcs & 0xFF));
    out.push_back(static_cast<std::uint8_t>(fcs >> 8));
    return out;
}

LineBits stuff_bits(std::span<const std::uint8_t> bytes)
{
    LineBits out;
    out.reserve(bytes.size() * 9);
    int ones = 0;
    for (const std::uint8_t b : bytes) {
        for (int k = 0; k < 8; ++k) {
            const std::uint8_t bit = (b >> k) & 1;
            out.push_back(bit);
            if (bit) {
                if (++ones == 5) {
                    out.push_back(0);
                    ones = 0;
                }
            } else {
                ones = 0;
            }
        }
    }
    return out;
}

LineBits nrzi_encode(std::span<const std::uint8_t> bits, std::uint8_t& level)
{
    LineBits out;
    out.reserve(bits.size());
    for (const std::uint8_t b : bits) {
        if (!b)
            level ^= 1;
        out.push_back(level);
    }
    return out;
}

LineBits hdlc_linebits(std::span<const Bytes> frames_with_fcs, const TxOptions& opts)
{
    if (opts.preamble_flags < 1 || opts.tail_flags < 1)
        throw ValidationError("at least one opening and one closing flag are required");
    LineBits raw;
    auto flag = [&] {
        for (int k = 0; k < 8; ++k)
            raw.push_back((kFlag >> k) & 1);
    };
    for (int i = 0; i < opts.preamble_flags; ++i)
        flag();
    for (std::size_t i = 0; i < frames_with_fcs.size(); ++i) {
        if (i > 0)
            flag();
        const auto stuffed = stuff_bits(frames_with_fcs[i]);
        raw.insert(raw.end(), stuffed.begin(), stuffed.end());
    }
    for (int i = 0; i < opts.tail_flags; ++i)
        flag();
    std::uint8_t level = 0;
    return nrzi_encode(raw, level);
}

LineBits frame_to_linebits(const Ax25Frame& frame, const TxOptions& opts)
{
    return frames_to_linebits(std::span<const Ax25Frame>(&frame, 1), opts);
}

LineBits frames_to_linebits(std::span<const Ax25Frame> frames, const TxOptions& opts)
{
    std::vector<Bytes> wire;
    wire.reserve(frames.size());
    for (const auto& f : frames)
        wire.push_back(with_fcs(encode_frame(f)));
    return hdlc_linebits(wire, opts);
}

HdlcDecoder::HdlcDecoder(Timestamp time_base, int baud) : time_base_(time_base), baud_(baud)
{
    if (baud_ <= 0)
        throw ConfigError("baud must be positive");
}

void HdlcDecoder::push(std::span<const std::uint8_t> line_bits, std::vector<FrameEvent>& out)
{
    for (const std::uint8_t level : line_bits) {
        const std::uint8_t lv = level ? 1 : 0;
        if (!have_level_) {
            prev_level_ = lv;
            have_level_ = true;
            ++bit_count_;
            continue;
        }
        const std::uint8_t bit = (lv == prev_level_) ? 1 : 0;
        prev_level_ = lv;
        ++bit_count_;
        on_bit(bit, out);
    }
}

void HdlcDecoder::on_bit(std::uint8_t bit, std::vector<FrameEvent>& out)
{
    if (bit) {
        ++ones_;
        if (ones_ >= 7) {
            // Abort / idle: drop whatever was being collected.
            if (in_frame_ && bits_.size() >= 8)
                ++rejected_;
            in_frame_ = false;
            bits_.clear();
            return;
        }
        if (in_frame_)
            bits_.push_back(1);
        return;
    }

    const int run = ones_;
    ones_ = 0;
    if (run == 6) {
        if (in_frame_) {
            // The flag's leading 0 and six 1s were collected as data.
            bits_.resize(bits_.size() >= 7 ? bits_.size() - 7 : 0);
            finish_candidate(out);
        }
        in_frame_ = true;
        bits_.clear();
        return;
    }
    if (run == 5)
        return; // stuffed zero
    if (in_frame_) {
        bits_.push_back(0);
        if (bits_.size() > (kMaxFrameBytes + 1) * 8) {
            ++rejected_;
            in_frame_ = false;
            bits_.clear();
        }
    }
}

void HdlcDecoder::finish_candidate(std::vector<FrameEvent>& out)
{
    if (bits_.empty())
        return;
    if (bits_.size() % 8 != 0 || bits_.size() / 8 < kMinFrameBytes || bits_.size() / 8 > kMaxFrameBytes) {
        ++rejected_;
        return;
    }
    Bytes bytes(bits_.size() / 8, 0);
    for (std::size_t i = 0; i < bits_.size(); ++i)
        bytes[i / 8] |= static_cast<std::uint8_t>(bits_[i] << (i % 8));

    const std::size_t body = bytes.size() - 2;
    const std::uint16_t got = static_cast<std::uint16_t>(bytes[body] | (bytes[body + 1] << 8));
    if (compute_fcs(std::span<const std::uint8_t>(bytes.data(), body)) != got) {
        ++rejected_;
        return;
    }
    bytes.resize(body);
    FrameEvent ev;
    try {
        ev.frame = decode_frame(bytes);
    } catch (const ParseError&) {
        ++rejected_;
        return;
    }
    const auto ms = static_cast<std::int64_t>(bit_count_) * 1000 / baud_;
    ev.received_at = time_base_ + Duration{ms};
    ev.fcs_ok = true;
    ev.raw = std::move(bytes);
    out.push_back(std::move(ev));
}

std::vector<FrameEvent> linebits_to_frames(std::span<const std::uint8_t> bits, Timestamp time_base,
                                           int baud, std::uint64_t* rejected)
{
    HdlcDecoder dec(time_base, baud);
    std::vector<FrameEvent> out;
    dec.push(bits, out);
    if (rejected)
        *rejected = dec.rejected();
    return out;
}

std::string to_tnc2(const Ax25Frame& frame)
{
    std::string s = frame.source.callsign.to_string() + ">" + frame.destination.callsign.to_string();
    for (const auto& d : frame.digipeaters) {
        s += ',';
        s += d.callsign.to_string();
        if (d.flag)
            s += '*';
    }
    s += ':';
    for (const std::uint8_t b : frame.info) {
        if (b >= 0x20 && b <= 0x7E) {
            s += static_cast<char>(b);
        } else {
            char buf[8];
            std::snprintf(buf, sizeof buf, "<0x%02x>", b);
            s += buf;
        }
    }
    return s;
}

Ax25Frame parse_tnc2(std::string_view line)
{
    const auto colon = line.find(':');
    const auto gt = line.find('>');
    if (gt == std::string_view::npos || colon == std::string_view::npos || gt > colon)
        throw ParseError("header", 0, "expected SRC>DEST[,PATH]:info");

    auto callsign_at = [&](std::string_view text, std::size_t offset) {
        try {
            return Callsign::parse(text);
        } catch (const ValidationError& e) {
            throw ParseError("callsign", offset, e.what());
        }
    };

    Ax25Frame f;
    f.source = {callsign_at(line.substr(0, gt), 0), false};
    std::string_view rest = line.substr(gt + 1, colon - gt - 1);
    std::size_t offset = gt + 1;
    bool first = true;
    while (true) {
        const auto comma = rest.find(',');
        std::string_view item = rest.substr(0, comma);
        if (first) {
            f.destination = {callsign_at(item, offset), true};
            first = false;
        } else {
            bool rep = false;
            if (!item.empty() && item.back() == '*') {
                rep = true;
                item.remove_suffix(1);
            }
            if (f.digipeaters.size() == kMaxDigipeaters)
                throw ParseError("path", offset, "more than 8 digipeaters");
            f.digipeaters.push_back({callsign_at(item, offset), rep});
        }
        if (comma == std::string_view::npos)
            break;
        offset += comma + 1;
        rest = rest.substr(comma + 1);
    }

    const std::string_view info = line.substr(colon + 1);
    for (std::size_t i = 0; i < info.size(); ++i) {
        if (info[i] == '<' && i + 5 < info.size() && info[i + 1] == '0' && info[i + 2] == 'x' &&
            std::isxdigit(static_cast<unsigned char>(info[i + 3])) &&
            std::isxdigit(static_cast<unsigned char>(info[i + 4])) && info[i + 5] == '>') {
            unsigned v = 0;
            std::from_chars(info.data() + i + 3, info.data() + i + 5, v, 16);
            f.info.push_back(static_cast<std::uint8_t>(v));
            i += 5;
        } else {
            f.info.push_back(static_cast<std::uint8_t>(info[i]));
        }
    }
    if (f.info.size() > kMaxInfo)
        throw ParseError("info", colon + 1, "info field longer than 256 bytes");
    return f;
}

} // namespace viper::ax25
