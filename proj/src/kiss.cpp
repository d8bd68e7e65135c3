#include "viper/kiss.hpp"

#include "viper/error.hpp"

namespace viper::kiss {

std::vector<std::uint8_t> encode(std::span<const std::uint8_t> frame, int port)
{
    if (port < 0 || port > 15)
        throw ValidationError("KISS port must be 0..15");
    std::vector<std::uint8_t> out;
    out.reserve(frame.size() + 4);
    auto put = [&](std::uint8_t b) {
        if (b == FEND) {
            out.push_back(FESC);
            out.push_back(TFEND);
        } else if (b == FESC) {
            out.push_back(FESC);
            out.push_back(TFESC);
        } else {
            out.push_back(b);
        }
    };
    out.push_back(FEND);
    // Port 12 makes the type byte equal to FEND, so it is escaped as well.
    put(static_cast<std::uint8_t>(port << 4 | kCmdData));
    for (const auto b : frame)
        put(b);
    out.push_back(FEND);
    return out;
}

void Decoder::finish(std::vector<KissFrame>& out)
{
    if (!buf_.empty() && !broken_) {
        const std::uint8_t cmd = buf_[0];
        if ((cmd & 0x0F) != kCmdData) {
            ++skipped_commands_;
        } else if (buf_.size() > 1) {
            out.push_back({cmd >> 4, std::vector<std::uint8_t>(buf_.begin() + 1, buf_.end())});
        }
    }
    buf_.clear();
    escape_ = false;
    broken_ = false;
}

void Decoder::push(std::span<const std::uint8_t> bytes, std::vector<KissFrame>& out)
{
    for (const auto b : bytes) {
        if (b == FEND) {
            if (synced_)
                finish(out);
            synced_ = true;
            continue;
        }
        if (!synced_ || broken_)
            continue;
        if (escape_) {
            escape_ = false;
            if (b == TFEND) {
                buf_.push_back(FEND);
            } else if (b == TFESC) {
                buf_.push_back(FESC);
            } else {
                ++bad_escapes_;
                broken_ = true;
            }
        } else if (b == FESC) {
            escape_ = true;
        } else {
            buf_.push_back(b);
        }
    }
}

} // namespace viper::kiss
