#include "viper/wav.hpp"

#include "viper/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace viper::modem {

namespace {

std::uint32_t le32(const unsigned char* p)
{
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

std::uint16_t le16(const unsigned char* p) { return std::uint16_t(p[0] | (p[1] << 8)); }

void put32(std::ostream& out, std::uint32_t v)
{
    const char b[4] = {char(v & 0xFF), char((v >> 8) & 0xFF), char((v >> 16) & 0xFF),
                       char((v >> 24) & 0xFF)};
    out.write(b, 4);
}

void put16(std::ostream& out, std::uint16_t v)
{
    const char b[2] = {char(v & 0xFF), char((v >> 8) & 0xFF)};
    out.write(b, 2);
}

void write_header(std::ostream& out, int sample_rate, std::uint32_t data_bytes)
{
    out.write("RIFF", 4);
    put32(out, 36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    put32(out, 16);
    put16(out, 1); // PCM
    put16(out, 1); // mono
    put32(out, static_cast<std::uint32_t>(sample_rate));
    put32(out, static_cast<std::uint32_t>(sample_rate) * 2);
    put16(out, 2);
    put16(out, 16);
    out.write("data", 4);
    put32(out, data_bytes);
}

void write_samples(std::ostream& out, std::span<const float> samples)
{
    std::vector<char> buf(samples.size() * 2);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto v = static_cast<std::uint16_t>(float_to_pcm16(samples[i]));
        buf[2 * i] = char(v & 0xFF);
        buf[2 * i + 1] = char(v >> 8);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

} // namespace

float pcm16_to_float(std::int16_t v) { return static_cast<float>(v) / 32768.0f; }

std::int16_t float_to_pcm16(float v)
{
    const float c = std::clamp(v, -1.0f, 1.0f);
    return static_cast<std::int16_t>(std::lround(std::min(c * 32768.0f, 32767.0f)));
}

AudioBlock read_wav(std::istream& in)
{
    unsigned char riff[12];
    if (!in.read(reinterpret_cast<char*>(riff), 12) || std::memcmp(riff, "RIFF", 4) != 0 ||
        std::memcmp(riff + 8, "WAVE", 4) != 0)
        throw ParseError("riff", 0, "not a RIFF/WAVE file");

    std::size_t offset = 12;
    bool have_fmt = false;
    AudioBlock block;
    for (;;) {
        unsigned char hdr[8];
        if (!in.read(reinterpret_cast<char*>(hdr), 8))
            throw ParseError("data", offset, "missing data chunk");
        const std::uint32_t size = le32(hdr + 4);
        offset += 8;
        if (std::memcmp(hdr, "fmt ", 4) == 0) {
            if (size < 16)
                throw ParseError("fmt", offset, "fmt chunk too short");
            std::vector<unsigned char> fmt(size + (size & 1));
            in.read(reinterpret_cast<char*>(fmt.data()), static_cast<std::streamsize>(fmt.size()));
            if (!in)
                throw ParseError("fmt", offset, "truncated fmt chunk");
            const auto format = le16(fmt.data());
            const auto channels = le16(fmt.data() + 2);
            const auto rate = le32(fmt.data() + 4);
            const auto bits = le16(fmt.data() + 14);
            if (format != 1)
                throw ParseError("fmt.format", offset, "only PCM is supported");
            if (channels != 1)
                throw ParseError("fmt.channels", offset + 2, "only mono is supported");
            if (bits != 16)
                throw ParseError("fmt.bits_per_sample", offset + 14, "only 16-bit samples are supported");
            block.sample_rate = static_cast<int>(rate);
            have_fmt = true;
            offset += fmt.size();
        } else if (std::memcmp(hdr, "data", 4) == 0) {
            if (!have_fmt)
                throw ParseError("data", offset, "data chunk before fmt chunk");
            const std::size_t count = size / 2;
            std::vector<unsigned char> raw(count * 2);
            in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
            const std::size_t got = static_cast<std::size_t>(in.gcount()) / 2;
            block.samples.resize(got);
            for (std::size_t i = 0; i < got; ++i)
                block.samples[i] = pcm16_to_float(static_cast<std::int16_t>(le16(&raw[2 * i])));
            return block;
        } else {
            in.seekg(size + (size & 1), std::ios::cur);
            if (!in)
                throw ParseError("chunk", offset, "truncated chunk");
            offset += size + (size & 1);
        }
    }
}

AudioBlock read_wav(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open " + path.string());
    return read_wav(in);
}

void write_wav(std::ostream& out, const AudioBlock& audio)
{
    write_header(out, audio.sample_rate, static_cast<std::uint32_t>(audio.samples.size() * 2));
    write_samples(out, audio.samples);
}

void write_wav(const std::filesystem::path& path, const AudioBlock& audio)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("cannot create " + path.string());
    write_wav(out, audio);
}

struct WavWriter::Impl {
    std::ofstream out;
    int sample_rate;
};

WavWriter::WavWriter(const std::filesystem::path& path, int sample_rate)
    : impl_(std::make_unique<Impl>(Impl{std::ofstream(path, std::ios::binary), sample_rate}))
{
    if (!impl_->out)
        throw ConfigError("cannot create " + path.string());
    write_header(impl_->out, sample_rate, 0);
}

WavWriter::~WavWriter()
{
    try {
        close();
    } catch (...) {
    }
}

void WavWriter::write(std::span<const float> samples)
{
    if (!impl_->out.is_open())
        throw PreconditionError("WavWriter already closed");
    write_samples(impl_->out, samples);
    count_ += samples.size();
}

void WavWriter::close()
{
    if (!impl_->out.is_open())
        return;
    impl_->out.seekp(0);
    write_header(impl_->out, impl_->sample_rate, static_cast<std::uint32_t>(count_ * 2));
    impl_->out.close();
}

std::size_t read_raw_pcm(std::istream& in, std::vector<float>& out, std::size_t max_samples)
{
    std::vector<unsigned char> raw(max_samples * 2);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    const std::size_t got = static_cast<std::size_t>(in.gcount()) / 2;
    for (std::size_t i = 0; i < got; ++i)
        out.push_back(pcm16_to_float(static_cast<std::int16_t>(le16(&raw[2 * i]))));
    return got;
}

} // namespace viper::modem
