#pragma once

// RIFF/WAVE (PCM 16-bit little-endian, mono) and raw 16-bit PCM I/O.

#include "viper/modem.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>

namespace viper::modem {

// Throws ParseError for anything other than mono 16-bit PCM.
AudioBlock read_wav(std::istream& in);
AudioBlock read_wav(const std::filesystem::path& path);

void write_wav(std::ostream& out, const AudioBlock& audio);
void write_wav(const std::filesystem::path& path, const AudioBlock& audio);

// Incremental WAV writer for timelines too long to hold in memory. The header
// is patched with the final length on close().
class WavWriter {
public:
    WavWriter(const std::filesystem::path& path, int sample_rate);
    ~WavWriter();
    WavWriter(const WavWriter&) = delete;
    WavWriter& operator=(const WavWriter&) = delete;

    void write(std::span<const float> samples);
    void close();
    std::uint64_t samples_written() const { return count_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::uint64_t count_ = 0;
};

// Reads up to max_samples raw 16-bit little-endian samples; fewer at EOF.
std::size_t read_raw_pcm(std::istream& in, std::vector<float>& out, std::size_t max_samples);

float pcm16_to_float(std::int16_t v);
std::int16_t float_to_pcm16(float v);

} // namespace viper::modem
