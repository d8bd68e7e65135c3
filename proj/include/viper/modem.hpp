#pragma once

// Bell 202 AFSK modem: continuous-phase FSK modulator and a dual tone
// correlator demodulator with a digital PLL for symbol timing.
//
// Line bits are the post-NRZI symbols produced by the AX.25 layer:
// 1 = mark tone, 0 = space tone. The modem itself knows nothing about
// framing.

#include <cstdint>
#include <span>
#include <vector>

namespace viper::modem {

struct AudioBlock {
    std::vector<float> samples; // normalized to [-1, 1]
    int sample_rate = 48000;
};

using LineBits = std::vector<std::uint8_t>; // each element 0 or 1

// Rates accepted for audio I/O.
bool is_supported_sample_rate(int sample_rate);

struct ModemConfig {
    int baud = 1200;
    double mark_hz = 1200.0;
    double space_hz = 2200.0;
    int sample_rate = 48000;
    float amplitude = 0.5f;       // modulator peak level, (0, 1]
    bool dc_block = true;         // one-pole input high-pass
    double dc_block_hz = 100.0;
    double pll_gain = 0.3;        // fraction of timing error corrected per transition

    // Throws ConfigError when the invariants do not hold: supported sample
    // rate, sample_rate >= 4 * space_hz, and at least 4 samples per symbol.
    void validate() const;

    double samples_per_bit() const { return static_cast<double>(sample_rate) / baud; }
};

// Number of samples modulate() produces for `bit_count` bits.
std::size_t modulated_length(std::size_t bit_count, const ModemConfig& cfg);

AudioBlock modulate(std::span<const std::uint8_t> bits, const ModemConfig& cfg);

// Streaming demodulator. Holds the filter, correlator and PLL state for one
// audio stream; owned by a single caller at a time.
class Demodulator {
public:
    explicit Demodulator(const ModemConfig& cfg);

    // Appends the bits recovered from `samples` to `out`.
    void process(std::span<const float> samples, LineBits& out);

    // Drains the correlator delay at end of stream.
    void flush(LineBits& out);

    void reset();

    // Samples consumed so far (including flush padding).
    std::int64_t samples_consumed() const { return input_count_; }

    const ModemConfig& config() const { return cfg_; }

private:
    // e^{-j w n} sampled over one period of the tone (or computed on the fly
    // when the period is not an integral number of samples).
    struct Tone {
        double omega = 0.0;
        std::vector<double> cos_table;
        std::vector<double> sin_table;
        void mix(std::int64_t n, double x, double& i, double& q) const;
    };

    void push_sample(double x, LineBits& out);
    void decide(bool mark, LineBits& out);

    ModemConfig cfg_;
    int window_ = 0;
    int lag_ = 0; // samples between a window's newest input and its center
    Tone mark_;
    Tone space_;

    double hp_alpha_ = 1.0;
    double hp_prev_x_ = 0.0;
    double hp_prev_y_ = 0.0;
    bool hp_primed_ = false;

    // Ring of mixed products: mark I/Q, space I/Q for the last `window_` samples.
    std::vector<double> ring_;
    std::size_t ring_pos_ = 0;
    double sums_[4] = {0, 0, 0, 0};
    std::int64_t input_count_ = 0;

    double phase_step_ = 0.0;
    double phase_ = 0.0;
    bool have_last_ = false;
    bool last_decision_ = false;
};

// Batch demodulation. Throws ConfigError on sample-rate mismatch.
LineBits demodulate(const AudioBlock& audio, const ModemConfig& cfg);

// Additive white Gaussian noise so that mean signal power over the block
// divided by noise power equals snr_db. snr_db = +infinity returns the input
// unchanged. Output is clipped to [-1, 1]. Throws PreconditionError on empty
// audio.
AudioBlock add_noise(const AudioBlock& audio, double snr_db, std::uint64_t seed);

double mean_power(std::span<const float> samples);

} // namespace viper::modem
