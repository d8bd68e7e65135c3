#include "viper/modem.hpp"

#include "viper/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

namespace viper::modem {

bool is_supported_sample_rate(int sample_rate)
{
    switch (sample_rate) {
    case 8000:
    case 11025:
    case 22050:
    case 44100:
    case 48000:
        return true;
    default:
        return false;
    }
}

void ModemConfig::validate() const
{
    if (!is_supported_sample_rate(sample_rate))
        throw ConfigError("unsupported sample rate " + std::to_string(sample_rate));
    if (baud <= 0 || mark_hz <= 0 || space_hz <= 0)
        throw ConfigError("baud and tone frequencies must be positive");
    if (sample_rate < 4.0 * space_hz)
        throw ConfigError("sample rate " + std::to_string(sample_rate) +
                          " Hz is below 4x the space tone");
    if (samples_per_bit() < 4.0)
        throw ConfigError("fewer than 4 samples per symbol");
    if (!(amplitude > 0.0f && amplitude <= 1.0f))
        throw ConfigError("amplitude must be in (0, 1]");
    if (!(pll_gain > 0.0 && pll_gain < 1.0))
        throw ConfigError("pll gain must be in (0, 1)");
    if (dc_block && !(dc_block_hz > 0.0 && dc_block_hz < mark_hz))
        throw ConfigError("dc block cutoff must be between 0 and the mark tone");
}

std::size_t modulated_length(std::size_t bit_count, const ModemConfig& cfg)
{
    // Sample n carries bit floor(n * baud / rate); the block ends after the
    // last sample that still belongs to the final bit.
    const auto num = static_cast<std::int64_t>(bit_count) * cfg.sample_rate;
    return static_cast<std::size_t>((num + cfg.baud - 1) / cfg.baud);
}

AudioBlock modulate(std::span<const std::uint8_t> bits, const ModemConfig& cfg)
{
    cfg.validate();
    AudioBlock out;
    out.sample_rate = cfg.sample_rate;
    const std::size_t total = modulated_length(bits.size(), cfg);
    out.samples.resize(total);

    const double two_pi = 2.0 * std::numbers::pi;
    const double mark_step = two_pi * cfg.mark_hz / cfg.sample_rate;
    const double space_step = two_pi * cfg.space_hz / cfg.sample_rate;
    double phase = 0.0;
    for (std::size_t n = 0; n < total; ++n) {
        const auto bit_index = static_cast<std::size_t>(
            static_cast<std::int64_t>(n) * cfg.baud / cfg.sample_rate);
        out.samples[n] = cfg.amplitude * static_cast<float>(std::sin(phase));
        phase += bits[bit_index] ? mark_step : space_step;
        if (phase >= two_pi)
            phase -= two_pi;
    }
    return out;
}

void Demodulator::Tone::mix(std::int64_t n, double x, double& i, double& q) const
{
    if (!cos_table.empty()) {
        const auto k = static_cast<std::size_t>(n % static_cast<std::int64_t>(cos_table.size()));
        i = x * cos_table[k];
        q = x * sin_table[k];
    } else {
        const double arg = std::fmod(omega * static_cast<double>(n), 2.0 * std::numbers::pi);
        i = x * std::cos(arg);
        q = -x * std::sin(arg);
    }
}

Demodulator::Demodulator(const ModemConfig& cfg) : cfg_(cfg)
{
    cfg_.validate();
    window_ = static_cast<int>(std::lround(cfg_.samples_per_bit()));
    lag_ = window_ - window_ / 2 - 1;

    auto build = [&](double hz) {
        Tone t;
        t.omega = 2.0 * std::numbers::pi * hz / cfg_.sample_rate;
        const double whole = std::round(hz);
        if (whole == hz) {
            const auto f = static_cast<long>(whole);
            const long period = cfg_.sample_rate / std::gcd(static_cast<long>(cfg_.sample_rate), f);
            t.cos_table.resize(period);
            t.sin_table.resize(period);
            for (long k = 0; k < period; ++k) {
                // Reduce f*k modulo the rate first so the angle stays exact.
                const double arg = 2.0 * std::numbers::pi *
                                   static_cast<double>((f * k) % cfg_.sample_rate) / cfg_.sample_rate;
                t.cos_table[k] = std::cos(arg);
                t.sin_table[k] = -std::sin(arg);
            }
        }
        return t;
    };
    mark_ = build(cfg_.mark_hz);
    space_ = build(cfg_.space_hz);

    const double rc = 1.0 / (2.0 * std::numbers::pi * cfg_.dc_block_hz);
    const double dt = 1.0 / cfg_.sample_rate;
    hp_alpha_ = rc / (rc + dt);

    phase_step_ = static_cast<double>(cfg_.baud) / cfg_.sample_rate;
    reset();
}

void Demodulator::reset()
{
    hp_prev_x_ = hp_prev_y_ = 0.0;
    hp_primed_ = false;
    ring_.assign(static_cast<std::size_t>(window_) * 4, 0.0);
    ring_pos_ = 0;
    std::fill(std::begin(sums_), std::end(sums_), 0.0);
    input_count_ = 0;
    phase_ = -0.5 * phase_step_;
    have_last_ = false;
    last_decision_ = false;
}

void Demodulator::process(std::span<const float> samples, LineBits& out)
{
    for (const float s : samples) {
        double x = s;
        if (cfg_.dc_block) {
            if (!hp_primed_) {
                hp_prev_x_ = x;
                hp_primed_ = true;
            }
            const double y = hp_alpha_ * (hp_prev_y_ + x - hp_prev_x_);
            hp_prev_x_ = x;
            hp_prev_y_ = y;
            x = y;
        }
        push_sample(x, out);
    }
}

void Demodulator::flush(LineBits& out)
{
    for (int k = 0; k < lag_; ++k)
        push_sample(0.0, out);
}

void Demodulator::push_sample(double x, LineBits& out)
{
    const std::int64_t n = input_count_++;
    double v[4];
    mark_.mix(n, x, v[0], v[1]);
    space_.mix(n, x, v[2], v[3]);

    double* slot = &ring_[ring_pos_ * 4];
    for (int k = 0; k < 4; ++k) {
        sums_[k] += v[k] - slot[k];
        slot[k] = v[k];
    }
    ring_pos_ = (ring_pos_ + 1) % static_cast<std::size_t>(window_);

    if (n < lag_)
        return;
    const double mark_energy = sums_[0] * sums_[0] + sums_[1] * sums_[1];
    const double space_energy = sums_[2] * sums_[2] + sums_[3] * sums_[3];
    decide(mark_energy > space_energy, out);
}

void Demodulator::decide(bool mark, LineBits& out)
{
    const double before = phase_;
    phase_ += phase_step_;
    if (have_last_ && mark != last_decision_) {
        // The tone changed between the previous decision and this one; a
        // clean transition sits on a symbol boundary (phase 0 mod 1).
        const double at = phase_ - 0.5 * phase_step_;
        const double error = at - std::round(at);
        phase_ -= cfg_.pll_gain * error;
    }
    have_last_ = true;
    last_decision_ = mark;

    if (before < 0.5 && phase_ >= 0.5)
        out.push_back(mark ? 1 : 0);
    if (phase_ >= 1.0)
        phase_ -= 1.0;
}

LineBits demodulate(const AudioBlock& audio, const ModemConfig& cfg)
{
    if (audio.sample_rate != cfg.sample_rate)
        throw ConfigError("audio sample rate " + std::to_string(audio.sample_rate) +
                          " does not match modem rate " + std::to_string(cfg.sample_rate));
    Demodulator demod(cfg);
    LineBits bits;
    bits.reserve(static_cast<std::size_t>(audio.samples.size() / cfg.samples_per_bit()) + 2);
    demod.process(audio.samples, bits);
    demod.flush(bits);
    return bits;
}

double mean_power(std::span<const float> samples)
{
    if (samples.empty())
        return 0.0;
    double acc = 0.0;
    for (const float s : samples)
        acc += static_cast<double>(s) * s;
    return acc / static_cast<double>(samples.size());
}

AudioBlock add_noise(const AudioBlock& audio, double snr_db, std::uint64_t seed)
{
    if (audio.samples.empty())
        throw PreconditionError("add_noise: audio block is empty");
    if (std::isinf(snr_db) && snr_db > 0)
        return audio;

    const double signal = mean_power(audio.samples);
    const double sigma = std::sqrt(signal / std::pow(10.0, snr_db / 10.0));

    AudioBlock out = audio;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (float& s : out.samples) {
        const double v = s + sigma * gauss(rng);
        s = static_cast<float>(std::clamp(v, -1.0, 1.0));
    }
    return out;
}

} // namespace viper::modem
