#pragma once

// Network composition root: packet sources (audio, KISS TCP), the NMEA
// reader and the HTTP/WebSocket API around one Engine.

#include "viper/engine.hpp"
#include "viper/modem.hpp"
#include "viper/tracker.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace viper {

struct HostPort {
    std::string host;
    int port = 0;

    // "host:port". Throws ConfigError.
    static HostPort parse(const std::string& text);
};

struct ServiceConfig {
    // Audio: a WAV file, or raw 16-bit LE mono PCM from a path ("-" = stdin).
    std::optional<std::filesystem::path> wav;
    std::optional<std::string> raw_pcm;
    int raw_sample_rate = 48000;
    // Time of the first audio sample. The session clock used for KISS
    // arrivals, controls and the watchdog starts here and advances at
    // wall-clock rate. Defaults to the wall clock at start.
    std::optional<Timestamp> audio_start;

    std::optional<int> kiss_listen; // 0 picks a free port
    std::optional<HostPort> kiss_connect;

    // NMEA: a file (read once), "-" for stdin, or a serial device.
    std::optional<std::string> nmea;
    int nmea_baud = 4800;

    std::string http_bind = "0.0.0.0";
    int http_port = 8080; // 0 picks a free port
    std::optional<std::filesystem::path> static_dir;

    std::optional<std::filesystem::path> log_path;
    Duration tail_window = std::chrono::hours(2);
    Duration loss_threshold = std::chrono::seconds(120);
    Duration watchdog_period = std::chrono::seconds(1);
    std::optional<std::filesystem::path> antenna_pattern;
    std::optional<std::string> target;

    // Throws ConfigError naming the problem.
    void validate() const;
};

class Service {
public:
    explicit Service(ServiceConfig cfg);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    // Opens files, binds ports and starts every worker. Throws ConfigError
    // with an actionable message on failure.
    void start();

    // Blocks until stop() is called or SIGINT/SIGTERM arrives when
    // `handle_signals` is set.
    void wait(bool handle_signals = false);

    // Stops sources and network I/O, drains the ingest queue and flushes the
    // log. Bounded by about two seconds.
    void stop();

    int http_port() const;
    int kiss_port() const;
    Engine& engine();

    // True once every finite source (WAV, NMEA file) has been consumed.
    bool sources_idle() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Sends frames to a KISS TCP server. Frames are spaced by their time stamps
// divided by `speed`; speed <= 0 sends back to back. Throws ConfigError when
// the connection fails.
void kiss_playback(const HostPort& to, const std::vector<ax25::FrameEvent>& frames, double speed = 0.0);

} // namespace viper
