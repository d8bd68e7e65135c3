#pragma once

// Single-writer front end over the tracker: serializes all inputs, appends
// every event to the NDJSON log and fans events out to subscribers. Safe to
// call from any thread.

#include "viper/ax25.hpp"
#include "viper/modem.hpp"
#include "viper/tracker.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace viper {

class Engine {
public:
    // Called with the engine lock held; must not call back into the engine.
    using Subscriber = std::function<void(const tracker::TrackerEvent& ev, const std::string& line)>;

    explicit Engine(tracker::TrackerConfig cfg = {});
    ~Engine();

    // Appends to `path` (created if missing). Throws ConfigError.
    void open_log(const std::filesystem::path& path);
    void flush();

    // Keeps every event line in memory (tests and the simulator).
    void keep_history(bool on);
    std::vector<std::string> history() const;

    void ingest_frame(const ax25::FrameEvent& ev);
    void ingest_raw(std::span<const std::uint8_t> raw, Timestamp received_at);
    void ingest_own_fix(const nmea::OwnFix& fix);
    void watchdog(Timestamp now);
    void select_target(const std::string& callsign, Timestamp now);
    void set_tail_window(Duration window, Timestamp now);

    // Registers a subscriber and returns the snapshot taken atomically with
    // the registration, so no event falls between the two.
    int subscribe(Subscriber fn, tracker::json* snapshot_out = nullptr);
    void unsubscribe(int id);

    tracker::json snapshot() const;
    std::string snapshot_text() const;
    // nullopt for an unknown station.
    std::optional<tracker::json> tail(const std::string& callsign, std::optional<Duration> window) const;
    std::uint64_t event_count() const;

    template <typename F>
    auto with_tracker(F&& f) const
    {
        std::lock_guard lock(mu_);
        return f(static_cast<const tracker::Tracker&>(tracker_));
    }

private:
    void publish(const std::vector<tracker::TrackerEvent>& events);

    mutable std::mutex mu_;
    tracker::Tracker tracker_;
    std::ofstream log_;
    bool keep_history_ = false;
    std::vector<std::string> history_;
    std::map<int, Subscriber> subscribers_;
    int next_id_ = 1;
};

// Audio to frame events: demodulator plus HDLC decoder, timestamped from a
// start time and the running sample count.
class AudioReceiver {
public:
    AudioReceiver(const modem::ModemConfig& cfg, Timestamp start);

    void push(std::span<const float> samples, std::vector<ax25::FrameEvent>& out);
    void flush(std::vector<ax25::FrameEvent>& out);

    std::uint64_t rejected() const { return hdlc_.rejected(); }

private:
    modem::Demodulator demod_;
    ax25::HdlcDecoder hdlc_;
    modem::LineBits bits_;
};

} // namespace viper
