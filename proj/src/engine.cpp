#include "viper/engine.hpp"

#include "viper/error.hpp"

namespace viper {

Engine::Engine(tracker::TrackerConfig cfg) : tracker_(std::move(cfg)) {}

Engine::~Engine() { flush(); }

void Engine::open_log(const std::filesystem::path& path)
{
    std::lock_guard lock(mu_);
    log_.open(path, std::ios::out | std::ios::app | std::ios::binary);
    if (!log_)
        throw ConfigError("cannot open event log " + path.string() + " for writing");
}

void Engine::flush()
{
    std::lock_guard lock(mu_);
    if (log_.is_open())
        log_.flush();
}

void Engine::keep_history(bool on)
{
    std::lock_guard lock(mu_);
    keep_history_ = on;
}

std::vector<std::string> Engine::history() const
{
    std::lock_guard lock(mu_);
    return history_;
}

void Engine::publish(const std::vector<tracker::TrackerEvent>& events)
{
    for (const auto& ev : events) {
        const std::string line = ev.to_line();
        if (log_.is_open())
            log_ << line << '\n';
        if (keep_history_)
            history_.push_back(line);
        for (const auto& [id, fn] : subscribers_)
            fn(ev, line);
    }
    if (log_.is_open() && !events.empty())
        log_.flush();
}

void Engine::ingest_frame(const ax25::FrameEvent& ev)
{
    std::lock_guard lock(mu_);
    publish(tracker_.ingest_frame(ev));
}

void Engine::ingest_raw(std::span<const std::uint8_t> raw, Timestamp received_at)
{
    std::lock_guard lock(mu_);
    publish(tracker_.ingest_raw(raw, received_at));
}

void Engine::ingest_own_fix(const nmea::OwnFix& fix)
{
    std::lock_guard lock(mu_);
    publish(tracker_.ingest_own_fix(fix));
}

void Engine::watchdog(Timestamp now)
{
    std::lock_guard lock(mu_);
    publish(tracker_.watchdog(now));
}

void Engine::select_target(const std::string& callsign, Timestamp now)
{
    std::lock_guard lock(mu_);
    publish(tracker_.select_target(callsign, now));
}

void Engine::set_tail_window(Duration window, Timestamp now)
{
    std::lock_guard lock(mu_);
    publish(tracker_.set_tail_window(window, now));
}

int Engine::subscribe(Subscriber fn, tracker::json* snapshot_out)
{
    std::lock_guard lock(mu_);
    if (snapshot_out)
        *snapshot_out = tracker_.snapshot();
    const int id = next_id_++;
    subscribers_.emplace(id, std::move(fn));
    return id;
}

void Engine::unsubscribe(int id)
{
    std::lock_guard lock(mu_);
    subscribers_.erase(id);
}

tracker::json Engine::snapshot() const
{
    std::lock_guard lock(mu_);
    return tracker_.snapshot();
}

std::string Engine::snapshot_text() const { return snapshot().dump(); }

std::optional<tracker::json> Engine::tail(const std::string& callsign, std::optional<Duration> window) const
{
    std::lock_guard lock(mu_);
    if (!tracker_.stations().count(callsign))
        return std::nullopt;
    const Timestamp now = tracker_.last_event_time();
    const Duration w = window.value_or(tracker_.tail_window());
    return tracker::json{{"callsign", callsign},
                         {"as_of", to_millis(now)},
                         {"window_ms", w.count()},
                         {"fixes", tracker::tail_to_json(tracker_.track_tail(callsign, now, w))}};
}

std::uint64_t Engine::event_count() const
{
    std::lock_guard lock(mu_);
    return tracker_.last_seq();
}

AudioReceiver::AudioReceiver(const modem::ModemConfig& cfg, Timestamp start)
    : demod_(cfg), hdlc_(start, cfg.baud)
{
}

void AudioReceiver::push(std::span<const float> samples, std::vector<ax25::FrameEvent>& out)
{
    bits_.clear();
    demod_.process(samples, bits_);
    hdlc_.push(bits_, out);
}

void AudioReceiver::flush(std::vector<ax25::FrameEvent>& out)
{
    bits_.clear();
    demod_.flush(bits_);
    hdlc_.push(bits_, out);
}

} // namespace viper
