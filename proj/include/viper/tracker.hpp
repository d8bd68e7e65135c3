#pragma once

// Authoritative tracking state. Every mutation goes through one of the
// ingest/control methods, each of which returns the events it caused. The
// state can be rebuilt from the event log alone (see replay_log).

#include "viper/aprs.hpp"
#include "viper/ax25.hpp"
#include "viper/geo.hpp"
#include "viper/nmea.hpp"
#include "viper/time.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace viper::tracker {

using json = nlohmann::json;

enum class EventType {
    packet_logged,
    station_updated,
    own_updated,
    pointing_updated,
    signal_lost,
    signal_reacquired,
    target_selected,
    tail_window_changed,
};

std::string_view to_string(EventType t);
std::optional<EventType> event_type_from_string(std::string_view s);

struct TrackerEvent {
    std::uint64_t seq = 0;
    Timestamp time{};
    EventType type = EventType::packet_logged;
    json data;

    json to_json() const;
    std::string to_line() const; // compact JSON, no newline
    static TrackerEvent from_json(const json& j);
};

struct StationTrack {
    ax25::Callsign callsign;
    std::vector<geo::GeoFix> fixes; // strictly increasing time
    std::optional<aprs::AprsReport> last_report;
    Timestamp last_heard{};
    std::uint64_t packet_count = 0;
};

struct TrackerConfig {
    Duration tail_window = std::chrono::hours(2);
    Duration loss_threshold = std::chrono::seconds(120);
    Duration dedup_window = std::chrono::seconds(1);
    std::shared_ptr<const geo::AntennaPattern> pattern; // optional
};

class Tracker {
public:
    explicit Tracker(TrackerConfig cfg = {});

    // Frames that are not APRS UI frames or fail to parse produce a single
    // packet_logged event carrying an error and leave the state unchanged.
    std::vector<TrackerEvent> ingest_frame(const ax25::FrameEvent& ev);

    // Same, from the frame bytes without FCS (KISS payloads, log replay).
    // Undecodable bytes are logged with an error.
    std::vector<TrackerEvent> ingest_raw(std::span<const std::uint8_t> raw, Timestamp received_at);

    // Fixes with quality none are ignored without events.
    std::vector<TrackerEvent> ingest_own_fix(const nmea::OwnFix& fix);

    // signal_lost once the target's packet age exceeds the threshold; quiet
    // until a packet from the target arrives again.
    std::vector<TrackerEvent> watchdog(Timestamp now);
    std::vector<TrackerEvent> watchdog(Timestamp now, Duration loss_threshold);

    // Empty callsign clears the target. Throws ValidationError for a
    // malformed callsign.
    std::vector<TrackerEvent> select_target(const std::string& callsign, Timestamp now);

    // Throws ValidationError unless window > 0.
    std::vector<TrackerEvent> set_tail_window(Duration window, Timestamp now);

    std::vector<geo::GeoFix> track_tail(const std::string& callsign, Timestamp now) const;
    std::vector<geo::GeoFix> track_tail(const std::string& callsign, Timestamp now, Duration window) const;
    std::vector<geo::GeoFix> own_tail(Timestamp now) const;
    std::optional<Duration> packet_age(const std::string& callsign, Timestamp now) const;

    const std::map<std::string, StationTrack>& stations() const { return stations_; }
    const std::optional<nmea::OwnFix>& own() const { return own_; }
    const std::optional<std::string>& target() const { return target_; }
    bool target_lost() const { return lost_; }
    Duration tail_window() const { return cfg_.tail_window; }
    const TrackerConfig& config() const { return cfg_; }
    std::uint64_t last_seq() const { return seq_; }
    Timestamp last_event_time() const { return last_time_; }

    // Pointing from the own fix to the target's newest fix, if both exist and
    // do not coincide.
    std::optional<geo::PointingSolution> current_pointing() const;

    // Full state as JSON. Ages and tails are evaluated at the time of the
    // last event so the snapshot is a pure function of the event sequence.
    json snapshot() const;

private:
    TrackerEvent make(EventType type, Timestamp time, json data);
    std::optional<json> pointing_data() const;
    void pointing_event(Timestamp time, std::vector<TrackerEvent>& out);

    TrackerConfig cfg_;
    std::map<std::string, StationTrack> stations_;
    std::optional<nmea::OwnFix> own_;
    std::vector<geo::GeoFix> own_fixes_;
    std::optional<std::string> target_;
    bool lost_ = false;
    std::uint64_t seq_ = 0;
    Timestamp last_time_{};
};

// JSON projections shared by events, snapshots and the HTTP layer.
json fix_to_json(const geo::GeoFix& fix);
json report_to_json(const aprs::AprsReport& r);
json own_to_json(const nmea::OwnFix& own);
nmea::OwnFix own_from_json(const json& j);
json pointing_to_json(const geo::PointingSolution& p);
json tail_to_json(const std::vector<geo::GeoFix>& fixes);

// Bytes outside printable ASCII rendered as <0xhh>, as in TNC2 text.
std::string printable(std::string_view bytes);

std::string to_hex(std::span<const std::uint8_t> bytes);
ax25::Bytes from_hex(std::string_view hex); // throws ParseError

struct ReplayResult {
    std::size_t events_read = 0;
    std::size_t inputs_applied = 0;
    std::size_t mismatches = 0; // regenerated events that differ from the log
};

// Rebuilds `tracker` (which should be freshly constructed with the same
// configuration as the original run) from an NDJSON event log. Each
// regenerated event is handed to `sink` when given. Throws ParseError on a
// malformed line.
ReplayResult replay_log(std::istream& log, Tracker& tracker,
                        const std::function<void(const TrackerEvent&)>& sink = {});

} // namespace viper::tracker
