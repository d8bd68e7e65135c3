#pragma once

// Deterministic balloon flight and RF channel simulator.

#include "viper/ax25.hpp"
#include "viper/engine.hpp"
#include "viper/geo.hpp"
#include "viper/modem.hpp"
#include "viper/time.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace viper::sim {

// Horizontal wind inside [min_alt_m, max_alt_m); outside every band the air
// is still. `toward_deg` is the direction the air moves to.
struct WindBand {
    double min_alt_m = 0.0;
    double max_alt_m = 0.0;
    double toward_deg = 0.0;
    double speed_mps = 0.0;
};

enum class BeaconMode { plain, mice };

struct Transmitter {
    ax25::Callsign callsign;
    BeaconMode mode = BeaconMode::plain;
    double period_s = 60.0;
    double offset_s = 0.0; // first beacon relative to the start of the timeline
    std::string comment;
};

struct FlightParams {
    geo::GeoFix launch; // time = launch time
    double ascent_rate_mps = 5.0;
    double burst_alt_m = 27000.0;
    double descent_rate_mps = 7.0; // at sea level
    double scale_height_m = 7200.0;
    std::vector<WindBand> wind;
    std::vector<Transmitter> transmitters;
    double prelaunch_s = 0.0;   // on the pad before launch, beaconing
    double post_landing_s = 0.0; // on the ground after landing
    std::optional<double> max_duration_s; // truncates the timeline

    void validate() const; // throws ValidationError
};

enum class Phase { pad, ascent, descent, landed };
std::string_view to_string(Phase p);

struct TrackPoint {
    geo::GeoFix fix;
    double t_s = 0.0; // seconds since launch (negative on the pad)
    Phase phase = Phase::pad;
    double course_deg = 0.0;
    double speed_knots = 0.0;
};

struct Trajectory {
    std::vector<TrackPoint> points; // 1 Hz
    double burst_t_s = 0.0;
    double landing_t_s = 0.0;
    geo::GeoFix launch_site;  // time = launch time
    geo::GeoFix landing_site; // even when the timeline is truncated

    Timestamp start() const { return points.front().fix.time; }
    Timestamp end() const { return points.back().fix.time; }
    // Nearest sample at or before `t` (clamped to the timeline).
    const TrackPoint& at(Timestamp t) const;
};

// Seconds from launch to burst for linear ascent.
double burst_time_s(const FlightParams& p);
// Altitude on the density-scaled parachute descent, t_s since burst.
double descent_altitude(const FlightParams& p, double t_s);

Trajectory simulate_trajectory(const FlightParams& p);

struct Beacon {
    Timestamp time{};
    ax25::Ax25Frame frame;
    geo::GeoFix truth;
    std::size_t transmitter = 0;
};

inline constexpr const char* kPlainTocall = "APZVPR";

// Beacon epochs start + offset + k*period inside the timeline. Ordered by
// time, then transmitter index.
std::vector<Beacon> emit_beacons(const Trajectory& traj, const std::vector<Transmitter>& tx);

enum class RangeMetric { slant, ground, altitude };
enum class DropModel { hard, probabilistic };

struct ReceiverWaypoint {
    enum class Anchor { launch, landing };
    double t_s = 0.0; // seconds since launch
    Anchor anchor = Anchor::launch;
    double east_m = 0.0;
    double north_m = 0.0;
    double alt_m = 0.0; // above the anchor
};

// Static when there is a single waypoint; otherwise linear between
// waypoints and clamped at the ends.
struct ReceiverPath {
    std::vector<ReceiverWaypoint> waypoints;

    geo::GeoFix at(const Trajectory& traj, double t_s) const;
};

struct ChannelParams {
    double max_range_m = 9000.0;
    RangeMetric metric = RangeMetric::slant;
    DropModel model = DropModel::hard;
    double fade_width_m = 500.0; // logistic width for the probabilistic model
    double snr_at_edge_db = 12.0;
    double max_snr_db = 40.0;
    std::uint64_t seed = 1;

    void validate() const;
};

struct ChannelOutcome {
    Beacon beacon;
    geo::GeoFix receiver;
    double range_m = 0.0;
    double snr_db = 0.0;
    bool delivered = false;
};

std::vector<ChannelOutcome> apply_channel(const std::vector<Beacon>& beacons, const Trajectory& traj,
                                          const ReceiverPath& rx, const ChannelParams& ch);

struct AudioRenderOptions {
    modem::ModemConfig modem{.sample_rate = 22050};
    double noise_rms = 0.005;
    double max_amplitude = 0.8;
    double gap_s = 0.05; // minimum silence between overlapping packets
    ax25::TxOptions tx{};
    std::uint64_t seed = 1;
};

struct AudioRenderResult {
    std::size_t samples = 0;
    std::vector<Timestamp> placed; // start time of each rendered frame
};

// Streams the whole timeline to a mono 16-bit WAV file.
AudioRenderResult render_flight_audio(const std::vector<ChannelOutcome>& outcomes, const Trajectory& traj,
                                      const std::filesystem::path& wav, const AudioRenderOptions& opts = {});

struct NmeaLine {
    Timestamp time{};
    std::string text;
};

// GGA then RMC every `period_s` along the receiver path.
std::vector<NmeaLine> generate_nmea(const Trajectory& traj, const ReceiverPath& rx, double period_s = 1.0);

struct Scenario {
    std::string name;
    FlightParams flight;
    ChannelParams channel;
    ReceiverPath receiver;
    std::optional<std::string> target;
    Duration loss_threshold = std::chrono::seconds(120);
    Duration tail_window = std::chrono::hours(2);
    // Relative paths are resolved against the scenario file by load_scenario.
    std::optional<std::filesystem::path> antenna_pattern;
};

// Throws ConfigError (with the offending key) or ValidationError.
Scenario scenario_from_json(const nlohmann::json& j);
Scenario load_scenario(const std::filesystem::path& path);

tracker::TrackerConfig tracker_config(const Scenario& sc);

struct ScenarioOptions {
    // When set the generated NMEA is written here and read back for
    // ingestion, exercising the file path of the NMEA reader.
    std::optional<std::filesystem::path> nmea_file;
    bool own_fixes = true;
    Duration tick = std::chrono::seconds(1);
};

struct ScenarioResult {
    Trajectory trajectory;
    std::vector<ChannelOutcome> outcomes;
    std::size_t emitted = 0;
    std::size_t delivered = 0;
    std::size_t own_fixes = 0;
};

// Builds the trajectory, beacons, channel and receiver NMEA, then feeds
// frames, own fixes and watchdog ticks into `engine` in time order.
ScenarioResult run_scenario(const Scenario& sc, Engine& engine, const ScenarioOptions& opts = {});

// Delivered frames as a receiver would report them, stamped with the beacon
// time.
std::vector<ax25::FrameEvent> delivered_frames(const std::vector<ChannelOutcome>& outcomes);

// One JSON object per outcome.
nlohmann::json outcome_to_json(const ChannelOutcome& o);

} // namespace viper::sim
