#include "viper/sim.hpp"

#include "viper/aprs.hpp"
#include "viper/error.hpp"
#include "viper/nmea.hpp"
#include "viper/tracker.hpp"
#include "viper/wav.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

namespace viper::sim {

namespace {

constexpr double kKnotsPerMps = 3600.0 / 1852.0;
constexpr double kDeg = std::numbers::pi / 180.0;

Duration seconds_to_duration(double s) { return Duration{std::llround(s * 1000.0)}; }

double seconds_between(Timestamp from, Timestamp to)
{
    return static_cast<double>((to - from).count()) / 1000.0;
}

const WindBand* band_at(const std::vector<WindBand>& wind, double alt)
{
    for (const auto& b : wind)
        if (alt >= b.min_alt_m && alt < b.max_alt_m)
            return &b;
    return nullptr;
}

// East/north/up from a to b in a's local frame.
geo::Enu enu_between(const geo::GeoFix& a, const geo::GeoFix& b)
{
    const auto ea = geo::geodetic_to_ecef(a);
    const auto eb = geo::geodetic_to_ecef(b);
    return geo::ecef_to_enu({eb.x - ea.x, eb.y - ea.y, eb.z - ea.z}, a.lat, a.lon);
}

} // namespace

std::string_view to_string(Phase p)
{
    switch (p) {
    case Phase::pad: return "pad";
    case Phase::ascent: return "ascent";
    case Phase::descent: return "descent";
    case Phase::landed: return "landed";
    }
    return "pad";
}

void FlightParams::validate() const
{
    launch.validate();
    if (!(ascent_rate_mps > 0.0) || !(descent_rate_mps > 0.0) || !(scale_height_m > 0.0))
        throw ValidationError("ascent rate, descent rate and scale height must be > 0");
    if (!(burst_alt_m > launch.alt_m) || burst_alt_m > 100000.0)
        throw ValidationError("burst altitude must be above the launch altitude");
    if (!(prelaunch_s >= 0.0) || !(post_landing_s >= 0.0))
        throw ValidationError("prelaunch and post-landing durations must be >= 0");
    if (max_duration_s && !(*max_duration_s > 0.0))
        throw ValidationError("max duration must be > 0");
    for (const auto& w : wind)
        if (!(w.max_alt_m > w.min_alt_m) || !(w.speed_mps >= 0.0) || !std::isfinite(w.toward_deg))
            throw ValidationError("wind band needs min < max and a non-negative speed");
    for (const auto& t : transmitters) {
        t.callsign.validate();
        if (!(t.period_s > 0.0) || !(t.offset_s >= 0.0))
            throw ValidationError("beacon period must be > 0 and offset >= 0");
    }
}

double burst_time_s(const FlightParams& p) { return (p.burst_alt_m - p.launch.alt_m) / p.ascent_rate_mps; }

double descent_altitude(const FlightParams& p, double t_s)
{
    // Descent rate v0 * exp(h / 2H) integrates to h = -2H ln(u) with u
    // growing linearly in time.
    const double two_h = 2.0 * p.scale_height_m;
    const double u = std::exp(-p.burst_alt_m / two_h) + p.descent_rate_mps * t_s / two_h;
    return std::max(-two_h * std::log(u), p.launch.alt_m);
}

const TrackPoint& Trajectory::at(Timestamp t) const
{
    if (points.empty())
        throw PreconditionError("empty trajectory");
    const auto idx = std::floor(seconds_between(start(), t));
    if (idx <= 0.0)
        return points.front();
    return points[std::min(static_cast<std::size_t>(idx), points.size() - 1)];
}

Trajectory simulate_trajectory(const FlightParams& p)
{
    p.validate();
    Trajectory traj;
    traj.burst_t_s = burst_time_s(p);
    const double two_h = 2.0 * p.scale_height_m;
    traj.landing_t_s = traj.burst_t_s + (std::exp(-p.launch.alt_m / two_h) - std::exp(-p.burst_alt_m / two_h)) *
                                            two_h / p.descent_rate_mps;

    auto altitude = [&](double t) {
        if (t <= 0.0)
            return p.launch.alt_m;
        if (t <= traj.burst_t_s)
            return p.launch.alt_m + p.ascent_rate_mps * t;
        if (t < traj.landing_t_s)
            return descent_altitude(p, t - traj.burst_t_s);
        return p.launch.alt_m;
    };
    auto phase = [&](double t) {
        if (t < 0.0)
            return Phase::pad;
        if (t <= traj.burst_t_s)
            return Phase::ascent;
        if (t < traj.landing_t_s)
            return Phase::descent;
        return Phase::landed;
    };

    const long first = -static_cast<long>(std::floor(p.prelaunch_s));
    const long last = static_cast<long>(std::ceil(traj.landing_t_s)) + static_cast<long>(std::floor(p.post_landing_s));
    std::optional<long> cutoff;
    if (p.max_duration_s)
        cutoff = first + static_cast<long>(std::floor(*p.max_duration_s));

    geo::GeoFix pos = p.launch;
    traj.launch_site = p.launch;
    traj.points.reserve(static_cast<std::size_t>(last - first + 1));
    for (long t = first; t <= last; ++t) {
        const double ts = static_cast<double>(t);
        TrackPoint pt;
        pt.t_s = ts;
        pt.phase = phase(ts);
        pos.alt_m = altitude(ts);
        pos.time = p.launch.time + seconds_to_duration(ts);
        pt.fix = pos;

        // Advect over the coming second with the wind at the mid altitude.
        const bool airborne = ts >= 0.0 && ts < traj.landing_t_s;
        if (airborne) {
            const double mid = 0.5 * (altitude(ts) + altitude(ts + 1.0));
            if (const auto* w = band_at(p.wind, mid)) {
                pt.course_deg = geo::normalize_degrees(w->toward_deg);
                pt.speed_knots = w->speed_mps * kKnotsPerMps;
                const double step = std::min(1.0, traj.landing_t_s - ts);
                pos = geo::offset_enu(pos, w->speed_mps * step * std::sin(w->toward_deg * kDeg),
                                      w->speed_mps * step * std::cos(w->toward_deg * kDeg));
            }
        }
        if (!cutoff || t <= *cutoff)
            traj.points.push_back(pt);
        if (pt.phase == Phase::landed && traj.landing_site.time == Timestamp{})
            traj.landing_site = pt.fix;
    }
    if (traj.landing_site.time == Timestamp{})
        traj.landing_site = pos;
    return traj;
}

std::vector<Beacon> emit_beacons(const Trajectory& traj, const std::vector<Transmitter>& tx)
{
    std::vector<Beacon> out;
    if (traj.points.empty())
        return out;
    const Timestamp start = traj.start();
    const Timestamp end = traj.end();
    const ax25::Callsign plain_dest{kPlainTocall, 0};
    const std::vector<ax25::Callsign> path{ax25::Callsign{"WIDE2", 1}};

    for (std::size_t i = 0; i < tx.size(); ++i) {
        const auto& t = tx[i];
        for (long k = 0;; ++k) {
            const Timestamp when = start + seconds_to_duration(t.offset_s + static_cast<double>(k) * t.period_s);
            if (when > end)
                break;
            const TrackPoint& pt = traj.at(when);
            geo::GeoFix truth = pt.fix;
            truth.time = when;

            Beacon b;
            b.time = when;
            b.truth = truth;
            b.transmitter = i;
            if (t.mode == BeaconMode::plain) {
                aprs::AprsReport r;
                r.kind = aprs::PacketKind::position_plain;
                r.position = truth;
                r.symbol = {'/', 'O'};
                char cs[48];
                std::snprintf(cs, sizeof cs, "%03ld/%03ld", std::lround(pt.course_deg) % 360,
                              std::min(999L, std::lround(pt.speed_knots)));
                r.comment = std::string(cs) + aprs::format_altitude(truth.alt_m);
                if (!t.comment.empty())
                    r.comment += " " + t.comment;
                b.frame = ax25::Ax25Frame::ui(t.callsign, plain_dest, path, aprs::encode_position_plain(r));
            } else {
                aprs::MiceOptions opts;
                opts.comment = t.comment;
                const auto enc = aprs::encode_mice(truth, pt.course_deg, std::min(799.0, pt.speed_knots), 5, opts);
                b.frame = ax25::Ax25Frame::ui(t.callsign, ax25::Callsign{enc.destination, 0}, path, enc.info);
            }
            out.push_back(std::move(b));
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const Beacon& a, const Beacon& b) {
        return a.time != b.time ? a.time < b.time : a.transmitter < b.transmitter;
    });
    return out;
}

geo::GeoFix ReceiverPath::at(const Trajectory& traj, double t_s) const
{
    if (waypoints.empty())
        throw ConfigError("receiver path needs at least one waypoint");
    auto resolve = [&](const ReceiverWaypoint& w) {
        const geo::GeoFix& anchor =
            w.anchor == ReceiverWaypoint::Anchor::launch ? traj.launch_site : traj.landing_site;
        geo::GeoFix f = geo::offset_enu(anchor, w.east_m, w.north_m);
        f.alt_m = anchor.alt_m + w.alt_m;
        return f;
    };
    geo::GeoFix out;
    if (t_s <= waypoints.front().t_s) {
        out = resolve(waypoints.front());
    } else if (t_s >= waypoints.back().t_s) {
        out = resolve(waypoints.back());
    } else {
        std::size_t i = 1;
        while (waypoints[i].t_s < t_s)
            ++i;
        const auto a = resolve(waypoints[i - 1]);
        const auto b = resolve(waypoints[i]);
        const double span = waypoints[i].t_s - waypoints[i - 1].t_s;
        const double f = span > 0.0 ? (t_s - waypoints[i - 1].t_s) / span : 1.0;
        out.lat = a.lat + f * (b.lat - a.lat);
        out.lon = a.lon + f * (b.lon - a.lon);
        out.alt_m = a.alt_m + f * (b.alt_m - a.alt_m);
    }
    out.time = traj.launch_site.time + seconds_to_duration(t_s);
    return out;
}

void ChannelParams::validate() const
{
    if (!(max_range_m > 0.0))
        throw ValidationError("max range must be > 0");
    if (model == DropModel::probabilistic && !(fade_width_m > 0.0))
        throw ValidationError("fade width must be > 0");
}

std::vector<ChannelOutcome> apply_channel(const std::vector<Beacon>& beacons, const Trajectory& traj,
                                          const ReceiverPath& rx, const ChannelParams& ch)
{
    ch.validate();
    std::mt19937_64 rng(ch.seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::vector<ChannelOutcome> out;
    out.reserve(beacons.size());
    for (const auto& b : beacons) {
        ChannelOutcome o;
        o.beacon = b;
        o.receiver = rx.at(traj, seconds_between(traj.launch_site.time, b.time));
        const auto v = enu_between(o.receiver, b.truth);
        switch (ch.metric) {
        case RangeMetric::slant: o.range_m = std::sqrt(v.east * v.east + v.north * v.north + v.up * v.up); break;
        case RangeMetric::ground: o.range_m = std::hypot(v.east, v.north); break;
        case RangeMetric::altitude: o.range_m = std::fabs(b.truth.alt_m - o.receiver.alt_m); break;
        }
        const double draw = uniform(rng);
        if (ch.model == DropModel::hard)
            o.delivered = o.range_m <= ch.max_range_m;
        else
            o.delivered = draw < 1.0 / (1.0 + std::exp((o.range_m - ch.max_range_m) / ch.fade_width_m));
        o.snr_db = std::min(ch.max_snr_db,
                            ch.snr_at_edge_db + 20.0 * std::log10(ch.max_range_m / std::max(o.range_m, 1.0)));
        out.push_back(std::move(o));
    }
    return out;
}

AudioRenderResult render_flight_audio(const std::vector<ChannelOutcome>& outcomes, const Trajectory& traj,
                                      const std::filesystem::path& wav, const AudioRenderOptions& opts)
{
    opts.modem.validate();
    if (traj.points.empty())
        throw PreconditionError("empty trajectory");
    const int sr = opts.modem.sample_rate;
    const Timestamp start = traj.start();

    struct Placement {
        std::size_t begin;
        std::size_t length;
        const ChannelOutcome* outcome;
    };
    std::vector<Placement> placements;
    std::size_t total = static_cast<std::size_t>(std::llround(seconds_between(start, traj.end()) * sr));
    const auto gap = static_cast<std::size_t>(std::llround(opts.gap_s * sr));
    std::size_t free_from = 0;
    AudioRenderResult result;
    for (const auto& o : outcomes) {
        if (!o.delivered)
            continue;
        const auto bits = ax25::frame_to_linebits(o.beacon.frame, opts.tx);
        const std::size_t len = modem::modulated_length(bits.size(), opts.modem);
        auto begin = static_cast<std::size_t>(std::max(0LL, std::llround(seconds_between(start, o.beacon.time) * sr)));
        begin = std::max(begin, free_from);
        placements.push_back({begin, len, &o});
        free_from = begin + len + gap;
        total = std::max(total, begin + len);
        result.placed.push_back(start + seconds_to_duration(static_cast<double>(begin) / sr));
    }

    modem::WavWriter writer(wav, sr);
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<float> noise(0.0f, static_cast<float>(opts.noise_rms));
    constexpr std::size_t kChunk = 1 << 16;
    std::vector<float> chunk;
    std::size_t next = 0; // next placement to modulate
    std::vector<float> active;
    std::size_t active_begin = 0;
    for (std::size_t pos = 0; pos < total; pos += kChunk) {
        const std::size_t n = std::min(kChunk, total - pos);
        chunk.resize(n);
        for (auto& s : chunk)
            s = noise(rng);
        while (true) {
            if (active.empty() || active_begin + active.size() <= pos) {
                if (next >= placements.size() || placements[next].begin >= pos + n)
                    break;
                const auto& pl = placements[next++];
                modem::ModemConfig cfg = opts.modem;
                const double amp = std::sqrt(2.0 * opts.noise_rms * opts.noise_rms *
                                             std::pow(10.0, pl.outcome->snr_db / 10.0));
                cfg.amplitude = static_cast<float>(std::min(opts.max_amplitude, amp));
                active = modem::modulate(ax25::frame_to_linebits(pl.outcome->beacon.frame, opts.tx), cfg).samples;
                active_begin = pl.begin;
            }
            const std::size_t from = std::max(pos, active_begin);
            const std::size_t to = std::min(pos + n, active_begin + active.size());
            for (std::size_t i = from; i < to; ++i)
                chunk[i - pos] += active[i - active_begin];
            if (active_begin + active.size() > pos + n)
                break;
            active.clear();
        }
        for (auto& s : chunk)
            s = std::clamp(s, -1.0f, 1.0f);
        writer.write(chunk);
    }
    writer.close();
    result.samples = total;
    return result;
}

std::vector<NmeaLine> generate_nmea(const Trajectory& traj, const ReceiverPath& rx, double period_s)
{
    if (!(period_s > 0.0))
        throw PreconditionError("NMEA period must be > 0");
    std::vector<NmeaLine> out;
    if (traj.points.empty())
        return out;
    const double t0 = seconds_between(traj.launch_site.time, traj.start());
    const double t1 = seconds_between(traj.launch_site.time, traj.end());
    for (long k = 0;; ++k) {
        const double t = t0 + static_cast<double>(k) * period_s;
        if (t > t1)
            break;
        const geo::GeoFix here = rx.at(traj, t);
        const geo::GeoFix ahead = rx.at(traj, t + 1.0);
        const auto v = enu_between(here, ahead);
        const double speed = std::hypot(v.east, v.north);
        const double course = speed > 1e-3 ? geo::normalize_degrees(std::atan2(v.east, v.north) / kDeg) : 0.0;
        out.push_back({here.time, nmea::make_gga(here)});
        out.push_back({here.time, nmea::make_rmc(here, course, speed * kKnotsPerMps)});
    }
    return out;
}

namespace {

using nlohmann::json;

std::string key_path(const std::string& parent, const std::string& key)
{
    return parent.empty() ? key : parent + "." + key;
}

template <typename T>
T get_or(const json& j, const std::string& parent, const std::string& key, T fallback)
{
    if (!j.contains(key) || j[key].is_null())
        return fallback;
    try {
        return j[key].get<T>();
    } catch (const json::exception&) {
        throw ConfigError("scenario key '" + key_path(parent, key) + "' has the wrong type");
    }
}

const json& require(const json& j, const std::string& parent, const std::string& key)
{
    if (!j.is_object() || !j.contains(key))
        throw ConfigError("scenario key '" + key_path(parent, key) + "' is missing");
    return j[key];
}

template <typename T>
T get_req(const json& j, const std::string& parent, const std::string& key)
{
    const json& v = require(j, parent, key);
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw ConfigError("scenario key '" + key_path(parent, key) + "' has the wrong type");
    }
}

} // namespace

Scenario scenario_from_json(const json& j)
{
    if (!j.is_object())
        throw ConfigError("scenario must be a JSON object");
    Scenario sc;
    sc.name = get_or<std::string>(j, "", "name", "scenario");

    const json& launch = require(j, "", "launch");
    sc.flight.launch.lat = get_req<double>(launch, "launch", "lat");
    sc.flight.launch.lon = get_req<double>(launch, "launch", "lon");
    sc.flight.launch.alt_m = get_or<double>(launch, "launch", "alt_m", 0.0);
    try {
        sc.flight.launch.time = parse_iso8601(get_req<std::string>(launch, "launch", "time"));
    } catch (const ParseError& e) {
        throw ConfigError(std::string("scenario key 'launch.time': ") + e.what());
    }

    const json flight = j.contains("flight") ? j["flight"] : json::object();
    auto& f = sc.flight;
    f.ascent_rate_mps = get_or(flight, "flight", "ascent_rate_mps", f.ascent_rate_mps);
    f.burst_alt_m = get_or(flight, "flight", "burst_alt_m", f.burst_alt_m);
    f.descent_rate_mps = get_or(flight, "flight", "descent_rate_mps", f.descent_rate_mps);
    f.scale_height_m = get_or(flight, "flight", "scale_height_m", f.scale_height_m);
    f.prelaunch_s = get_or(flight, "flight", "prelaunch_s", f.prelaunch_s);
    f.post_landing_s = get_or(flight, "flight", "post_landing_s", f.post_landing_s);
    if (flight.contains("max_duration_s") && !flight["max_duration_s"].is_null())
        f.max_duration_s = get_req<double>(flight, "flight", "max_duration_s");
    if (flight.contains("wind")) {
        std::size_t i = 0;
        for (const auto& w : flight["wind"]) {
            const std::string at = "flight.wind[" + std::to_string(i++) + "]";
            f.wind.push_back({get_req<double>(w, at, "min_alt_m"), get_req<double>(w, at, "max_alt_m"),
                              get_req<double>(w, at, "toward_deg"), get_req<double>(w, at, "speed_mps")});
        }
    }

    std::size_t i = 0;
    for (const auto& t : require(j, "", "transmitters")) {
        const std::string at = "transmitters[" + std::to_string(i++) + "]";
        Transmitter tx;
        try {
            tx.callsign = ax25::Callsign::parse(get_req<std::string>(t, at, "callsign"));
        } catch (const ValidationError& e) {
            throw ConfigError("scenario key '" + at + ".callsign': " + e.what());
        }
        const auto mode = get_or<std::string>(t, at, "mode", "plain");
        if (mode == "plain")
            tx.mode = BeaconMode::plain;
        else if (mode == "mice")
            tx.mode = BeaconMode::mice;
        else
            throw ConfigError("scenario key '" + at + ".mode' must be 'plain' or 'mice'");
        tx.period_s = get_or(t, at, "period_s", tx.period_s);
        tx.offset_s = get_or(t, at, "offset_s", tx.offset_s);
        tx.comment = get_or<std::string>(t, at, "comment", "");
        f.transmitters.push_back(std::move(tx));
    }

    const json channel = j.contains("channel") ? j["channel"] : json::object();
    auto& c = sc.channel;
    c.max_range_m = get_or(channel, "channel", "max_range_m", c.max_range_m);
    const auto metric = get_or<std::string>(channel, "channel", "metric", "slant");
    if (metric == "slant")
        c.metric = RangeMetric::slant;
    else if (metric == "ground")
        c.metric = RangeMetric::ground;
    else if (metric == "altitude")
        c.metric = RangeMetric::altitude;
    else
        throw ConfigError("scenario key 'channel.metric' must be slant, ground or altitude");
    const auto model = get_or<std::string>(channel, "channel", "model", "hard");
    if (model == "hard")
        c.model = DropModel::hard;
    else if (model == "probabilistic")
        c.model = DropModel::probabilistic;
    else
        throw ConfigError("scenario key 'channel.model' must be hard or probabilistic");
    c.fade_width_m = get_or(channel, "channel", "fade_width_m", c.fade_width_m);
    c.snr_at_edge_db = get_or(channel, "channel", "snr_at_edge_db", c.snr_at_edge_db);
    c.max_snr_db = get_or(channel, "channel", "max_snr_db", c.max_snr_db);
    c.seed = get_or<std::uint64_t>(channel, "channel", "seed", c.seed);

    const json receiver = j.contains("receiver") ? j["receiver"] : json::object();
    i = 0;
    if (receiver.contains("waypoints")) {
        for (const auto& w : receiver["waypoints"]) {
            const std::string at = "receiver.waypoints[" + std::to_string(i++) + "]";
            ReceiverWaypoint wp;
            wp.t_s = get_or(w, at, "t_s", 0.0);
            const auto anchor = get_or<std::string>(w, at, "anchor", "launch");
            if (anchor == "launch")
                wp.anchor = ReceiverWaypoint::Anchor::launch;
            else if (anchor == "landing")
                wp.anchor = ReceiverWaypoint::Anchor::landing;
            else
                throw ConfigError("scenario key '" + at + ".anchor' must be launch or landing");
            wp.east_m = get_or(w, at, "east_m", 0.0);
            wp.north_m = get_or(w, at, "north_m", 0.0);
            wp.alt_m = get_or(w, at, "alt_m", 0.0);
            if (!sc.receiver.waypoints.empty() && wp.t_s < sc.receiver.waypoints.back().t_s)
                throw ConfigError("scenario key '" + at + ".t_s' must not decrease");
            sc.receiver.waypoints.push_back(wp);
        }
    }
    if (sc.receiver.waypoints.empty())
        sc.receiver.waypoints.push_back({});

    const json tr = j.contains("tracker") ? j["tracker"] : json::object();
    if (tr.contains("target") && !tr["target"].is_null())
        sc.target = get_req<std::string>(tr, "tracker", "target");
    sc.loss_threshold = seconds_to_duration(get_or(tr, "tracker", "loss_threshold_s", 120.0));
    sc.tail_window = seconds_to_duration(get_or(tr, "tracker", "tail_window_s", 7200.0));
    if (sc.loss_threshold <= Duration::zero() || sc.tail_window <= Duration::zero())
        throw ConfigError("scenario tracker durations must be > 0");
    if (tr.contains("antenna_pattern") && !tr["antenna_pattern"].is_null())
        sc.antenna_pattern = get_req<std::string>(tr, "tracker", "antenna_pattern");

    sc.flight.validate();
    sc.channel.validate();
    return sc;
}

Scenario load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open scenario " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("scenario " + path.string() + " is not valid JSON: " + e.what());
    }
    auto sc = scenario_from_json(j);
    if (sc.antenna_pattern && sc.antenna_pattern->is_relative())
        sc.antenna_pattern = path.parent_path() / *sc.antenna_pattern;
    return sc;
}

tracker::TrackerConfig tracker_config(const Scenario& sc)
{
    tracker::TrackerConfig cfg;
    cfg.loss_threshold = sc.loss_threshold;
    cfg.tail_window = sc.tail_window;
    if (sc.antenna_pattern)
        cfg.pattern = std::make_shared<geo::AntennaPattern>(geo::AntennaPattern::load_csv(*sc.antenna_pattern));
    return cfg;
}

std::vector<ax25::FrameEvent> delivered_frames(const std::vector<ChannelOutcome>& outcomes)
{
    std::vector<ax25::FrameEvent> out;
    for (const auto& o : outcomes) {
        if (!o.delivered)
            continue;
        ax25::FrameEvent ev;
        ev.frame = o.beacon.frame;
        ev.received_at = o.beacon.time;
        ev.raw = ax25::encode_frame(o.beacon.frame);
        out.push_back(std::move(ev));
    }
    return out;
}

json outcome_to_json(const ChannelOutcome& o)
{
    return json{{"time", to_millis(o.beacon.time)},
                {"tnc2", tracker::printable(ax25::to_tnc2(o.beacon.frame))},
                {"raw", tracker::to_hex(ax25::encode_frame(o.beacon.frame))},
                {"truth", tracker::fix_to_json(o.beacon.truth)},
                {"receiver", tracker::fix_to_json(o.receiver)},
                {"range_m", o.range_m},
                {"snr_db", o.snr_db},
                {"delivered", o.delivered}};
}

ScenarioResult run_scenario(const Scenario& sc, Engine& engine, const ScenarioOptions& opts)
{
    ScenarioResult res;
    res.trajectory = simulate_trajectory(sc.flight);
    const auto beacons = emit_beacons(res.trajectory, sc.flight.transmitters);
    res.outcomes = apply_channel(beacons, res.trajectory, sc.receiver, sc.channel);
    res.emitted = res.outcomes.size();
    const auto frames = delivered_frames(res.outcomes);
    res.delivered = frames.size();

    std::vector<nmea::OwnFix> fixes;
    if (opts.own_fixes) {
        const auto lines = generate_nmea(res.trajectory, sc.receiver);
        nmea::FixStream stream;
        auto feed = [&](const std::string& line) {
            if (auto f = stream.push_line(line); f && f->usable())
                fixes.push_back(*f);
        };
        if (opts.nmea_file) {
            {
                std::ofstream out(*opts.nmea_file, std::ios::binary);
                if (!out)
                    throw ConfigError("cannot write " + opts.nmea_file->string());
                for (const auto& l : lines)
                    out << l.text << "\r\n";
            }
            std::ifstream in(*opts.nmea_file, std::ios::binary);
            std::string line;
            while (std::getline(in, line))
                feed(line);
        } else {
            for (const auto& l : lines)
                feed(l.text);
        }
    }
    res.own_fixes = fixes.size();

    // Merge by time; at equal times own fixes go first, then frames, then
    // the watchdog tick.
    struct Item {
        Timestamp time;
        int order;
        std::size_t index;
    };
    std::vector<Item> items;
    items.reserve(fixes.size() + frames.size() + res.trajectory.points.size());
    for (std::size_t i = 0; i < fixes.size(); ++i)
        items.push_back({fixes[i].updated_at, 0, i});
    for (std::size_t i = 0; i < frames.size(); ++i)
        items.push_back({frames[i].received_at, 1, i});
    if (opts.tick > Duration::zero())
        for (Timestamp t = res.trajectory.start(); t <= res.trajectory.end(); t += opts.tick)
            items.push_back({t, 2, 0});
    std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
        return a.time != b.time ? a.time < b.time : a.order < b.order;
    });

    if (sc.target)
        engine.select_target(*sc.target, res.trajectory.start());
    for (const auto& it : items) {
        switch (it.order) {
        case 0: engine.ingest_own_fix(fixes[it.index]); break;
        case 1: engine.ingest_frame(frames[it.index]); break;
        default: engine.watchdog(it.time); break;
        }
    }
    engine.flush();
    return res;
}

} // namespace viper::sim
