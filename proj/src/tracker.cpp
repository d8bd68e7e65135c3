#include "viper/tracker.hpp"

#include "viper/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <istream>

namespace viper::tracker {

namespace {

constexpr double kMinHeadingSpeedKnots = 1.0;

constexpr std::string_view kTypeNames[] = {
    "packet_logged", "station_updated",   "own_updated",     "pointing_updated",
    "signal_lost",   "signal_reacquired", "target_selected", "tail_window_changed",
};

std::int64_t ms(Duration d) { return d.count(); }

// Absolute angle between two bearings, [0, 180].
double bearing_difference(double a, double b)
{
    const double d = geo::normalize_degrees(a - b);
    return d > 180.0 ? 360.0 - d : d;
}

std::vector<geo::GeoFix> window_of(const std::vector<geo::GeoFix>& fixes, Timestamp now, Duration window)
{
    const Timestamp from = now - window;
    auto first = std::lower_bound(fixes.begin(), fixes.end(), from,
                                  [](const geo::GeoFix& f, Timestamp t) { return f.time < t; });
    auto last = std::upper_bound(fixes.begin(), fixes.end(), now,
                                 [](Timestamp t, const geo::GeoFix& f) { return t < f.time; });
    if (first >= last)
        return {};
    return {first, last};
}

std::string_view timestamp_format(aprs::AprsTimestamp::Format f)
{
    switch (f) {
    case aprs::AprsTimestamp::Format::dhm_zulu: return "dhm_zulu";
    case aprs::AprsTimestamp::Format::dhm_local: return "dhm_local";
    case aprs::AprsTimestamp::Format::hms: return "hms";
    }
    return "hms";
}

} // namespace

std::string_view to_string(EventType t) { return kTypeNames[static_cast<std::size_t>(t)]; }

std::optional<EventType> event_type_from_string(std::string_view s)
{
    for (std::size_t i = 0; i < std::size(kTypeNames); ++i)
        if (kTypeNames[i] == s)
            return static_cast<EventType>(i);
    return std::nullopt;
}

json TrackerEvent::to_json() const
{
    return json{{"seq", seq}, {"time", to_millis(time)}, {"type", std::string(to_string(type))}, {"data", data}};
}

std::string TrackerEvent::to_line() const { return to_json().dump(); }

TrackerEvent TrackerEvent::from_json(const json& j)
{
    TrackerEvent ev;
    try {
        ev.seq = j.at("seq").get<std::uint64_t>();
        ev.time = from_millis(j.at("time").get<std::int64_t>());
        const auto type = event_type_from_string(j.at("type").get<std::string>());
        if (!type)
            throw ParseError("type", 0, "unknown event type '" + j.at("type").get<std::string>() + "'");
        ev.type = *type;
        ev.data = j.at("data");
    } catch (const json::exception& e) {
        throw ParseError("event", 0, e.what());
    }
    return ev;
}

std::string printable(std::string_view bytes)
{
    std::string out;
    out.reserve(bytes.size());
    for (const char ch : bytes) {
        const auto c = static_cast<unsigned char>(ch);
        if (c >= 0x20 && c <= 0x7E) {
            out += ch;
        } else {
            char buf[8];
            std::snprintf(buf, sizeof buf, "<0x%02x>", c);
            out += buf;
        }
    }
    return out;
}

std::string to_hex(std::span<const std::uint8_t> bytes)
{
    static const char* const digits = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (const auto b : bytes) {
        out += digits[b >> 4];
        out += digits[b & 0x0F];
    }
    return out;
}

ax25::Bytes from_hex(std::string_view hex)
{
    if (hex.size() % 2 != 0)
        throw ParseError("raw", hex.size(), "odd number of hex digits");
    auto nibble = [&](std::size_t i) {
        const char c = hex[i];
        if (c >= '0' && c <= '9')
            return c - '0';
        if (c >= 'a' && c <= 'f')
            return c - 'a' + 10;
        if (c >= 'A' && c <= 'F')
            return c - 'A' + 10;
        throw ParseError("raw", i, "not a hex digit");
    };
    ax25::Bytes out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<std::uint8_t>(nibble(2 * i) * 16 + nibble(2 * i + 1));
    return out;
}

json fix_to_json(const geo::GeoFix& fix)
{
    return json{{"lat", fix.lat}, {"lon", fix.lon}, {"alt_m", fix.alt_m}, {"time", to_millis(fix.time)}};
}

json tail_to_json(const std::vector<geo::GeoFix>& fixes)
{
    json a = json::array();
    for (const auto& f : fixes)
        a.push_back(fix_to_json(f));
    return a;
}

json report_to_json(const aprs::AprsReport& r)
{
    json j{{"kind", std::string(aprs::to_string(r.kind))},
           {"symbol", printable(std::string{r.symbol.table, r.symbol.code})},
           {"ambiguity", r.ambiguity},
           {"messaging", r.messaging},
           {"comment", printable(r.comment)}};
    if (r.position)
        j["position"] = json{{"lat", r.position->lat}, {"lon", r.position->lon}, {"alt_m", r.position->alt_m}};
    if (r.altitude_m)
        j["altitude_m"] = *r.altitude_m;
    if (r.course_deg)
        j["course_deg"] = *r.course_deg;
    if (r.speed_knots)
        j["speed_knots"] = *r.speed_knots;
    if (r.phg)
        j["phg"] = json{{"power_w", r.phg->power_w},
                        {"height_ft", r.phg->height_ft_haat},
                        {"gain_db", r.phg->gain_db},
                        {"directivity_deg", r.phg->directivity_deg}};
    if (r.mice_status)
        j["mice_status"] = json{{"bits", r.mice_status->bits}, {"name", r.mice_status->name()}};
    if (r.timestamp)
        j["timestamp"] = json{{"format", std::string(timestamp_format(r.timestamp->format))},
                              {"day", r.timestamp->day},
                              {"hour", r.timestamp->hour},
                              {"minute", r.timestamp->minute},
                              {"second", r.timestamp->second}};
    return j;
}

json own_to_json(const nmea::OwnFix& own)
{
    json j{{"lat", own.position.lat},
           {"lon", own.position.lon},
           {"alt_m", own.position.alt_m},
           {"time", to_millis(own.updated_at)},
           {"quality", std::string(nmea::to_string(own.quality))},
           {"satellites", own.satellites}};
    if (own.course_deg)
        j["course_deg"] = *own.course_deg;
    if (own.speed_knots)
        j["speed_knots"] = *own.speed_knots;
    return j;
}

nmea::OwnFix own_from_json(const json& j)
{
    nmea::OwnFix own;
    try {
        own.position.lat = j.at("lat").get<double>();
        own.position.lon = j.at("lon").get<double>();
        own.position.alt_m = j.at("alt_m").get<double>();
        own.updated_at = from_millis(j.at("time").get<std::int64_t>());
        own.position.time = own.updated_at;
        own.has_date = true;
        const auto q = j.at("quality").get<std::string>();
        own.quality = q == "dgps" ? nmea::FixQuality::dgps
                      : q == "gps" ? nmea::FixQuality::gps
                                   : nmea::FixQuality::none;
        own.satellites = j.at("satellites").get<int>();
        if (j.contains("course_deg"))
            own.course_deg = j["course_deg"].get<double>();
        if (j.contains("speed_knots"))
            own.speed_knots = j["speed_knots"].get<double>();
    } catch (const json::exception& e) {
        throw ParseError("own", 0, e.what());
    }
    return own;
}

json pointing_to_json(const geo::PointingSolution& p)
{
    return json{{"azimuth_deg", p.azimuth_deg},
                {"elevation_deg", p.elevation_deg},
                {"slant_range_m", p.slant_range_m},
                {"azimuth_undefined", p.azimuth_undefined}};
}

Tracker::Tracker(TrackerConfig cfg) : cfg_(std::move(cfg))
{
    if (cfg_.tail_window <= Duration::zero())
        throw ConfigError("tail window must be positive");
    if (cfg_.loss_threshold <= Duration::zero())
        throw ConfigError("loss threshold must be positive");
}

TrackerEvent Tracker::make(EventType type, Timestamp time, json data)
{
    last_time_ = time;
    return TrackerEvent{++seq_, time, type, std::move(data)};
}

std::optional<geo::PointingSolution> Tracker::current_pointing() const
{
    if (!own_ || !target_)
        return std::nullopt;
    const auto it = stations_.find(*target_);
    if (it == stations_.end() || it->second.fixes.empty())
        return std::nullopt;
    try {
        return geo::pointing(own_->position, it->second.fixes.back());
    } catch (const GeometryError&) {
        return std::nullopt;
    }
}

std::optional<json> Tracker::pointing_data() const
{
    const auto p = current_pointing();
    if (!p)
        return std::nullopt;
    json data = pointing_to_json(*p);
    data["target"] = *target_;
    data["own"] = fix_to_json(own_->position);
    data["fix"] = fix_to_json(stations_.at(*target_).fixes.back());
    // Course over ground is noise when standing still.
    const bool moving = !own_->speed_knots || *own_->speed_knots >= kMinHeadingSpeedKnots;
    if (own_->course_deg && moving && !p->azimuth_undefined) {
        const double dev = bearing_difference(p->azimuth_deg, *own_->course_deg);
        data["heading_deviation_deg"] = dev;
        if (cfg_.pattern) {
            data["gain_fraction"] = geo::gain_fraction(*cfg_.pattern, dev);
            data["gain_dbi"] = cfg_.pattern->gain_dbi(dev, p->elevation_deg);
        }
    }
    return data;
}

void Tracker::pointing_event(Timestamp time, std::vector<TrackerEvent>& out)
{
    if (auto data = pointing_data())
        out.push_back(make(EventType::pointing_updated, time, std::move(*data)));
}

std::vector<TrackerEvent> Tracker::ingest_frame(const ax25::FrameEvent& ev)
{
    if (!ev.raw.empty())
        return ingest_raw(ev.raw, ev.received_at);
    const auto raw = ax25::encode_frame(ev.frame);
    return ingest_raw(raw, ev.received_at);
}

std::vector<TrackerEvent> Tracker::ingest_raw(std::span<const std::uint8_t> raw, Timestamp received_at)
{
    std::vector<TrackerEvent> out;
    json logged{{"raw", to_hex(raw)}, {"received_at", to_millis(received_at)}};

    auto log_error = [&](const std::string& what) {
        logged["error"] = what;
        out.push_back(make(EventType::packet_logged, received_at, std::move(logged)));
        return out;
    };

    ax25::Ax25Frame frame;
    try {
        frame = ax25::decode_frame(raw);
    } catch (const Error& e) {
        return log_error(std::string("undecodable frame: ") + e.what());
    }
    logged["tnc2"] = ax25::to_tnc2(frame);
    logged["source"] = frame.source.callsign.to_string();
    if (!frame.is_ui() || frame.pid != ax25::kPidNoLayer3)
        return log_error("not an APRS UI frame");

    aprs::AprsReport report;
    try {
        report = aprs::parse_info(frame.info, frame.destination.callsign);
    } catch (const Error& e) {
        return log_error(e.what());
    }

    const std::string call = frame.source.callsign.to_string();
    auto [it, inserted] = stations_.try_emplace(call);
    StationTrack& st = it->second;
    if (inserted)
        st.callsign = frame.source.callsign;
    ++st.packet_count;

    bool appended = false;
    bool duplicate = false;
    if (report.position) {
        geo::GeoFix fix = *report.position;
        fix.time = received_at;
        if (!st.fixes.empty()) {
            const auto& last = st.fixes.back();
            duplicate = last.same_position(fix) && fix.time - last.time <= cfg_.dedup_window;
        }
        if (!duplicate && (st.fixes.empty() || fix.time > st.fixes.back().time)) {
            st.fixes.push_back(fix);
            appended = true;
        }
    }
    if (!duplicate)
        st.last_heard = std::max(st.last_heard, received_at);
    st.last_report = report;

    logged["kind"] = std::string(aprs::to_string(report.kind));
    logged["duplicate"] = duplicate;
    out.push_back(make(EventType::packet_logged, received_at, std::move(logged)));

    json data{{"callsign", call},
              {"packet_count", st.packet_count},
              {"last_heard", to_millis(st.last_heard)},
              {"fix_appended", appended},
              {"report", report_to_json(report)}};
    if (!st.fixes.empty())
        data["fix"] = fix_to_json(st.fixes.back());
    out.push_back(make(EventType::station_updated, received_at, std::move(data)));

    const bool is_target = target_ && *target_ == call;
    if (is_target && lost_) {
        lost_ = false;
        json re{{"callsign", call}, {"last_heard", to_millis(st.last_heard)}};
        if (!st.fixes.empty())
            re["fix"] = fix_to_json(st.fixes.back());
        out.push_back(make(EventType::signal_reacquired, received_at, std::move(re)));
    }
    if (is_target && appended)
        pointing_event(received_at, out);
    return out;
}

std::vector<TrackerEvent> Tracker::ingest_own_fix(const nmea::OwnFix& fix)
{
    std::vector<TrackerEvent> out;
    if (!fix.usable() || !fix.position.is_valid())
        return out;
    nmea::OwnFix own = fix;
    own.position.time = own.updated_at;
    own_ = own;
    if (!own_fixes_.empty() && own_fixes_.back().time >= own.updated_at) {
        // Several sentences of one epoch refine the same tail point.
        if (own_fixes_.back().time == own.updated_at)
            own_fixes_.back() = own.position;
    } else {
        own_fixes_.push_back(own.position);
    }
    out.push_back(make(EventType::own_updated, own.updated_at, own_to_json(own)));
    pointing_event(own.updated_at, out);
    return out;
}

std::vector<TrackerEvent> Tracker::watchdog(Timestamp now) { return watchdog(now, cfg_.loss_threshold); }

std::vector<TrackerEvent> Tracker::watchdog(Timestamp now, Duration loss_threshold)
{
    std::vector<TrackerEvent> out;
    if (!target_ || lost_)
        return out;
    const auto age = packet_age(*target_, now);
    if (!age || *age <= loss_threshold)
        return out;
    lost_ = true;
    const auto& st = stations_.at(*target_);
    json data{{"callsign", *target_},
              {"last_heard", to_millis(st.last_heard)},
              {"age_ms", ms(*age)},
              {"threshold_ms", ms(loss_threshold)}};
    if (!st.fixes.empty())
        data["fix"] = fix_to_json(st.fixes.back());
    out.push_back(make(EventType::signal_lost, now, std::move(data)));
    return out;
}

std::vector<TrackerEvent> Tracker::select_target(const std::string& callsign, Timestamp now)
{
    std::vector<TrackerEvent> out;
    json data;
    if (callsign.empty()) {
        target_.reset();
        data["callsign"] = nullptr;
    } else {
        const auto cs = ax25::Callsign::parse(callsign);
        target_ = cs.to_string();
        data["callsign"] = *target_;
        data["known"] = stations_.count(*target_) != 0;
    }
    lost_ = false;
    out.push_back(make(EventType::target_selected, now, std::move(data)));
    pointing_event(now, out);
    return out;
}

std::vector<TrackerEvent> Tracker::set_tail_window(Duration window, Timestamp now)
{
    if (window <= Duration::zero())
        throw ValidationError("tail window must be positive");
    cfg_.tail_window = window;
    return {make(EventType::tail_window_changed, now, json{{"tail_window_ms", ms(window)}})};
}

std::vector<geo::GeoFix> Tracker::track_tail(const std::string& callsign, Timestamp now) const
{
    return track_tail(callsign, now, cfg_.tail_window);
}

std::vector<geo::GeoFix> Tracker::track_tail(const std::string& callsign, Timestamp now, Duration window) const
{
    const auto it = stations_.find(callsign);
    if (it == stations_.end())
        return {};
    return window_of(it->second.fixes, now, window);
}

std::vector<geo::GeoFix> Tracker::own_tail(Timestamp now) const
{
    return window_of(own_fixes_, now, cfg_.tail_window);
}

std::optional<Duration> Tracker::packet_age(const std::string& callsign, Timestamp now) const
{
    const auto it = stations_.find(callsign);
    if (it == stations_.end())
        return std::nullopt;
    return now - it->second.last_heard;
}

json Tracker::snapshot() const
{
    const Timestamp now = last_time_;
    json stations = json::array();
    for (const auto& [call, st] : stations_) {
        json s{{"callsign", call},
               {"packet_count", st.packet_count},
               {"last_heard", to_millis(st.last_heard)},
               {"age_ms", ms(now - st.last_heard)},
               {"tail", tail_to_json(window_of(st.fixes, now, cfg_.tail_window))},
               {"fix_count", st.fixes.size()}};
        s["fix"] = st.fixes.empty() ? json(nullptr) : fix_to_json(st.fixes.back());
        s["report"] = st.last_report ? report_to_json(*st.last_report) : json(nullptr);
        stations.push_back(std::move(s));
    }
    json j{{"as_of", to_millis(now)},
           {"seq", seq_},
           {"tail_window_ms", ms(cfg_.tail_window)},
           {"loss_threshold_ms", ms(cfg_.loss_threshold)},
           {"target_lost", lost_},
           {"stations", std::move(stations)},
           {"own_tail", tail_to_json(own_tail(now))}};
    j["target"] = target_ ? json(*target_) : json(nullptr);
    j["own"] = own_ ? own_to_json(*own_) : json(nullptr);
    const auto p = pointing_data();
    j["pointing"] = p ? *p : json(nullptr);
    return j;
}

ReplayResult replay_log(std::istream& log, Tracker& tracker, const std::function<void(const TrackerEvent&)>& sink)
{
    ReplayResult result;
    std::deque<TrackerEvent> pending;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(log, line)) {
        ++line_no;
        if (line.empty() || line == "\r")
            continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError("line", line_no, e.what());
        }
        const TrackerEvent ev = TrackerEvent::from_json(j);
        ++result.events_read;

        if (pending.empty()) {
            std::vector<TrackerEvent> regenerated;
            try {
                switch (ev.type) {
                case EventType::packet_logged:
                    regenerated = tracker.ingest_raw(from_hex(ev.data.at("raw").get<std::string>()),
                                                     from_millis(ev.data.at("received_at").get<std::int64_t>()));
                    break;
                case EventType::own_updated:
                    regenerated = tracker.ingest_own_fix(own_from_json(ev.data));
                    break;
                case EventType::signal_lost:
                    regenerated = tracker.watchdog(ev.time, Duration{ev.data.at("threshold_ms").get<std::int64_t>()});
                    break;
                case EventType::target_selected: {
                    const auto& c = ev.data.at("callsign");
                    regenerated = tracker.select_target(c.is_null() ? std::string() : c.get<std::string>(), ev.time);
                    break;
                }
                case EventType::tail_window_changed:
                    regenerated =
                        tracker.set_tail_window(Duration{ev.data.at("tail_window_ms").get<std::int64_t>()}, ev.time);
                    break;
                default:
                    // A derived event with no input before it.
                    ++result.mismatches;
                    continue;
                }
            } catch (const json::exception& e) {
                throw ParseError("line", line_no, e.what());
            }
            ++result.inputs_applied;
            for (auto& r : regenerated) {
                if (sink)
                    sink(r);
                pending.push_back(std::move(r));
            }
            if (pending.empty()) {
                ++result.mismatches;
                continue;
            }
        }
        if (pending.front().to_line() != ev.to_line())
            ++result.mismatches;
        pending.pop_front();
    }
    result.mismatches += pending.size();
    return result;
}

} // namespace viper::tracker
