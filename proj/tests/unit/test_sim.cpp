#include "doctest.h"

#include "viper/aprs.hpp"
#include "viper/error.hpp"
#include "viper/sim.hpp"
#include "viper/wav.hpp"

#include <cmath>
#include <filesystem>
#include <set>

using namespace viper;
using namespace viper::sim;

namespace {

const std::filesystem::path kScenarios = VIPER_DATA_DIR "/scenarios";

FlightParams basic_flight()
{
    FlightParams p;
    p.launch = {39.4143, -77.4105, 100, parse_iso8601("2024-04-13T13:00:00Z")};
    p.transmitters.push_back({ax25::Callsign::parse("W3EAX-12"), BeaconMode::plain, 60, 0, ""});
    return p;
}

// Forward-Euler integration of the density-scaled descent rate.
double integrate_descent(const FlightParams& p)
{
    double h = p.burst_alt_m, t = 0;
    const double dt = 0.01;
    while (h > p.launch.alt_m) {
        h -= p.descent_rate_mps * std::exp(h / (2 * p.scale_height_m)) * dt;
        t += dt;
    }
    return t;
}

std::vector<std::string> event_types(const std::vector<std::string>& lines)
{
    std::vector<std::string> out;
    for (const auto& l : lines)
        out.push_back(nlohmann::json::parse(l)["type"]);
    return out;
}

} // namespace

TEST_CASE("trajectory timing")
{
    const auto p = basic_flight();
    CHECK(burst_time_s(p) == doctest::Approx(5380.0));
    const auto traj = simulate_trajectory(p);
    CHECK(traj.burst_t_s == doctest::Approx(5380.0));
    const double descent = traj.landing_t_s - traj.burst_t_s;
    CHECK(descent == doctest::Approx(integrate_descent(p)).epsilon(1e-3));
    CHECK(descent > 1200);
    CHECK(descent < 3600);
    CHECK(descent_altitude(p, 0) == doctest::Approx(p.burst_alt_m));

    REQUIRE(traj.points.size() >= 2);
    for (std::size_t i = 1; i < traj.points.size(); ++i)
        REQUIRE(traj.points[i].fix.time - traj.points[i - 1].fix.time == std::chrono::seconds(1));
    double peak = 0;
    for (const auto& pt : traj.points)
        peak = std::max(peak, pt.fix.alt_m);
    CHECK(peak == doctest::Approx(p.burst_alt_m));
    CHECK(traj.points.back().phase == Phase::landed);
}

TEST_CASE("still air lands at the launch site")
{
    const auto traj = simulate_trajectory(basic_flight());
    CHECK(traj.landing_site.lat == doctest::Approx(39.4143));
    CHECK(traj.landing_site.lon == doctest::Approx(-77.4105));
}

TEST_CASE("constant wind drifts downwind by speed times time")
{
    auto p = basic_flight();
    p.wind.push_back({0, 40000, 90, 10});
    const auto traj = simulate_trajectory(p);
    const auto look = geo::pointing(traj.launch_site, traj.landing_site);
    CHECK(look.azimuth_deg == doctest::Approx(90).epsilon(0.005));
    CHECK(look.slant_range_m == doctest::Approx(10 * traj.landing_t_s).epsilon(0.01));
}

TEST_CASE("flight parameter validation")
{
    auto p = basic_flight();
    p.burst_alt_m = 50;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = basic_flight();
    p.ascent_rate_mps = 0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("beacon schedule and content")
{
    auto p = basic_flight();
    p.max_duration_s = 3600;
    p.transmitters.push_back({ax25::Callsign::parse("W3EAX-13"), BeaconMode::mice, 60, 30, "hi"});
    const auto traj = simulate_trajectory(p);
    const auto beacons = emit_beacons(traj, p.transmitters);
    std::size_t plain = 0, mice = 0;
    for (std::size_t i = 0; i < beacons.size(); ++i) {
        const auto& b = beacons[i];
        if (i > 0)
            REQUIRE(b.time >= beacons[i - 1].time);
        const auto report = aprs::parse_info(b.frame.info, b.frame.destination.callsign);
        REQUIRE(report.position);
        CHECK(report.position->lat == doctest::Approx(b.truth.lat).epsilon(1e-3));
        if (b.transmitter == 0) {
            ++plain;
            CHECK(b.frame.destination.callsign.to_string() == kPlainTocall);
            REQUIRE(report.altitude_m);
            CHECK(std::abs(*report.altitude_m - b.truth.alt_m) < 0.5);
        } else {
            ++mice;
            CHECK(report.kind == aprs::PacketKind::mice);
            REQUIRE(report.altitude_m);
            CHECK(std::abs(*report.altitude_m - b.truth.alt_m) < 1.0);
        }
    }
    CHECK(plain == 61); // t = 0, 60, ..., 3600
    CHECK(mice == 60);
}

TEST_CASE("hard channel cutoff")
{
    auto p = basic_flight();
    p.max_duration_s = 600;
    const auto traj = simulate_trajectory(p);
    const auto beacons = emit_beacons(traj, p.transmitters);
    ChannelParams ch;
    ch.metric = RangeMetric::ground;

    ReceiverPath near{{{0, ReceiverWaypoint::Anchor::launch, 1000, 0, 0}}};
    for (const auto& o : apply_channel(beacons, traj, near, ch))
        CHECK(o.delivered);

    ReceiverPath far{{{0, ReceiverWaypoint::Anchor::launch, 9001, 0, 0}}};
    for (const auto& o : apply_channel(beacons, traj, far, ch)) {
        CHECK(o.range_m > 9000);
        CHECK_FALSE(o.delivered);
    }
}

TEST_CASE("probabilistic channel is seeded")
{
    auto p = basic_flight();
    p.transmitters[0].period_s = 5;
    const auto traj = simulate_trajectory(p);
    const auto beacons = emit_beacons(traj, p.transmitters);
    ChannelParams ch;
    ch.model = DropModel::probabilistic;
    ch.seed = 3;
    ReceiverPath rx{{{0, ReceiverWaypoint::Anchor::launch, 0, 0, 0}}};
    const auto a = apply_channel(beacons, traj, rx, ch);
    const auto b = apply_channel(beacons, traj, rx, ch);
    std::size_t delivered = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].delivered == b[i].delivered);
        delivered += a[i].delivered;
    }
    CHECK(delivered > 0);
    CHECK(delivered < a.size());
}

TEST_CASE("scenario loading errors name the key")
{
    auto j = nlohmann::json::parse(R"({"launch": {"lat": 39, "lon": -77, "alt_m": 100, "time": "2024-04-13T13:00:00Z"},
        "transmitters": [{"callsign": "W3EAX-12", "mode": "plain"}]})");
    CHECK_NOTHROW(scenario_from_json(j));
    auto bad = j;
    bad["transmitters"][0]["mode"] = "morse";
    CHECK_THROWS_AS(scenario_from_json(bad), ConfigError);
    CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), ConfigError);
}

TEST_CASE("NS-75 loses and reacquires the target")
{
    const auto sc = load_scenario(kScenarios / "ns75.json");
    REQUIRE(sc.antenna_pattern);
    CHECK(std::filesystem::exists(*sc.antenna_pattern));
    Engine engine(tracker_config(sc));
    engine.keep_history(true);
    const auto res = run_scenario(sc, engine);
    CHECK(res.trajectory.burst_t_s == doctest::Approx(5380.0));
    CHECK(res.delivered > 0);
    CHECK(res.delivered < res.emitted);

    std::vector<nlohmann::json> transitions;
    for (const auto& l : engine.history()) {
        auto j = nlohmann::json::parse(l);
        if (j["type"] == "signal_lost" || j["type"] == "signal_reacquired")
            transitions.push_back(j);
    }
    REQUIRE(transitions.size() >= 2);
    CHECK(transitions[0]["type"] == "signal_lost");
    CHECK(transitions[1]["type"] == "signal_reacquired");
    const double reacq_alt = transitions[1]["data"]["fix"]["alt_m"];
    CHECK(reacq_alt == doctest::Approx(6000).epsilon(1000.0 / 6000));
    bool gain_reported = false;
    for (const auto& l : engine.history())
        gain_reported = gain_reported || l.find("\"gain_fraction\"") != std::string::npos;
    CHECK(gain_reported);
}

TEST_CASE("scenario runs are deterministic")
{
    const auto sc = load_scenario(kScenarios / "ns77.json");
    Engine a(tracker_config(sc)), b(tracker_config(sc));
    a.keep_history(true);
    b.keep_history(true);
    run_scenario(sc, a);
    run_scenario(sc, b);
    CHECK(a.history() == b.history());
    CHECK(a.snapshot_text() == b.snapshot_text());
}

TEST_CASE("NS-77 walk-around interleaves own and station events")
{
    const auto sc = load_scenario(kScenarios / "ns77.json");
    Engine engine(tracker_config(sc));
    engine.keep_history(true);
    const auto nmea = std::filesystem::temp_directory_path() / "viper_ns77_test.nmea";
    const auto res = run_scenario(sc, engine, {.nmea_file = nmea});
    CHECK(std::filesystem::file_size(nmea) > 0);
    std::filesystem::remove(nmea);
    CHECK(res.own_fixes > 0);

    const auto types = event_types(engine.history());
    std::size_t switches = 0;
    std::string last;
    for (const auto& t : types) {
        if (t != "own_updated" && t != "station_updated")
            continue;
        if (!last.empty() && t != last)
            ++switches;
        last = t;
    }
    CHECK(switches >= 20);
    const auto snap = engine.snapshot();
    CHECK_FALSE(snap["own_tail"].empty());
    for (const auto& st : snap["stations"])
        CHECK_FALSE(st["tail"].empty());
}

TEST_CASE("rendered audio decodes every delivered frame")
{
    auto sc = load_scenario(kScenarios / "ns77.json");
    sc.flight.max_duration_s = 600;
    Engine engine(tracker_config(sc));
    const auto res = run_scenario(sc, engine, {.own_fixes = false});
    const auto wav = std::filesystem::temp_directory_path() / "viper_sim_test.wav";
    const auto render = render_flight_audio(res.outcomes, res.trajectory, wav);
    CHECK(render.placed.size() == res.delivered);

    const auto audio = modem::read_wav(wav);
    std::filesystem::remove(wav);
    CHECK(audio.sample_rate == 22050);
    CHECK(audio.samples.size() == render.samples);
    const double seconds = double(render.samples) / 22050;
    CHECK(seconds == doctest::Approx(std::chrono::duration<double>(res.trajectory.end() - res.trajectory.start()).count()).epsilon(0.01));

    AudioReceiver rx(modem::ModemConfig{.sample_rate = 22050}, res.trajectory.start());
    std::vector<ax25::FrameEvent> got;
    rx.push(audio.samples, got);
    rx.flush(got);
    const auto want = delivered_frames(res.outcomes);
    REQUIRE(got.size() == want.size());
    std::multiset<std::string> a, b;
    for (const auto& f : got)
        a.insert(ax25::to_tnc2(f.frame));
    for (const auto& f : want)
        b.insert(ax25::to_tnc2(f.frame));
    CHECK(a == b);
}
