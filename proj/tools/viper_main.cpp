// viper: balloon tracking receiver, service, log replay and flight simulator.

#include "viper/engine.hpp"
#include "viper/error.hpp"
#include "viper/service.hpp"
#include "viper/sim.hpp"
#include "viper/tracker.hpp"
#include "viper/wav.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <thread>

using namespace viper;
using nlohmann::json;

namespace {

Duration seconds_option(double s, const char* what)
{
    const auto ms = std::llround(s * 1000.0);
    if (!(s > 0.0) || ms <= 0)
        throw ConfigError(std::string(what) + " must be a positive number of seconds");
    return Duration{ms};
}

Timestamp start_option(const std::string& iso)
{
    if (iso.empty())
        return wall_clock_now();
    try {
        return parse_iso8601(iso);
    } catch (const ParseError& e) {
        throw ConfigError("--start expects an ISO 8601 UTC time such as 2024-05-01T14:00:00Z (" +
                          std::string(e.what()) + ")");
    }
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("cannot write " + path.string());
    out << text;
}

struct DecodeArgs {
    std::string input;
    bool raw = false;
    int rate = 48000;
    std::string start;
    bool json_out = false;
};

int run_decode(const DecodeArgs& a)
{
    modem::AudioBlock audio;
    if (a.raw) {
        std::ifstream in(a.input, std::ios::binary);
        if (!in)
            throw ConfigError("cannot open " + a.input);
        audio.sample_rate = a.rate;
        while (modem::read_raw_pcm(in, audio.samples, 1 << 16) > 0) {
        }
    } else {
        audio = modem::read_wav(std::filesystem::path(a.input));
    }
    modem::ModemConfig mc;
    mc.sample_rate = audio.sample_rate;
    AudioReceiver rx(mc, start_option(a.start));
    std::vector<ax25::FrameEvent> frames;
    rx.push(audio.samples, frames);
    rx.flush(frames);
    for (const auto& f : frames) {
        if (a.json_out) {
            std::cout << json{{"received_at", to_millis(f.received_at)},
                              {"tnc2", ax25::to_tnc2(f.frame)},
                              {"raw", tracker::to_hex(f.raw)}}
                             .dump()
                      << '\n';
        } else {
            std::cout << format_iso8601(f.received_at) << ' ' << ax25::to_tnc2(f.frame) << '\n';
        }
    }
    std::cerr << frames.size() << " frames decoded, " << rx.rejected() << " candidates rejected\n";
    return 0;
}

struct ServeArgs {
    ServiceConfig cfg;
    std::string kiss_connect;
    int kiss_port = 8001;
    bool no_kiss = false;
    double tail_window_s = 7200.0;
    double loss_threshold_s = 120.0;
    std::string start;
    bool exit_when_idle = false;
};

int run_serve(ServeArgs a)
{
    auto& cfg = a.cfg;
    if (!a.no_kiss)
        cfg.kiss_listen = a.kiss_port;
    if (!a.kiss_connect.empty())
        cfg.kiss_connect = HostPort::parse(a.kiss_connect);
    cfg.tail_window = seconds_option(a.tail_window_s, "--tail-window");
    cfg.loss_threshold = seconds_option(a.loss_threshold_s, "--loss-threshold");
    if (!a.start.empty())
        cfg.audio_start = start_option(a.start);
    if (!cfg.static_dir) {
        const std::filesystem::path bundled = VIPER_DATA_DIR "/www";
        if (std::filesystem::is_directory(bundled))
            cfg.static_dir = bundled;
    }

    Service svc(cfg);
    svc.start();
    std::cerr << "viper: HTTP on " << cfg.http_bind << ':' << svc.http_port();
    if (svc.kiss_port() > 0)
        std::cerr << ", KISS on port " << svc.kiss_port();
    std::cerr << '\n';
    if (a.exit_when_idle) {
        while (!svc.sources_idle())
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
        svc.stop();
    } else {
        svc.wait(true);
    }
    std::cerr << "viper: stopped after " << svc.engine().event_count() << " events\n";
    return 0;
}

struct TrackerArgs {
    double tail_window_s = 7200.0;
    double loss_threshold_s = 120.0;
    std::string pattern;
    std::string scenario;

    tracker::TrackerConfig config() const
    {
        if (!scenario.empty())
            return sim::tracker_config(sim::load_scenario(scenario));
        tracker::TrackerConfig t;
        t.tail_window = seconds_option(tail_window_s, "--tail-window");
        t.loss_threshold = seconds_option(loss_threshold_s, "--loss-threshold");
        if (!pattern.empty())
            t.pattern = std::make_shared<geo::AntennaPattern>(geo::AntennaPattern::load_csv(pattern));
        return t;
    }
};

struct ReplayArgs {
    std::string log;
    TrackerArgs tracker;
    double speed = 0.0;
    std::string state_out;
    bool quiet = false;
};

int run_replay(const ReplayArgs& a)
{
    std::ifstream in(a.log);
    if (!in)
        throw ConfigError("cannot open log " + a.log);
    tracker::Tracker tr(a.tracker.config());
    std::optional<Timestamp> first;
    const auto wall_start = std::chrono::steady_clock::now();
    const auto result = tracker::replay_log(in, tr, [&](const tracker::TrackerEvent& ev) {
        if (a.speed > 0.0) {
            if (!first)
                first = ev.time;
            const std::chrono::duration<double> offset(
                std::chrono::duration<double>(ev.time - *first).count() / a.speed);
            std::this_thread::sleep_until(
                wall_start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(offset));
        }
        if (!a.quiet)
            std::cout << ev.to_line() << '\n' << std::flush;
    });
    if (!a.state_out.empty())
        write_text(a.state_out, tr.snapshot().dump(2) + "\n");
    std::cerr << result.events_read << " events read, " << result.inputs_applied << " inputs applied, "
              << result.mismatches << " mismatches\n";
    return result.mismatches == 0 ? 0 : 2;
}

struct SimulateArgs {
    std::string scenario;
    std::string events_out;
    std::string wav_out;
    std::string nmea_out;
    std::string outcomes_out;
    std::string state_out;
    std::string kiss;
    double kiss_speed = 0.0;
    int wav_rate = 22050;
};

int run_simulate(const SimulateArgs& a)
{
    const auto sc = sim::load_scenario(a.scenario);
    Engine engine(sim::tracker_config(sc));
    if (!a.events_out.empty()) {
        std::filesystem::remove(a.events_out);
        engine.open_log(a.events_out);
    }
    sim::ScenarioOptions opts;
    if (!a.nmea_out.empty())
        opts.nmea_file = a.nmea_out;
    const auto result = sim::run_scenario(sc, engine, opts);
    engine.flush();

    if (!a.outcomes_out.empty()) {
        std::ofstream out(a.outcomes_out);
        if (!out)
            throw ConfigError("cannot write " + a.outcomes_out);
        for (const auto& o : result.outcomes)
            out << sim::outcome_to_json(o).dump() << '\n';
    }
    if (!a.state_out.empty())
        write_text(a.state_out, engine.snapshot().dump(2) + "\n");
    if (!a.wav_out.empty()) {
        sim::AudioRenderOptions ro;
        ro.modem.sample_rate = a.wav_rate;
        const auto r = sim::render_flight_audio(result.outcomes, result.trajectory, a.wav_out, ro);
        std::cerr << "wrote " << r.samples << " samples at " << a.wav_rate << " Hz to " << a.wav_out << '\n';
    }
    if (!a.kiss.empty())
        kiss_playback(HostPort::parse(a.kiss), sim::delivered_frames(result.outcomes), a.kiss_speed);

    const auto& traj = result.trajectory;
    std::cerr << sc.name << ": burst at T+" << traj.burst_t_s << " s, landing at T+" << traj.landing_t_s
              << " s, " << result.emitted << " beacons, " << result.delivered << " delivered, "
              << result.own_fixes << " own fixes, " << engine.event_count() << " events\n";
    return 0;
}

void add_tracker_options(CLI::App* cmd, TrackerArgs& t)
{
    cmd->add_option("--tail-window", t.tail_window_s, "Tail window in seconds")->capture_default_str();
    cmd->add_option("--loss-threshold", t.loss_threshold_s, "Signal-loss threshold in seconds")
        ->capture_default_str();
    cmd->add_option("--pattern", t.pattern, "Antenna pattern CSV (az_deg,el_deg,gain_dbi)");
    cmd->add_option("--scenario", t.scenario, "Take the tracker settings from a scenario file");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Balloon tracking receiver, event service and flight simulator"};
    app.require_subcommand(1);

    DecodeArgs dec;
    auto* decode = app.add_subcommand("decode", "Demodulate 1200 baud AFSK audio and print TNC2 lines");
    decode->add_option("input", dec.input, "WAV file, or raw 16-bit LE PCM with --raw")->required();
    decode->add_flag("--raw", dec.raw, "Input is headerless 16-bit little-endian mono PCM");
    decode->add_option("--rate", dec.rate, "Sample rate of raw input")->capture_default_str();
    decode->add_option("--start", dec.start, "Time of the first sample (ISO 8601 UTC); default now");
    decode->add_flag("--json", dec.json_out, "Print one JSON object per frame");

    ServeArgs srv;
    auto* serve = app.add_subcommand("serve", "Run the receiver, tracker and HTTP/WebSocket service");
    serve->add_option("--wav", srv.cfg.wav, "Decode a WAV file as the audio source");
    serve->add_option("--raw", srv.cfg.raw_pcm, "Raw 16-bit LE PCM from a path or '-' for stdin");
    serve->add_option("--raw-rate", srv.cfg.raw_sample_rate, "Sample rate of raw PCM")->capture_default_str();
    serve->add_option("--start", srv.start, "Time of the first audio sample and start of the session clock (ISO 8601 UTC)");
    serve->add_option("--kiss-port", srv.kiss_port, "KISS TCP listen port")->capture_default_str();
    serve->add_flag("--no-kiss", srv.no_kiss, "Do not listen for KISS clients");
    serve->add_option("--kiss-connect", srv.kiss_connect, "Read KISS frames from a TNC at host:port");
    serve->add_option("--nmea", srv.cfg.nmea, "NMEA source: file, serial device or '-' for stdin");
    serve->add_option("--nmea-baud", srv.cfg.nmea_baud, "Serial baud rate for --nmea")->capture_default_str();
    serve->add_option("--bind", srv.cfg.http_bind, "HTTP bind address")->capture_default_str();
    serve->add_option("--http-port", srv.cfg.http_port, "HTTP port")->capture_default_str();
    serve->add_option("--static", srv.cfg.static_dir, "Directory served at /");
    serve->add_option("--log", srv.cfg.log_path, "Append events to this NDJSON file");
    serve->add_option("--tail-window", srv.tail_window_s, "Tail window in seconds")->capture_default_str();
    serve->add_option("--loss-threshold", srv.loss_threshold_s, "Signal-loss threshold in seconds")
        ->capture_default_str();
    serve->add_option("--pattern", srv.cfg.antenna_pattern, "Antenna pattern CSV");
    serve->add_option("--target", srv.cfg.target, "Callsign to point at");
    serve->add_flag("--exit-when-idle", srv.exit_when_idle, "Stop once the WAV and NMEA files are consumed");

    ReplayArgs rep;
    auto* replay = app.add_subcommand("replay", "Rebuild tracker state from an NDJSON event log");
    replay->add_option("log", rep.log, "Event log")->required();
    add_tracker_options(replay, rep.tracker);
    replay->add_option("--speed", rep.speed, "Pace events at this multiple of real time; 0 = no pacing")
        ->capture_default_str();
    replay->add_option("--state", rep.state_out, "Write the final /state snapshot here");
    replay->add_flag("--quiet", rep.quiet, "Do not print regenerated events");

    SimulateArgs simargs;
    auto* simulate = app.add_subcommand("simulate", "Run a flight scenario through the tracker");
    simulate->add_option("scenario", simargs.scenario, "Scenario JSON")->required();
    simulate->add_option("--events", simargs.events_out, "Write the event timeline (NDJSON)");
    simulate->add_option("--wav", simargs.wav_out, "Render the received audio to a WAV file");
    simulate->add_option("--wav-rate", simargs.wav_rate, "Sample rate for --wav")->capture_default_str();
    simulate->add_option("--nmea", simargs.nmea_out, "Write the receiver NMEA stream and ingest it from there");
    simulate->add_option("--outcomes", simargs.outcomes_out, "Write per-beacon channel outcomes (NDJSON)");
    simulate->add_option("--state", simargs.state_out, "Write the final /state snapshot");
    simulate->add_option("--kiss", simargs.kiss, "Also send delivered frames to a KISS server at host:port");
    simulate->add_option("--kiss-speed", simargs.kiss_speed, "Playback speed for --kiss; 0 = back to back")
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*decode)
            return run_decode(dec);
        if (*serve)
            return run_serve(srv);
        if (*replay)
            return run_replay(rep);
        if (*simulate)
            return run_simulate(simargs);
    } catch (const ConfigError& e) {
        std::cerr << "viper: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "viper: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
