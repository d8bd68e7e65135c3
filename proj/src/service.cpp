#include "viper/service.hpp"

#include "viper/error.hpp"
#include "viper/kiss.hpp"
#include "viper/nmea.hpp"
#include "viper/wav.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <cerrno>
#include <charconv>
#include <condition_variable>
#include <csignal>
#include <cstring>
#include <deque>
#include <fcntl.h>
#include <fstream>
#include <iostream>
#include <mutex>
#include <poll.h>
#include <set>
#include <sstream>
#include <termios.h>
#include <thread>
#include <unistd.h>

namespace viper {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using tracker::json;

HostPort HostPort::parse(const std::string& text)
{
    const auto colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == text.size())
        throw ConfigError("expected host:port, got '" + text + "'");
    HostPort hp;
    hp.host = text.substr(0, colon);
    const char* first = text.data() + colon + 1;
    const char* last = text.data() + text.size();
    const auto res = std::from_chars(first, last, hp.port);
    if (res.ec != std::errc{} || res.ptr != last || hp.port <= 0 || hp.port > 65535)
        throw ConfigError("invalid port in '" + text + "'");
    return hp;
}

void ServiceConfig::validate() const
{
    if (!wav && !raw_pcm && !kiss_listen && !kiss_connect)
        throw ConfigError("no packet source: give an audio input or a KISS endpoint");
    if (wav && raw_pcm)
        throw ConfigError("choose either a WAV file or a raw PCM stream, not both");
    auto port_ok = [](int p) { return p >= 0 && p <= 65535; };
    if (!port_ok(http_port))
        throw ConfigError("HTTP port must be 0..65535");
    if (kiss_listen && !port_ok(*kiss_listen))
        throw ConfigError("KISS port must be 0..65535");
    if (raw_pcm)
        modem::ModemConfig{.sample_rate = raw_sample_rate}.validate();
    if (tail_window <= Duration::zero() || loss_threshold <= Duration::zero() ||
        watchdog_period <= Duration::zero())
        throw ConfigError("tail window, loss threshold and watchdog period must be positive");
    if (nmea_baud <= 0)
        throw ConfigError("NMEA baud rate must be positive");
}

namespace {

// Single consumer thread; the total order of ingestion is push order.
class IngestQueue {
public:
    void start()
    {
        worker_ = std::thread([this] { loop(); });
    }

    void push(std::function<void()> job)
    {
        {
            std::lock_guard lock(mu_);
            if (stopping_)
                return;
            jobs_.push_back(std::move(job));
        }
        cv_.notify_one();
    }

    // Runs what is queued, bounded by `budget`, then joins.
    void stop(std::chrono::steady_clock::duration budget)
    {
        {
            std::lock_guard lock(mu_);
            stopping_ = true;
            deadline_ = std::chrono::steady_clock::now() + budget;
        }
        cv_.notify_one();
        if (worker_.joinable())
            worker_.join();
    }

    bool empty() const
    {
        std::lock_guard lock(mu_);
        return jobs_.empty() && !busy_;
    }

private:
    void loop()
    {
        while (true) {
            std::function<void()> job;
            {
                std::unique_lock lock(mu_);
                cv_.wait(lock, [&] { return stopping_ || !jobs_.empty(); });
                if (jobs_.empty() || (stopping_ && std::chrono::steady_clock::now() > deadline_))
                    return;
                job = std::move(jobs_.front());
                jobs_.pop_front();
                busy_ = true;
            }
            try {
                job();
            } catch (const std::exception& e) {
                std::cerr << "viper: ingest error: " << e.what() << '\n';
            }
            std::lock_guard lock(mu_);
            busy_ = false;
        }
    }

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::function<void()>> jobs_;
    bool stopping_ = false;
    bool busy_ = false;
    std::chrono::steady_clock::time_point deadline_{};
    std::thread worker_;
};

// Reads a file descriptor with poll() so the reader notices shutdown.
class FdReader {
public:
    FdReader(int fd, bool owned) : fd_(fd), owned_(owned) {}
    ~FdReader()
    {
        if (owned_ && fd_ >= 0)
            ::close(fd_);
    }
    FdReader(const FdReader&) = delete;
    FdReader& operator=(const FdReader&) = delete;

    // Bytes read, 0 at end of stream, -1 when stopped.
    ssize_t read(char* buf, std::size_t n, const std::atomic<bool>& stop)
    {
        while (!stop) {
            pollfd p{fd_, POLLIN, 0};
            const int r = ::poll(&p, 1, 100);
            if (r < 0 && errno != EINTR)
                return 0;
            if (r <= 0)
                continue;
            const ssize_t got = ::read(fd_, buf, n);
            if (got < 0 && (errno == EINTR || errno == EAGAIN))
                continue;
            return got < 0 ? 0 : got;
        }
        return -1;
    }

private:
    int fd_;
    bool owned_;
};

speed_t baud_constant(int baud)
{
    switch (baud) {
    case 4800: return B4800;
    case 9600: return B9600;
    case 19200: return B19200;
    case 38400: return B38400;
    case 57600: return B57600;
    case 115200: return B115200;
    default: throw ConfigError("unsupported serial baud rate " + std::to_string(baud));
    }
}

int open_input(const std::string& path, int baud)
{
    if (path == "-")
        return STDIN_FILENO;
    const int fd = ::open(path.c_str(), O_RDONLY | O_NOCTTY);
    if (fd < 0)
        throw ConfigError("cannot open " + path + ": " + std::strerror(errno));
    if (::isatty(fd) && baud > 0) {
        termios tio{};
        if (::tcgetattr(fd, &tio) == 0) {
            ::cfmakeraw(&tio);
            ::cfsetispeed(&tio, baud_constant(baud));
            ::cfsetospeed(&tio, baud_constant(baud));
            tio.c_cflag |= CLOCAL | CREAD;
            ::tcsetattr(fd, TCSANOW, &tio);
        }
    }
    return fd;
}

std::string url_decode(std::string_view s)
{
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '%' && i + 2 < s.size()) {
            int v = 0;
            const auto r = std::from_chars(s.data() + i + 1, s.data() + i + 3, v, 16);
            if (r.ec == std::errc{} && r.ptr == s.data() + i + 3) {
                out += static_cast<char>(v);
                i += 2;
                continue;
            }
        }
        out += s[i] == '+' ? ' ' : s[i];
    }
    return out;
}

std::map<std::string, std::string> parse_query(std::string_view q)
{
    std::map<std::string, std::string> out;
    while (!q.empty()) {
        const auto amp = q.find('&');
        const auto part = q.substr(0, amp);
        const auto eq = part.find('=');
        if (eq == std::string_view::npos)
            out[url_decode(part)] = "";
        else
            out[url_decode(part.substr(0, eq))] = url_decode(part.substr(eq + 1));
        if (amp == std::string_view::npos)
            break;
        q.remove_prefix(amp + 1);
    }
    return out;
}

// "90", "90s", "15m", "2h" or "1500ms".
std::optional<Duration> parse_window(const std::string& text)
{
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || !(v > 0.0) || !std::isfinite(v))
        return std::nullopt;
    const std::string_view unit(res.ptr, static_cast<std::size_t>(text.data() + text.size() - res.ptr));
    double scale = 1000.0;
    if (unit == "ms")
        scale = 1.0;
    else if (unit == "m")
        scale = 60000.0;
    else if (unit == "h")
        scale = 3600000.0;
    else if (!unit.empty() && unit != "s")
        return std::nullopt;
    const auto ms = std::llround(v * scale);
    if (ms <= 0)
        return std::nullopt;
    return Duration{ms};
}

std::string_view mime_type(const std::filesystem::path& p)
{
    const auto ext = p.extension().string();
    if (ext == ".html" || ext == ".htm")
        return "text/html; charset=utf-8";
    if (ext == ".js" || ext == ".mjs")
        return "text/javascript";
    if (ext == ".css")
        return "text/css";
    if (ext == ".json")
        return "application/json";
    if (ext == ".png")
        return "image/png";
    if (ext == ".jpg" || ext == ".jpeg")
        return "image/jpeg";
    if (ext == ".svg")
        return "image/svg+xml";
    if (ext == ".ico")
        return "image/x-icon";
    if (ext == ".wasm")
        return "application/wasm";
    return "application/octet-stream";
}

using Request = http::request<http::string_body>;
using Response = http::response<http::string_body>;

Response make_response(const Request& req, http::status status, std::string body,
                       std::string_view type = "application/json")
{
    Response res{status, req.version()};
    res.set(http::field::server, "viper");
    res.set(http::field::content_type, beast::string_view(type.data(), type.size()));
    res.set(http::field::cache_control, "no-store");
    res.keep_alive(req.keep_alive());
    res.body() = std::move(body);
    res.prepare_payload();
    return res;
}

Response json_error(const Request& req, http::status status, const std::string& what)
{
    return make_response(req, status, json{{"error", what}}.dump());
}

} // namespace

struct Service::Impl {
    class WsSession;
    class HttpSession;
    class KissSession;

    explicit Impl(ServiceConfig c) : cfg(std::move(c)), engine(make_tracker_config(cfg)) {}

    static tracker::TrackerConfig make_tracker_config(const ServiceConfig& cfg)
    {
        cfg.validate();
        tracker::TrackerConfig t;
        t.tail_window = cfg.tail_window;
        t.loss_threshold = cfg.loss_threshold;
        if (cfg.antenna_pattern)
            t.pattern = std::make_shared<geo::AntennaPattern>(geo::AntennaPattern::load_csv(*cfg.antenna_pattern));
        return t;
    }

    Response handle(const Request& req);
    Response serve_static(const Request& req, std::string_view path);
    void accept_http();
    void accept_kiss();
    void connect_kiss();
    void schedule_watchdog();
    void ingest_kiss(std::vector<std::uint8_t> payload)
    {
        const Timestamp now = session_now();
        queue.push([this, p = std::move(payload), now] { engine.ingest_raw(p, now); });
    }

    // Starts at the configured audio start and runs at wall-clock rate, so
    // recorded input, KISS arrivals and the watchdog share one time line.
    Timestamp session_now() const { return wall_clock_now() + clock_offset; }

    ServiceConfig cfg;
    Timestamp session_start{};
    Duration clock_offset{};
    Engine engine;
    IngestQueue queue;
    net::io_context io{1};
    std::optional<tcp::acceptor> http_acceptor;
    std::optional<tcp::acceptor> kiss_acceptor;
    std::optional<net::steady_timer> watchdog_timer;
    std::optional<net::steady_timer> reconnect_timer;
    std::optional<tcp::socket> kiss_client;
    std::thread io_thread;
    std::vector<std::thread> source_threads;
    std::atomic<bool> stopping{false};
    std::atomic<int> finite_sources{0};
    std::mutex stop_mu;
    std::condition_variable stop_cv;
    bool stopped = false;
    bool started = false;
};

class Service::Impl::WsSession : public std::enable_shared_from_this<WsSession> {
public:
    WsSession(tcp::socket&& socket, Impl& svc) : ws_(std::move(socket)), svc_(svc) {}
    ~WsSession()
    {
        if (sub_ > 0)
            svc_.engine.unsubscribe(sub_);
    }

    void run(Request req)
    {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
    }

private:
    static constexpr std::size_t kMaxBacklog = 50000;

    void on_accept(beast::error_code ec)
    {
        if (ec)
            return;
        std::weak_ptr<WsSession> weak = shared_from_this();
        auto ex = ws_.get_executor();
        sub_ = svc_.engine.subscribe([weak, ex](const tracker::TrackerEvent&, const std::string& line) {
            auto msg = std::make_shared<const std::string>(line);
            net::post(ex, [weak, msg] {
                if (auto self = weak.lock())
                    self->enqueue(msg);
            });
        });
        do_read();
    }

    void do_read()
    {
        ws_.async_read(in_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->closed_ = true;
                return;
            }
            self->in_.clear();
            self->do_read();
        });
    }

    void enqueue(std::shared_ptr<const std::string> msg)
    {
        if (closed_)
            return;
        if (queue_.size() >= kMaxBacklog) {
            // A client this far behind cannot keep the no-gap guarantee.
            closed_ = true;
            beast::get_lowest_layer(ws_).close();
            return;
        }
        queue_.push_back(std::move(msg));
        if (!writing_)
            do_write();
    }

    void do_write()
    {
        writing_ = true;
        ws_.text(true);
        ws_.async_write(net::buffer(*queue_.front()),
                        [self = shared_from_this()](beast::error_code ec, std::size_t) {
                            self->queue_.pop_front();
                            if (ec) {
                                self->closed_ = true;
                                self->writing_ = false;
                                return;
                            }
                            if (self->queue_.empty())
                                self->writing_ = false;
                            else
                                self->do_write();
                        });
    }

    websocket::stream<beast::tcp_stream> ws_;
    Impl& svc_;
    beast::flat_buffer in_;
    std::deque<std::shared_ptr<const std::string>> queue_;
    bool writing_ = false;
    bool closed_ = false;
    int sub_ = 0;
};

class Service::Impl::HttpSession : public std::enable_shared_from_this<HttpSession> {
public:
    HttpSession(tcp::socket&& socket, Impl& svc) : stream_(std::move(socket)), svc_(svc) {}

    void run() { do_read(); }

private:
    void do_read()
    {
        req_ = {};
        parser_.emplace();
        parser_->body_limit(1 << 20);
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buffer_, *parser_,
                         beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t)
    {
        if (ec == http::error::end_of_stream) {
            beast::error_code ignored;
            stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
            return;
        }
        if (ec)
            return;
        req_ = parser_->release();
        if (websocket::is_upgrade(req_)) {
            if (req_.target() == "/events" || req_.target().starts_with("/events?")) {
                stream_.expires_never();
                std::make_shared<WsSession>(stream_.release_socket(), svc_)->run(std::move(req_));
                return;
            }
            send(json_error(req_, http::status::not_found, "no WebSocket endpoint here"));
            return;
        }
        Response res;
        try {
            res = svc_.handle(req_);
        } catch (const std::exception& e) {
            res = json_error(req_, http::status::internal_server_error, e.what());
        }
        send(std::move(res));
    }

    void send(Response&& res)
    {
        auto sp = std::make_shared<Response>(std::move(res));
        http::async_write(stream_, *sp, [self = shared_from_this(), sp](beast::error_code ec, std::size_t) {
            if (ec)
                return;
            if (sp->need_eof()) {
                beast::error_code ignored;
                self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
                return;
            }
            self->do_read();
        });
    }

    beast::tcp_stream stream_;
    Impl& svc_;
    beast::flat_buffer buffer_;
    std::optional<http::request_parser<http::string_body>> parser_;
    Request req_;
};

class Service::Impl::KissSession : public std::enable_shared_from_this<KissSession> {
public:
    KissSession(tcp::socket&& socket, Impl& svc) : socket_(std::move(socket)), svc_(svc) {}

    void run() { do_read(); }

private:
    void do_read()
    {
        socket_.async_read_some(net::buffer(buf_), [self = shared_from_this()](beast::error_code ec, std::size_t n) {
            if (ec)
                return;
            std::vector<kiss::KissFrame> frames;
            self->decoder_.push(std::span<const std::uint8_t>(self->buf_.data(), n), frames);
            for (auto& f : frames)
                self->svc_.ingest_kiss(std::move(f.payload));
            self->do_read();
        });
    }

    tcp::socket socket_;
    Impl& svc_;
    std::array<std::uint8_t, 4096> buf_{};
    kiss::Decoder decoder_;
};

Response Service::Impl::handle(const Request& req)
{
    const std::string_view target(req.target().data(), req.target().size());
    const auto qpos = target.find('?');
    const std::string path = url_decode(target.substr(0, qpos));
    const auto query = parse_query(qpos == std::string_view::npos ? std::string_view{} : target.substr(qpos + 1));
    const bool get = req.method() == http::verb::get || req.method() == http::verb::head;
    const bool post = req.method() == http::verb::post;

    if (path == "/state") {
        if (!get)
            return json_error(req, http::status::method_not_allowed, "use GET");
        return make_response(req, http::status::ok, engine.snapshot_text());
    }
    if (path == "/events") {
        auto res = json_error(req, http::status::upgrade_required, "WebSocket upgrade required");
        res.set(http::field::upgrade, "websocket");
        return res;
    }
    if (path == "/health")
        return make_response(req, http::status::ok, json{{"ok", true}, {"events", engine.event_count()}}.dump());
    if (path.starts_with("/stations/") && path.ends_with("/tail")) {
        if (!get)
            return json_error(req, http::status::method_not_allowed, "use GET");
        const std::string raw = path.substr(10, path.size() - 10 - 5);
        std::string call;
        try {
            call = ax25::Callsign::parse(raw).to_string();
        } catch (const ValidationError& e) {
            return json_error(req, http::status::bad_request, e.what());
        }
        std::optional<Duration> window;
        if (const auto it = query.find("window"); it != query.end()) {
            window = parse_window(it->second);
            if (!window)
                return json_error(req, http::status::bad_request,
                                  "window must be a positive duration such as 900, 15m or 2h");
        }
        const auto tail = engine.tail(call, window);
        if (!tail)
            return json_error(req, http::status::not_found, "unknown station " + call);
        return make_response(req, http::status::ok, tail->dump());
    }
    if (path == "/target" || path == "/config/tail_window") {
        if (!post)
            return json_error(req, http::status::method_not_allowed, "use POST");
        json body;
        try {
            body = json::parse(req.body());
        } catch (const json::exception&) {
            return json_error(req, http::status::bad_request, "body must be JSON");
        }
        const Timestamp now = session_now();
        try {
            if (path == "/target") {
                if (!body.is_object() || !body.contains("callsign") ||
                    !(body["callsign"].is_string() || body["callsign"].is_null()))
                    return json_error(req, http::status::bad_request, "expected {\"callsign\": \"CALL-N\"}");
                std::string call = body["callsign"].is_null() ? "" : body["callsign"].get<std::string>();
                if (!call.empty())
                    call = ax25::Callsign::parse(call).to_string();
                auto done = std::make_shared<std::promise<void>>();
                queue.push([this, done, call, now] {
                    engine.select_target(call, now);
                    done->set_value();
                });
                done->get_future().wait_for(std::chrono::seconds(2));
                return make_response(req, http::status::ok,
                                     json{{"target", call.empty() ? json(nullptr) : json(call)}}.dump());
            }
            double seconds = 0.0;
            if (body.is_object() && body.contains("tail_window_s") && body["tail_window_s"].is_number())
                seconds = body["tail_window_s"].get<double>();
            const auto ms = std::llround(seconds * 1000.0);
            if (!(seconds > 0.0) || ms <= 0)
                return json_error(req, http::status::bad_request, "expected {\"tail_window_s\": positive number}");
            auto done = std::make_shared<std::promise<void>>();
            queue.push([this, done, ms, now] {
                engine.set_tail_window(Duration{ms}, now);
                done->set_value();
            });
            done->get_future().wait_for(std::chrono::seconds(2));
            return make_response(req, http::status::ok, json{{"tail_window_ms", ms}}.dump());
        } catch (const ValidationError& e) {
            return json_error(req, http::status::bad_request, e.what());
        }
    }
    if (get)
        return serve_static(req, path);
    return json_error(req, http::status::not_found, "no route for " + path);
}

Response Service::Impl::serve_static(const Request& req, std::string_view path)
{
    if (!cfg.static_dir)
        return json_error(req, http::status::not_found, "no static directory configured");
    if (path.find("..") != std::string_view::npos || path.find('\0') != std::string_view::npos)
        return json_error(req, http::status::bad_request, "invalid path");
    std::filesystem::path file = *cfg.static_dir / std::filesystem::path(std::string(path)).relative_path();
    std::error_code ec;
    if (std::filesystem::is_directory(file, ec))
        file /= "index.html";
    std::ifstream in(file, std::ios::binary);
    if (!in)
        return json_error(req, http::status::not_found, "not found: " + std::string(path));
    std::ostringstream body;
    body << in.rdbuf();
    auto res = make_response(req, http::status::ok, body.str(), mime_type(file));
    res.set(http::field::cache_control, "no-cache");
    return res;
}

void Service::Impl::accept_http()
{
    http_acceptor->async_accept([this](beast::error_code ec, tcp::socket socket) {
        if (ec)
            return;
        std::make_shared<HttpSession>(std::move(socket), *this)->run();
        accept_http();
    });
}

void Service::Impl::accept_kiss()
{
    kiss_acceptor->async_accept([this](beast::error_code ec, tcp::socket socket) {
        if (ec)
            return;
        std::make_shared<KissSession>(std::move(socket), *this)->run();
        accept_kiss();
    });
}

void Service::Impl::connect_kiss()
{
    if (stopping)
        return;
    auto retry = [this] {
        reconnect_timer->expires_after(std::chrono::seconds(5));
        reconnect_timer->async_wait([this](beast::error_code ec) {
            if (!ec)
                connect_kiss();
        });
    };
    tcp::resolver resolver(io);
    beast::error_code ec;
    const auto endpoints =
        resolver.resolve(cfg.kiss_connect->host, std::to_string(cfg.kiss_connect->port), ec);
    if (ec) {
        std::cerr << "viper: cannot resolve KISS host " << cfg.kiss_connect->host << ": " << ec.message() << '\n';
        retry();
        return;
    }
    kiss_client.emplace(io);
    net::async_connect(*kiss_client, endpoints, [this, retry](beast::error_code ec, const tcp::endpoint&) {
        if (ec) {
            retry();
            return;
        }
        auto decoder = std::make_shared<kiss::Decoder>();
        auto buf = std::make_shared<std::array<std::uint8_t, 4096>>();
        auto reader = std::make_shared<std::function<void()>>();
        *reader = [this, decoder, buf, reader, retry] {
            kiss_client->async_read_some(net::buffer(*buf), [this, decoder, buf, reader, retry](
                                                                beast::error_code ec, std::size_t n) {
                if (ec) {
                    *reader = nullptr; // break the self-reference
                    if (ec != net::error::operation_aborted)
                        retry();
                    return;
                }
                std::vector<kiss::KissFrame> frames;
                decoder->push(std::span<const std::uint8_t>(buf->data(), n), frames);
                for (auto& f : frames)
                    ingest_kiss(std::move(f.payload));
                (*reader)();
            });
        };
        (*reader)();
    });
}

void Service::Impl::schedule_watchdog()
{
    watchdog_timer->expires_after(cfg.watchdog_period);
    watchdog_timer->async_wait([this](beast::error_code ec) {
        if (ec)
            return;
        const Timestamp now = session_now();
        queue.push([this, now] { engine.watchdog(now); });
        schedule_watchdog();
    });
}

Service::Service(ServiceConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}

Service::~Service() { stop(); }

void Service::start()
{
    auto& s = *impl_;
    if (s.started)
        throw PreconditionError("service already started");
    s.started = true;
    const Timestamp wall = wall_clock_now();
    s.session_start = s.cfg.audio_start.value_or(wall);
    s.clock_offset = s.session_start - wall;
    if (s.cfg.log_path)
        s.engine.open_log(*s.cfg.log_path);

    // Open inputs before binding so configuration errors surface first.
    std::optional<modem::AudioBlock> wav_audio;
    if (s.cfg.wav)
        wav_audio = modem::read_wav(*s.cfg.wav);
    int raw_fd = -1;
    if (s.cfg.raw_pcm)
        raw_fd = open_input(*s.cfg.raw_pcm, 0);
    int nmea_fd = -1;
    if (s.cfg.nmea)
        nmea_fd = open_input(*s.cfg.nmea, s.cfg.nmea_baud);

    auto listen = [&](std::optional<tcp::acceptor>& acc, int port, const char* what) {
        try {
            const auto addr = net::ip::make_address(s.cfg.http_bind);
            acc.emplace(s.io);
            const tcp::endpoint ep{addr, static_cast<unsigned short>(port)};
            acc->open(ep.protocol());
            acc->set_option(net::socket_base::reuse_address(true));
            acc->bind(ep);
            acc->listen();
        } catch (const boost::system::system_error& e) {
            throw ConfigError(std::string("cannot listen for ") + what + " on " + s.cfg.http_bind + ":" +
                              std::to_string(port) + ": " + e.code().message() +
                              " (is another instance running? choose another port)");
        }
    };
    listen(s.http_acceptor, s.cfg.http_port, "HTTP");
    if (s.cfg.kiss_listen)
        listen(s.kiss_acceptor, *s.cfg.kiss_listen, "KISS");

    s.queue.start();
    if (s.cfg.target) {
        const std::string target = *s.cfg.target;
        s.queue.push([&s, target] { s.engine.select_target(target, s.session_now()); });
    }

    s.accept_http();
    if (s.kiss_acceptor)
        s.accept_kiss();
    if (s.cfg.kiss_connect) {
        s.reconnect_timer.emplace(s.io);
        s.connect_kiss();
    }
    s.watchdog_timer.emplace(s.io);
    s.schedule_watchdog();
    s.io_thread = std::thread([&s] { s.io.run(); });

    const Timestamp audio_start = s.session_start;
    auto emit = [&s](std::vector<ax25::FrameEvent>& frames) {
        for (auto& f : frames)
            s.queue.push([&s, f = std::move(f)] { s.engine.ingest_frame(f); });
        frames.clear();
    };

    if (wav_audio) {
        ++s.finite_sources;
        s.source_threads.emplace_back([&s, audio = std::move(*wav_audio), audio_start, emit]() mutable {
            modem::ModemConfig mc;
            mc.sample_rate = audio.sample_rate;
            try {
                AudioReceiver rx(mc, audio_start);
                std::vector<ax25::FrameEvent> frames;
                const std::span<const float> all(audio.samples);
                for (std::size_t i = 0; i < all.size() && !s.stopping; i += 4096) {
                    rx.push(all.subspan(i, std::min<std::size_t>(4096, all.size() - i)), frames);
                    emit(frames);
                }
                rx.flush(frames);
                emit(frames);
            } catch (const std::exception& e) {
                std::cerr << "viper: audio source stopped: " << e.what() << '\n';
            }
            --s.finite_sources;
        });
    }
    if (raw_fd >= 0) {
        s.source_threads.emplace_back([&s, raw_fd, audio_start, emit] {
            FdReader reader(raw_fd, raw_fd != STDIN_FILENO);
            modem::ModemConfig mc;
            mc.sample_rate = s.cfg.raw_sample_rate;
            try {
                AudioReceiver rx(mc, audio_start);
                std::vector<ax25::FrameEvent> frames;
                std::vector<char> bytes(8192);
                std::vector<float> samples;
                int carry = -1; // dangling low byte from the previous read
                while (true) {
                    const ssize_t n = reader.read(bytes.data(), bytes.size(), s.stopping);
                    if (n <= 0)
                        break;
                    samples.clear();
                    std::size_t i = 0;
                    auto sample = [](char lo, char hi) {
                        return modem::pcm16_to_float(static_cast<std::int16_t>(
                            static_cast<std::uint16_t>(static_cast<unsigned char>(lo)) |
                            static_cast<std::uint16_t>(static_cast<unsigned char>(hi)) << 8));
                    };
                    if (carry >= 0) {
                        samples.push_back(sample(static_cast<char>(carry), bytes[0]));
                        carry = -1;
                        i = 1;
                    }
                    for (; i + 1 < static_cast<std::size_t>(n); i += 2)
                        samples.push_back(sample(bytes[i], bytes[i + 1]));
                    if (i < static_cast<std::size_t>(n))
                        carry = static_cast<unsigned char>(bytes[i]);
                    rx.push(samples, frames);
                    emit(frames);
                }
                rx.flush(frames);
                emit(frames);
            } catch (const std::exception& e) {
                std::cerr << "viper: raw audio source stopped: " << e.what() << '\n';
            }
        });
    }
    if (nmea_fd >= 0) {
        const bool finite = *s.cfg.nmea != "-" && !::isatty(nmea_fd);
        if (finite)
            ++s.finite_sources;
        s.source_threads.emplace_back([&s, nmea_fd, finite] {
            FdReader reader(nmea_fd, nmea_fd != STDIN_FILENO);
            nmea::FixStream stream;
            std::string pending;
            std::vector<char> bytes(4096);
            auto line_done = [&](const std::string& line) {
                if (auto fix = stream.push_line(line); fix && fix->usable())
                    s.queue.push([&s, f = *fix] { s.engine.ingest_own_fix(f); });
            };
            while (true) {
                const ssize_t n = reader.read(bytes.data(), bytes.size(), s.stopping);
                if (n <= 0)
                    break;
                for (ssize_t i = 0; i < n; ++i) {
                    if (bytes[static_cast<std::size_t>(i)] == '\n') {
                        line_done(pending);
                        pending.clear();
                    } else if (pending.size() < 1024) {
                        pending += bytes[static_cast<std::size_t>(i)];
                    }
                }
            }
            if (!pending.empty())
                line_done(pending);
            if (finite)
                --s.finite_sources;
        });
    }
}

void Service::wait(bool handle_signals)
{
    auto& s = *impl_;
    if (handle_signals) {
        sigset_t set;
        sigemptyset(&set);
        sigaddset(&set, SIGINT);
        sigaddset(&set, SIGTERM);
        // Block in this thread; a helper thread waits for the signal.
        pthread_sigmask(SIG_BLOCK, &set, nullptr);
        std::thread([this, set]() mutable {
            int sig = 0;
            sigwait(&set, &sig);
            std::lock_guard lock(impl_->stop_mu);
            impl_->stopped = true;
            impl_->stop_cv.notify_all();
        }).detach();
    }
    std::unique_lock lock(s.stop_mu);
    s.stop_cv.wait(lock, [&] { return s.stopped; });
    lock.unlock();
    stop();
}

void Service::stop()
{
    auto& s = *impl_;
    if (s.stopping.exchange(true))
        return;
    {
        std::lock_guard lock(s.stop_mu);
        s.stopped = true;
    }
    s.stop_cv.notify_all();
    if (!s.started)
        return;
    net::post(s.io, [&s] {
        beast::error_code ec;
        if (s.http_acceptor)
            s.http_acceptor->close(ec);
        if (s.kiss_acceptor)
            s.kiss_acceptor->close(ec);
        if (s.kiss_client)
            s.kiss_client->close(ec);
        if (s.watchdog_timer)
            s.watchdog_timer->cancel();
        if (s.reconnect_timer)
            s.reconnect_timer->cancel();
    });
    for (auto& t : s.source_threads)
        if (t.joinable())
            t.join();
    s.queue.stop(std::chrono::milliseconds(1500));
    s.io.stop();
    if (s.io_thread.joinable())
        s.io_thread.join();
    s.engine.flush();
}

int Service::http_port() const
{
    return impl_->http_acceptor ? impl_->http_acceptor->local_endpoint().port() : 0;
}

int Service::kiss_port() const
{
    return impl_->kiss_acceptor ? impl_->kiss_acceptor->local_endpoint().port() : 0;
}

Engine& Service::engine() { return impl_->engine; }

bool Service::sources_idle() const { return impl_->finite_sources == 0 && impl_->queue.empty(); }

void kiss_playback(const HostPort& to, const std::vector<ax25::FrameEvent>& frames, double speed)
{
    net::io_context io;
    tcp::socket socket(io);
    try {
        tcp::resolver resolver(io);
        net::connect(socket, resolver.resolve(to.host, std::to_string(to.port)));
    } catch (const boost::system::system_error& e) {
        throw ConfigError("cannot connect to KISS server " + to.host + ":" + std::to_string(to.port) + ": " +
                          e.code().message());
    }
    const auto wall_start = std::chrono::steady_clock::now();
    for (const auto& f : frames) {
        if (speed > 0.0 && !frames.empty()) {
            const auto offset = std::chrono::duration<double>(
                std::chrono::duration<double>(f.received_at - frames.front().received_at).count() / speed);
            std::this_thread::sleep_until(wall_start +
                                          std::chrono::duration_cast<std::chrono::steady_clock::duration>(offset));
        }
        const auto raw = f.raw.empty() ? ax25::encode_frame(f.frame) : f.raw;
        const auto wire = kiss::encode(raw);
        net::write(socket, net::buffer(wire));
    }
    beast::error_code ec;
    socket.shutdown(tcp::socket::shutdown_send, ec);
}

} // namespace viper
