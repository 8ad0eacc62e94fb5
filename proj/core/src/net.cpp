#include "envmon/net.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <sstream>

#include "envmon/protocol.hpp"

namespace envmon::net {

std::int64_t wall_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

namespace {

void send_all(int fd, const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
        const ssize_t n = ::send(fd, data.data() + off, data.size() - off,
                                 MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error(Err::IoError, "send failed: " +
                                          std::string(std::strerror(errno)));
        }
        off += (std::size_t)n;
    }
}

// Pops one complete line from buf, if present.
bool pop_line(std::string& buf, std::string& line) {
    const auto nl = buf.find('\n');
    if (nl == std::string::npos) return false;
    line.assign(buf, 0, nl);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    buf.erase(0, nl + 1);
    return true;
}

}  // namespace

// ---------------------------------------------------------------- LineClient

LineClient::~LineClient() { close(); }

void LineClient::connect(const std::string& host, int port) {
    close();
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string service = std::to_string(port);
    if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 ||
        !res) {
        throw Error(Err::IoError, "cannot resolve " + host);
    }
    int fd = -1;
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0)
        throw Error(Err::IoError,
                    "cannot connect to " + host + ":" + service);
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    fd_ = fd;
    buf_.clear();
}

void LineClient::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

void LineClient::send_line(const std::string& line) {
    if (fd_ < 0) throw Error(Err::IoError, "not connected");
    send_all(fd_, line + "\n");
}

std::optional<std::string> LineClient::recv_line(int timeout_ms) {
    if (fd_ < 0) throw Error(Err::IoError, "not connected");
    std::string line;
    const auto deadline = wall_ms() + timeout_ms;
    while (true) {
        if (pop_line(buf_, line)) return line;
        const std::int64_t remaining = deadline - wall_ms();
        if (remaining <= 0) return std::nullopt;
        pollfd pfd{fd_, POLLIN, 0};
        const int pr = ::poll(&pfd, 1, (int)remaining);
        if (pr == 0) return std::nullopt;
        if (pr < 0) {
            if (errno == EINTR) continue;
            throw Error(Err::IoError, "poll failed");
        }
        char chunk[4096];
        const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
        if (n == 0) throw Error(Err::IoError, "connection closed");
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error(Err::IoError, "recv failed");
        }
        buf_.append(chunk, (std::size_t)n);
    }
}

// ---------------------------------------------------------------- LineServer

LineServer::LineServer(int port) : requested_port_(port) {}

LineServer::~LineServer() { stop(); }

void LineServer::start() {
    if (running_) return;
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw Error(Err::IoError, "socket failed");
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = htons((std::uint16_t)requested_port_);
    if (::bind(fd, (sockaddr*)&addr, sizeof(addr)) < 0 ||
        ::listen(fd, 16) < 0) {
        ::close(fd);
        throw Error(Err::IoError, "cannot listen on port " +
                                      std::to_string(requested_port_));
    }
    socklen_t len = sizeof(addr);
    ::getsockname(fd, (sockaddr*)&addr, &len);
    bound_port_ = ntohs(addr.sin_port);
    listen_fd_ = fd;
    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
}

void LineServer::stop() {
    if (!running_) return;
    running_ = false;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    listen_fd_ = -1;
    {
        std::lock_guard<std::mutex> lock(mu_);
        for (auto& [id, fd] : conn_fds_) ::shutdown(fd, SHUT_RDWR);
    }
    if (accept_thread_.joinable()) accept_thread_.join();
    std::vector<std::thread> threads;
    {
        std::lock_guard<std::mutex> lock(mu_);
        threads.swap(conn_threads_);
    }
    for (auto& t : threads)
        if (t.joinable()) t.join();
}

void LineServer::accept_loop() {
    while (running_) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (!running_) break;
            if (errno == EINTR) continue;
            break;
        }
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
        std::lock_guard<std::mutex> lock(mu_);
        const int conn_id = next_conn_id_++;
        conn_fds_[conn_id] = fd;
        conn_threads_.emplace_back(
            [this, conn_id, fd] { conn_loop(conn_id, fd); });
    }
}

void LineServer::conn_loop(int conn_id, int fd) {
    std::string buf;
    std::string line;
    char chunk[4096];
    while (running_) {
        const ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
        if (n <= 0) break;
        buf.append(chunk, (std::size_t)n);
        while (pop_line(buf, line)) {
            if (handler_) {
                try {
                    handler_(conn_id, line);
                } catch (const std::exception&) {
                    // A misbehaving handler must not take the server down.
                }
            }
        }
    }
    {
        std::lock_guard<std::mutex> lock(mu_);
        conn_fds_.erase(conn_id);
    }
    ::close(fd);
    if (on_close_) on_close_(conn_id);
}

bool LineServer::send(int conn_id, const std::string& line) {
    int fd = -1;
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = conn_fds_.find(conn_id);
        if (it == conn_fds_.end()) return false;
        fd = it->second;
    }
    try {
        send_all(fd, line + "\n");
    } catch (const Error&) {
        return false;
    }
    return true;
}

// ---------------------------------------------------------- CollectorService

CollectorService::CollectorService(const cfg::Config& config, rr::Store& store,
                                   collector::Collector& collector)
    : config_(config),
      store_(store),
      collector_(collector),
      server_(config.collector.listen_port) {}

CollectorService::~CollectorService() { stop(); }

void CollectorService::start() {
    server_.set_handler(
        [this](int conn_id, const std::string& line) { handle(conn_id, line); });
    server_.set_close_handler(
        [this](int conn_id) { on_conn_close(conn_id); });
    server_.start();
    const std::int64_t now = wall_ms();
    {
        std::lock_guard<std::mutex> lock(mu_);
        for (const auto& sc : config_.saus)
            collector_.register_sau(sc.id, now);
    }
    running_ = true;
    watchdog_thread_ = std::thread([this] { watchdog_loop(); });
}

void CollectorService::stop() {
    if (!running_) return;
    running_ = false;
    if (watchdog_thread_.joinable()) watchdog_thread_.join();
    server_.stop();
}

void CollectorService::on_conn_close(int conn_id) {
    std::lock_guard<std::mutex> lock(mu_);
    for (auto it = sau_conns_.begin(); it != sau_conns_.end();) {
        if (it->second == conn_id)
            it = sau_conns_.erase(it);
        else
            ++it;
    }
}

bool CollectorService::send_to_sau(const std::string& sau_id,
                                   const std::string& line) {
    int conn_id = -1;
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = sau_conns_.find(sau_id);
        if (it == sau_conns_.end()) return false;
        conn_id = it->second;
    }
    return server_.send(conn_id, line);
}

void CollectorService::request_cycle(const std::string& sau_id) {
    int port = 0;
    for (const auto& sc : config_.saus)
        if (sc.id == sau_id) port = sc.switch_port;
    if (port <= 0) return;
    try {
        LineClient client;
        client.connect(config_.collector.switch_host,
                       config_.collector.switch_port);
        client.send_line("cycle " + std::to_string(port) + " " +
                         std::to_string(kDefaultCycleOffMs));
        (void)client.recv_line(1000);
    } catch (const Error&) {
        // Switch unreachable; the watchdog will retry after backoff.
    }
}

void CollectorService::handle(int conn_id, const std::string& line) {
    if (line.rfind("v1 ", 0) == 0) {
        std::lock_guard<std::mutex> lock(mu_);
        proto::TelemetryRecord rec;
        if (proto::decode(line, rec) == proto::DecodeError::Ok) {
            sau_conns_[rec.sau_id] = conn_id;
            collector_.ingest(rec);
        } else {
            collector_.ingest_line(line);
        }
        return;
    }
    if (line == "status") {
        std::string reply;
        {
            std::lock_guard<std::mutex> lock(mu_);
            reply = collector_.status(wall_ms());
        }
        server_.send(conn_id, reply + "end-status");
        return;
    }
    std::istringstream in(line);
    std::string verb;
    in >> verb;
    if (verb == "query") {
        std::string key;
        std::int64_t from_ms = 0, to_ms = 0;
        std::size_t max_points = 10000;
        in >> key >> from_ms >> to_ms;
        if (in.fail()) {
            server_.send(conn_id, "err usage: query <key> <from_ms> <to_ms>");
            return;
        }
        try {
            std::vector<rr::Sample> samples;
            {
                std::lock_guard<std::mutex> lock(mu_);
                samples = store_.query(key, from_ms, to_ms, max_points);
            }
            std::string reply;
            for (const auto& s : samples)
                reply += std::to_string(s.timestamp_ms) + " " +
                         proto::format_value(s.value) + "\n";
            server_.send(conn_id, reply + "end");
        } catch (const Error& e) {
            server_.send(conn_id, std::string("err ") + e.what());
        }
        return;
    }
    if (verb == "cmd") {
        std::string action, sau_id, image;
        in >> action >> sau_id;
        if (action == "reset" && !sau_id.empty()) {
            server_.send(conn_id, send_to_sau(sau_id, "cmd reset " + sau_id)
                                      ? "ok"
                                      : "err no connection for " + sau_id);
            return;
        }
        if (action == "flash" && (in >> image) && !sau_id.empty()) {
            server_.send(conn_id,
                         send_to_sau(sau_id, "cmd flash " + sau_id + " " + image)
                             ? "ok"
                             : "err no connection for " + sau_id);
            return;
        }
        server_.send(conn_id, "err bad command");
        return;
    }
    server_.send(conn_id, "err unknown verb");
}

void CollectorService::watchdog_loop() {
    while (running_) {
        std::this_thread::sleep_for(std::chrono::seconds(1));
        if (!running_) break;
        std::vector<collector::Action> actions;
        {
            std::lock_guard<std::mutex> lock(mu_);
            actions = collector_.watchdog_tick(wall_ms());
        }
        for (const auto& a : actions) {
            if (a.kind == collector::Action::Kind::SoftReset)
                send_to_sau(a.sau_id, "cmd reset " + a.sau_id);
            else
                request_cycle(a.sau_id);
        }
    }
}

// --------------------------------------------------------------- SwitchServer

SwitchServer::SwitchServer(PoeSwitch& sw, int port)
    : switch_(sw), server_(port) {}

SwitchServer::~SwitchServer() { stop(); }

void SwitchServer::start() {
    server_.set_handler([this](int conn_id, const std::string& line) {
        std::string reply;
        {
            std::lock_guard<std::mutex> lock(mu_);
            reply = switch_.handle_line(line, wall_ms());
        }
        server_.send(conn_id, reply);
    });
    server_.start();
    running_ = true;
    tick_thread_ = std::thread([this] {
        while (running_) {
            std::this_thread::sleep_for(std::chrono::milliseconds(200));
            std::lock_guard<std::mutex> lock(mu_);
            switch_.tick(wall_ms());
        }
    });
}

void SwitchServer::stop() {
    if (!running_) return;
    running_ = false;
    if (tick_thread_.joinable()) tick_thread_.join();
    server_.stop();
}

}  // namespace envmon::net
