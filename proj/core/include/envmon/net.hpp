#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "envmon/collector.hpp"
#include "envmon/config.hpp"
#include "envmon/poe_switch.hpp"
#include "envmon/rrstore.hpp"

namespace envmon::net {

std::int64_t wall_ms();

// Blocking line-oriented TCP client ("\n"-terminated).
class LineClient {
public:
    LineClient() = default;
    ~LineClient();
    LineClient(const LineClient&) = delete;
    LineClient& operator=(const LineClient&) = delete;

    // Throws Error(Err::IoError) on failure.
    void connect(const std::string& host, int port);
    bool connected() const { return fd_ >= 0; }
    void close();

    void send_line(const std::string& line);
    // Empty optional on timeout; throws on closed connection / error.
    std::optional<std::string> recv_line(int timeout_ms);

private:
    int fd_ = -1;
    std::string buf_;
};

// Threaded line-oriented TCP server. One thread per connection; the handler
// is invoked per complete line and may reply via send().
class LineServer {
public:
    using Handler = std::function<void(int conn_id, const std::string& line)>;
    using CloseHandler = std::function<void(int conn_id)>;

    explicit LineServer(int port);  // port 0 = ephemeral
    ~LineServer();

    void set_handler(Handler h) { handler_ = std::move(h); }
    void set_close_handler(CloseHandler h) { on_close_ = std::move(h); }

    void start();  // throws Error(Err::IoError) if bind/listen fails
    void stop();
    int listen_port() const { return bound_port_; }

    bool send(int conn_id, const std::string& line);

private:
    void accept_loop();
    void conn_loop(int conn_id, int fd);

    int requested_port_;
    int bound_port_ = 0;
    int listen_fd_ = -1;
    std::atomic<bool> running_{false};
    Handler handler_;
    CloseHandler on_close_;
    std::thread accept_thread_;
    std::mutex mu_;
    int next_conn_id_ = 1;
    std::map<int, int> conn_fds_;
    std::vector<std::thread> conn_threads_;
};

// TCP front end for the collector: ingests telemetry lines, answers
// "status" and "query <key> <from_ms> <to_ms>", and relays "cmd ..." lines
// to the connection that last carried telemetry for the target unit. A
// wall-clock watchdog thread escalates via the relayed reset line and the
// PoE switch control port.
class CollectorService {
public:
    CollectorService(const cfg::Config& config, rr::Store& store,
                     collector::Collector& collector);
    ~CollectorService();

    void start();
    void stop();
    int listen_port() const { return server_.listen_port(); }

private:
    void handle(int conn_id, const std::string& line);
    void on_conn_close(int conn_id);
    void watchdog_loop();
    bool send_to_sau(const std::string& sau_id, const std::string& line);
    void request_cycle(const std::string& sau_id);

    cfg::Config config_;
    rr::Store& store_;
    collector::Collector& collector_;
    LineServer server_;
    std::mutex mu_;
    std::map<std::string, int> sau_conns_;
    std::atomic<bool> running_{false};
    std::thread watchdog_thread_;
};

// TCP front end for the PoE switch control protocol, with a wall-clock
// tick thread completing pending power cycles.
class SwitchServer {
public:
    SwitchServer(PoeSwitch& sw, int port);
    ~SwitchServer();

    void start();
    void stop();
    int listen_port() const { return server_.listen_port(); }

private:
    PoeSwitch& switch_;
    LineServer server_;
    std::mutex mu_;
    std::atomic<bool> running_{false};
    std::thread tick_thread_;
};

}  // namespace envmon::net
