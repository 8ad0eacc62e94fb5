#include <atomic>
#include <chrono>
#include <thread>

#include "doctest.h"
#include "envmon/net.hpp"

using namespace envmon;
using namespace envmon::net;

namespace {

// Polls until the predicate holds or a deadline passes.
template <typename F>
bool eventually(F&& pred, int timeout_ms = 3000) {
    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    while (std::chrono::steady_clock::now() < deadline) {
        if (pred()) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    return pred();
}

}  // namespace

TEST_CASE("line server echoes through the handler") {
    LineServer server(0);
    server.set_handler([&server](int conn_id, const std::string& line) {
        server.send(conn_id, "echo " + line);
    });
    server.start();

    LineClient client;
    client.connect("127.0.0.1", server.listen_port());
    client.send_line("hello");
    const auto reply = client.recv_line(2000);
    REQUIRE(reply.has_value());
    CHECK(*reply == "echo hello");

    client.send_line("second");
    CHECK(client.recv_line(2000) == std::string("echo second"));
    server.stop();
}

TEST_CASE("client connect to a dead port fails cleanly") {
    LineClient client;
    CHECK_THROWS_AS(client.connect("127.0.0.1", 1), Error);
}

TEST_CASE("collector service ingests telemetry and answers queries") {
    cfg::Config config;
    config.collector.listen_port = 0;
    cfg::SauConfig sau;
    sau.id = "sau-01";
    config.saus.push_back(sau);

    rr::Store store;
    collector::Collector coll(config.collector.timeouts, {}, &store);
    CollectorService service(config, store, coll);
    service.start();

    LineClient client;
    client.connect("127.0.0.1", service.listen_port());
    client.send_line("v1 sau-01 1 1000 0 - heartbeat 1 bool");
    client.send_line("v1 sau-01 2 1000 1 28aa temp_c 21.5 c");
    client.send_line("v1 sau-01 3 2000 1 28aa temp_c 21.75 c");

    CHECK(eventually([&] { return coll.counters().records >= 3; }));

    client.send_line("query sau-01:1:28aa:temp_c 0 10000");
    std::vector<std::string> rows;
    while (true) {
        const auto line = client.recv_line(2000);
        REQUIRE(line.has_value());
        if (*line == "end") break;
        rows.push_back(*line);
    }
    REQUIRE(rows.size() == 2);
    CHECK(rows[0] == "1000 21.5");
    CHECK(rows[1] == "2000 21.75");

    client.send_line("query missing 0 1");
    const auto err = client.recv_line(2000);
    REQUIRE(err.has_value());
    CHECK(err->rfind("err ", 0) == 0);

    client.send_line("status");
    bool saw_sau = false;
    while (true) {
        const auto line = client.recv_line(2000);
        REQUIRE(line.has_value());
        if (*line == "end-status") break;
        if (line->find("sau sau-01") != std::string::npos) saw_sau = true;
    }
    CHECK(saw_sau);
    service.stop();
}

TEST_CASE("collector relays commands to the SAU's own connection") {
    cfg::Config config;
    config.collector.listen_port = 0;
    rr::Store store;
    collector::Collector coll(config.collector.timeouts, {}, &store);
    CollectorService service(config, store, coll);
    service.start();

    LineClient sau_conn;
    sau_conn.connect("127.0.0.1", service.listen_port());
    sau_conn.send_line("v1 sau-07 1 1000 0 - heartbeat 1 bool");
    CHECK(eventually([&] { return coll.counters().heartbeats >= 1; }));

    LineClient operator_conn;
    operator_conn.connect("127.0.0.1", service.listen_port());
    operator_conn.send_line("cmd reset sau-07");
    CHECK(operator_conn.recv_line(2000) == std::string("ok"));
    CHECK(sau_conn.recv_line(2000) == std::string("cmd reset sau-07"));

    operator_conn.send_line("cmd flash sau-07 fw-v2");
    CHECK(operator_conn.recv_line(2000) == std::string("ok"));
    CHECK(sau_conn.recv_line(2000) == std::string("cmd flash sau-07 fw-v2"));

    operator_conn.send_line("cmd reset nobody");
    const auto reply = operator_conn.recv_line(2000);
    REQUIRE(reply.has_value());
    CHECK(reply->rfind("err", 0) == 0);
    service.stop();
}

TEST_CASE("switch server speaks the control protocol over TCP") {
    PoeSwitch sw(8);
    SwitchServer server(sw, 0);
    server.start();

    LineClient client;
    client.connect("127.0.0.1", server.listen_port());
    client.send_line("power 2 off");
    CHECK(client.recv_line(2000) == std::string("ok"));
    CHECK_FALSE(sw.port(2).powered);
    client.send_line("cycle 2 100");
    CHECK(client.recv_line(2000) == std::string("ok"));
    CHECK(eventually([&] { return sw.port(2).powered; }));
    client.send_line("power 99 on");
    const auto reply = client.recv_line(2000);
    REQUIRE(reply.has_value());
    CHECK(reply->rfind("err", 0) == 0);
    server.stop();
}
