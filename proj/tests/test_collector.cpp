#include <string>

#include "doctest.h"
#include "envmon/collector.hpp"

using namespace envmon;
using namespace envmon::collector;

namespace {

proto::TelemetryRecord heartbeat(const std::string& sau, std::int64_t ts) {
    proto::TelemetryRecord r;
    r.sau_id = sau;
    r.timestamp_ms = ts;
    r.metric = proto::Metric::Heartbeat;
    r.value = 1.0;
    return r;
}

proto::TelemetryRecord temp(const std::string& sau, std::int64_t ts, double v) {
    proto::TelemetryRecord r;
    r.sau_id = sau;
    r.timestamp_ms = ts;
    r.port = 1;
    r.sensor_id = "28aa";
    r.metric = proto::Metric::TempC;
    r.value = v;
    return r;
}

}  // namespace

TEST_CASE("healthy SAU over 10 minutes sees zero watchdog actions") {
    Collector c(cfg::WatchdogTimeouts{}, {});
    c.register_sau("sau-01", 0);
    for (std::int64_t t = 0; t <= 600000; t += 1000) {
        c.ingest(heartbeat("sau-01", t));
        CHECK(c.watchdog_tick(t).empty());
    }
    CHECK(c.health().at("sau-01").state == HealthState::Healthy);
    CHECK(c.events().empty());
}

TEST_CASE("silent SAU walks the full escalation ladder on schedule") {
    Collector c(cfg::WatchdogTimeouts{}, {});
    c.register_sau("sau-01", 0);
    std::vector<std::string> actions;
    for (std::int64_t t = 0; t <= 101000; t += 1000) {
        for (const auto& a : c.watchdog_tick(t)) {
            actions.push_back(std::to_string(t / 1000) + ":" +
                              (a.kind == Action::Kind::SoftReset ? "reset"
                                                                 : "cycle"));
        }
    }
    REQUIRE(actions.size() == 2);
    CHECK(actions[0] == "10:reset");
    CHECK(actions[1] == "40:cycle");
    CHECK(c.health().at("sau-01").state == HealthState::Failed);

    // FAILED at 100 s with the 5 min base backoff -> retry cycle at 400 s.
    std::vector<std::int64_t> retries;
    for (std::int64_t t = 102000; t <= 401000; t += 1000) {
        for (const auto& a : c.watchdog_tick(t)) {
            CHECK(a.kind == Action::Kind::PowerCycle);
            retries.push_back(t);
        }
    }
    REQUIRE(retries.size() == 1);
    CHECK(retries[0] == 400000);
}

TEST_CASE("backoff doubles per failure and caps at one hour") {
    Collector c(cfg::WatchdogTimeouts{}, {});
    c.register_sau("sau-01", 0);
    std::int64_t prev_backoff = 0;
    std::int64_t t = 0;
    for (int failure = 0; failure < 8; ++failure) {
        while (c.health().at("sau-01").state != HealthState::Failed) {
            t += 1000;
            (void)c.watchdog_tick(t);
        }
        const std::int64_t backoff = c.health().at("sau-01").backoff_ms;
        if (prev_backoff != 0)
            CHECK(backoff == std::min<std::int64_t>(prev_backoff * 2, 3600000));
        else
            CHECK(backoff == 300000);
        prev_backoff = backoff;
        // Ride out the backoff so the retry cycle happens and fails again.
        t = c.health().at("sau-01").next_retry_ms;
        (void)c.watchdog_tick(t);
        CHECK(c.health().at("sau-01").state == HealthState::AwaitingCycle);
    }
    CHECK(prev_backoff == 3600000);
}

TEST_CASE("heartbeat recovers any non-FAILED state") {
    Collector c(cfg::WatchdogTimeouts{}, {});
    c.register_sau("sau-01", 0);
    (void)c.watchdog_tick(10000);  // -> AwaitingReset
    CHECK(c.health().at("sau-01").state == HealthState::AwaitingReset);
    c.ingest(heartbeat("sau-01", 12000));
    CHECK(c.health().at("sau-01").state == HealthState::Healthy);
    // The recovery resets the staleness clock.
    CHECK(c.watchdog_tick(21000).empty());
    CHECK_FALSE(c.watchdog_tick(22000).empty());
}

TEST_CASE("metric records do not feed the staleness clock") {
    Collector c(cfg::WatchdogTimeouts{}, {});
    c.register_sau("sau-01", 0);
    for (std::int64_t t = 1000; t <= 9000; t += 1000)
        c.ingest(temp("sau-01", t, 21.0));
    const auto actions = c.watchdog_tick(10000);
    REQUIRE(actions.size() == 1);
    CHECK(actions[0].kind == Action::Kind::SoftReset);
}

TEST_CASE("no action for a SAU with a young heartbeat") {
    Collector c(cfg::WatchdogTimeouts{}, {});
    c.register_sau("sau-01", 0);
    c.ingest(heartbeat("sau-01", 9999));
    CHECK(c.watchdog_tick(10000).empty());
}

TEST_CASE("metrics land in storage under the composite key") {
    rr::Store store;
    Collector c(cfg::WatchdogTimeouts{}, {}, &store);
    c.ingest(temp("sau-01", 1000, 21.5));
    c.ingest(temp("sau-01", 2000, 21.7));
    const auto samples = store.query("sau-01:1:28aa:temp_c", 0, 10000, 100);
    REQUIRE(samples.size() == 2);
    CHECK(samples[1].value == 21.7);

    // An out-of-order record is counted, not fatal.
    c.ingest(temp("sau-01", 1500, 21.6));
    CHECK(c.counters().storage_rejects == 1);
}

TEST_CASE("decode failures are counted per class") {
    Collector c(cfg::WatchdogTimeouts{}, {});
    CHECK(c.ingest_line("v1 a 1 2 3 - temp_c 21.5 c") == proto::DecodeError::Ok);
    (void)c.ingest_line("garbage");
    (void)c.ingest_line("v1 a x 2 3 - temp_c 1 c");
    (void)c.ingest_line("v1 a 1 2 3 - volts 1 v");
    CHECK(c.counters().records == 1);
    CHECK(c.counters().decode_malformed == 1);
    CHECK(c.counters().decode_bad_number == 1);
    CHECK(c.counters().decode_unknown_metric == 1);
}

TEST_CASE("alarms debounce on both edges") {
    cfg::AlarmRule hot;
    hot.name = "hot";
    hot.metric = proto::Metric::TempC;
    hot.max = 30.0;
    hot.debounce_ticks = 3;
    Collector c(cfg::WatchdogTimeouts{}, {hot});
    std::vector<std::string> alarms;
    c.set_alarm_sink([&](const std::string& s) { alarms.push_back(s); });

    std::int64_t t = 0;
    c.ingest(temp("sau-01", ++t, 35.0));
    c.ingest(temp("sau-01", ++t, 35.0));
    CHECK(alarms.empty());  // below debounce
    c.ingest(temp("sau-01", ++t, 35.0));
    REQUIRE(alarms.size() == 1);
    c.ingest(temp("sau-01", ++t, 35.0));
    CHECK(alarms.size() == 1);  // no re-raise while active

    // Two OK ticks don't clear; three do.
    c.ingest(temp("sau-01", ++t, 25.0));
    c.ingest(temp("sau-01", ++t, 25.0));
    c.ingest(temp("sau-01", ++t, 35.0));  // violation resets the OK streak
    c.ingest(temp("sau-01", ++t, 25.0));
    c.ingest(temp("sau-01", ++t, 25.0));
    c.ingest(temp("sau-01", ++t, 25.0));
    int cleared = 0;
    for (const auto& e : c.events())
        if (e.find("alarm_cleared") != std::string::npos) ++cleared;
    CHECK(cleared == 1);
}

TEST_CASE("status snapshot carries health, values and counters") {
    Collector c(cfg::WatchdogTimeouts{}, {});
    c.register_sau("sau-01", 0);
    c.ingest(heartbeat("sau-01", 1000));
    c.ingest(temp("sau-01", 1000, 21.5));
    const std::string s = c.status(2000);
    CHECK(s.find("sau sau-01 state=HEALTHY") != std::string::npos);
    CHECK(s.find("metric sau-01:1:28aa:temp_c ts=1000 value=21.5") !=
          std::string::npos);
    CHECK(s.find("counters records=2 heartbeats=1") != std::string::npos);
    CHECK(s.find("end\n") != std::string::npos);
}
