#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "envmon/config.hpp"
#include "envmon/protocol.hpp"
#include "envmon/rrstore.hpp"

namespace envmon::collector {

enum class HealthState {
    Healthy,
    Stale,
    ResetSent,
    AwaitingReset,
    CycleSent,
    AwaitingCycle,
    Failed,
};

const char* health_state_name(HealthState s);

struct SauHealth {
    std::string sau_id;
    HealthState state = HealthState::Healthy;
    std::int64_t last_seen_ms = 0;
    std::int64_t state_since_ms = 0;
    std::int64_t next_retry_ms = 0;   // FAILED backoff schedule
    std::int64_t backoff_ms = 0;
    int escalation_count = 0;
};

struct Action {
    enum class Kind { SoftReset, PowerCycle };
    Kind kind;
    std::string sau_id;
};

struct Counters {
    std::uint64_t records = 0;
    std::uint64_t heartbeats = 0;
    std::uint64_t decode_malformed = 0;
    std::uint64_t decode_bad_number = 0;
    std::uint64_t decode_unknown_metric = 0;
    std::uint64_t storage_rejects = 0;
};

// Central ingest + per-SAU watchdog state machine. Staleness is judged on
// heartbeats only: a browned-out MCU behind a live agent must never be
// escalated.
class Collector {
public:
    using EventSink = std::function<void(const std::string& line)>;
    using AlarmSink = std::function<void(const std::string& line)>;

    Collector(cfg::WatchdogTimeouts timeouts, std::vector<cfg::AlarmRule> rules,
              rr::Store* store = nullptr);

    void set_event_sink(EventSink sink) { event_sink_ = std::move(sink); }
    void set_alarm_sink(AlarmSink sink) { alarm_sink_ = std::move(sink); }

    // Expected units begin their staleness clock at registration.
    void register_sau(const std::string& sau_id, std::int64_t now_ms);

    void ingest(const proto::TelemetryRecord& record);
    // Decode errors are counted, never fatal.
    proto::DecodeError ingest_line(std::string_view line);

    std::vector<Action> watchdog_tick(std::int64_t now_ms);

    std::string status(std::int64_t now_ms) const;

    const std::map<std::string, SauHealth>& health() const { return health_; }
    const Counters& counters() const { return counters_; }
    const std::vector<std::string>& events() const { return event_log_; }

    static std::string metric_key(const proto::TelemetryRecord& r);

private:
    struct AlarmState {
        int violations = 0;
        int oks = 0;
        bool active = false;
    };

    void log_event(std::int64_t ts_ms, const std::string& sau_id,
                   const std::string& kind, const std::string& detail);
    void evaluate_alarms(const proto::TelemetryRecord& r);
    SauHealth& health_for(const std::string& sau_id, std::int64_t now_ms);
    void enter(SauHealth& h, HealthState s, std::int64_t now_ms);

    cfg::WatchdogTimeouts timeouts_;
    std::vector<cfg::AlarmRule> rules_;
    rr::Store* store_;
    std::map<std::string, SauHealth> health_;
    std::map<std::string, std::pair<std::int64_t, double>> last_values_;
    std::map<std::string, AlarmState> alarm_states_;  // rule|key
    Counters counters_;
    std::vector<std::string> event_log_;
    EventSink event_sink_;
    AlarmSink alarm_sink_;
};

}  // namespace envmon::collector
