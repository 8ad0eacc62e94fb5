#include "envmon/collector.hpp"

#include <algorithm>
#include <sstream>

namespace envmon::collector {

const char* health_state_name(HealthState s) {
    switch (s) {
        case HealthState::Healthy: return "HEALTHY";
        case HealthState::Stale: return "STALE";
        case HealthState::ResetSent: return "RESET_SENT";
        case HealthState::AwaitingReset: return "AWAITING_RESET";
        case HealthState::CycleSent: return "CYCLE_SENT";
        case HealthState::AwaitingCycle: return "AWAITING_CYCLE";
        case HealthState::Failed: return "FAILED";
    }
    return "?";
}

Collector::Collector(cfg::WatchdogTimeouts timeouts,
                     std::vector<cfg::AlarmRule> rules, rr::Store* store)
    : timeouts_(timeouts), rules_(std::move(rules)), store_(store) {}

void Collector::log_event(std::int64_t ts_ms, const std::string& sau_id,
                          const std::string& kind, const std::string& detail) {
    std::string line = std::to_string(ts_ms) + " " + sau_id + " " + kind + " " +
                       (detail.empty() ? "-" : detail);
    event_log_.push_back(line);
    if (event_sink_) event_sink_(line);
}

void Collector::register_sau(const std::string& sau_id, std::int64_t now_ms) {
    health_for(sau_id, now_ms);
}

SauHealth& Collector::health_for(const std::string& sau_id, std::int64_t now_ms) {
    auto it = health_.find(sau_id);
    if (it == health_.end()) {
        SauHealth h;
        h.sau_id = sau_id;
        h.last_seen_ms = now_ms;
        h.state_since_ms = now_ms;
        it = health_.emplace(sau_id, std::move(h)).first;
    }
    return it->second;
}

void Collector::enter(SauHealth& h, HealthState s, std::int64_t now_ms) {
    h.state = s;
    h.state_since_ms = now_ms;
}

std::string Collector::metric_key(const proto::TelemetryRecord& r) {
    return r.sau_id + ":" + std::to_string(r.port) + ":" + r.sensor_id + ":" +
           proto::metric_name(r.metric);
}

void Collector::ingest(const proto::TelemetryRecord& r) {
    ++counters_.records;
    if (r.metric == proto::Metric::Heartbeat) {
        ++counters_.heartbeats;
        SauHealth& h = health_for(r.sau_id, r.timestamp_ms);
        h.last_seen_ms = r.timestamp_ms;
        if (h.state != HealthState::Healthy && h.state != HealthState::Failed) {
            log_event(r.timestamp_ms, r.sau_id, "recovered",
                      std::string("from=") + health_state_name(h.state));
            h.backoff_ms = 0;
            enter(h, HealthState::Healthy, r.timestamp_ms);
        }
        return;
    }

    last_values_[metric_key(r)] = {r.timestamp_ms, r.value};
    if (store_) {
        try {
            store_->append(metric_key(r), r.timestamp_ms, r.value);
        } catch (const Error&) {
            ++counters_.storage_rejects;
        }
    }
    evaluate_alarms(r);
}

proto::DecodeError Collector::ingest_line(std::string_view line) {
    proto::TelemetryRecord rec;
    const auto err = proto::decode(line, rec);
    switch (err) {
        case proto::DecodeError::Ok:
            ingest(rec);
            break;
        case proto::DecodeError::MalformedLine:
            ++counters_.decode_malformed;
            break;
        case proto::DecodeError::BadNumber:
            ++counters_.decode_bad_number;
            break;
        case proto::DecodeError::UnknownMetric:
            ++counters_.decode_unknown_metric;
            break;
    }
    return err;
}

void Collector::evaluate_alarms(const proto::TelemetryRecord& r) {
    for (const auto& rule : rules_) {
        if (rule.metric != r.metric) continue;
        const bool violation = rule.metric == proto::Metric::Leak
                                   ? r.value != 0.0
                                   : (r.value < rule.min || r.value > rule.max);
        AlarmState& st = alarm_states_[rule.name + "|" + metric_key(r)];
        if (violation) {
            ++st.violations;
            st.oks = 0;
            if (!st.active && st.violations >= rule.debounce_ticks) {
                st.active = true;
                const std::string detail = rule.name + " " + metric_key(r) +
                                           " value=" + proto::format_value(r.value);
                log_event(r.timestamp_ms, r.sau_id, "alarm_raised", detail);
                if (alarm_sink_) alarm_sink_(detail);
            }
        } else {
            ++st.oks;
            st.violations = 0;
            if (st.active && st.oks >= rule.debounce_ticks) {
                st.active = false;
                log_event(r.timestamp_ms, r.sau_id, "alarm_cleared",
                          rule.name + " " + metric_key(r));
            }
        }
    }
}

std::vector<Action> Collector::watchdog_tick(std::int64_t now_ms) {
    std::vector<Action> actions;
    for (auto& [id, h] : health_) {
        switch (h.state) {
            case HealthState::Healthy:
                if (now_ms - h.last_seen_ms >= timeouts_.stale_ms) {
                    log_event(now_ms, id, "stale",
                              "last_seen_ms=" + std::to_string(h.last_seen_ms));
                    enter(h, HealthState::Stale, now_ms);
                }
                break;
            default:
                break;
        }
        switch (h.state) {
            case HealthState::Stale:
                enter(h, HealthState::ResetSent, now_ms);
                log_event(now_ms, id, "reset_sent", "");
                actions.push_back({Action::Kind::SoftReset, id});
                ++h.escalation_count;
                enter(h, HealthState::AwaitingReset, now_ms);
                break;
            case HealthState::AwaitingReset:
                if (now_ms - h.state_since_ms >= timeouts_.reset_grace_ms) {
                    enter(h, HealthState::CycleSent, now_ms);
                    log_event(now_ms, id, "cycle_requested", "");
                    actions.push_back({Action::Kind::PowerCycle, id});
                    ++h.escalation_count;
                    enter(h, HealthState::AwaitingCycle, now_ms);
                }
                break;
            case HealthState::AwaitingCycle:
                if (now_ms - h.state_since_ms >= timeouts_.cycle_grace_ms) {
                    h.backoff_ms = h.backoff_ms == 0
                                       ? timeouts_.backoff_base_ms
                                       : std::min(h.backoff_ms * 2,
                                                  timeouts_.backoff_cap_ms);
                    h.next_retry_ms = now_ms + h.backoff_ms;
                    enter(h, HealthState::Failed, now_ms);
                    log_event(now_ms, id, "failed",
                              "retry_ms=" + std::to_string(h.next_retry_ms));
                    if (alarm_sink_) alarm_sink_("sau_failed " + id);
                }
                break;
            default:
                break;
        }
        if (h.state == HealthState::Failed && now_ms >= h.next_retry_ms) {
            enter(h, HealthState::CycleSent, now_ms);
            log_event(now_ms, id, "retry_cycle",
                      "backoff_ms=" + std::to_string(h.backoff_ms));
            actions.push_back({Action::Kind::PowerCycle, id});
            ++h.escalation_count;
            enter(h, HealthState::AwaitingCycle, now_ms);
        }
    }
    return actions;
}

std::string Collector::status(std::int64_t now_ms) const {
    std::ostringstream out;
    out << "status ts=" << now_ms << '\n';
    for (const auto& [id, h] : health_) {
        out << "sau " << id << " state=" << health_state_name(h.state)
            << " last_seen_ms=" << h.last_seen_ms
            << " escalations=" << h.escalation_count << '\n';
    }
    for (const auto& [key, tv] : last_values_) {
        out << "metric " << key << " ts=" << tv.first
            << " value=" << proto::format_value(tv.second) << '\n';
    }
    for (const auto& [key, st] : alarm_states_) {
        if (st.active) out << "alarm " << key << " active\n";
    }
    out << "counters records=" << counters_.records
        << " heartbeats=" << counters_.heartbeats
        << " decode_malformed=" << counters_.decode_malformed
        << " decode_bad_number=" << counters_.decode_bad_number
        << " decode_unknown_metric=" << counters_.decode_unknown_metric
        << " storage_rejects=" << counters_.storage_rejects << '\n';
    out << "end\n";
    return out.str();
}

}  // namespace envmon::collector
