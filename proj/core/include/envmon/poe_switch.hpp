#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "envmon/errors.hpp"

namespace envmon {

inline constexpr int kDefaultSwitchPort = 4548;
inline constexpr std::int64_t kDefaultCycleOffMs = 3000;

// Simulated PoE switch: per-port power state plus timed power cycles. The
// switch itself is assumed UPS-backed and never loses power.
class PoeSwitch {
public:
    struct Port {
        int port_no = 0;
        bool powered = true;
        std::string attached_sau;  // empty if unattached
        std::int64_t power_on_at_ms = -1;  // pending cycle completion
    };

    struct Event {
        std::int64_t timestamp_ms = 0;
        int port_no = 0;
        std::string what;  // "on" / "off"
    };

    // Called on every actual power transition.
    using PowerCallback =
        std::function<void(int port_no, const std::string& sau_id, bool on,
                           std::int64_t now_ms)>;

    explicit PoeSwitch(int n_ports = 24);

    void set_power_callback(PowerCallback cb) { on_power_ = std::move(cb); }
    void attach(int port_no, const std::string& sau_id);
    std::optional<int> port_of(const std::string& sau_id) const;
    const Port& port(int port_no) const;
    int port_count() const { return (int)ports_.size(); }

    // Idempotent; acks every call, logs only actual transitions.
    void set_power(int port_no, bool on, std::int64_t now_ms);

    // Off now, back on after off_ms. A cycle already in flight coalesces.
    void cycle(int port_no, std::int64_t off_ms, std::int64_t now_ms);

    // Completes due power-ons; call once per simulated tick.
    void tick(std::int64_t now_ms);

    // Text control protocol: "power <port> on|off" or "cycle <port> <ms>";
    // replies "ok" or "err <reason>".
    std::string handle_line(const std::string& line, std::int64_t now_ms);

    const std::vector<Event>& events() const { return events_; }
    void write_event_log(std::ostream& out) const;

private:
    Port& port_mut(int port_no);
    void transition(Port& p, bool on, std::int64_t now_ms);

    std::vector<Port> ports_;
    std::vector<Event> events_;
    PowerCallback on_power_;
};

}  // namespace envmon
