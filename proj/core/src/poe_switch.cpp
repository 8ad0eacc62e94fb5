#include "envmon/poe_switch.hpp"

#include <ostream>
#include <sstream>

namespace envmon {

PoeSwitch::PoeSwitch(int n_ports) {
    ports_.resize((std::size_t)n_ports);
    for (int i = 0; i < n_ports; ++i) ports_[(std::size_t)i].port_no = i + 1;
}

void PoeSwitch::attach(int port_no, const std::string& sau_id) {
    port_mut(port_no).attached_sau = sau_id;
}

std::optional<int> PoeSwitch::port_of(const std::string& sau_id) const {
    for (const Port& p : ports_) {
        if (p.attached_sau == sau_id) return p.port_no;
    }
    return std::nullopt;
}

const PoeSwitch::Port& PoeSwitch::port(int port_no) const {
    return const_cast<PoeSwitch*>(this)->port_mut(port_no);
}

PoeSwitch::Port& PoeSwitch::port_mut(int port_no) {
    if (port_no < 1 || port_no > (int)ports_.size()) {
        throw Error(Err::NoSuchPort, "port " + std::to_string(port_no));
    }
    return ports_[(std::size_t)(port_no - 1)];
}

void PoeSwitch::transition(Port& p, bool on, std::int64_t now_ms) {
    if (p.powered == on) return;
    p.powered = on;
    events_.push_back({now_ms, p.port_no, on ? "on" : "off"});
    if (on_power_) on_power_(p.port_no, p.attached_sau, on, now_ms);
}

void PoeSwitch::set_power(int port_no, bool on, std::int64_t now_ms) {
    Port& p = port_mut(port_no);
    if (on) p.power_on_at_ms = -1;  // manual on cancels a pending cycle
    transition(p, on, now_ms);
}

void PoeSwitch::cycle(int port_no, std::int64_t off_ms, std::int64_t now_ms) {
    Port& p = port_mut(port_no);
    if (p.power_on_at_ms >= 0) return;  // cycle already in flight
    transition(p, false, now_ms);
    p.power_on_at_ms = now_ms + off_ms;
}

void PoeSwitch::tick(std::int64_t now_ms) {
    for (Port& p : ports_) {
        if (p.power_on_at_ms >= 0 && now_ms >= p.power_on_at_ms) {
            p.power_on_at_ms = -1;
            transition(p, true, now_ms);
        }
    }
}

std::string PoeSwitch::handle_line(const std::string& line, std::int64_t now_ms) {
    std::istringstream ss(line);
    std::string verb;
    ss >> verb;
    try {
        if (verb == "power") {
            int port = 0;
            std::string state;
            if (!(ss >> port >> state) || (state != "on" && state != "off")) {
                return "err usage: power <port> on|off";
            }
            set_power(port, state == "on", now_ms);
            return "ok";
        }
        if (verb == "cycle") {
            int port = 0;
            std::int64_t off_ms = kDefaultCycleOffMs;
            if (!(ss >> port)) return "err usage: cycle <port> [<ms>]";
            ss >> off_ms;
            cycle(port, off_ms, now_ms);
            return "ok";
        }
    } catch (const Error& e) {
        return std::string("err ") + e.what();
    }
    return "err unknown command";
}

void PoeSwitch::write_event_log(std::ostream& out) const {
    for (const Event& e : events_) {
        out << e.timestamp_ms << " port" << e.port_no << " " << e.what << '\n';
    }
}

}  // namespace envmon
