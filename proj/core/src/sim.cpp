#include "envmon/sim.hpp"

#include <sstream>

#include "envmon/rng.hpp"

namespace envmon::sim {

Simulation::Simulation(const cfg::Config& config, std::uint64_t seed)
    : config_(config), seed_(seed) {
    collector_ = std::make_unique<collector::Collector>(
        config_.collector.timeouts, config_.alarms, &store_);
    switch_ = std::make_unique<PoeSwitch>(config_.poe.n_ports);
    switch_->set_power_callback([this](int, const std::string& sau_id, bool on,
                                       std::int64_t now_ms) {
        sau::SauEmulator* s = find_sau(sau_id);
        if (!s) return;
        if (on) {
            // Skip the boot delay on the initial bring-up so the fleet
            // starts in steady state; later transitions pay it in full.
            s->power_up(now_ms == 0 ? -s->config().boot_ms : now_ms);
        } else {
            s->power_down();
        }
    });

    std::uint64_t i = 0;
    for (const auto& sc : config_.saus) {
        auto s = std::make_unique<sau::SauEmulator>(sc, hash_mix(seed_, ++i),
                                                    config_.bus_model);
        s->prime_environment(config_.env, 0.0);
        saus_.push_back(std::move(s));
    }
    for (const auto& s : saus_) {
        if (s->config().switch_port > 0)
            switch_->attach(s->config().switch_port, s->id());
        collector_->register_sau(s->id(), 0);
    }
    // Default-powered ports bring their units up at t=0.
    for (const auto& s : saus_) {
        const int p = s->config().switch_port;
        if (p <= 0) {
            s->power_up(-s->config().boot_ms);
        } else if (switch_->port(p).powered) {
            s->power_up(-s->config().boot_ms);
        }
    }
}

sau::SauEmulator* Simulation::find_sau(const std::string& id) {
    for (auto& s : saus_)
        if (s->id() == id) return s.get();
    return nullptr;
}

void Simulation::add_fault(const cfg::FaultSpec& fault) {
    faults_.push_back(fault);
    fault_applied_.push_back(false);
    fault_cleared_.push_back(false);
}

void Simulation::apply_due_faults() {
    const double t_s = (double)now_ms_ / 1000.0;
    for (std::size_t i = 0; i < faults_.size(); ++i) {
        const cfg::FaultSpec& f = faults_[i];
        sau::SauEmulator* s = find_sau(f.sau_id);
        if (!s) continue;
        if (!fault_applied_[i] && t_s >= f.t_start_s) {
            fault_applied_[i] = true;
            switch (f.kind) {
                case cfg::FaultSpec::Kind::WedgeMcu:
                    s->wedge_mcu();
                    break;
                case cfg::FaultSpec::Kind::WedgeAgent:
                    s->wedge_agent();
                    break;
                case cfg::FaultSpec::Kind::Short:
                    s->short_port(f.port);
                    break;
                case cfg::FaultSpec::Kind::CorruptSerial:
                    s->set_corrupt_serial_rate(f.rate);
                    break;
            }
        }
        if (f.kind == cfg::FaultSpec::Kind::Short && fault_applied_[i] &&
            !fault_cleared_[i] && t_s >= f.t_end_s) {
            fault_cleared_[i] = true;
            s->clear_short(f.port);
        }
    }
}

void Simulation::step() {
    apply_due_faults();
    switch_->tick(now_ms_);
    const double dt = 1.0;
    for (auto& s : saus_) {
        s->tick(config_.env, now_ms_, dt);
        for (const auto& rec : s->drain())
            collector_->ingest_line(proto::encode(rec));
    }
    const auto actions = collector_->watchdog_tick(now_ms_);
    for (const auto& a : actions) {
        sau::SauEmulator* s = find_sau(a.sau_id);
        if (!s) continue;
        if (a.kind == collector::Action::Kind::SoftReset) {
            s->soft_reset(now_ms_);
        } else {
            const auto port = switch_->port_of(a.sau_id);
            if (port) switch_->cycle(*port, kDefaultCycleOffMs, now_ms_);
        }
    }
    now_ms_ += 1000;
}

void Simulation::run(double duration_s) {
    const std::int64_t end_ms = now_ms_ + (std::int64_t)(duration_s * 1000.0);
    while (now_ms_ < end_ms) step();
}

std::string Simulation::event_log_text() const {
    std::string out;
    for (const auto& line : collector_->events()) {
        out += line;
        out += '\n';
    }
    return out;
}

std::string Simulation::switch_log_text() const {
    std::ostringstream out;
    switch_->write_event_log(out);
    return out.str();
}

}  // namespace envmon::sim
