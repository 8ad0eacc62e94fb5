#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "envmon/collector.hpp"
#include "envmon/config.hpp"
#include "envmon/poe_switch.hpp"
#include "envmon/sau.hpp"

namespace envmon::sim {

// In-process, virtual-clock simulation of the whole fleet: SAU emulators,
// the PoE switch and the collector advance in lockstep at 1 Hz. Fully
// deterministic for a fixed seed.
class Simulation {
public:
    Simulation(const cfg::Config& config, std::uint64_t seed);

    void add_fault(const cfg::FaultSpec& fault);

    // Advance one 1 s tick; current virtual time starts at 0.
    void step();
    void run(double duration_s);

    std::int64_t now_ms() const { return now_ms_; }
    collector::Collector& the_collector() { return *collector_; }
    PoeSwitch& the_switch() { return *switch_; }
    rr::Store& store() { return store_; }
    sau::SauEmulator* find_sau(const std::string& id);

    // Collector event log as one string (the determinism artifact).
    std::string event_log_text() const;
    std::string switch_log_text() const;

private:
    void apply_due_faults();

    cfg::Config config_;
    std::uint64_t seed_;
    std::int64_t now_ms_ = 0;
    rr::Store store_;
    std::unique_ptr<collector::Collector> collector_;
    std::unique_ptr<PoeSwitch> switch_;
    std::vector<std::unique_ptr<sau::SauEmulator>> saus_;
    std::vector<cfg::FaultSpec> faults_;
    std::vector<bool> fault_applied_;
    std::vector<bool> fault_cleared_;  // short end times
    bool primed_ = false;
};

}  // namespace envmon::sim
