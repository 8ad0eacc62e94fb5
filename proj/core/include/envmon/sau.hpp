#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "envmon/config.hpp"
#include "envmon/frame.hpp"
#include "envmon/onewire.hpp"
#include "envmon/protocol.hpp"
#include "envmon/sensors.hpp"

namespace envmon::sau {

// One emulated Sensor Aggregation Unit: an MCU part that polls the sensor
// buses at 1 Hz and frames readings over a serial link, and an agent part
// that decodes the frames and emits telemetry. Shorted sensor ports brown
// out the MCU only; the agent keeps heartbeating.
class SauEmulator {
public:
    SauEmulator(cfg::SauConfig config, std::uint64_t seed,
                onewire::BusLoadModel bus_model = {});

    const std::string& id() const { return config_.id; }
    const cfg::SauConfig& config() const { return config_; }

    // Power control (driven by the PoE switch).
    void power_up(std::int64_t now_ms);
    void power_down();
    bool powered() const { return powered_; }

    bool mcu_alive() const;
    bool agent_alive(std::int64_t now_ms) const;
    const std::string& firmware_version() const { return firmware_; }
    std::int64_t mcu_uptime_s() const { return mcu_uptime_s_; }
    std::int64_t agent_uptime_s() const { return agent_uptime_s_; }

    // Sensor enumeration result (OneWire search per port + I2C probe).
    std::size_t scan_list_size() const;
    std::vector<onewire::RomCode> onewire_scan(int port) const;

    // Snap all sensor lag filters to the current environment.
    void prime_environment(const sensors::EnvironmentProfile& env, double t_s = 0.0);

    // Advance one collection interval; telemetry lands in the outbound
    // queue. dt defaults to the 1 Hz firmware loop.
    void tick(const sensors::EnvironmentProfile& env, std::int64_t now_ms,
              double dt_s = 1.0);

    // Drain queued telemetry in order.
    std::vector<proto::TelemetryRecord> drain();

    // Reset line: restarts the MCU part only. Clears a wedged MCU, never a
    // wedged agent; a persisting short keeps the MCU down.
    void soft_reset(std::int64_t now_ms);

    // In-system flashing via the reset line; metric records gap for the
    // flash window. Throws FlashWhileShorted.
    void flash_firmware(const std::string& image_id, std::int64_t now_ms);

    // Fault injection.
    void wedge_mcu() { mcu_wedged_ = true; }
    void wedge_agent() { agent_wedged_ = true; }
    void short_port(int port_no);
    void clear_short(int port_no);
    const std::set<int>& shorted_ports() const { return shorted_; }
    void set_corrupt_serial_rate(double rate) { corrupt_rate_ = rate; }

    std::uint64_t serial_frame_drops() const { return decoder_.dropped_frames(); }
    std::uint64_t queue_drops() const { return queue_drops_; }

    // Access for bus-level tests.
    const onewire::Bus* bus(int port) const;

private:
    struct PortSensors {
        std::vector<sensors::SensorInstance> instances;
        std::unique_ptr<onewire::Bus> ow_bus;  // DS18B20 ports only
        std::vector<onewire::RomCode> scan;    // OneWire scan result
    };

    void validate_config() const;
    void build_sensors(std::uint64_t seed);
    void enumerate_sensors();
    void step_environment(const sensors::EnvironmentProfile& env,
                          double t_s, double dt_s);
    void collect_and_send(std::int64_t now_ms);
    void emit(proto::TelemetryRecord rec);
    void push_reading(std::vector<std::uint8_t>& payload, int port,
                      std::uint8_t channel, std::uint64_t sensor_id, double value);
    void flush_payload(std::vector<std::uint8_t>& payload);

    cfg::SauConfig config_;
    std::uint64_t seed_;
    onewire::BusLoadModel bus_model_;
    std::map<int, PortSensors> ports_;

    bool powered_ = false;
    bool mcu_wedged_ = false;
    bool agent_wedged_ = false;
    std::set<int> shorted_;
    double corrupt_rate_ = 0.0;

    std::string firmware_;
    std::string pending_firmware_;
    std::int64_t agent_ready_ms_ = 0;
    std::int64_t mcu_blocked_until_ms_ = 0;  // reset / flash window
    std::int64_t flash_done_ms_ = -1;
    std::int64_t mcu_uptime_s_ = 0;
    std::int64_t agent_uptime_s_ = 0;
    std::uint64_t seq_ = 0;
    std::uint64_t corrupt_counter_ = 0;

    frame::StreamDecoder decoder_;
    std::deque<proto::TelemetryRecord> queue_;
    std::uint64_t queue_drops_ = 0;
};

}  // namespace envmon::sau
