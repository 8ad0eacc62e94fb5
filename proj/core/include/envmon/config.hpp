#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "envmon/calibration.hpp"
#include "envmon/onewire.hpp"
#include "envmon/protocol.hpp"
#include "envmon/sensors.hpp"

namespace envmon::cfg {

struct SensorConfig {
    sensors::Kind kind = sensors::Kind::Ds18b20;
    int port = 1;   // RJ12 port 1..11
    int count = 1;
    bool airflow = false;
    bool analog = false;  // pin-2 analog mode; Table-1 legal on ports 1-6 only
    calib::DeviceConstants constants{28304.0, 26409.0, 299.61};
    double pulses_per_litre = 1.0;
};

struct SauConfig {
    std::string id;
    int switch_port = 0;
    std::vector<SensorConfig> sensors;
    double bus_radius_m = 5.0;
    int bus_splitters = 0;
    std::string firmware = "-";
    double corrupt_serial_rate = 0.0;
    // Invented timing constants, overridable per unit.
    std::int64_t reset_ms = 2000;
    std::int64_t flash_ms = 5000;
    std::int64_t boot_ms = 20000;
    std::size_t queue_capacity = 1024;
    // Inert AVR fuse configuration, retained verbatim.
    std::uint8_t fuse_low = 0xde;
    std::uint8_t fuse_high = 0xde;
    std::uint8_t fuse_extended = 0xfd;
};

struct AlarmRule {
    std::string name;
    proto::Metric metric = proto::Metric::TempC;
    double min = -1e300;
    double max = 1e300;
    int debounce_ticks = 1;
};

struct WatchdogTimeouts {
    std::int64_t stale_ms = 10000;
    std::int64_t reset_grace_ms = 30000;
    std::int64_t cycle_grace_ms = 60000;
    std::int64_t backoff_base_ms = 300000;  // 5 min
    std::int64_t backoff_cap_ms = 3600000;  // 1 h
};

struct CollectorConfig {
    int listen_port = proto::kDefaultTelemetryPort;
    std::string switch_host = "127.0.0.1";
    int switch_port = 4548;
    WatchdogTimeouts timeouts;
    std::string event_log;  // path; empty = stdout only
    std::string data_dir = "envmon-data";
    std::string webhook_url;  // optional fire-and-forget alarm POST
};

struct SwitchConfig {
    int listen_port = 4548;
    int n_ports = 24;
    std::string event_log;
};

struct Config {
    CollectorConfig collector;
    SwitchConfig poe;
    sensors::EnvironmentProfile env;
    std::vector<SauConfig> saus;
    std::vector<AlarmRule> alarms;
    onewire::BusLoadModel bus_model;
};

// Sectioned key-value file, TOML-compatible syntax. See configs/demo.toml.
Config load_config(std::istream& in);
Config load_config_file(const std::string& path);

// Fault injection spec strings:
//   wedge-mcu:<sau>:<t>  wedge-agent:<sau>:<t>
//   short:<sau>:<port>:<t1>-<t2>  corrupt-serial:<sau>:<rate>
struct FaultSpec {
    enum class Kind { WedgeMcu, WedgeAgent, Short, CorruptSerial };
    Kind kind = Kind::WedgeMcu;
    std::string sau_id;
    int port = 0;
    double t_start_s = 0.0;
    double t_end_s = 0.0;
    double rate = 0.0;
};

FaultSpec parse_fault(const std::string& spec);

}  // namespace envmon::cfg
