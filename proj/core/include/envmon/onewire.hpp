#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "envmon/errors.hpp"

namespace envmon::onewire {

// Dallas/Maxim CRC-8: x^8 + x^5 + x^4 + 1, bit-reflected, init 0.
std::uint8_t crc8(std::span<const std::uint8_t> bytes);

inline constexpr std::uint8_t kFamilyDs18b20 = 0x28;

struct RomCode {
    std::uint8_t family = 0;
    std::uint64_t serial = 0;  // 48 bits
    std::uint8_t crc = 0;

    static RomCode make(std::uint8_t family, std::uint64_t serial48);
    static std::optional<RomCode> from_u64(std::uint64_t raw);

    std::array<std::uint8_t, 8> bytes() const;
    std::uint64_t to_u64() const;  // little-endian: family is the low byte
    bool self_consistent() const;
    std::string hex() const;  // 16 lowercase hex digits, family first

    auto operator<=>(const RomCode&) const = default;
};

struct BusTopology {
    double radius_m = 1.0;
    int n_sensors = 0;
    int n_splitters = 0;
};

struct BusHealth {
    double recovery_time_us = 0.0;
    bool discovery_reliable = false;
};

// Linear cable-load model. Calibrated so that (10 m, 15 sensors, 2 splitters)
// sits at 89 us (healthy) and (50 m, 15, 2) at 41 us (critical); the reliable
// threshold is 50 us.
struct BusLoadModel {
    double base_us = 120.0;
    double per_meter_us = 1.2;
    double per_sensor_us = 1.0;
    double per_splitter_us = 2.0;
};

inline constexpr double kRecoveryThresholdUs = 50.0;

BusHealth bus_health(const BusTopology& topo, const BusLoadModel& model = {});

// Per-device, per-attempt discovery miss probability once the bus has left
// the reliable regime.
double miss_probability(const BusHealth& health);

class Bus {
public:
    Bus(BusTopology topo, std::uint64_t seed, BusLoadModel model = {});

    void install(const RomCode& rom, double initial_temp_c = 20.0);
    void remove(const RomCode& rom);
    void set_temperature(const RomCode& rom, double temp_c);

    const BusTopology& topology() const { return topo_; }
    BusHealth health() const;
    std::size_t device_count() const { return devices_.size(); }

    // Standard binary-tree ROM search. On a reliable bus returns exactly the
    // installed set; on an overloaded bus each device may drop out of a given
    // attempt (deterministic per seed and attempt number). Sorted ascending
    // by 64-bit ROM value.
    std::vector<RomCode> search_rom();

    // DS18B20 scratchpad framing: bytes 0-1 carry the temperature as 16-bit
    // two's complement sixteenths, byte 8 is the CRC over bytes 0-7.
    std::array<std::uint8_t, 9> read_scratchpad(const RomCode& rom) const;

    std::uint32_t search_attempts() const { return attempt_; }

private:
    struct Device {
        RomCode rom;
        double temp_c;
    };

    const Device* find(const RomCode& rom) const;

    BusTopology topo_;
    BusLoadModel model_;
    std::uint64_t seed_;
    std::uint32_t attempt_ = 0;
    std::vector<Device> devices_;
};

// Temperature encoding helpers shared with the scratchpad tests.
std::int16_t encode_temp_sixteenths(double temp_c);
double decode_temp_sixteenths(std::int16_t raw);

}  // namespace envmon::onewire
