#include "envmon/onewire.hpp"

#include <algorithm>
#include <cmath>

#include "envmon/rng.hpp"

namespace envmon::onewire {

std::uint8_t crc8(std::span<const std::uint8_t> bytes) {
    std::uint8_t crc = 0;
    for (std::uint8_t b : bytes) {
        for (int i = 0; i < 8; ++i) {
            const std::uint8_t mix = (crc ^ b) & 0x01;
            crc >>= 1;
            if (mix) crc ^= 0x8C;
            b >>= 1;
        }
    }
    return crc;
}

RomCode RomCode::make(std::uint8_t family, std::uint64_t serial48) {
    RomCode rom;
    rom.family = family;
    rom.serial = serial48 & 0xFFFFFFFFFFFFULL;
    std::array<std::uint8_t, 7> head;
    head[0] = family;
    for (int i = 0; i < 6; ++i) head[1 + i] = (std::uint8_t)(rom.serial >> (8 * i));
    rom.crc = crc8(head);
    return rom;
}

std::optional<RomCode> RomCode::from_u64(std::uint64_t raw) {
    RomCode rom;
    rom.family = (std::uint8_t)raw;
    rom.serial = (raw >> 8) & 0xFFFFFFFFFFFFULL;
    rom.crc = (std::uint8_t)(raw >> 56);
    if (!rom.self_consistent()) return std::nullopt;
    return rom;
}

std::array<std::uint8_t, 8> RomCode::bytes() const {
    std::array<std::uint8_t, 8> out;
    out[0] = family;
    for (int i = 0; i < 6; ++i) out[1 + i] = (std::uint8_t)(serial >> (8 * i));
    out[7] = crc;
    return out;
}

std::uint64_t RomCode::to_u64() const {
    return (std::uint64_t)family | (serial << 8) | ((std::uint64_t)crc << 56);
}

bool RomCode::self_consistent() const {
    const auto b = bytes();
    return crc8(std::span(b.data(), 7)) == crc;
}

std::string RomCode::hex() const {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(16);
    const auto b = bytes();
    for (std::uint8_t v : b) {
        out.push_back(digits[v >> 4]);
        out.push_back(digits[v & 0x0F]);
    }
    return out;
}

BusHealth bus_health(const BusTopology& topo, const BusLoadModel& model) {
    BusHealth h;
    h.recovery_time_us = model.base_us - model.per_meter_us * topo.radius_m -
                         model.per_sensor_us * topo.n_sensors -
                         model.per_splitter_us * topo.n_splitters;
    h.discovery_reliable = h.recovery_time_us > kRecoveryThresholdUs;
    return h;
}

double miss_probability(const BusHealth& health) {
    if (health.discovery_reliable) return 0.0;
    return std::min(1.0, (kRecoveryThresholdUs - health.recovery_time_us) /
                             kRecoveryThresholdUs);
}

Bus::Bus(BusTopology topo, std::uint64_t seed, BusLoadModel model)
    : topo_(topo), model_(model), seed_(seed) {}

void Bus::install(const RomCode& rom, double initial_temp_c) {
    if (find(rom)) return;
    devices_.push_back({rom, initial_temp_c});
    topo_.n_sensors = (int)devices_.size();
}

void Bus::remove(const RomCode& rom) {
    std::erase_if(devices_, [&](const Device& d) { return d.rom == rom; });
    topo_.n_sensors = (int)devices_.size();
}

void Bus::set_temperature(const RomCode& rom, double temp_c) {
    for (auto& d : devices_) {
        if (d.rom == rom) {
            d.temp_c = temp_c;
            return;
        }
    }
    throw Error(Err::NoSuchDevice, rom.hex());
}

BusHealth Bus::health() const { return bus_health(topo_, model_); }

const Bus::Device* Bus::find(const RomCode& rom) const {
    for (const auto& d : devices_) {
        if (d.rom == rom) return &d;
    }
    return nullptr;
}

std::vector<RomCode> Bus::search_rom() {
    const std::uint32_t attempt = attempt_++;
    const double p_miss = miss_probability(health());

    // Devices that answer this attempt. A missed device is silent for the
    // whole attempt, exactly as an overloaded cable run manifests.
    std::vector<std::uint64_t> present;
    present.reserve(devices_.size());
    for (std::size_t i = 0; i < devices_.size(); ++i) {
        const std::uint64_t rom64 = devices_[i].rom.to_u64();
        if (p_miss > 0.0) {
            std::uint64_t s = hash_mix(hash_mix(seed_, attempt), rom64);
            Rng rng(s);
            if (rng.next_unit() < p_miss) continue;
        }
        present.push_back(rom64);
    }

    // Maxim ROM search: walk the 64-bit tree LSB-first, devices wire-AND
    // their current bit and its complement.
    std::vector<std::uint64_t> found;
    if (!present.empty()) {
        int last_discrepancy = -1;
        std::uint64_t rom = 0;
        bool done = false;
        while (!done) {
            int discrepancy = -1;
            std::vector<std::uint64_t> cands = present;
            for (int bit = 0; bit < 64; ++bit) {
                bool any0 = false, any1 = false;
                for (std::uint64_t c : cands) {
                    ((c >> bit) & 1) ? any1 = true : any0 = true;
                }
                if (!any0 && !any1) break;  // lost all participants
                int dir;
                if (any0 && any1) {
                    if (bit == last_discrepancy) {
                        dir = 1;
                    } else if (bit > last_discrepancy) {
                        dir = 0;
                        discrepancy = bit;
                    } else {
                        dir = (int)((rom >> bit) & 1);
                        if (dir == 0) discrepancy = bit;
                    }
                } else {
                    dir = any1 ? 1 : 0;
                }
                rom = (rom & ~(1ULL << bit)) | ((std::uint64_t)dir << bit);
                std::erase_if(cands, [&](std::uint64_t c) {
                    return (int)((c >> bit) & 1) != dir;
                });
            }
            if (!cands.empty()) found.push_back(rom);
            last_discrepancy = discrepancy;
            done = discrepancy < 0;
        }
    }

    std::sort(found.begin(), found.end());
    found.erase(std::unique(found.begin(), found.end()), found.end());
    std::vector<RomCode> out;
    out.reserve(found.size());
    for (std::uint64_t v : found) {
        if (auto rom = RomCode::from_u64(v)) out.push_back(*rom);
    }
    return out;
}

std::int16_t encode_temp_sixteenths(double temp_c) {
    const double clamped = std::clamp(temp_c, -55.0, 125.0);
    return (std::int16_t)std::floor(clamped * 16.0);
}

double decode_temp_sixteenths(std::int16_t raw) { return (double)raw / 16.0; }

std::array<std::uint8_t, 9> Bus::read_scratchpad(const RomCode& rom) const {
    if (health().recovery_time_us <= 0.0) {
        throw Error(Err::IoError, "bus unresponsive");
    }
    const Device* dev = find(rom);
    if (!dev) throw Error(Err::NoSuchDevice, rom.hex());

    const std::int16_t t = encode_temp_sixteenths(dev->temp_c);
    std::array<std::uint8_t, 9> frame{};
    frame[0] = (std::uint8_t)(t & 0xFF);
    frame[1] = (std::uint8_t)((t >> 8) & 0xFF);
    frame[2] = 0x4B;  // TH register power-on default
    frame[3] = 0x46;  // TL register power-on default
    frame[4] = 0x7F;  // 12-bit resolution config
    frame[5] = 0xFF;
    frame[6] = 0x00;
    frame[7] = 0x10;
    frame[8] = crc8(std::span(frame.data(), 8));
    return frame;
}

}  // namespace envmon::onewire
