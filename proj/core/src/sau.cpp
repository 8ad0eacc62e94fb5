#include "envmon/sau.hpp"

#include <algorithm>
#include <cstring>

#include "envmon/calibration.hpp"
#include "envmon/rng.hpp"

namespace envmon::sau {

namespace {

// Serial payload channel tags.
enum : std::uint8_t {
    kChTempC = 0,
    kChHumidityPct = 1,
    kChPressureHpa = 2,
    kChFlowPulses = 3,
    kChLeak = 4,
};

proto::Metric metric_for_channel(std::uint8_t ch) {
    switch (ch) {
        case kChTempC: return proto::Metric::TempC;
        case kChHumidityPct: return proto::Metric::HumidityPct;
        case kChPressureHpa: return proto::Metric::PressureHpa;
        case kChFlowPulses: return proto::Metric::FlowPulses;
        default: return proto::Metric::Leak;
    }
}

std::string hex_id(std::uint64_t v) {
    if (v == 0) return "0";
    static const char* digits = "0123456789abcdef";
    char buf[16];
    int i = 16;
    while (v) {
        buf[--i] = digits[v & 0xF];
        v >>= 4;
    }
    return std::string(buf + i, 16 - i);
}

constexpr std::size_t kReadingBytes = 18;  // port, channel, id64, value64

}  // namespace

SauEmulator::SauEmulator(cfg::SauConfig config, std::uint64_t seed,
                         onewire::BusLoadModel bus_model)
    : config_(std::move(config)), seed_(seed), bus_model_(bus_model),
      firmware_(config_.firmware), corrupt_rate_(config_.corrupt_serial_rate) {
    validate_config();
    build_sensors(seed);
}

void SauEmulator::validate_config() const {
    if (config_.id.empty()) throw Error(Err::BadConfig, "sau id empty");
    for (const auto& s : config_.sensors) {
        if (s.port < 1 || s.port > 11) {
            throw Error(Err::BadConfig, config_.id + ": sensor port out of 1..11");
        }
        if (s.analog && s.port > 6) {
            // Pin 2 is analog-capable on ports 1-6 only.
            throw Error(Err::BadConfig, config_.id + ": analog mode on port " +
                                            std::to_string(s.port));
        }
        if (s.count < 1) throw Error(Err::BadConfig, "sensor count < 1");
    }
}

void SauEmulator::build_sensors(std::uint64_t seed) {
    std::uint64_t sau_hash = seed;
    for (char c : config_.id) sau_hash = hash_mix(sau_hash, (std::uint64_t)c);

    for (const auto& sc : config_.sensors) {
        PortSensors& ps = ports_[sc.port];
        for (int i = 0; i < sc.count; ++i) {
            const std::uint64_t uid =
                hash_mix(hash_mix(sau_hash, (std::uint64_t)sc.port * 131),
                         (std::uint64_t)(ps.instances.size() + 1));
            std::uint64_t id = uid;
            if (sc.kind == sensors::Kind::Ds18b20) {
                if (!ps.ow_bus) {
                    ps.ow_bus = std::make_unique<onewire::Bus>(
                        onewire::BusTopology{config_.bus_radius_m, 0,
                                             config_.bus_splitters},
                        hash_mix(sau_hash, (std::uint64_t)sc.port), bus_model_);
                }
                const auto rom =
                    onewire::RomCode::make(onewire::kFamilyDs18b20,
                                           uid & 0xFFFFFFFFFFFFULL);
                ps.ow_bus->install(rom);
                id = rom.to_u64();
            }
            sensors::SensorInstance inst(sc.kind, id, seed, sc.airflow,
                                         sc.constants);
            inst.set_pulses_per_litre(sc.pulses_per_litre);
            ps.instances.push_back(std::move(inst));
        }
    }
}

void SauEmulator::power_up(std::int64_t now_ms) {
    powered_ = true;
    mcu_wedged_ = false;
    agent_wedged_ = false;
    agent_ready_ms_ = now_ms + config_.boot_ms;
    mcu_blocked_until_ms_ = now_ms;
    flash_done_ms_ = -1;
    mcu_uptime_s_ = 0;
    agent_uptime_s_ = 0;
    seq_ = 0;  // fresh connection
    queue_.clear();
    enumerate_sensors();
}

void SauEmulator::power_down() {
    powered_ = false;
    queue_.clear();
    mcu_uptime_s_ = 0;
    agent_uptime_s_ = 0;
}

bool SauEmulator::mcu_alive() const {
    return powered_ && shorted_.empty() && !mcu_wedged_;
}

bool SauEmulator::agent_alive(std::int64_t now_ms) const {
    return powered_ && !agent_wedged_ && now_ms >= agent_ready_ms_;
}

void SauEmulator::enumerate_sensors() {
    for (auto& [port, ps] : ports_) {
        if (ps.ow_bus) ps.scan = ps.ow_bus->search_rom();
    }
}

std::size_t SauEmulator::scan_list_size() const {
    std::size_t n = 0;
    for (const auto& [port, ps] : ports_) {
        if (ps.ow_bus) n += ps.scan.size();
        for (const auto& inst : ps.instances) {
            if (inst.kind() != sensors::Kind::Ds18b20) ++n;
        }
    }
    return n;
}

std::vector<onewire::RomCode> SauEmulator::onewire_scan(int port) const {
    const auto it = ports_.find(port);
    if (it == ports_.end()) return {};
    return it->second.scan;
}

const onewire::Bus* SauEmulator::bus(int port) const {
    const auto it = ports_.find(port);
    return it == ports_.end() ? nullptr : it->second.ow_bus.get();
}

void SauEmulator::short_port(int port_no) {
    if (port_no < 1 || port_no > 11) {
        throw Error(Err::NoSuchPort, "port " + std::to_string(port_no));
    }
    shorted_.insert(port_no);
}

void SauEmulator::clear_short(int port_no) { shorted_.erase(port_no); }

void SauEmulator::prime_environment(const sensors::EnvironmentProfile& env,
                                    double t_s) {
    const double temp = env.temp_c.eval(t_s);
    const double rh = env.humidity_pct.eval(t_s);
    for (auto& [port, ps] : ports_) {
        for (auto& inst : ps.instances) inst.prime(temp, rh);
    }
}

void SauEmulator::step_environment(const sensors::EnvironmentProfile& env,
                                   double t_s, double dt_s) {
    const double temp = env.temp_c.eval(t_s);
    const double rh = env.humidity_pct.eval(t_s);
    const double hpa = env.pressure_hpa.eval(t_s);
    const double litres = env.flow_lps.eval(t_s) * dt_s;
    const bool wet = env.leak_at(t_s);
    for (auto& [port, ps] : ports_) {
        for (auto& inst : ps.instances) {
            switch (inst.kind()) {
                case sensors::Kind::Ds18b20:
                    inst.step(temp, dt_s);
                    break;
                case sensors::Kind::Hyt271:
                    inst.step(temp, dt_s);
                    inst.step_humidity(rh, dt_s);
                    break;
                case sensors::Kind::Bme280:
                    inst.step(temp, dt_s);
                    inst.step_humidity(rh, dt_s);
                    inst.set_pressure(hpa);
                    break;
                case sensors::Kind::FlowMeter:
                    inst.add_flow(litres);
                    break;
                case sensors::Kind::Leak:
                    inst.set_wet(wet);
                    break;
            }
            if (inst.kind() == sensors::Kind::Ds18b20 && ps.ow_bus) {
                ps.ow_bus->set_temperature(
                    *onewire::RomCode::from_u64(inst.id()), inst.sensed_temp_c());
            }
        }
    }
}

void SauEmulator::push_reading(std::vector<std::uint8_t>& payload, int port,
                               std::uint8_t channel, std::uint64_t sensor_id,
                               double value) {
    if (payload.size() + kReadingBytes > frame::kMaxPayload) {
        flush_payload(payload);
    }
    payload.push_back((std::uint8_t)port);
    payload.push_back(channel);
    for (int i = 0; i < 8; ++i) payload.push_back((std::uint8_t)(sensor_id >> (8 * i)));
    std::uint64_t bits;
    std::memcpy(&bits, &value, 8);
    for (int i = 0; i < 8; ++i) payload.push_back((std::uint8_t)(bits >> (8 * i)));
}

void SauEmulator::flush_payload(std::vector<std::uint8_t>& payload) {
    if (payload.empty()) return;
    std::vector<std::uint8_t> wire = frame::encode(payload);
    payload.clear();

    if (corrupt_rate_ > 0.0) {
        Rng rng(hash_mix(hash_mix(seed_, 0xC0DE), corrupt_counter_++));
        if (rng.next_unit() < corrupt_rate_) {
            const std::size_t bit = (std::size_t)(rng.next_u64() % (wire.size() * 8));
            wire[bit / 8] ^= (std::uint8_t)(1u << (bit % 8));
        }
    }
    decoder_.feed(wire);
}

void SauEmulator::collect_and_send(std::int64_t now_ms) {
    // MCU side: gather readings and frame them over the serial link.
    std::vector<std::uint8_t> payload;
    for (auto& [port, ps] : ports_) {
        if (ps.ow_bus) {
            for (const auto& rom : ps.scan) {
                const auto sp = ps.ow_bus->read_scratchpad(rom);
                const auto t = (std::int16_t)((std::uint16_t)sp[0] |
                                              ((std::uint16_t)sp[1] << 8));
                push_reading(payload, port, kChTempC, rom.to_u64(),
                             onewire::decode_temp_sixteenths(t));
            }
        }
        for (const auto& inst : ps.instances) {
            const auto raw = inst.read_raw();
            switch (raw.kind) {
                case sensors::Kind::Ds18b20:
                    break;  // handled via the bus
                case sensors::Kind::Hyt271:
                    push_reading(payload, port, kChTempC, inst.id(),
                                 sensors::hyt_temp_from_code(raw.hyt_t_code));
                    push_reading(payload, port, kChHumidityPct, inst.id(),
                                 sensors::hyt_rh_from_code(raw.hyt_rh_code));
                    break;
                case sensors::Kind::Bme280: {
                    const auto poly =
                        calib::poly_from_constants(inst.device_constants());
                    push_reading(payload, port, kChTempC, inst.id(),
                                 calib::compensate(poly, raw.bme_t_raw));
                    push_reading(payload, port, kChHumidityPct, inst.id(),
                                 sensors::hyt_rh_from_code(raw.hyt_rh_code));
                    push_reading(payload, port, kChPressureHpa, inst.id(),
                                 raw.pressure_hpa);
                    break;
                }
                case sensors::Kind::FlowMeter:
                    push_reading(payload, port, kChFlowPulses, inst.id(),
                                 (double)raw.pulses);
                    break;
                case sensors::Kind::Leak:
                    push_reading(payload, port, kChLeak, inst.id(),
                                 raw.wet ? 1.0 : 0.0);
                    break;
            }
        }
    }
    flush_payload(payload);

    // Agent side: decode frames back into telemetry records.
    while (auto frame_payload = decoder_.next()) {
        const auto& p = *frame_payload;
        for (std::size_t off = 0; off + kReadingBytes <= p.size();
             off += kReadingBytes) {
            const int port = p[off];
            const std::uint8_t channel = p[off + 1];
            std::uint64_t id = 0, bits = 0;
            for (int i = 0; i < 8; ++i) id |= (std::uint64_t)p[off + 2 + i] << (8 * i);
            for (int i = 0; i < 8; ++i) bits |= (std::uint64_t)p[off + 10 + i] << (8 * i);
            double value;
            std::memcpy(&value, &bits, 8);

            proto::TelemetryRecord rec;
            rec.sau_id = config_.id;
            rec.timestamp_ms = now_ms;
            rec.port = port;
            rec.sensor_id = hex_id(id);
            rec.metric = metric_for_channel(channel);
            rec.value = value;
            emit(std::move(rec));
        }
    }
}

void SauEmulator::emit(proto::TelemetryRecord rec) {
    rec.seq = seq_++;
    rec.unit = proto::metric_unit(rec.metric);
    if (queue_.size() >= config_.queue_capacity) {
        queue_.pop_front();
        ++queue_drops_;
    }
    queue_.push_back(std::move(rec));
}

void SauEmulator::tick(const sensors::EnvironmentProfile& env,
                       std::int64_t now_ms, double dt_s) {
    // The environment does not care whether the unit is powered.
    step_environment(env, (double)now_ms / 1000.0, dt_s);
    if (!powered_) return;

    if (flash_done_ms_ >= 0 && now_ms >= flash_done_ms_) {
        firmware_ = pending_firmware_;
        flash_done_ms_ = -1;
        enumerate_sensors();
    }

    if (mcu_alive() && now_ms >= mcu_blocked_until_ms_) {
        collect_and_send(now_ms);
        mcu_uptime_s_ += (std::int64_t)dt_s;
    } else {
        mcu_uptime_s_ = 0;
    }

    // A browned-out or unpowered MCU is cleanly dead and the agent keeps
    // heartbeating; a wedged MCU jams the shared serial link and takes the
    // heartbeat with it until the reset line clears the wedge.
    if (agent_alive(now_ms) && !mcu_wedged_) {
        proto::TelemetryRecord hb;
        hb.sau_id = config_.id;
        hb.timestamp_ms = now_ms;
        hb.port = 0;
        hb.sensor_id = firmware_;
        hb.metric = proto::Metric::Heartbeat;
        hb.value = 1.0;
        emit(std::move(hb));
        agent_uptime_s_ += (std::int64_t)dt_s;
    }
}

std::vector<proto::TelemetryRecord> SauEmulator::drain() {
    std::vector<proto::TelemetryRecord> out(queue_.begin(), queue_.end());
    queue_.clear();
    return out;
}

void SauEmulator::soft_reset(std::int64_t now_ms) {
    if (!powered_) return;
    mcu_wedged_ = false;  // the reset line yanks the MCU out of any wedge
    mcu_uptime_s_ = 0;
    mcu_blocked_until_ms_ = now_ms + config_.reset_ms;
    enumerate_sensors();
}

void SauEmulator::flash_firmware(const std::string& image_id, std::int64_t now_ms) {
    if (!shorted_.empty()) {
        throw Error(Err::FlashWhileShorted, config_.id);
    }
    if (!powered_) throw Error(Err::BadConfig, "flash while powered off");
    mcu_wedged_ = false;
    pending_firmware_ = image_id;
    mcu_blocked_until_ms_ = now_ms + config_.flash_ms;
    flash_done_ms_ = now_ms + config_.flash_ms;
    mcu_uptime_s_ = 0;
}

}  // namespace envmon::sau
