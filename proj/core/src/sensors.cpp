#include "envmon/sensors.hpp"

#include <algorithm>
#include <cmath>

#include "envmon/rng.hpp"

namespace envmon::sensors {

const char* kind_name(Kind k) {
    switch (k) {
        case Kind::Ds18b20: return "ds18b20";
        case Kind::Hyt271: return "hyt271";
        case Kind::Bme280: return "bme280";
        case Kind::FlowMeter: return "flow";
        case Kind::Leak: return "leak";
    }
    return "?";
}

std::optional<Kind> kind_from_name(const std::string& name) {
    if (name == "ds18b20") return Kind::Ds18b20;
    if (name == "hyt271") return Kind::Hyt271;
    if (name == "bme280") return Kind::Bme280;
    if (name == "flow") return Kind::FlowMeter;
    if (name == "leak") return Kind::Leak;
    return std::nullopt;
}

const SensorSpec& spec_for(Kind kind) {
    static const SensorSpec specs[] = {
        {Kind::Ds18b20, 90.0, 90.0, 0.5, kDs18b20StepK},
        {Kind::Hyt271, 180.0, 4.0, 0.2, 1.0},
        {Kind::Bme280, 270.0, 1.0, 1.0, 1.0},
        {Kind::FlowMeter, 0.0, 0.0, 0.0, 1.0},
        {Kind::Leak, 0.0, 0.0, 0.0, 1.0},
    };
    return specs[(int)kind];
}

double first_order_step(double state, double env, double dt_s, double tau_s) {
    if (tau_s <= 0.0) return env;
    return state + (env - state) * (1.0 - std::exp(-dt_s / tau_s));
}

double sample_offset_error(Kind kind, std::uint64_t seed) {
    const SensorSpec& spec = spec_for(kind);
    if (spec.accuracy_k <= 0.0) return 0.0;
    Rng rng(hash_mix(seed, (std::uint64_t)kind + 0x5E));
    return rng.next_truncated_gaussian(spec.accuracy_k / 2.0, spec.accuracy_k);
}

std::uint16_t hyt_temp_code(double temp_c) {
    const double clamped = std::clamp(temp_c, -40.0, 125.0);
    const double code = (clamped + 40.0) / 165.0 * kHytCodeMax;
    return (std::uint16_t)std::lround(code);
}

std::uint16_t hyt_rh_code(double rh_pct) {
    const double clamped = std::clamp(rh_pct, 0.0, 100.0);
    return (std::uint16_t)std::lround(clamped / 100.0 * kHytCodeMax);
}

double hyt_temp_from_code(std::uint16_t code) {
    return (double)code / kHytCodeMax * 165.0 - 40.0;
}

double hyt_rh_from_code(std::uint16_t code) {
    return (double)code / kHytCodeMax * 100.0;
}

double ds18b20_quantize(double temp_c) {
    const double clamped = std::clamp(temp_c, -55.0, 125.0);
    return std::floor(clamped / kDs18b20StepK) * kDs18b20StepK;
}

SensorInstance::SensorInstance(Kind kind, std::uint64_t id, std::uint64_t seed,
                               bool airflow, calib::DeviceConstants constants)
    : spec_(spec_for(kind)),
      id_(id),
      airflow_(airflow),
      constants_(constants),
      poly_(calib::poly_from_constants(constants)),
      offset_error_k_(sample_offset_error(kind, hash_mix(seed, id))) {}

void SensorInstance::prime(double env_temp_c, double env_rh_pct) {
    // A sensor that has been sitting in the room starts assimilated.
    lag_c_ = env_temp_c;
    rh_lag_pct_ = env_rh_pct;
}

void SensorInstance::step(double env_temp_c, double dt_s) {
    const double tau = airflow_ ? spec_.tau_airflow_s : spec_.tau_still_s;
    lag_c_ = first_order_step(lag_c_, env_temp_c, dt_s, tau);
}

void SensorInstance::step_humidity(double env_rh_pct, double dt_s) {
    const double tau = airflow_ ? spec_.tau_airflow_s : spec_.tau_still_s;
    rh_lag_pct_ = first_order_step(rh_lag_pct_, env_rh_pct, dt_s, tau);
}

void SensorInstance::add_flow(double litres) { flow_litres_ += litres; }

RawReading SensorInstance::read_raw() const {
    RawReading r;
    r.kind = spec_.kind;
    switch (spec_.kind) {
        case Kind::Ds18b20:
            r.ds_temp_c = ds18b20_quantize(sensed_temp_c());
            break;
        case Kind::Hyt271:
            r.hyt_t_code = hyt_temp_code(sensed_temp_c());
            r.hyt_rh_code = hyt_rh_code(rh_lag_pct_);
            break;
        case Kind::Bme280:
            r.bme_t_raw = calib::raw_from_temperature(poly_, sensed_temp_c());
            r.hyt_rh_code = hyt_rh_code(rh_lag_pct_);
            r.pressure_hpa = pressure_hpa_;
            break;
        case Kind::FlowMeter:
            r.pulses = (std::uint64_t)(flow_litres_ * pulses_per_litre_);
            break;
        case Kind::Leak:
            r.wet = wet_;
            break;
    }
    return r;
}

double Schedule::eval(double t_s) const {
    if (points.empty()) return 0.0;
    if (t_s <= points.front().first) return points.front().second;
    if (t_s >= points.back().first) return points.back().second;
    for (std::size_t i = 1; i < points.size(); ++i) {
        if (t_s <= points[i].first) {
            const auto& [t0, v0] = points[i - 1];
            const auto& [t1, v1] = points[i];
            if (t1 == t0) return v1;
            return v0 + (v1 - v0) * (t_s - t0) / (t1 - t0);
        }
    }
    return points.back().second;
}

bool EnvironmentProfile::leak_at(double t_s) const {
    bool wet = false;
    for (const auto& [t, w] : leak_events) {
        if (t <= t_s) wet = w;
        else break;
    }
    return wet;
}

}  // namespace envmon::sensors
