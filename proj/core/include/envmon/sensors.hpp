#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "envmon/calibration.hpp"

namespace envmon::sensors {

enum class Kind { Ds18b20, Hyt271, Bme280, FlowMeter, Leak };

const char* kind_name(Kind k);
std::optional<Kind> kind_from_name(const std::string& name);

struct SensorSpec {
    Kind kind;
    double tau_still_s;    // first-order response in still air
    double tau_airflow_s;  // with forced airflow; equals tau_still_s if n/a
    double accuracy_k;
    double quantization;   // K per step (DS18B20) or counts (code maps)
};

// Catalog values follow the selected parts: DS18B20 tau ~90 s still air,
// +-0.5 K; HYT-271 180 s / 4 s, +-0.2 K; BME280 270 s / 1 s, +-1.0 K.
const SensorSpec& spec_for(Kind kind);

// Exact first-order update: state += (env - state) * (1 - exp(-dt/tau)).
double first_order_step(double state, double env, double dt_s, double tau_s);

// Per-device miscalibration draw: zero-mean Gaussian (sigma = accuracy/2)
// truncated to +-accuracy, deterministic per seed.
double sample_offset_error(Kind kind, std::uint64_t seed);

struct RawReading {
    Kind kind;
    double ds_temp_c = 0.0;        // quantized to 1/16 K, floor to grid
    std::uint16_t hyt_t_code = 0;  // 14-bit
    std::uint16_t hyt_rh_code = 0; // 14-bit
    double bme_t_raw = 0.0;        // counts
    double pressure_hpa = 0.0;
    std::uint64_t pulses = 0;
    bool wet = false;
};

inline constexpr double kDs18b20StepK = 0.0625;
inline constexpr int kHytCodeMax = 16383;  // 2^14 - 1

std::uint16_t hyt_temp_code(double temp_c);
std::uint16_t hyt_rh_code(double rh_pct);
double hyt_temp_from_code(std::uint16_t code);
double hyt_rh_from_code(std::uint16_t code);

double ds18b20_quantize(double temp_c);

class SensorInstance {
public:
    SensorInstance(Kind kind, std::uint64_t id, std::uint64_t seed,
                   bool airflow = false,
                   calib::DeviceConstants constants = {});

    Kind kind() const { return spec_.kind; }
    std::uint64_t id() const { return id_; }
    double lag_state_c() const { return lag_c_; }
    double offset_error_k() const { return offset_error_k_; }
    const calib::DeviceConstants& device_constants() const { return constants_; }

    // Snap the lag filters to the current environment (installation moment).
    void prime(double env_temp_c, double env_rh_pct);

    // Advance the thermal (and humidity) lag filters by dt against the
    // current environment values.
    void step(double env_temp_c, double dt_s);
    void step_humidity(double env_rh_pct, double dt_s);
    void set_pressure(double hpa) { pressure_hpa_ = hpa; }
    void add_flow(double litres);
    void set_wet(bool wet) { wet_ = wet; }
    void set_pulses_per_litre(double p) { pulses_per_litre_ = p; }

    // Sensed temperature including the per-device miscalibration.
    double sensed_temp_c() const { return lag_c_ + offset_error_k_; }

    RawReading read_raw() const;

private:
    SensorSpec spec_;
    std::uint64_t id_;
    bool airflow_;
    calib::DeviceConstants constants_;
    calib::CompensationPoly poly_;
    double offset_error_k_ = 0.0;
    double lag_c_ = 20.0;
    double rh_lag_pct_ = 40.0;
    double pressure_hpa_ = 1013.25;
    double flow_litres_ = 0.0;
    double pulses_per_litre_ = 1.0;
    bool wet_ = false;
};

// Piecewise-linear schedule over simulation time.
struct Schedule {
    std::vector<std::pair<double, double>> points;  // (t_s, value), sorted

    static Schedule constant(double v) { return {{{0.0, v}}}; }
    double eval(double t_s) const;
};

struct EnvironmentProfile {
    Schedule temp_c = Schedule::constant(22.0);
    Schedule humidity_pct = Schedule::constant(45.0);
    Schedule pressure_hpa = Schedule::constant(1013.25);
    Schedule flow_lps = Schedule::constant(0.0);
    std::vector<std::pair<double, bool>> leak_events;  // (t_s, wet), sorted

    bool leak_at(double t_s) const;
};

}  // namespace envmon::sensors
