#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "envmon/errors.hpp"

namespace envmon::calib {

// Per-device BME280 temperature calibration constants. d1 is dimensionless,
// d2 and d3 are in degrees Celsius.
struct DeviceConstants {
    double d1 = 0.0;
    double d2 = 0.0;
    double d3 = 0.0;
};

// T = c0 + c1 * t_raw + c2 * t_raw^2
struct CompensationPoly {
    double c0 = 0.0;  // degC
    double c1 = 0.0;  // degC per raw count
    double c2 = 0.0;  // degC per raw count^2

    double discriminant() const { return c1 * c1 - 4.0 * c0 * c2; }
};

struct SweepPoint {
    double t_elapsed_s = 0.0;
    double t_ref_c = 0.0;
    double t_raw = 0.0;
};

// Ordered climate chamber recording: reference temperature vs raw counts.
struct ChamberSweep {
    std::vector<SweepPoint> points;
};

struct OffsetCalibration {
    std::uint64_t sensor_id = 0;
    double offset_c = 0.0;
    double reference_c = 20.0;
    std::size_t n_samples = 0;

    double apply(double reading_c) const { return reading_c + offset_c; }
    double unapply(double corrected_c) const { return corrected_c - offset_c; }
};

// Scale factors of the quadratic compensation map.
inline constexpr double kC0Scale = 4.0 / (5.0 * 4194304.0);          // 4/(5*2^22)
inline constexpr double kC1Scale = 4.0 / (5.0 * 67108864.0);         // 4/(5*2^26)
inline constexpr double kC2Scale = 4.0 / (5.0 * 70368744177664.0);   // 4/(5*2^46)

inline constexpr double kSweepRampLimitCPerMin = 0.2;
inline constexpr double kSweepRefMinC = -40.0;
inline constexpr double kSweepRefMaxC = 60.0;

CompensationPoly poly_from_constants(const DeviceConstants& d);

// Inverse of poly_from_constants. Throws NegativeDiscriminant when the
// quadratic has no real inversion, Underdetermined when c1 = c2 = 0.
DeviceConstants constants_from_poly(const CompensationPoly& c);

inline double compensate(const CompensationPoly& c, double t_raw) {
    return c.c0 + (c.c1 + c.c2 * t_raw) * t_raw;
}

// Raw counts at which the poly evaluates to temp_c, picking the root on the
// increasing flank of the quadratic. Throws RangeUnreachable.
double raw_from_temperature(const CompensationPoly& c, double temp_c);

CompensationPoly fit_poly(const ChamberSweep& sweep);

DeviceConstants recalibrate(const ChamberSweep& sweep);

// Largest |compensate(c, t_raw) - t_ref| over the sweep points.
double max_residual_k(const CompensationPoly& c, const ChamberSweep& sweep);

struct DeviationPair {
    double at_lo_k = 0.0;
    double at_hi_k = 0.0;
};

// What the factory calibration would read, minus the true temperature, at the
// raw counts where the fresh calibration reads exactly t_lo and t_hi.
DeviationPair deviation_range(const DeviceConstants& factory,
                              const DeviceConstants& fresh,
                              double t_lo_c, double t_hi_c);

OffsetCalibration ds18b20_offset(std::span<const double> readings_c,
                                 double reference_c,
                                 std::uint64_t sensor_id = 0);

// CSV with header "t_elapsed_s,t_ref_c,t_raw"; '#' starts a comment line.
// Ramp-rate and reference-range violations are rejected unless force is set.
ChamberSweep load_sweep_csv(std::istream& in, bool force = false);
ChamberSweep load_sweep_csv_file(const std::string& path, bool force = false);

}  // namespace envmon::calib
