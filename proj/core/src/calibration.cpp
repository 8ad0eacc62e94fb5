#include "envmon/calibration.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

namespace envmon::calib {

namespace {

const char* kSweepHeader = "t_elapsed_s,t_ref_c,t_raw";

// Solve a symmetric 3x3 system via Gaussian elimination with partial
// pivoting, in long double to keep the normal equations honest.
std::array<long double, 3> solve3(std::array<std::array<long double, 3>, 3> a,
                                  std::array<long double, 3> b) {
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r) {
            if (std::fabs((double)a[r][col]) > std::fabs((double)a[piv][col])) piv = r;
        }
        if (a[piv][col] == 0.0L) {
            throw Error(Err::SingularFit, "rank-deficient normal equations");
        }
        std::swap(a[col], a[piv]);
        std::swap(b[col], b[piv]);
        for (int r = col + 1; r < 3; ++r) {
            long double f = a[r][col] / a[col][col];
            for (int c = col; c < 3; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::array<long double, 3> x{};
    for (int r = 2; r >= 0; --r) {
        long double s = b[r];
        for (int c = r + 1; c < 3; ++c) s -= a[r][c] * x[c];
        x[r] = s / a[r][r];
    }
    return x;
}

}  // namespace

CompensationPoly poly_from_constants(const DeviceConstants& d) {
    CompensationPoly c;
    c.c0 = -kC0Scale * (d.d1 * d.d2 - d.d1 * d.d1 * d.d3 / 65536.0);
    c.c1 = kC1Scale * (d.d2 - d.d1 * d.d3 / 32768.0);
    c.c2 = kC2Scale * d.d3;
    return c;
}

DeviceConstants constants_from_poly(const CompensationPoly& c) {
    DeviceConstants d;
    if (c.c2 == 0.0) {
        // Linear device: d3 vanishes and the quadratic degenerates.
        if (c.c1 == 0.0) {
            throw Error(Err::Underdetermined, "c1 = c2 = 0 leaves d1, d2 free");
        }
        d.d3 = 0.0;
        d.d2 = c.c1 / kC1Scale;
        d.d1 = -c.c0 / (kC0Scale * d.d2);
        return d;
    }
    const double disc = c.discriminant();
    if (disc < 0.0) {
        throw Error(Err::NegativeDiscriminant, "c1^2 - 4 c0 c2 < 0");
    }
    const double root = std::sqrt(disc);
    d.d1 = (-c.c1 + root) / (32.0 * c.c2);
    d.d2 = root / kC1Scale;
    d.d3 = c.c2 / kC2Scale;
    return d;
}

double raw_from_temperature(const CompensationPoly& c, double temp_c) {
    if (c.c2 == 0.0) {
        if (c.c1 == 0.0) {
            throw Error(Err::RangeUnreachable, "constant polynomial");
        }
        return (temp_c - c.c0) / c.c1;
    }
    const double disc = c.c1 * c.c1 - 4.0 * c.c2 * (c.c0 - temp_c);
    if (disc < 0.0) {
        throw Error(Err::RangeUnreachable, "no real raw value for temperature");
    }
    // (-c1 + sqrt)/(2 c2) is the root where d/draw is +sqrt(disc), i.e. the
    // increasing flank, for either sign of c2.
    return (-c.c1 + std::sqrt(disc)) / (2.0 * c.c2);
}

CompensationPoly fit_poly(const ChamberSweep& sweep) {
    std::set<double> distinct;
    for (const auto& p : sweep.points) distinct.insert(p.t_raw);
    if (distinct.size() < 3) {
        throw Error(Err::InsufficientData, "need >= 3 distinct raw values");
    }

    // Center and scale the abscissa before forming normal equations; raw
    // counts are ~5e5 so the unscaled Vandermonde is badly conditioned.
    long double mean = 0.0L;
    for (const auto& p : sweep.points) mean += p.t_raw;
    mean /= (long double)sweep.points.size();
    long double scale = 0.0L;
    for (const auto& p : sweep.points) {
        scale = std::max(scale, (long double)std::fabs(p.t_raw - (double)mean));
    }
    if (scale == 0.0L) scale = 1.0L;

    std::array<std::array<long double, 3>, 3> ata{};
    std::array<long double, 3> atb{};
    for (const auto& p : sweep.points) {
        const long double u = ((long double)p.t_raw - mean) / scale;
        const std::array<long double, 3> row{1.0L, u, u * u};
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) ata[i][j] += row[i] * row[j];
            atb[i] += row[i] * (long double)p.t_ref_c;
        }
    }
    const auto [a, b, cq] = solve3(ata, atb);

    // Expand a + b u + c u^2 back to the raw axis.
    CompensationPoly out;
    const long double s = scale, m = mean;
    out.c2 = (double)(cq / (s * s));
    out.c1 = (double)(b / s - 2.0L * cq * m / (s * s));
    out.c0 = (double)(a - b * m / s + cq * m * m / (s * s));
    return out;
}

DeviceConstants recalibrate(const ChamberSweep& sweep) {
    return constants_from_poly(fit_poly(sweep));
}

double max_residual_k(const CompensationPoly& c, const ChamberSweep& sweep) {
    double worst = 0.0;
    for (const auto& p : sweep.points) {
        worst = std::max(worst, std::fabs(compensate(c, p.t_raw) - p.t_ref_c));
    }
    return worst;
}

DeviationPair deviation_range(const DeviceConstants& factory,
                              const DeviceConstants& fresh,
                              double t_lo_c, double t_hi_c) {
    const CompensationPoly pf = poly_from_constants(factory);
    const CompensationPoly pn = poly_from_constants(fresh);
    // Evaluate both calibrations at the same raw counts; the fresh poly
    // reads the true temperature there by construction, and differencing
    // the polynomials directly keeps the identical-calibration case at
    // exactly zero.
    const double raw_lo = raw_from_temperature(pn, t_lo_c);
    const double raw_hi = raw_from_temperature(pn, t_hi_c);
    DeviationPair out;
    out.at_lo_k = compensate(pf, raw_lo) - compensate(pn, raw_lo);
    out.at_hi_k = compensate(pf, raw_hi) - compensate(pn, raw_hi);
    return out;
}

OffsetCalibration ds18b20_offset(std::span<const double> readings_c,
                                 double reference_c,
                                 std::uint64_t sensor_id) {
    if (readings_c.empty()) {
        throw Error(Err::EmptyReadings, "no readings");
    }
    const auto [lo, hi] = std::minmax_element(readings_c.begin(), readings_c.end());
    if (*hi - *lo >= 0.5) {
        throw Error(Err::UnstableBath, "reading spread >= 0.5 K");
    }
    double sum = 0.0;
    for (double r : readings_c) sum += r;
    OffsetCalibration cal;
    cal.sensor_id = sensor_id;
    cal.reference_c = reference_c;
    cal.n_samples = readings_c.size();
    cal.offset_c = reference_c - sum / (double)readings_c.size();
    return cal;
}

ChamberSweep load_sweep_csv(std::istream& in, bool force) {
    ChamberSweep sweep;
    std::string line;
    bool header_seen = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        if (!header_seen) {
            if (line != kSweepHeader) {
                throw Error(Err::BadSweepData,
                            "expected header '" + std::string(kSweepHeader) + "'");
            }
            header_seen = true;
            continue;
        }
        SweepPoint p;
        char c1 = 0, c2 = 0;
        std::istringstream ss(line);
        if (!(ss >> p.t_elapsed_s >> c1 >> p.t_ref_c >> c2 >> p.t_raw) ||
            c1 != ',' || c2 != ',') {
            throw Error(Err::BadSweepData, "bad row at line " + std::to_string(lineno));
        }
        if (!force && (p.t_ref_c < kSweepRefMinC || p.t_ref_c > kSweepRefMaxC)) {
            throw Error(Err::BadSweepData,
                        "reference temperature outside [-40, 60] at line " +
                            std::to_string(lineno));
        }
        if (!sweep.points.empty()) {
            const auto& prev = sweep.points.back();
            const double dt = p.t_elapsed_s - prev.t_elapsed_s;
            if (dt <= 0.0) {
                throw Error(Err::BadSweepData,
                            "t_elapsed_s not strictly increasing at line " +
                                std::to_string(lineno));
            }
            const double ramp = std::fabs(p.t_ref_c - prev.t_ref_c) / (dt / 60.0);
            if (!force && ramp > kSweepRampLimitCPerMin + 1e-12) {
                throw Error(Err::RampTooFast,
                            "ramp exceeds 0.2 C/min at line " + std::to_string(lineno));
            }
        }
        sweep.points.push_back(p);
    }
    if (!header_seen) {
        throw Error(Err::BadSweepData, "empty sweep file");
    }
    return sweep;
}

ChamberSweep load_sweep_csv_file(const std::string& path, bool force) {
    std::ifstream in(path);
    if (!in) throw Error(Err::IoError, "cannot open " + path);
    return load_sweep_csv(in, force);
}

}  // namespace envmon::calib
