#include <cmath>

#include "doctest.h"
#include "envmon/sensors.hpp"

using namespace envmon;
using namespace envmon::sensors;

TEST_CASE("first-order step matches the closed form") {
    // state 0, env 10, dt = tau: 10 * (1 - e^-1).
    CHECK(first_order_step(0.0, 10.0, 90.0, 90.0) ==
          doctest::Approx(6.321205588285577).epsilon(1e-14));
    // dt = 0 leaves the state untouched.
    CHECK(first_order_step(3.5, 10.0, 0.0, 90.0) == 3.5);
    // Large dt converges to the environment.
    CHECK(first_order_step(0.0, 10.0, 1e6, 90.0) == doctest::Approx(10.0));
}

TEST_CASE("catalog response times and accuracies") {
    CHECK(spec_for(Kind::Ds18b20).tau_still_s == 90.0);
    CHECK(spec_for(Kind::Ds18b20).accuracy_k == 0.5);
    CHECK(spec_for(Kind::Hyt271).tau_still_s == 180.0);
    CHECK(spec_for(Kind::Hyt271).tau_airflow_s == 4.0);
    CHECK(spec_for(Kind::Bme280).tau_airflow_s == 1.0);
    CHECK(spec_for(Kind::Bme280).accuracy_k == 1.0);
}

TEST_CASE("ds18b20 quantization floors to 1/16 K and clamps") {
    CHECK(ds18b20_quantize(20.0) == 20.0);
    CHECK(ds18b20_quantize(20.05) == doctest::Approx(20.0));
    CHECK(ds18b20_quantize(20.0624) == doctest::Approx(20.0));
    CHECK(ds18b20_quantize(20.0626) == doctest::Approx(20.0625));
    CHECK(ds18b20_quantize(-0.01) == doctest::Approx(-0.0625));
    CHECK(ds18b20_quantize(200.0) == 125.0);
    CHECK(ds18b20_quantize(-80.0) == -55.0);
}

TEST_CASE("HYT-271 code maps") {
    CHECK(hyt_temp_code(-40.0) == 0);
    CHECK(hyt_temp_code(125.0) == 16383);
    CHECK(hyt_rh_code(0.0) == 0);
    CHECK(hyt_rh_code(100.0) == 16383);
    // Codes round-trip within the 14-bit step.
    for (double t = -40.0; t <= 125.0; t += 3.17) {
        CHECK(std::abs(hyt_temp_from_code(hyt_temp_code(t)) - t) <
              165.0 / 16383.0);
    }
    for (double rh = 0.0; rh <= 100.0; rh += 1.7) {
        CHECK(std::abs(hyt_rh_from_code(hyt_rh_code(rh)) - rh) <
              100.0 / 16383.0);
    }
}

TEST_CASE("per-device offset error is bounded and seed-deterministic") {
    for (std::uint64_t seed = 1; seed <= 500; ++seed) {
        const double e = sample_offset_error(Kind::Ds18b20, seed);
        CHECK(std::abs(e) <= 0.5);
        CHECK(e == sample_offset_error(Kind::Ds18b20, seed));
    }
    CHECK(sample_offset_error(Kind::Ds18b20, 1) !=
          sample_offset_error(Kind::Ds18b20, 2));
}

TEST_CASE("sensor instance lags toward the environment") {
    SensorInstance s(Kind::Ds18b20, 1, 99);
    s.prime(20.0, 45.0);
    CHECK(s.lag_state_c() == 20.0);
    s.step(30.0, 90.0);  // one time constant
    CHECK(s.lag_state_c() ==
          doctest::Approx(20.0 + 10.0 * (1.0 - std::exp(-1.0))).epsilon(1e-12));
}

TEST_CASE("airflow shortens the response time") {
    SensorInstance still(Kind::Hyt271, 1, 5, false);
    SensorInstance moving(Kind::Hyt271, 1, 5, true);
    still.prime(20.0, 45.0);
    moving.prime(20.0, 45.0);
    still.step(30.0, 4.0);
    moving.step(30.0, 4.0);
    CHECK(moving.lag_state_c() > still.lag_state_c());
}

TEST_CASE("flow meter accumulates pulses at the configured rate") {
    SensorInstance flow(Kind::FlowMeter, 1, 5);
    flow.set_pulses_per_litre(450.0);
    flow.add_flow(2.0);
    CHECK(flow.read_raw().pulses == 900);
    flow.add_flow(0.001);  // partial pulses carry over
    flow.add_flow(0.001);
    CHECK(flow.read_raw().pulses == 900);
    flow.add_flow(0.0005);
    CHECK(flow.read_raw().pulses >= 901);
}

TEST_CASE("schedules interpolate piecewise-linearly and clamp") {
    Schedule s;
    s.points = {{0.0, 20.0}, {100.0, 30.0}};
    CHECK(s.eval(-5.0) == 20.0);
    CHECK(s.eval(0.0) == 20.0);
    CHECK(s.eval(50.0) == doctest::Approx(25.0));
    CHECK(s.eval(100.0) == 30.0);
    CHECK(s.eval(1000.0) == 30.0);
    CHECK(Schedule::constant(7.5).eval(123.0) == 7.5);
}

TEST_CASE("leak events latch the most recent state") {
    EnvironmentProfile env;
    env.leak_events = {{10.0, true}, {20.0, false}};
    CHECK_FALSE(env.leak_at(5.0));
    CHECK(env.leak_at(10.0));
    CHECK(env.leak_at(15.0));
    CHECK_FALSE(env.leak_at(25.0));
}
