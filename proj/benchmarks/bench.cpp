// Throughput benchmarks for the hot paths: CRC, framing, the line protocol,
// ring-archive appends, collector ingest, and the calibration math.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <string>
#include <vector>

#include "envmon/calibration.hpp"
#include "envmon/collector.hpp"
#include "envmon/frame.hpp"
#include "envmon/onewire.hpp"
#include "envmon/protocol.hpp"
#include "envmon/rng.hpp"
#include "envmon/rrstore.hpp"

using namespace envmon;

namespace {

std::vector<std::uint8_t> random_bytes(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::uint8_t> out(n);
    for (auto& b : out) b = static_cast<std::uint8_t>(rng.next_u64());
    return out;
}

proto::TelemetryRecord sample_record() {
    proto::TelemetryRecord r;
    r.sau_id = "sau-17";
    r.port = 3;
    r.timestamp_ms = 1700000000000;
    r.seq = 42;
    r.sensor_id = "28-0000075a2b1c";
    r.metric = proto::Metric::TempC;
    r.value = 23.4375;
    return r;
}

}  // namespace

static void BM_Crc8(benchmark::State& state) {
    const auto data = random_bytes(static_cast<std::size_t>(state.range(0)), 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(onewire::crc8(data));
    }
    state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Crc8)->Arg(9)->Arg(64)->Arg(4096);

static void BM_FrameRoundTrip(benchmark::State& state) {
    const auto payload =
        random_bytes(static_cast<std::size_t>(state.range(0)), 2);
    for (auto _ : state) {
        const auto wire = frame::encode(payload);
        benchmark::DoNotOptimize(frame::decode(wire));
    }
    state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FrameRoundTrip)->Arg(16)->Arg(128);

static void BM_ProtocolEncode(benchmark::State& state) {
    const auto rec = sample_record();
    for (auto _ : state) {
        benchmark::DoNotOptimize(proto::encode(rec));
    }
}
BENCHMARK(BM_ProtocolEncode);

static void BM_ProtocolDecode(benchmark::State& state) {
    const std::string line = proto::encode(sample_record());
    proto::TelemetryRecord out;
    for (auto _ : state) {
        benchmark::DoNotOptimize(proto::decode(line, out));
    }
    state.SetBytesProcessed(state.iterations() *
                            static_cast<std::int64_t>(line.size()));
}
BENCHMARK(BM_ProtocolDecode);

static void BM_ArchiveAppend(benchmark::State& state) {
    rr::Archive archive(rr::Archive::default_tiers());
    Rng rng(3);
    std::int64_t t = 0;
    for (auto _ : state) {
        archive.append(t, rng.next_unit());
        t += 1000;
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ArchiveAppend);

static void BM_ArchiveQuery(benchmark::State& state) {
    rr::Archive archive(rr::Archive::default_tiers());
    Rng rng(4);
    for (std::int64_t t = 0; t < 3600; ++t)
        archive.append(t * 1000, rng.next_unit());
    for (auto _ : state) {
        benchmark::DoNotOptimize(archive.query(0, 3600000, 200));
    }
}
BENCHMARK(BM_ArchiveQuery);

static void BM_CollectorIngestLine(benchmark::State& state) {
    rr::Store store;
    collector::Collector col({}, {}, &store);
    proto::TelemetryRecord rec = sample_record();
    std::int64_t t = 0;
    for (auto _ : state) {
        rec.timestamp_ms = t;
        rec.seq = static_cast<std::uint64_t>(t / 1000);
        const std::string line = proto::encode(rec);
        benchmark::DoNotOptimize(col.ingest_line(line));
        t += 1000;
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_CollectorIngestLine);

static void BM_Compensate(benchmark::State& state) {
    const calib::CompensationPoly poly =
        calib::poly_from_constants({28205.0, 28205.0, 50.0});
    double raw = 400000.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(calib::compensate(poly, raw));
        raw += 1.0;
    }
}
BENCHMARK(BM_Compensate);

static void BM_RawFromTemperature(benchmark::State& state) {
    const calib::CompensationPoly poly =
        calib::poly_from_constants({28205.0, 28205.0, 50.0});
    double t = -40.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(calib::raw_from_temperature(poly, t));
        t = t < 60.0 ? t + 1e-4 : -40.0;
    }
}
BENCHMARK(BM_RawFromTemperature);

BENCHMARK_MAIN();
