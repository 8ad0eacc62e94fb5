#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "envmon/errors.hpp"

namespace envmon::proto {

inline constexpr int kDefaultTelemetryPort = 4547;
inline constexpr std::size_t kMaxLineBytes = 256;

// Closed metric registry; anything else is rejected on the wire.
enum class Metric { TempC, HumidityPct, PressureHpa, FlowPulses, Leak, Heartbeat };

const char* metric_name(Metric m);
const char* metric_unit(Metric m);
std::optional<Metric> metric_from_name(std::string_view name);

struct TelemetryRecord {
    std::string sau_id;
    std::uint64_t seq = 0;
    std::int64_t timestamp_ms = 0;
    int port = 0;  // 0 = SAU-level metric
    std::string sensor_id = "-";
    Metric metric = Metric::Heartbeat;
    double value = 0.0;
    std::string unit;  // defaults to the registry unit when empty

    bool operator==(const TelemetryRecord&) const = default;
};

// `v1 <sau_id> <seq> <timestamp_ms> <port> <sensor_id> <metric> <value> <unit>`
// newline terminated, value as shortest round-trip decimal. Throws
// InvalidRecord for NaN/Inf values or fields that push the line over 256
// bytes.
std::string encode(const TelemetryRecord& record);

enum class DecodeError { Ok, MalformedLine, BadNumber, UnknownMetric };

const char* decode_error_name(DecodeError e);

// `line` excludes the trailing newline (a trailing '\n' is tolerated).
DecodeError decode(std::string_view line, TelemetryRecord& out);

struct Command {
    enum class Kind { Reset, Flash };
    Kind kind = Kind::Reset;
    std::string sau_id;
    std::string image_id;  // flash only

    bool operator==(const Command&) const = default;
};

std::string encode_command(const Command& cmd);
DecodeError decode_command(std::string_view line, Command& out);

// Shortest decimal that round-trips through double parsing.
std::string format_value(double v);

}  // namespace envmon::proto
