#include "envmon/protocol.hpp"

#include <charconv>
#include <cmath>
#include <vector>

namespace envmon::proto {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        const std::size_t j = line.find(' ', i);
        if (j == std::string_view::npos) {
            out.push_back(line.substr(i));
            break;
        }
        out.push_back(line.substr(i, j - i));
        i = j + 1;
    }
    return out;
}

bool parse_u64(std::string_view s, std::uint64_t& out) {
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

bool parse_i64(std::string_view s, std::int64_t& out) {
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

bool parse_double(std::string_view s, double& out) {
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

bool token_ok(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s) {
        if (c == ' ' || c == '\n' || c == '\r' || c == '\t') return false;
    }
    return true;
}

}  // namespace

const char* metric_name(Metric m) {
    switch (m) {
        case Metric::TempC: return "temp_c";
        case Metric::HumidityPct: return "humidity_pct";
        case Metric::PressureHpa: return "pressure_hpa";
        case Metric::FlowPulses: return "flow_pulses";
        case Metric::Leak: return "leak";
        case Metric::Heartbeat: return "heartbeat";
    }
    return "?";
}

const char* metric_unit(Metric m) {
    switch (m) {
        case Metric::TempC: return "c";
        case Metric::HumidityPct: return "pct";
        case Metric::PressureHpa: return "hpa";
        case Metric::FlowPulses: return "count";
        case Metric::Leak: return "bool";
        case Metric::Heartbeat: return "bool";
    }
    return "?";
}

std::optional<Metric> metric_from_name(std::string_view name) {
    for (Metric m : {Metric::TempC, Metric::HumidityPct, Metric::PressureHpa,
                     Metric::FlowPulses, Metric::Leak, Metric::Heartbeat}) {
        if (name == metric_name(m)) return m;
    }
    return std::nullopt;
}

std::string format_value(double v) {
    char buf[32];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

std::string encode(const TelemetryRecord& r) {
    if (!std::isfinite(r.value)) {
        throw Error(Err::InvalidRecord, "non-finite value");
    }
    if (!token_ok(r.sau_id) || !token_ok(r.sensor_id)) {
        throw Error(Err::InvalidRecord, "empty or whitespace field");
    }
    if (r.port < 0 || r.port > 11) {
        throw Error(Err::InvalidRecord, "port out of range");
    }
    const std::string unit = r.unit.empty() ? metric_unit(r.metric) : r.unit;
    if (!token_ok(unit)) throw Error(Err::InvalidRecord, "bad unit");

    std::string line = "v1 ";
    line += r.sau_id;
    line += ' ';
    line += std::to_string(r.seq);
    line += ' ';
    line += std::to_string(r.timestamp_ms);
    line += ' ';
    line += std::to_string(r.port);
    line += ' ';
    line += r.sensor_id;
    line += ' ';
    line += metric_name(r.metric);
    line += ' ';
    line += format_value(r.value);
    line += ' ';
    line += unit;
    line += '\n';
    if (line.size() > kMaxLineBytes) {
        throw Error(Err::LineTooLong, "encoded record exceeds 256 bytes");
    }
    return line;
}

DecodeError decode(std::string_view line, TelemetryRecord& out) {
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) {
        line.remove_suffix(1);
    }
    if (line.size() > kMaxLineBytes) return DecodeError::MalformedLine;
    const auto f = split_fields(line);
    if (f.size() != 9 || f[0] != "v1") return DecodeError::MalformedLine;
    for (const auto& field : f) {
        if (field.empty()) return DecodeError::MalformedLine;
    }
    TelemetryRecord r;
    r.sau_id = std::string(f[1]);
    if (!parse_u64(f[2], r.seq)) return DecodeError::BadNumber;
    if (!parse_i64(f[3], r.timestamp_ms)) return DecodeError::BadNumber;
    std::int64_t port = 0;
    if (!parse_i64(f[4], port) || port < 0 || port > 11) return DecodeError::BadNumber;
    r.port = (int)port;
    r.sensor_id = std::string(f[5]);
    const auto metric = metric_from_name(f[6]);
    if (!metric) return DecodeError::UnknownMetric;
    r.metric = *metric;
    if (!parse_double(f[7], r.value) || !std::isfinite(r.value)) {
        return DecodeError::BadNumber;
    }
    r.unit = std::string(f[8]);
    out = std::move(r);
    return DecodeError::Ok;
}

const char* decode_error_name(DecodeError e) {
    switch (e) {
        case DecodeError::Ok: return "ok";
        case DecodeError::MalformedLine: return "malformed_line";
        case DecodeError::BadNumber: return "bad_number";
        case DecodeError::UnknownMetric: return "unknown_metric";
    }
    return "?";
}

std::string encode_command(const Command& cmd) {
    if (!token_ok(cmd.sau_id)) throw Error(Err::InvalidRecord, "bad sau id");
    std::string line = "cmd ";
    if (cmd.kind == Command::Kind::Reset) {
        line += "reset ";
        line += cmd.sau_id;
    } else {
        if (!token_ok(cmd.image_id)) throw Error(Err::InvalidRecord, "bad image id");
        line += "flash ";
        line += cmd.sau_id;
        line += ' ';
        line += cmd.image_id;
    }
    line += '\n';
    if (line.size() > kMaxLineBytes) {
        throw Error(Err::LineTooLong, "encoded command exceeds 256 bytes");
    }
    return line;
}

DecodeError decode_command(std::string_view line, Command& out) {
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) {
        line.remove_suffix(1);
    }
    const auto f = split_fields(line);
    if (f.size() < 3 || f[0] != "cmd") return DecodeError::MalformedLine;
    Command cmd;
    if (f[1] == "reset" && f.size() == 3) {
        cmd.kind = Command::Kind::Reset;
        cmd.sau_id = std::string(f[2]);
    } else if (f[1] == "flash" && f.size() == 4) {
        cmd.kind = Command::Kind::Flash;
        cmd.sau_id = std::string(f[2]);
        cmd.image_id = std::string(f[3]);
    } else {
        return DecodeError::MalformedLine;
    }
    out = std::move(cmd);
    return DecodeError::Ok;
}

}  // namespace envmon::proto
