#include "envmon/config.hpp"

#include <map>
#include <charconv>
#include <fstream>
#include <sstream>

namespace envmon::cfg {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::string strip_comment(const std::string& line) {
    bool in_str = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_str = !in_str;
        if (line[i] == '#' && !in_str) return line.substr(0, i);
    }
    return line;
}

std::string unquote(const std::string& v) {
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') {
        return v.substr(1, v.size() - 2);
    }
    return v;
}

double to_double(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw Error(Err::BadConfig, "bad number for " + key + ": " + v);
    }
}

std::int64_t to_i64(const std::string& v, const std::string& key) {
    const double d = to_double(v, key);
    return (std::int64_t)d;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

// "22.5" or "0:22,600:30" -> schedule
sensors::Schedule parse_schedule(const std::string& raw, const std::string& key) {
    const std::string v = unquote(trim(raw));
    if (v.find(':') == std::string::npos) {
        return sensors::Schedule::constant(to_double(v, key));
    }
    sensors::Schedule s;
    for (const auto& part : split(v, ',')) {
        const auto kv = split(trim(part), ':');
        if (kv.size() != 2) throw Error(Err::BadConfig, "bad schedule in " + key);
        s.points.emplace_back(to_double(trim(kv[0]), key), to_double(trim(kv[1]), key));
    }
    return s;
}

// "ds18b20@1x3" | "bme280@2" | "flow@7:analog" | "hyt271@3x2:airflow"
SensorConfig parse_sensor_entry(const std::string& raw,
                                const calib::DeviceConstants& constants,
                                double pulses_per_litre) {
    SensorConfig sc;
    sc.constants = constants;
    sc.pulses_per_litre = pulses_per_litre;
    auto flags = split(trim(raw), ':');
    const std::string head = trim(flags[0]);
    for (std::size_t i = 1; i < flags.size(); ++i) {
        const std::string f = trim(flags[i]);
        if (f == "airflow") sc.airflow = true;
        else if (f == "analog") sc.analog = true;
        else throw Error(Err::BadConfig, "unknown sensor flag: " + f);
    }
    const auto at = head.find('@');
    if (at == std::string::npos) {
        throw Error(Err::BadConfig, "sensor entry needs kind@port: " + raw);
    }
    const auto kind = sensors::kind_from_name(head.substr(0, at));
    if (!kind) throw Error(Err::BadConfig, "unknown sensor kind in: " + raw);
    sc.kind = *kind;
    std::string portpart = head.substr(at + 1);
    const auto x = portpart.find('x');
    if (x != std::string::npos) {
        sc.count = (int)to_i64(portpart.substr(x + 1), raw);
        portpart = portpart.substr(0, x);
    }
    sc.port = (int)to_i64(portpart, raw);
    return sc;
}

calib::DeviceConstants parse_constants(const std::string& raw) {
    const auto parts = split(unquote(trim(raw)), ',');
    if (parts.size() != 3) {
        throw Error(Err::BadConfig, "bme_constants needs d1,d2,d3");
    }
    return {to_double(trim(parts[0]), "d1"), to_double(trim(parts[1]), "d2"),
            to_double(trim(parts[2]), "d3")};
}

}  // namespace

Config load_config(std::istream& in) {
    Config cfg;
    std::string section;
    std::string line;
    std::size_t lineno = 0;

    // Sensor entries are parsed after the whole SAU section is read so that
    // bme_constants/pulses_per_litre can appear in any order.
    struct PendingSau {
        SauConfig sau;
        std::vector<std::string> sensor_entries;
        calib::DeviceConstants constants{28304.0, 26409.0, 299.61};
        double pulses_per_litre = 1.0;
    };
    std::vector<PendingSau> pending;
    std::map<std::string, AlarmRule> alarms;

    auto flush_sau = [&](PendingSau& p) {
        for (const auto& entry : p.sensor_entries) {
            p.sau.sensors.push_back(
                parse_sensor_entry(entry, p.constants, p.pulses_per_litre));
        }
        cfg.saus.push_back(std::move(p.sau));
    };

    while (std::getline(in, line)) {
        ++lineno;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw Error(Err::BadConfig, "bad section at line " + std::to_string(lineno));
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section.rfind("sau.", 0) == 0) {
                PendingSau p;
                p.sau.id = section.substr(4);
                pending.push_back(std::move(p));
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(Err::BadConfig, "expected key = value at line " + std::to_string(lineno));
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        const std::string sval = unquote(val);

        if (section == "collector") {
            auto& c = cfg.collector;
            if (key == "port") c.listen_port = (int)to_i64(sval, key);
            else if (key == "switch_host") c.switch_host = sval;
            else if (key == "switch_port") c.switch_port = (int)to_i64(sval, key);
            else if (key == "stale_ms") c.timeouts.stale_ms = to_i64(sval, key);
            else if (key == "reset_grace_ms") c.timeouts.reset_grace_ms = to_i64(sval, key);
            else if (key == "cycle_grace_ms") c.timeouts.cycle_grace_ms = to_i64(sval, key);
            else if (key == "backoff_base_ms") c.timeouts.backoff_base_ms = to_i64(sval, key);
            else if (key == "backoff_cap_ms") c.timeouts.backoff_cap_ms = to_i64(sval, key);
            else if (key == "event_log") c.event_log = sval;
            else if (key == "data_dir") c.data_dir = sval;
            else if (key == "webhook_url") c.webhook_url = sval;
            else throw Error(Err::BadConfig, "unknown collector key: " + key);
        } else if (section == "switch") {
            auto& s = cfg.poe;
            if (key == "port") s.listen_port = (int)to_i64(sval, key);
            else if (key == "n_ports") s.n_ports = (int)to_i64(sval, key);
            else if (key == "event_log") s.event_log = sval;
            else throw Error(Err::BadConfig, "unknown switch key: " + key);
        } else if (section == "env") {
            if (key == "temp_c") cfg.env.temp_c = parse_schedule(val, key);
            else if (key == "humidity_pct") cfg.env.humidity_pct = parse_schedule(val, key);
            else if (key == "pressure_hpa") cfg.env.pressure_hpa = parse_schedule(val, key);
            else if (key == "flow_lps") cfg.env.flow_lps = parse_schedule(val, key);
            else if (key == "leak") {
                for (const auto& part : split(sval, ',')) {
                    const auto kv = split(trim(part), ':');
                    if (kv.size() != 2) throw Error(Err::BadConfig, "bad leak schedule");
                    cfg.env.leak_events.emplace_back(to_double(trim(kv[0]), key),
                                                     to_i64(trim(kv[1]), key) != 0);
                }
            } else {
                throw Error(Err::BadConfig, "unknown env key: " + key);
            }
        } else if (section == "bus_model") {
            auto& m = cfg.bus_model;
            if (key == "base_us") m.base_us = to_double(sval, key);
            else if (key == "per_meter_us") m.per_meter_us = to_double(sval, key);
            else if (key == "per_sensor_us") m.per_sensor_us = to_double(sval, key);
            else if (key == "per_splitter_us") m.per_splitter_us = to_double(sval, key);
            else throw Error(Err::BadConfig, "unknown bus_model key: " + key);
        } else if (section.rfind("sau.", 0) == 0) {
            if (pending.empty()) throw Error(Err::BadConfig, "internal sau state");
            PendingSau& p = pending.back();
            if (key == "switch_port") p.sau.switch_port = (int)to_i64(sval, key);
            else if (key == "sensors") {
                for (const auto& entry : split(sval, ',')) {
                    if (!trim(entry).empty()) p.sensor_entries.push_back(entry);
                }
            }
            else if (key == "bus_radius_m") p.sau.bus_radius_m = to_double(sval, key);
            else if (key == "bus_splitters") p.sau.bus_splitters = (int)to_i64(sval, key);
            else if (key == "firmware") p.sau.firmware = sval;
            else if (key == "corrupt_serial_rate") p.sau.corrupt_serial_rate = to_double(sval, key);
            else if (key == "reset_ms") p.sau.reset_ms = to_i64(sval, key);
            else if (key == "flash_ms") p.sau.flash_ms = to_i64(sval, key);
            else if (key == "boot_ms") p.sau.boot_ms = to_i64(sval, key);
            else if (key == "queue_capacity") p.sau.queue_capacity = (std::size_t)to_i64(sval, key);
            else if (key == "bme_constants") p.constants = parse_constants(val);
            else if (key == "pulses_per_litre") p.pulses_per_litre = to_double(sval, key);
            else throw Error(Err::BadConfig, "unknown sau key: " + key);
        } else if (section.rfind("alarm.", 0) == 0) {
            AlarmRule& r = alarms[section.substr(6)];
            r.name = section.substr(6);
            if (key == "metric") {
                const auto m = proto::metric_from_name(sval);
                if (!m) throw Error(Err::BadConfig, "unknown alarm metric: " + sval);
                r.metric = *m;
            } else if (key == "min") r.min = to_double(sval, key);
            else if (key == "max") r.max = to_double(sval, key);
            else if (key == "debounce") r.debounce_ticks = (int)to_i64(sval, key);
            else throw Error(Err::BadConfig, "unknown alarm key: " + key);
        } else {
            throw Error(Err::BadConfig, "key outside any known section: " + key);
        }
    }

    for (auto& p : pending) flush_sau(p);
    for (auto& [name, rule] : alarms) {
        if (rule.min > rule.max) throw Error(Err::BadConfig, "alarm min > max: " + name);
        cfg.alarms.push_back(rule);
    }
    return cfg;
}

Config load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Err::IoError, "cannot open " + path);
    return load_config(in);
}

FaultSpec parse_fault(const std::string& spec) {
    const auto parts = split(spec, ':');
    FaultSpec f;
    if (parts.size() == 3 && parts[0] == "wedge-mcu") {
        f.kind = FaultSpec::Kind::WedgeMcu;
        f.sau_id = parts[1];
        f.t_start_s = to_double(parts[2], spec);
        return f;
    }
    if (parts.size() == 3 && parts[0] == "wedge-agent") {
        f.kind = FaultSpec::Kind::WedgeAgent;
        f.sau_id = parts[1];
        f.t_start_s = to_double(parts[2], spec);
        return f;
    }
    if (parts.size() == 4 && parts[0] == "short") {
        f.kind = FaultSpec::Kind::Short;
        f.sau_id = parts[1];
        f.port = (int)to_i64(parts[2], spec);
        const auto range = split(parts[3], '-');
        if (range.size() != 2) {
            throw Error(Err::BadConfig, "short fault needs t1-t2: " + spec);
        }
        f.t_start_s = to_double(range[0], spec);
        f.t_end_s = to_double(range[1], spec);
        return f;
    }
    if (parts.size() == 3 && parts[0] == "corrupt-serial") {
        f.kind = FaultSpec::Kind::CorruptSerial;
        f.sau_id = parts[1];
        f.rate = to_double(parts[2], spec);
        return f;
    }
    throw Error(Err::BadConfig, "unrecognized fault spec: " + spec);
}

}  // namespace envmon::cfg
