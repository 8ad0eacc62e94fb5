// envmon: operator entry points for the environment-monitoring stack.
//
//   collect   run the collector + watchdog + storage services
//   simulate  run a simulated SAU fleet (in-process, or against a collector)
//   calib     BME280 refit / deviation report, DS18B20 offset calibration
//   bus       OneWire cable-load health check
//   query     fetch stored samples from a running collector
//   status    collector snapshot
//
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "envmon/calibration.hpp"
#include "envmon/collector.hpp"
#include "envmon/config.hpp"
#include "envmon/net.hpp"
#include "envmon/onewire.hpp"
#include "envmon/poe_switch.hpp"
#include "envmon/rng.hpp"
#include "envmon/rrstore.hpp"
#include "envmon/sau.hpp"
#include "envmon/sim.hpp"

namespace {

using namespace envmon;

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

std::string config_path_or_env(const std::string& from_flag) {
    if (!from_flag.empty()) return from_flag;
    if (const char* env = std::getenv("ENVMON_CONFIG")) return env;
    throw Error(Err::BadConfig,
                "no config file given and ENVMON_CONFIG is not set");
}

calib::DeviceConstants parse_constants(const std::string& text) {
    calib::DeviceConstants d;
    char comma1 = 0, comma2 = 0;
    std::istringstream in(text);
    in >> d.d1 >> comma1 >> d.d2 >> comma2 >> d.d3;
    if (in.fail() || comma1 != ',' || comma2 != ',')
        throw Error(Err::BadConfig, "expected d1,d2,d3: " + text);
    return d;
}

void parse_host_port(const std::string& text, std::string& host, int& port) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos || colon + 1 >= text.size())
        throw Error(Err::BadConfig, "expected host:port: " + text);
    host = text.substr(0, colon);
    port = std::stoi(text.substr(colon + 1));
}

// ------------------------------------------------------------------ collect

int cmd_collect(const std::string& config_flag) {
    const cfg::Config config = cfg::load_config_file(config_path_or_env(config_flag));

    rr::Store store = std::filesystem::exists(config.collector.data_dir)
                          ? rr::Store::open(config.collector.data_dir)
                          : rr::Store();
    collector::Collector coll(config.collector.timeouts, config.alarms, &store);

    std::ofstream event_file;
    if (!config.collector.event_log.empty())
        event_file.open(config.collector.event_log, std::ios::app);
    coll.set_event_sink([&event_file](const std::string& line) {
        std::cout << line << '\n' << std::flush;
        if (event_file.is_open()) event_file << line << '\n' << std::flush;
    });

    net::CollectorService service(config, store, coll);
    service.start();
    std::cerr << "collector listening on port " << service.listen_port()
              << ", data dir " << config.collector.data_dir << '\n';

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    auto last_flush = std::chrono::steady_clock::now();
    while (!g_stop) {
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
        const auto now = std::chrono::steady_clock::now();
        if (now - last_flush >= std::chrono::seconds(60)) {
            store.flush(config.collector.data_dir);
            last_flush = now;
        }
    }
    service.stop();
    store.flush(config.collector.data_dir);
    std::cerr << "collector stopped\n";
    return 0;
}

// ----------------------------------------------------------------- simulate

int run_live_fleet(const cfg::Config& config, std::uint64_t seed,
                   double duration_s, const std::vector<cfg::FaultSpec>& faults,
                   const std::string& collector_addr) {
    std::string host;
    int port = 0;
    parse_host_port(collector_addr, host, port);

    PoeSwitch sw(config.poe.n_ports);
    std::vector<std::unique_ptr<sau::SauEmulator>> saus;
    std::uint64_t i = 0;
    for (const auto& sc : config.saus) {
        auto s = std::make_unique<sau::SauEmulator>(sc, hash_mix(seed, ++i),
                                                    config.bus_model);
        s->prime_environment(config.env, 0.0);
        saus.push_back(std::move(s));
    }
    auto find = [&saus](const std::string& id) -> sau::SauEmulator* {
        for (auto& s : saus)
            if (s->id() == id) return s.get();
        return nullptr;
    };
    sw.set_power_callback([&find](int, const std::string& sau_id, bool on,
                                  std::int64_t now_ms) {
        if (sau::SauEmulator* s = find(sau_id)) {
            if (on)
                s->power_up(now_ms);
            else
                s->power_down();
        }
    });
    const std::int64_t t0 = net::wall_ms();
    for (const auto& s : saus) {
        if (s->config().switch_port > 0) sw.attach(s->config().switch_port, s->id());
        s->power_up(t0 - s->config().boot_ms);  // fleet starts booted
    }

    net::SwitchServer switch_server(sw, config.poe.listen_port);
    switch_server.start();
    std::cerr << "switch control on port " << switch_server.listen_port()
              << ", streaming to " << host << ":" << port << '\n';

    std::map<std::string, std::unique_ptr<net::LineClient>> clients;
    for (const auto& s : saus) {
        auto c = std::make_unique<net::LineClient>();
        c->connect(host, port);
        clients[s->id()] = std::move(c);
    }

    std::vector<bool> applied(faults.size(), false), cleared(faults.size(), false);
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);

    for (std::int64_t tick = 0;
         (duration_s <= 0.0 || (double)tick < duration_s) && !g_stop; ++tick) {
        const double t_s = (double)tick;
        for (std::size_t f = 0; f < faults.size(); ++f) {
            sau::SauEmulator* s = find(faults[f].sau_id);
            if (!s) continue;
            if (!applied[f] && t_s >= faults[f].t_start_s) {
                applied[f] = true;
                using K = cfg::FaultSpec::Kind;
                switch (faults[f].kind) {
                    case K::WedgeMcu: s->wedge_mcu(); break;
                    case K::WedgeAgent: s->wedge_agent(); break;
                    case K::Short: s->short_port(faults[f].port); break;
                    case K::CorruptSerial:
                        s->set_corrupt_serial_rate(faults[f].rate);
                        break;
                }
            }
            if (faults[f].kind == cfg::FaultSpec::Kind::Short && applied[f] &&
                !cleared[f] && t_s >= faults[f].t_end_s) {
                cleared[f] = true;
                s->clear_short(faults[f].port);
            }
        }
        const std::int64_t now = net::wall_ms();
        for (auto& s : saus) {
            s->tick(config.env, now);
            auto& client = clients[s->id()];
            try {
                for (const auto& rec : s->drain())
                    client->send_line(proto::encode(rec));
                // Drain any pending collector commands without blocking.
                while (auto line = client->recv_line(0)) {
                    std::istringstream in(*line);
                    std::string verb, action, sau_id, image;
                    in >> verb >> action >> sau_id;
                    if (verb != "cmd" || sau_id != s->id()) continue;
                    if (action == "reset") {
                        s->soft_reset(net::wall_ms());
                    } else if (action == "flash" && (in >> image)) {
                        try {
                            s->flash_firmware(image, net::wall_ms());
                        } catch (const Error& e) {
                            std::cerr << s->id() << ": " << e.what() << '\n';
                        }
                    }
                }
            } catch (const Error& e) {
                std::cerr << s->id() << ": " << e.what() << '\n';
            }
        }
        std::this_thread::sleep_for(std::chrono::seconds(1));
    }
    switch_server.stop();
    return 0;
}

int cmd_simulate(const std::string& topology_flag, std::uint64_t seed,
                 double duration_s, const std::vector<std::string>& fault_specs,
                 const std::string& collector_addr,
                 const std::string& data_dir) {
    const cfg::Config config =
        cfg::load_config_file(config_path_or_env(topology_flag));
    std::vector<cfg::FaultSpec> faults;
    for (const auto& spec : fault_specs) faults.push_back(cfg::parse_fault(spec));

    if (!collector_addr.empty())
        return run_live_fleet(config, seed, duration_s, faults, collector_addr);

    sim::Simulation simulation(config, seed);
    for (const auto& f : faults) simulation.add_fault(f);
    simulation.run(duration_s);
    std::cout << simulation.event_log_text();
    if (!data_dir.empty()) simulation.store().flush(data_dir);
    return 0;
}

// -------------------------------------------------------------------- calib

int cmd_calib_fit(const std::string& csv_path, bool force) {
    const calib::ChamberSweep sweep = calib::load_sweep_csv_file(csv_path, force);
    const calib::DeviceConstants d = calib::recalibrate(sweep);
    const calib::CompensationPoly poly = calib::poly_from_constants(d);
    std::cout << "d1=" << proto::format_value(d.d1) << '\n'
              << "d2=" << proto::format_value(d.d2) << '\n'
              << "d3=" << proto::format_value(d.d3) << '\n'
              << "max_residual_k="
              << proto::format_value(calib::max_residual_k(poly, sweep)) << '\n';
    return 0;
}

int cmd_calib_deviation(const std::string& factory_text,
                        const std::string& fresh_text,
                        const std::string& range_text) {
    double lo = -40.0, hi = 60.0;
    if (!range_text.empty()) {
        const auto colon = range_text.find(':', 1);  // allow a leading minus
        if (colon == std::string::npos)
            throw Error(Err::BadConfig, "expected --range lo:hi");
        lo = std::stod(range_text.substr(0, colon));
        hi = std::stod(range_text.substr(colon + 1));
    }
    const auto dev = calib::deviation_range(parse_constants(factory_text),
                                            parse_constants(fresh_text), lo, hi);
    std::cout << proto::format_value(dev.at_lo_k) << " .. "
              << proto::format_value(dev.at_hi_k) << '\n';
    return 0;
}

int cmd_calib_offset(const std::string& csv_path, double reference_c) {
    std::ifstream in(csv_path);
    if (!in) throw Error(Err::IoError, "cannot open " + csv_path);
    std::vector<double> readings;
    std::string line;
    while (std::getline(in, line)) {
        const auto start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos || line[start] == '#') continue;
        readings.push_back(std::stod(line));
    }
    const auto cal = calib::ds18b20_offset(readings, reference_c);
    std::cout << "offset_c=" << proto::format_value(cal.offset_c) << '\n'
              << "n_samples=" << cal.n_samples << '\n';
    return 0;
}

// ---------------------------------------------------------------------- bus

int cmd_bus_health(double radius_m, int n_sensors, int n_splitters) {
    const auto health = onewire::bus_health(
        onewire::BusTopology{radius_m, n_sensors, n_splitters});
    std::cout << proto::format_value(health.recovery_time_us) << " us, "
              << (health.discovery_reliable ? "OK" : "DEGRADED") << '\n';
    return health.discovery_reliable ? 0 : 1;
}

// ------------------------------------------------------------ query / status

int cmd_query(const std::string& collector_addr, const std::string& key,
              std::int64_t from_ms, std::int64_t to_ms, bool csv) {
    std::string host;
    int port = 0;
    parse_host_port(collector_addr, host, port);
    net::LineClient client;
    client.connect(host, port);
    client.send_line("query " + key + " " + std::to_string(from_ms) + " " +
                     std::to_string(to_ms));
    if (csv) std::cout << "timestamp_ms,value\n";
    while (true) {
        const auto line = client.recv_line(5000);
        if (!line) throw Error(Err::IoError, "collector timed out");
        if (*line == "end") break;
        if (line->rfind("err ", 0) == 0) throw Error(Err::IoError, *line);
        if (csv) {
            std::string out = *line;
            const auto space = out.find(' ');
            if (space != std::string::npos) out[space] = ',';
            std::cout << out << '\n';
        } else {
            std::cout << *line << '\n';
        }
    }
    return 0;
}

int cmd_status(const std::string& collector_addr) {
    std::string host;
    int port = 0;
    parse_host_port(collector_addr, host, port);
    net::LineClient client;
    client.connect(host, port);
    client.send_line("status");
    while (true) {
        const auto line = client.recv_line(5000);
        if (!line) throw Error(Err::IoError, "collector timed out");
        if (*line == "end-status") break;
        std::cout << *line << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"environment-monitoring toolkit"};
    app.require_subcommand(1);

    // collect
    std::string collect_config;
    auto* collect = app.add_subcommand("collect", "run the collector service");
    collect->add_option("--config", collect_config,
                        "config file (default: $ENVMON_CONFIG)");

    // simulate
    std::string sim_topology, sim_collector, sim_data_dir;
    std::vector<std::string> sim_faults;
    double sim_duration = 120.0;
    std::uint64_t sim_seed = 1;
    auto* simulate = app.add_subcommand("simulate", "run a simulated SAU fleet");
    simulate->add_option("--topology", sim_topology,
                         "topology config file (default: $ENVMON_CONFIG)");
    simulate->add_option("--fault", sim_faults,
                         "fault spec, repeatable: wedge-mcu:<sau>:<t>, "
                         "wedge-agent:<sau>:<t>, short:<sau>:<port>:<t1>-<t2>, "
                         "corrupt-serial:<sau>:<rate>");
    simulate->add_option("--duration", sim_duration, "simulated seconds");
    simulate->add_option("--seed", sim_seed, "deterministic seed");
    simulate->add_option("--collector", sim_collector,
                         "stream to a live collector at host:port instead of "
                         "running in-process");
    simulate->add_option("--data-dir", sim_data_dir,
                         "flush in-process storage here on exit");

    // calib
    auto* calib_cmd = app.add_subcommand("calib", "sensor calibration tools");
    calib_cmd->require_subcommand(1);
    auto* bme = calib_cmd->add_subcommand("bme280", "BME280 recalibration");
    bme->require_subcommand(1);

    std::string fit_csv;
    bool fit_force = false;
    auto* fit = bme->add_subcommand("fit", "refit constants from a chamber sweep");
    fit->add_option("csv", fit_csv, "sweep CSV (t_elapsed_s,t_ref_c,t_raw)")
        ->required();
    fit->add_flag("--force", fit_force, "skip ramp/range validation");

    std::string dev_factory, dev_fresh, dev_range = "-40:60";
    auto* deviation =
        bme->add_subcommand("deviation", "factory-vs-fresh deviation endpoints");
    deviation->add_option("--factory", dev_factory, "factory d1,d2,d3")->required();
    deviation->add_option("--new", dev_fresh, "fresh d1,d2,d3")->required();
    deviation->add_option("--range", dev_range, "lo:hi in degC");

    auto* ds = calib_cmd->add_subcommand("ds18b20", "DS18B20 offset calibration");
    ds->require_subcommand(1);
    std::string offset_csv;
    double offset_ref = 20.0;
    auto* offset = ds->add_subcommand("offset", "offset from bath readings");
    offset->add_option("csv", offset_csv, "one reading (degC) per line")
        ->required();
    offset->add_option("--ref", offset_ref, "bath reference temperature");

    // bus
    auto* bus = app.add_subcommand("bus", "OneWire bus diagnostics");
    bus->require_subcommand(1);
    double bus_radius = 5.0;
    int bus_sensors = 0, bus_splitters = 0;
    auto* bus_health = bus->add_subcommand("health", "cable-load health check");
    bus_health->add_option("--radius", bus_radius, "cable radius in meters")
        ->required();
    bus_health->add_option("--sensors", bus_sensors, "sensor count")->required();
    bus_health->add_option("--splitters", bus_splitters, "splitter count");

    // query / status
    std::string query_collector = "127.0.0.1:4547", query_key;
    std::int64_t query_from = 0, query_to = 0;
    bool query_csv = false;
    auto* query = app.add_subcommand("query", "fetch stored samples");
    query->add_option("key", query_key, "metric key sau:port:sensor:metric")
        ->required();
    query->add_option("--from", query_from, "start timestamp (ms)")->required();
    query->add_option("--to", query_to, "end timestamp (ms)")->required();
    query->add_flag("--csv", query_csv, "CSV output");
    query->add_option("--collector", query_collector, "collector host:port");

    std::string status_collector = "127.0.0.1:4547";
    auto* status = app.add_subcommand("status", "collector snapshot");
    status->add_option("--collector", status_collector, "collector host:port");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (collect->parsed()) return cmd_collect(collect_config);
        if (simulate->parsed())
            return cmd_simulate(sim_topology, sim_seed, sim_duration, sim_faults,
                                sim_collector, sim_data_dir);
        if (fit->parsed()) return cmd_calib_fit(fit_csv, fit_force);
        if (deviation->parsed())
            return cmd_calib_deviation(dev_factory, dev_fresh, dev_range);
        if (offset->parsed()) return cmd_calib_offset(offset_csv, offset_ref);
        if (bus_health->parsed())
            return cmd_bus_health(bus_radius, bus_sensors, bus_splitters);
        if (query->parsed())
            return cmd_query(query_collector, query_key, query_from, query_to,
                             query_csv);
        if (status->parsed()) return cmd_status(status_collector);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
