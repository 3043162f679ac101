#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "magbot/errors.hpp"
#include "magbot/io.hpp"
#include "magbot/magnetics.hpp"
#include "magbot/server.hpp"
#include "magbot/ws_server.hpp"

using namespace magbot;

namespace {

enum Exit : int {
    kOk = 0,
    kInternal = 1,
    kUsage = 2,
    kBadInput = 3,
    kDiverged = 4,
    kNavigationFailed = 5,
    kServeFailed = 6,
};

constexpr unsigned short kDefaultPort = 8765;
constexpr const char* kPortEnv = "MAGBOT_PORT";

std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop = true; }

/// "3.2mm", "3.2" (mm) or "0.0032m" to metres.
double parse_length(const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw CLI::ValidationError("--d", "'" + text + "' is not a length");
    }
    const std::string unit = text.substr(used);
    double scale = 1e-3;
    if (unit == "m") scale = 1.0;
    else if (!unit.empty() && unit != "mm") throw CLI::ValidationError("--d", "unknown unit '" + unit + "' (mm or m)");
    if (!(v > 0.0) || !std::isfinite(v)) throw CLI::ValidationError("--d", "separation must be positive");
    return v * scale;
}

std::string three_significant(double v) {
    std::ostringstream s;
    s << std::setprecision(3) << v;
    return s.str();
}

int cmd_thresholds(const std::vector<std::string>& custom) {
    std::vector<double> ds;
    for (const auto& t : custom) ds.push_back(parse_length(t));
    std::cout << std::left << std::setw(18) << "case" << std::right << std::setw(15) << "separation_mm" << std::setw(14)
              << "required_mT" << std::setw(10) << "rounded" << "\n"
              << std::fixed;
    auto row = [](const std::string& name, double d) {
        const double b = required_field(d) * 1e3;
        std::cout << std::left << std::setw(18) << name << std::right << std::setw(15) << std::setprecision(3) << d * 1e3
                  << std::setw(14) << std::setprecision(4) << b << std::setw(10) << three_significant(b) << "\n";
    };
    for (auto c : {ReconfigurationCase::ChainToGripper, ReconfigurationCase::ChainToSquare, ReconfigurationCase::Disassembly})
        row(to_string(c), case_separation(c));
    for (double d : ds) row("custom", d);
    return kOk;
}

struct SimulateArgs {
    std::string scenario;
    std::string trace = "-";
    std::optional<double> duration;
    std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateArgs& a) {
    const Scenario sc = load_scenario(a.scenario);
    SimulateOutcome out;
    if (a.trace == "-") {
        out = simulate_scenario(sc, std::cout, {a.duration, a.seed});
    } else {
        std::ofstream f(a.trace, std::ios::binary);
        if (!f) throw ParseError("cannot write " + a.trace);
        out = simulate_scenario(sc, f, {a.duration, a.seed});
    }
    std::ostream& log = a.trace == "-" ? std::cerr : std::cout;
    if (out.diverged) {
        std::cerr << "simulation diverged at t = " << out.final_world.time << " s: " << out.error << "\n";
        return kDiverged;
    }
    log << "simulated " << sc.name << ": " << out.final_world.modules.size() << " modules, "
        << out.events.size() << " events, t = " << out.final_world.time << " s\n";
    for (const auto& e : out.events) {
        log << "  " << std::fixed << std::setprecision(3) << e.time << " s  " << to_string(e.kind);
        for (int p : e.participants) log << " " << p;
        if (!e.label.empty()) log << " (" << e.label << ")";
        log << "\n";
    }
    return kOk;
}

struct NavigateArgs {
    std::string scenario;
    std::vector<double> goal;
    std::optional<std::uint64_t> seed;
    std::optional<double> stall;
    std::optional<int> r_max;
    std::optional<double> tolerance_mm;
    std::optional<std::size_t> forced_stall;
    bool cardinal = false;
    std::string log;
};

int cmd_navigate(const NavigateArgs& a) {
    Scenario sc = load_scenario(a.scenario);
    if (!a.goal.empty()) sc.goal = Eigen::Vector2d(a.goal[0], a.goal[1]) * 1e-3;
    if (a.seed) sc.navigation.seed = *a.seed;
    if (a.stall) sc.sim.stall_probability = *a.stall;
    if (a.r_max) sc.navigation.params.r_max = *a.r_max;
    if (a.tolerance_mm) sc.navigation.params.tolerance = *a.tolerance_mm * 1e-3;
    if (a.forced_stall) sc.navigation.plant.forced_stall_waypoint = *a.forced_stall;
    if (a.cardinal) sc.navigation.params.cardinal_only = true;
    sc.sim.validate();
    sc.navigation.params.validate();
    NavigateOutcome out;
    try {
        out = navigate_scenario(sc);
    } catch (const InvalidEndpointError& e) {
        std::cerr << "invalid endpoint: " << e.what() << "\n";
        return kNavigationFailed;
    } catch (const UnreachableGoalError& e) {
        std::cerr << "unreachable goal: " << e.what() << "\n";
        return kNavigationFailed;
    }
    if (!a.log.empty()) {
        std::ofstream f(a.log, std::ios::binary);
        if (!f) throw ParseError("cannot write " + a.log);
        f << nav_result_json(out) << "\n";
    }
    const NavResult& r = out.result;
    std::cout << "status: " << to_string(r.status) << "\n"
              << "reached: " << (r.reached ? "true" : "false") << "\n"
              << "waypoints: " << out.waypoints.size() << "\n"
              << "cycles: " << r.cycles << "\n"
              << "final_error_mm: " << std::fixed << std::setprecision(3) << out.final_error * 1e3 << "\n";
    if (r.failed_waypoint) std::cout << "failed_waypoint: " << *r.failed_waypoint << "\n";
    if (!r.error.empty()) std::cout << "error: " << r.error << "\n";
    return r.reached ? kOk : kNavigationFailed;
}

struct ExperimentArgs {
    std::string spec;
    std::string records;
    std::string summary;
    std::string csv;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::optional<int> threads;
};

int cmd_experiment(const ExperimentArgs& a) {
    ExperimentSpec spec = load_experiment(a.spec);
    if (a.seed) spec.seed = *a.seed;
    if (a.trials) spec.trials = *a.trials;
    if (a.threads) spec.threads = *a.threads;
    spec.validate();
    const ExperimentResult res = run_experiment(spec);
    auto write = [](const std::string& path, auto&& body) {
        if (path.empty()) return;
        std::ofstream f(path, std::ios::binary);
        if (!f) throw ParseError("cannot write " + path);
        body(f);
    };
    write(a.records, [&](std::ostream& f) { write_records(f, res.records); });
    write(a.summary, [&](std::ostream& f) { f << summary_json(res.summary) << "\n"; });
    write(a.csv, [&](std::ostream& f) { write_records_csv(f, res.records); });
    std::cout << summary_table(res.summary);
    return kOk;
}

struct ServeArgs {
    std::string scenario;
    std::string address = "127.0.0.1";
    std::optional<unsigned short> port;
    ServerOptions options;
};

int cmd_serve(ServeArgs a) {
    const Scenario sc = load_scenario(a.scenario);
    unsigned short port = kDefaultPort;
    if (a.port) {
        port = *a.port;
    } else if (const char* env = std::getenv(kPortEnv)) {
        try {
            const int p = std::stoi(env);
            if (p < 0 || p > 65535) throw std::out_of_range("port");
            port = static_cast<unsigned short>(p);
        } catch (const std::exception&) {
            std::cerr << kPortEnv << " is not a port number: " << env << "\n";
            return kUsage;
        }
    }
    a.options.validate();
    ServerCore core(sc, a.options);
    std::unique_ptr<WebSocketServer> server;
    try {
        server = std::make_unique<WebSocketServer>(core, a.address, port);
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return kServeFailed;
    }
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    server->start();
    std::cout << "serving " << sc.name << " on ws://" << a.address << ":" << server->port() << "/ ("
              << 1.0 / a.options.tick_period << " Hz updates, speedup " << a.options.speedup << ")" << std::endl;
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    server->stop();
    std::cout << "stopped at t = " << core.time() << " s" << std::endl;
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulator and closed-loop control stack for modular magnetic millirobots"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "magbot 0.1.0");

    std::vector<std::string> custom_d;
    auto* thr = app.add_subcommand("thresholds", "Minimum uniform fields that break each bond configuration");
    thr->add_option("--d", custom_d, "Extra magnet separation, e.g. 3.2mm (repeatable)");

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Run a scenario's field sequence and write a trajectory trace");
    s->add_option("scenario", sim.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
    s->add_option("-o,--trace", sim.trace, "Trace output path, '-' for stdout")->capture_default_str();
    s->add_option("--duration", sim.duration, "Simulated seconds (default: end of the field sequence)")
        ->check(CLI::NonNegativeNumber);
    s->add_option("--seed", sim.seed, "Override the scenario seed");

    NavigateArgs nav;
    auto* n = app.add_subcommand("navigate", "Plan and drive a module to the goal against the simulated plant");
    n->add_option("scenario", nav.scenario, "Scenario file with a workspace and a goal")->required()->check(CLI::ExistingFile);
    n->add_option("--goal", nav.goal, "Goal x y in mm (overrides the scenario)")->expected(2);
    n->add_option("--seed", nav.seed, "Plant seed");
    n->add_option("--stall", nav.stall, "Stall probability per cycle")->check(CLI::Range(0.0, 1.0));
    n->add_option("--r-max", nav.r_max, "Retries per waypoint")->check(CLI::NonNegativeNumber);
    n->add_option("--tolerance", nav.tolerance_mm, "Waypoint tolerance in mm")->check(CLI::PositiveNumber);
    n->add_option("--forced-stall", nav.forced_stall, "Stall every cycle from this waypoint index on");
    n->add_flag("--cardinal", nav.cardinal, "Plan with cardinal moves only");
    n->add_option("--log", nav.log, "Write the navigation log (JSON) here");

    ExperimentArgs ex;
    auto* e = app.add_subcommand("experiment", "Run a statistical experiment");
    e->add_option("spec", ex.spec, "Experiment spec file")->required()->check(CLI::ExistingFile);
    e->add_option("--records", ex.records, "Per-trial records (JSON lines)");
    e->add_option("--summary", ex.summary, "Summary (JSON)");
    e->add_option("--csv", ex.csv, "Per-trial records (CSV) for plotting");
    e->add_option("--seed", ex.seed, "Override the base seed");
    e->add_option("--trials", ex.trials, "Override the trials per condition")->check(CLI::PositiveNumber);
    e->add_option("--threads", ex.threads, "Worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);

    ServeArgs sv;
    auto* v = app.add_subcommand("serve", "Serve a scenario over the WebSocket protocol");
    v->add_option("scenario", sv.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
    v->add_option("--port", sv.port, std::string("TCP port (default $") + kPortEnv + " or " + std::to_string(kDefaultPort) + ")");
    v->add_option("--address", sv.address, "Listen address")->capture_default_str();
    v->add_option("--speedup", sv.options.speedup, "Simulated seconds per real second")->check(CLI::PositiveNumber)
        ->capture_default_str();
    double rate = 1.0 / sv.options.tick_period;
    v->add_option("--rate", rate, "state_update broadcasts per second (>= 20)")->check(CLI::Range(20.0, 1000.0))
        ->capture_default_str();
    v->add_option("--nav-cycle", sv.options.nav_cycle_period, "Simulated seconds per navigation cycle")
        ->check(CLI::PositiveNumber)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        return app.exit(err) == 0 ? kOk : kUsage;
    }

    try {
        if (*thr) return cmd_thresholds(custom_d);
        if (*s) return cmd_simulate(sim);
        if (*n) return cmd_navigate(nav);
        if (*e) return cmd_experiment(ex);
        if (*v) {
            sv.options.tick_period = 1.0 / rate;
            return cmd_serve(sv);
        }
    } catch (const CLI::ValidationError& err) {
        std::cerr << "usage error: " << err.what() << "\n";
        return kUsage;
    } catch (const ParseError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kBadInput;
    } catch (const InvalidSpecError& err) {
        std::cerr << "invalid input: " << err.what() << "\n";
        return kBadInput;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kInternal;
    }
    return kInternal;
}
