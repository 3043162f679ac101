#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "magbot/coil.hpp"
#include "magbot/controller.hpp"
#include "magbot/experiment.hpp"
#include "magbot/planner.hpp"
#include "magbot/scenarios.hpp"
#include "magbot/sim.hpp"

namespace magbot {

inline constexpr int kScenarioVersion = 1;
inline constexpr int kTraceVersion = 1;
inline constexpr int kExperimentVersion = 1;

/// Navigation settings carried by a scenario.
struct NavigationSettings {
    std::optional<int> module_id;    // default: the first fixed module
    NavParams params;
    SimulatedPlantOptions plant;
    double resolution = 0.5e-3;      // m per grid cell
    double inflation = default_inflation();
    double waypoint_spacing = 3e-3;  // m
    std::uint64_t seed = 1;
};

struct Scenario {
    std::string name = "scenario";
    Workspace workspace;
    World world;
    CoilSystem coils;
    SimConfig sim;
    FieldSequence sequence;
    double duration = 0.0;  // s; defaults to the end of the field sequence
    std::optional<Eigen::Vector2d> goal;
    NavigationSettings navigation;
};

/// Parses the JSON scenario format. Throws ParseError whose message names the
/// line and column of a syntax error or the JSON path of a bad field.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::filesystem::path& path);
/// Checks that modules lie inside the workspace, do not overlap, have unique
/// ids and that bonds reference existing modules. Throws InvalidSpecError.
void validate_world(const World& world, const Workspace& ws, double contact_tolerance);

// ---------------------------------------------------------------------------
// Trajectory traces: one JSON object per line; header, samples and events in
// time order, then an end record.

struct TraceHeader {
    int version = kTraceVersion;
    std::string scenario;
    double timestep = 0.0;
    double sample_interval = 0.0;
    std::uint64_t seed = 0;
    bool operator==(const TraceHeader&) const = default;
};

struct TraceModule {
    int id = 0;
    Eigen::Vector2d position = Eigen::Vector2d::Zero();
    Eigen::Vector3d moment = Eigen::Vector3d::Zero();
    bool operator==(const TraceModule&) const = default;
};

struct TraceSample {
    double time = 0.0;
    std::vector<TraceModule> modules;
    std::vector<std::pair<int, int>> bonds;
    bool operator==(const TraceSample&) const = default;
};

struct Trace {
    TraceHeader header;
    std::vector<TraceSample> samples;
    std::vector<SimEvent> events;
    std::string status;  // "completed" or "diverged"
    std::string error;
    bool operator==(const Trace&) const = default;
};

TraceSample trace_sample(const World& w);

class TraceWriter {
public:
    TraceWriter(std::ostream& out, const TraceHeader& header);
    void sample(const World& w);
    void event(const SimEvent& e);
    void end(const std::string& status, double time, const std::string& error = {});

private:
    std::ostream& out_;
};

/// Throws ParseError on malformed lines or an unsupported version.
Trace read_trace(std::istream& in);
Trace read_trace(const std::filesystem::path& path);

struct SimulateOptions {
    std::optional<double> duration;
    std::optional<std::uint64_t> seed;
};

struct SimulateOutcome {
    bool diverged = false;
    std::string error;
    World final_world;
    std::vector<SimEvent> events;
};

/// Runs the scenario's field sequence and streams the trace as it goes; a
/// divergence ends the trace with status "diverged".
SimulateOutcome simulate_scenario(const Scenario& scenario, std::ostream& trace, const SimulateOptions& opts = {});

struct NavigateOutcome {
    NavPlan plan;
    std::vector<Eigen::Vector2d> waypoints;
    NavResult result;
    std::vector<Eigen::Vector2d> truth;  // true module positions per cycle
    double final_error = 0.0;            // m, true distance to the goal
};

/// build_grid -> plan -> navigate against a simulated plant. Throws
/// InvalidSpecError without a goal or a walking module, and the planner's
/// InvalidEndpointError / UnreachableGoalError.
NavigateOutcome navigate_scenario(const Scenario& scenario);
std::string nav_result_json(const NavigateOutcome& outcome);

// ---------------------------------------------------------------------------
// Experiments.

ExperimentSpec parse_experiment(const std::string& text);
ExperimentSpec load_experiment(const std::filesystem::path& path);

std::string trial_record_json(const TrialRecord& r);
TrialRecord parse_trial_record(const std::string& line);
void write_records(std::ostream& out, const std::vector<TrialRecord>& records);
std::string summary_json(const ExperimentSummary& s);
std::string summary_table(const ExperimentSummary& s);
void write_records_csv(std::ostream& out, const std::vector<TrialRecord>& records);

}  // namespace magbot
