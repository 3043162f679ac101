#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "magbot/metrics.hpp"
#include "magbot/module.hpp"
#include "magbot/sim.hpp"
#include "magbot/stats.hpp"

namespace magbot {

enum class ExperimentKind { Gait, Assembly, Reconfiguration };
const char* to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& s);

enum class ReconfigurationTarget { Gripper, Square };
const char* to_string(ReconfigurationTarget t);
ReconfigurationTarget reconfiguration_target_from_string(const std::string& s);

/// One experimental condition; only the fields of the experiment's kind are used.
struct ConditionSpec {
    std::string name;
    // gait
    ModuleType module_type = ModuleType::Fixed;
    GaitMode mode = GaitMode::HM;
    int cycles = 10;
    // assembly
    double separation = 5e-3;     // m, centre to centre
    double assist_field = 0.0;    // T along the pair axis
    double timeout = 120.0;       // s
    // reconfiguration
    ReconfigurationTarget target = ReconfigurationTarget::Gripper;
    std::optional<double> pulse;  // T; default per target
};

/// Per-trial perturbations of the reconfiguration runs.
struct ReconfigurationNoise {
    double gain_sigma = 0.10;                  // relative field amplitude
    double angle_sigma = 2.0 * kPi / 180.0;    // rad, field direction
    double offset_sigma = 0.03e-3;             // m, magnet position in its cavity
    double gripper_pulse = 1.8e-3;             // T
    double square_pulse = 2.0e-3;              // T
    double timeout = 30.0;                     // s
};

/// Per-trial perturbations of the assembly runs.
struct AssemblyNoise {
    double separation_sigma = 0.1e-3;  // m
    double lateral_sigma = 0.1e-3;     // m, sideways offset of the second module
};

struct ExperimentSpec {
    std::string id = "experiment";
    ExperimentKind kind = ExperimentKind::Gait;
    std::vector<ConditionSpec> conditions;
    int trials = 20;             // per condition
    std::uint64_t seed = 1;
    SimConfig sim;
    ReconfigurationNoise reconfiguration;
    AssemblyNoise assembly;
    int threads = 0;             // 0 = hardware concurrency

    /// Throws InvalidSpecError.
    void validate() const;
};

/// Lengths in mm, times in s.
struct TrialRecord {
    std::string scenario;
    std::string condition;
    int trial = 0;
    std::uint64_t seed = 0;
    bool success = false;
    bool failed = false;  // the trial itself raised an error
    std::string error;
    std::optional<DisplacementMetrics> displacement;
    std::optional<double> assembly_time;
    std::optional<double> completion_time;
    std::vector<double> initial_separations;
    bool operator==(const TrialRecord&) const;
};

struct ConditionSummary {
    std::string name;
    int n = 0;
    int successes = 0;
    double success_rate = 0.0;
    int samples = 0;  // trials contributing to the metric
    double mean = 0.0;
    double stddev = 0.0;
    double median = 0.0;
};

struct NamedComparison {
    std::string first;
    std::string second;
    double mean_difference = 0.0;
    double statistic = 0.0;
    double p_value = 1.0;
    std::string test;  // "t" or "tukey"
};

struct ExperimentSummary {
    std::string id;
    ExperimentKind kind = ExperimentKind::Gait;
    std::string metric;  // name of the compared metric
    std::vector<ConditionSummary> conditions;
    std::vector<NamedComparison> comparisons;
};

struct ExperimentResult {
    ExperimentSummary summary;
    std::vector<TrialRecord> records;  // condition-major, trial order
};

/// Seed of one trial, a hash of the base seed and the trial coordinates.
std::uint64_t trial_seed(std::uint64_t base, std::size_t condition, int trial);

TrialRecord run_trial(const ExperimentSpec& spec, std::size_t condition, int trial);
ExperimentResult run_experiment(const ExperimentSpec& spec);
ExperimentSummary summarize(const ExperimentSpec& spec, const std::vector<TrialRecord>& records);

/// Metric value compared across conditions, if the trial contributes one.
std::optional<double> primary_metric(ExperimentKind kind, const TrialRecord& r);

}  // namespace magbot
