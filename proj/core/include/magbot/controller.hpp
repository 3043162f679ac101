#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "magbot/coil.hpp"
#include "magbot/compass.hpp"
#include "magbot/errors.hpp"
#include "magbot/module.hpp"
#include "magbot/planner.hpp"
#include "magbot/sim.hpp"

namespace magbot {

enum class ActuationKind { HelmholtzPulse, HelmholtzMaxwell };
const char* to_string(ActuationKind k);

/// One row of the orientation x direction -> coil sign table.
struct TruthEntry {
    int parity = 0;
    Compass direction = Compass::E;
    std::array<int, 2> helmholtz{};  // signs on (Hx, Hy)
    std::array<int, 2> maxwell{};    // signs on (Mx, My)
};

inline constexpr int kTruthTableVersion = 1;

/// Sixteen rows: two down-face parities times eight directions. The
/// Helmholtz pair perpendicular to the move sets the flip axis; its sense
/// alternates with the parity. The Maxwell pairs bias along the move.
const std::array<TruthEntry, 16>& truth_table();
const TruthEntry& truth_entry(int parity, Compass direction);

struct ActuationParams {
    double helmholtz_base = 2.0;  // A on each active Helmholtz coil
    double maxwell_base = 3.0;    // A on each active Maxwell coil
};

struct MotionCommand {
    Compass direction = Compass::E;
    ActuationKind kind = ActuationKind::HelmholtzPulse;
    CoilCommand currents;
    double fraction = 1.0;  // drive pulse width relative to a full cycle
    bool operator==(const MotionCommand&) const = default;
};

/// Nearest compass direction towards `target`; nullopt when already within
/// `tolerance`.
std::optional<Compass> compute_direction(const Eigen::Vector2d& current, const Eigen::Vector2d& target,
                                         double tolerance);

/// Coil currents for one gait cycle. `ramp_level` is added to the magnitude
/// of every active coil. Throws SaturationError past a coil limit.
MotionCommand realize_command(Compass direction, ActuationKind kind, double ramp_level, const OrientationTag& o,
                              const CoilSystem& coils, const ActuationParams& params = {});
/// Same, for a direction code received from outside (0..7, E counter-clockwise).
/// Throws InvalidDirectionError.
MotionCommand realize_command(int direction_code, ActuationKind kind, double ramp_level, const OrientationTag& o,
                              const CoilSystem& coils, const ActuationParams& params = {});

/// Inverse of the truth table as seen by a module with the given down-face
/// parity; nullopt when the currents match no row.
struct DecodedCommand {
    Compass direction = Compass::E;
    ActuationKind kind = ActuationKind::HelmholtzPulse;
};
std::optional<DecodedCommand> decode_command(const CoilCommand& currents, int parity);

/// Camera frame: module centre and the visible down-face parity.
struct Observation {
    Eigen::Vector2d position = Eigen::Vector2d::Zero();
    int parity = 0;
};

struct CycleContext {
    std::size_t waypoint = 0;
    int retry = 0;
};

class PlantIoError : public Error {
public:
    using Error::Error;
};

/// Actuation and sensing of one module. Both calls may throw PlantIoError.
class Plant {
public:
    virtual ~Plant() = default;
    virtual Observation observe() = 0;
    /// Runs one commanded cycle and returns the observation after it.
    virtual Observation execute(const MotionCommand& cmd, const CycleContext& ctx) = 0;
};

struct SimulatedPlantOptions {
    double observation_sigma = 0.2e-3;  // m per camera frame
    int frames = 3;                     // frames averaged per observation
    std::optional<std::size_t> forced_stall_waypoint;  // every cycle at and after it stalls
    std::optional<int> io_failure_after;                // cycles before the link drops
};

/// Gait-level plant: decodes the currents with the module's true parity,
/// runs one gait cycle and rejects moves whose footprint would hit an
/// obstacle or leave the workspace.
class SimulatedPlant : public Plant {
public:
    SimulatedPlant(ModuleState module, Workspace workspace, SimConfig cfg, SimulatedPlantOptions options,
                   std::uint64_t seed);

    Observation observe() override;
    Observation execute(const MotionCommand& cmd, const CycleContext& ctx) override;

    const ModuleState& module() const { return module_; }
    const std::vector<Eigen::Vector2d>& truth() const { return truth_; }
    int flips() const { return flips_; }
    int stalls() const { return stalls_; }
    int blocked() const { return blocked_; }

private:
    bool footprint_clear(const Eigen::Vector2d& centre) const;

    ModuleState module_;
    Workspace workspace_;
    SimConfig cfg_;
    SimulatedPlantOptions options_;
    std::mt19937_64 rng_;
    std::vector<Eigen::Vector2d> truth_;
    int cycles_ = 0;
    int flips_ = 0;
    int stalls_ = 0;
    int blocked_ = 0;
};

enum class FsmPhase { Idle, Pulsing, Stepping, Ramping, Aborted, Done };
const char* to_string(FsmPhase p);

struct FsmState {
    std::size_t waypoint = 0;
    OrientationTag orientation;
    int retry = 0;
    double ramp_level = 0.0;  // A
    FsmPhase phase = FsmPhase::Idle;
};

enum class NavStatus { Running, Reached, AbortedStall, AbortedIo, AbortedSaturation };
const char* to_string(NavStatus s);

struct NavParams {
    double tolerance = 1.0e-3;       // m
    int r_max = 5;
    double ramp_step = 0.1;          // A per retry
    double guard = 0.23e-3;          // m subtracted from the tolerance at the final goal
    double pulse_step = 0.884e-3;    // nominal step of a Helmholtz pulse cycle
    double maxwell_step = 3.144e-3;  // nominal step of a Helmholtz + Maxwell cycle
    double min_fraction = 0.1;
    double step_learning = 0.5;      // weight of each observed step in the running step estimate
    bool cardinal_only = false;
    ActuationParams actuation;

    void validate() const;
};

struct NavStep {
    std::size_t waypoint = 0;
    int retry = 0;
    FsmPhase phase = FsmPhase::Idle;
    MotionCommand command;
    Eigen::Vector2d observed = Eigen::Vector2d::Zero();
};

struct NavResult {
    NavStatus status = NavStatus::Running;
    bool reached = false;
    std::optional<std::size_t> failed_waypoint;
    std::vector<int> retries;                // per waypoint
    std::vector<Eigen::Vector2d> trajectory; // observed positions, initial first
    std::vector<NavStep> log;
    FsmState final_state;
    int cycles = 0;
    std::string error;
};

/// Waypoint-following loop: command, observe, retry with a current ramp,
/// abort on exhaustion. One call to step() is one commanded cycle.
class Navigator {
public:
    Navigator(std::vector<Eigen::Vector2d> waypoints, Plant& plant, CoilSystem coils, NavParams params = {});

    /// Returns false once the run has finished.
    bool step();
    bool finished() const { return result_.status != NavStatus::Running; }
    const FsmState& state() const { return state_; }
    const NavResult& result() const { return result_; }
    const std::vector<Eigen::Vector2d>& waypoints() const { return waypoints_; }

private:
    void finish(NavStatus status, const std::string& error = {});
    bool accept(std::size_t index) const;

    std::vector<Eigen::Vector2d> waypoints_;
    Plant& plant_;
    CoilSystem coils_;
    NavParams params_;
    FsmState state_;
    NavResult result_;
    Eigen::Vector2d observed_ = Eigen::Vector2d::Zero();
    bool started_ = false;
    bool first_command_ = true;
    bool commanded_here_ = false;
    double step_estimate_ = 0.0;  // running estimate of a full drive cycle, m
};

NavResult navigate(const std::vector<Eigen::Vector2d>& waypoints, Plant& plant, const CoilSystem& coils,
                   const NavParams& params = {}, const std::function<void(const NavStep&)>& on_step = {});

}  // namespace magbot
