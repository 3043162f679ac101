#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "magbot/coil.hpp"
#include "magbot/module.hpp"

namespace magbot {

/// Cycle-level displacement statistics for one (module type, mode) pair.
struct GaitParams {
    double step_mean = 0.0;      // m per cycle
    double step_sigma = 0.0;     // m, independent per cycle
    double gain_sigma = 0.0;     // relative, drawn once per trial
    double lateral_sigma = 0.0;  // m per cycle
    double heading_sigma = 0.0;  // rad per cycle
};

struct SimConfig {
    double timestep = 1e-3;           // s
    double drag = 0.05;               // N s / m
    double static_friction = 5e-5;    // N per module; net force below this does not move it
    double cutoff = 15e-3;            // m, pairwise interaction range
    double bond_form_factor = 1.05;   // bond forms below this multiple of the contact distance
    double bond_slack = 0.1e-3;       // m beyond contact before a bond tears
    double contact_tolerance = 10e-6; // m of allowed footprint overlap
    double break_tolerance = 1e-9;    // relative; fields this close to the hold field count as breaking
    double relax_min_field = 1e-5;    // T; weaker in-plane fields leave the moment where it is
    GaitParams fixed_h{0.884e-3, 0.15e-3, 0.102, 0.1e-3, 0.0};
    GaitParams fixed_hm{3.144e-3, 0.6e-3, 0.172, 0.25e-3, 0.0};
    GaitParams free_gait{0.9e-3, 0.3e-3, 0.0, 0.0, 25.0 * kPi / 180.0};
    double stall_probability = 0.0;
    std::uint64_t seed = 1;
    double sample_interval = 10e-3;   // s between trajectory samples
    MagnetSpec magnet = MagnetSpec::n40_sphere();

    /// Throws InvalidSpecError on out-of-range values.
    void validate() const;
    const GaitParams& gait(ModuleType type, GaitMode mode) const;
};

enum class SimEventKind { BondFormed, BondBroken, AssemblyComplete, ReconfigurationComplete, Stall, GoalReached };
const char* to_string(SimEventKind k);
SimEventKind sim_event_kind_from_string(const std::string& s);

struct SimEvent {
    double time = 0.0;
    SimEventKind kind = SimEventKind::BondFormed;
    std::vector<int> participants;
    std::string label;  // configuration label for reconfiguration events
    bool operator==(const SimEvent&) const = default;
};

enum class ConfigurationKind { Liquid, Chain, Square, Gripper, Other };

struct Configuration {
    ConfigurationKind kind = ConfigurationKind::Liquid;
    int size = 0;  // module count for chains
    std::string to_string() const;
    bool operator==(const Configuration&) const = default;
};

/// Classifies the bonded structure: liquid (no bonds), chain(n) (collinear
/// path), gripper (3-module L), square (4-cycle with right angles) or other.
/// Pose tolerance is +-10 degrees.
Configuration detect_configuration(const World& world, double angle_tolerance = 10.0 * kPi / 180.0);

/// Field pulse perpendicular to a bond's moments at which it tears:
/// mu0 m / (4 pi d^3) with d the magnet separation.
double bond_hold_field(const ModuleState& a, const ModuleState& b, const MagnetSpec& magnet);

/// A timed command list; command k is held over [t_k, t_{k+1}) and the last
/// one until `end_time`.
struct FieldSequence {
    std::vector<CoilCommand> commands;
    double end_time = 0.0;
};

struct SequenceResult {
    World final_world;
    std::vector<World> trajectory;  // samples every cfg.sample_interval, plus the final state
    std::vector<SimEvent> events;
};

/// Overdamped quasi-static simulator of modules in the coil workspace.
class Simulator {
public:
    explicit Simulator(SimConfig cfg = {}, CoilSystem coils = CoilSystem{});

    const SimConfig& config() const { return cfg_; }
    const CoilSystem& coils() const { return coils_; }

    /// Advances one timestep under `cmd`. Throws SimulationDivergedError when
    /// two magnets coincide or a force is not finite.
    std::vector<SimEvent> step(World& world, const CoilCommand& cmd) const;

    SequenceResult run_sequence(World world, const FieldSequence& sequence) const;

private:
    SimConfig cfg_;
    CoilSystem coils_;
};

/// Outcome of one locomotion cycle.
struct GaitOutcome {
    Eigen::Vector2d displacement = Eigen::Vector2d::Zero();
    bool stalled = false;
};

/// Draws the per-trial gait gains of a module.
void sample_gait_gain(ModuleState& module, const SimConfig& cfg, std::mt19937_64& rng);

/// One stochastic locomotion cycle along `direction`. Fixed modules accept the
/// eight compass directions, free modules the four cardinal ones. Throws
/// CannotWalkError for bonded or gripper modules and InvalidDirectionError for
/// other directions. `fraction` in (0, 1] shortens the drive pulse and scales
/// the step. The caller emits the stall event from `stalled`.
GaitOutcome gait_cycle(ModuleState& module, const Eigen::Vector2d& direction, GaitMode mode,
                       const SimConfig& cfg, std::mt19937_64& rng, double fraction = 1.0);

}  // namespace magbot
