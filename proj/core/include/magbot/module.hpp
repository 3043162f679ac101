#pragma once

#include <array>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "magbot/compass.hpp"
#include "magbot/magnetics.hpp"

namespace magbot {

inline constexpr double kModuleEdge = 3.0e-3;  // m

enum class ModuleType { Free, Fixed, Gripper };

const char* to_string(ModuleType t);
ModuleType module_type_from_string(std::string_view s);

/// Cavity diameter housing the magnet (m).
double cavity_diameter(ModuleType t);
/// Largest distance the magnet centre can sit from the cube centre.
double max_magnet_offset(ModuleType t, const MagnetSpec& magnet = MagnetSpec::n40_sphere());
/// Loosely housed magnets follow the field; the fixed module's magnet is rigid.
bool has_loose_magnet(ModuleType t);

/// Which face is down for flip-and-walk bookkeeping. Parity flips every cycle.
struct OrientationTag {
    int parity = 0;
    Compass last_move = Compass::E;
    bool operator==(const OrientationTag&) const = default;
};

enum class GaitMode { H = 0, HM = 1 };
const char* to_string(GaitMode m);
GaitMode gait_mode_from_string(std::string_view s);

struct ModuleState {
    int id = 0;
    ModuleType type = ModuleType::Free;
    Eigen::Vector2d position = Eigen::Vector2d::Zero();  // cube centre, m
    double heading = 0.0;                                // rad
    Eigen::Vector2d magnet_offset = Eigen::Vector2d::Zero();  // magnet centre relative to cube centre, world frame, m
    Eigen::Vector3d moment = Eigen::Vector3d::Zero();    // A m^2, world frame
    std::set<int> bonds;
    OrientationTag orientation;
    /// Per-trial multiplicative gait gain for each mode (1 = nominal).
    std::array<double, 2> gait_gain{1.0, 1.0};

    Eigen::Vector2d magnet_position() const { return position + magnet_offset; }
    Dipole dipole() const;
    bool bonded() const { return !bonds.empty(); }
};

struct World {
    std::vector<ModuleState> modules;
    double time = 0.0;
    double half_extent = 17.5e-3;  // workspace is the square [-h, h]^2

    /// Index into `modules` for an id; throws InvalidSpecError when absent.
    std::size_t index_of(int id) const;
    const ModuleState& module(int id) const { return modules[index_of(id)]; }
    ModuleState& module(int id) { return modules[index_of(id)]; }
    /// Bonds as ordered (lo, hi) id pairs.
    std::vector<std::pair<int, int>> bond_list() const;
    void add_bond(int a, int b);
    void remove_bond(int a, int b);
};

/// Overlap depth of two axis-aligned cube footprints (<= 0 when apart).
double footprint_overlap(const ModuleState& a, const ModuleState& b);
/// Largest pairwise footprint overlap in the world.
double max_overlap(const World& w);
/// Connected components of the bond graph; each is a sorted list of indices.
std::vector<std::vector<std::size_t>> bond_components(const World& w);

/// Moment of `magnitude` pointing along unit `dir` (in-plane) or +z for the liquid state.
Eigen::Vector3d in_plane_moment(double angle, double magnitude = magnetic_moment(MagnetSpec::n40_sphere()));
Eigen::Vector3d resting_moment(double magnitude = magnetic_moment(MagnetSpec::n40_sphere()));

}  // namespace magbot
