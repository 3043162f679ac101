#pragma once

#include <numbers>

#include <Eigen/Dense>

namespace magbot {

inline constexpr double kPi = std::numbers::pi;
/// Vacuum permeability, T·m/A.
inline constexpr double kMu0 = 4.0 * kPi * 1e-7;
inline constexpr double kMu0Over4Pi = kMu0 / (4.0 * kPi);

/// Uniformly magnetised spherical magnet.
struct MagnetSpec {
    double radius = 0.5e-3;          // m
    double magnetization = 986760.0;  // A/m

    double volume() const;
    double moment_magnitude() const;
    void validate() const;

    /// 1 mm diameter N40 sphere used in every module.
    static MagnetSpec n40_sphere() { return {}; }
};

/// Point dipole in the workspace frame. Position z is normally 0.
struct Dipole {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Vector3d moment = Eigen::Vector3d::Zero();
};

/// Force/energy decomposition for two parallel dipoles at angle theta to the
/// separation vector. Positive radial force is repulsive.
struct PairInteraction {
    double separation = 0.0;
    double theta = 0.0;
    double radial_force = 0.0;
    double tangential_force = 0.0;
    double energy = 0.0;
};

enum class ReconfigurationCase { ChainToGripper, ChainToSquare, Disassembly };

/// Magnet separation that governs each reconfiguration case (m).
double case_separation(ReconfigurationCase c);
const char* to_string(ReconfigurationCase c);

double magnetic_moment(const MagnetSpec& spec);

/// tau = m x B.
Eigen::Vector3d torque_on_dipole(const Eigen::Vector3d& moment, const Eigen::Vector3d& field);
/// Planar torque about z for in-plane moment and field.
double torque_on_dipole(const Eigen::Vector2d& moment, const Eigen::Vector2d& field);

/// F = (m . grad) B with gradient(i, j) = dB_i / dx_j.
Eigen::Vector3d force_on_dipole(const Eigen::Vector3d& moment, const Eigen::Matrix3d& gradient);
Eigen::Vector2d force_on_dipole(const Eigen::Vector2d& moment, const Eigen::Matrix2d& gradient);

/// B(r) = mu0/(4 pi r^3) [3 (m.r^) r^ - m]. Throws SingularityError at r = 0.
Eigen::Vector3d dipole_field(const Dipole& source, const Eigen::Vector3d& at);

/// Potential energy of `b` in the field of `a`: U = -m_b . B_a.
double dipole_pair_energy(const Dipole& a, const Dipole& b);

/// Force on `b` exerted by `a` (full vector form).
Eigen::Vector3d dipole_pair_force(const Dipole& a, const Dipole& b);

PairInteraction pair_interaction(double m1, double m2, double separation, double theta);

/// Uniform field needed to rotate a magnet held by a neighbour at distance d:
/// mu0/(4 pi) * m / d^3.
double required_field(double separation, const MagnetSpec& spec = MagnetSpec::n40_sphere());
double required_field(ReconfigurationCase c, const MagnetSpec& spec = MagnetSpec::n40_sphere());

}  // namespace magbot
