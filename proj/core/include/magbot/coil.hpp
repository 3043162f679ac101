#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace magbot {

enum class Coil { Hx = 0, Hy = 1, Mx = 2, My = 3 };
inline constexpr std::array<Coil, 4> kAllCoils{Coil::Hx, Coil::Hy, Coil::Mx, Coil::My};

const char* to_string(Coil c);
Coil coil_from_string(std::string_view name);

/// Physical description of one coil pair.
struct CoilSpec {
    Coil name = Coil::Hx;
    double diameter = 0.0;  // m
    double spacing = 0.0;   // m, distance between the two coils of the pair
    double turns = 0.0;     // per coil
    double max_current = 10.0;  // A

    double radius() const { return diameter / 2.0; }
    bool is_helmholtz() const { return name == Coil::Hx || name == Coil::Hy; }
};

/// The desk-scale 2D Helmholtz/Maxwell system.
std::array<CoilSpec, 4> default_coil_specs();

/// k_H in T/A for Helmholtz pairs, k_M in (T/m)/A for Maxwell pairs.
struct Calibration {
    double k_hx = 0.0;
    double k_hy = 0.0;
    double k_mx = 0.0;
    double k_my = 0.0;

    double operator[](Coil c) const;
    double& operator[](Coil c);
};

/// Centre-field constant of a coaxial pair (co-directional currents):
/// B/I = mu0 n R^2 / (R^2 + a^2)^{3/2} with a = spacing/2.
double helmholtz_constant(double radius, double spacing, double turns);
/// Centre-gradient constant of a coaxial pair with opposing currents:
/// G/I = 3 mu0 n R^2 a / (R^2 + a^2)^{5/2}.
double maxwell_constant(double radius, double spacing, double turns);

Calibration calibration_constants(const std::array<CoilSpec, 4>& specs);

/// Reads "Hx = 1.80e-3 T/A" style lines; unspecified coils keep `base` values.
Calibration load_calibration(const std::filesystem::path& path, Calibration base);
Calibration parse_calibration(std::string_view text, Calibration base);

struct CoilCommand {
    std::array<double, 4> currents{};  // A, indexed by Coil
    double timestamp = 0.0;            // s

    double operator[](Coil c) const { return currents[static_cast<int>(c)]; }
    double& operator[](Coil c) { return currents[static_cast<int>(c)]; }
    CoilCommand scaled(double alpha) const;
    bool operator==(const CoilCommand&) const = default;
};

struct FieldSample {
    Eigen::Vector2d uniform = Eigen::Vector2d::Zero();   // (B_x, B_y), T
    Eigen::Vector2d gradients = Eigen::Vector2d::Zero(); // (G_x, G_y), T/m
    Eigen::Matrix3d gradient = Eigen::Matrix3d::Zero();  // dB_i/dx_j, T/m
    Eigen::Vector3d total = Eigen::Vector3d::Zero();     // B at the query point, T
    bool saturated = false;
    bool out_of_workspace = false;
};

/// Linear current-to-field map of the four coil pairs.
class CoilSystem {
public:
    CoilSystem();
    CoilSystem(std::array<CoilSpec, 4> specs, Calibration calibration,
               double workspace_half_extent = 17.5e-3);

    const Calibration& calibration() const { return calibration_; }
    const std::array<CoilSpec, 4>& specs() const { return specs_; }
    double max_current(Coil c) const { return specs_[static_cast<int>(c)].max_current; }
    double workspace_half_extent() const { return half_extent_; }

    /// Clips each current to its coil limit.
    CoilCommand clipped(const CoilCommand& cmd, bool* saturated = nullptr) const;

    FieldSample field_at(const CoilCommand& cmd, const Eigen::Vector3d& r) const;
    FieldSample field_in_plane(const CoilCommand& cmd, const Eigen::Vector2d& r) const;

    /// Inverse map. Throws InfeasibleTargetError naming the limiting coil.
    CoilCommand currents_for(const Eigen::Vector2d& uniform, const Eigen::Vector2d& gradients,
                             double timestamp = 0.0) const;

    /// Largest uniform field magnitude reachable along x and y simultaneously.
    double uniform_ceiling() const;

private:
    std::array<CoilSpec, 4> specs_;
    Calibration calibration_;
    double half_extent_;
};

}  // namespace magbot
