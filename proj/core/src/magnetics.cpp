#include "magbot/magnetics.hpp"

#include <cmath>
#include <sstream>

#include "magbot/errors.hpp"

namespace magbot {

double MagnetSpec::volume() const { return 4.0 / 3.0 * kPi * radius * radius * radius; }

double MagnetSpec::moment_magnitude() const { return magnetization * volume(); }

void MagnetSpec::validate() const {
    if (!(radius > 0.0) || !std::isfinite(radius)) {
        std::ostringstream os;
        os << "magnet radius must be positive, got " << radius;
        throw InvalidSpecError(os.str());
    }
    // Zero magnetisation is a valid (unmagnetised) sphere.
    if (!(magnetization >= 0.0) || !std::isfinite(magnetization)) {
        std::ostringstream os;
        os << "magnetization must be non-negative, got " << magnetization;
        throw InvalidSpecError(os.str());
    }
}

double case_separation(ReconfigurationCase c) {
    switch (c) {
        case ReconfigurationCase::ChainToGripper: return 3.2e-3;
        case ReconfigurationCase::ChainToSquare: return 3.0e-3;
        case ReconfigurationCase::Disassembly: return 1.6e-3;
    }
    throw InvalidConfigurationError("unknown reconfiguration case");
}

const char* to_string(ReconfigurationCase c) {
    switch (c) {
        case ReconfigurationCase::ChainToGripper: return "chain_to_gripper";
        case ReconfigurationCase::ChainToSquare: return "chain_to_square";
        case ReconfigurationCase::Disassembly: return "disassembly";
    }
    return "unknown";
}

double magnetic_moment(const MagnetSpec& spec) {
    spec.validate();
    return spec.moment_magnitude();
}

Eigen::Vector3d torque_on_dipole(const Eigen::Vector3d& moment, const Eigen::Vector3d& field) {
    return moment.cross(field);
}

double torque_on_dipole(const Eigen::Vector2d& moment, const Eigen::Vector2d& field) {
    return moment.x() * field.y() - moment.y() * field.x();
}

Eigen::Vector3d force_on_dipole(const Eigen::Vector3d& moment, const Eigen::Matrix3d& gradient) {
    return gradient * moment;
}

Eigen::Vector2d force_on_dipole(const Eigen::Vector2d& moment, const Eigen::Matrix2d& gradient) {
    return gradient * moment;
}

Eigen::Vector3d dipole_field(const Dipole& source, const Eigen::Vector3d& at) {
    const Eigen::Vector3d r = at - source.position;
    const double dist = r.norm();
    if (!(dist > 0.0)) {
        throw SingularityError("dipole field evaluated at the source position");
    }
    const Eigen::Vector3d r_hat = r / dist;
    const double m_dot_r = source.moment.dot(r_hat);
    return kMu0Over4Pi / (dist * dist * dist) * (3.0 * m_dot_r * r_hat - source.moment);
}

double dipole_pair_energy(const Dipole& a, const Dipole& b) {
    return -b.moment.dot(dipole_field(a, b.position));
}

Eigen::Vector3d dipole_pair_force(const Dipole& a, const Dipole& b) {
    const Eigen::Vector3d r = b.position - a.position;
    const double dist = r.norm();
    if (!(dist > 0.0)) {
        throw SingularityError("dipole pair force at zero separation");
    }
    const Eigen::Vector3d r_hat = r / dist;
    const double ma_r = a.moment.dot(r_hat);
    const double mb_r = b.moment.dot(r_hat);
    const double ma_mb = a.moment.dot(b.moment);
    const double pre = 3.0 * kMu0Over4Pi / std::pow(dist, 4);
    return pre * (ma_r * b.moment + mb_r * a.moment + ma_mb * r_hat - 5.0 * ma_r * mb_r * r_hat);
}

PairInteraction pair_interaction(double m1, double m2, double separation, double theta) {
    if (!(separation > 0.0)) {
        throw SingularityError("pair interaction requires a positive separation");
    }
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const double r2 = separation * separation;
    const double pre = 3.0 * kMu0Over4Pi * m1 * m2 / (r2 * r2);
    PairInteraction out;
    out.separation = separation;
    out.theta = theta;
    out.radial_force = pre * (1.0 - 3.0 * c * c);
    out.tangential_force = pre * (2.0 * c * s);
    out.energy = kMu0Over4Pi * m1 * m2 / (r2 * separation) * (1.0 - 3.0 * c * c);
    return out;
}

double required_field(double separation, const MagnetSpec& spec) {
    if (!(separation > 0.0) || !std::isfinite(separation)) {
        std::ostringstream os;
        os << "separation must be positive, got " << separation;
        throw InvalidConfigurationError(os.str());
    }
    const double m = magnetic_moment(spec);
    return kMu0Over4Pi * m / (separation * separation * separation);
}

double required_field(ReconfigurationCase c, const MagnetSpec& spec) {
    return required_field(case_separation(c), spec);
}

}  // namespace magbot
