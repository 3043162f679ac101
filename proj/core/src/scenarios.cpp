#include "magbot/scenarios.hpp"

#include <cmath>

#include "magbot/errors.hpp"

namespace magbot {

namespace {

ModuleState make_module(int id, ModuleType type, double x, double y, Eigen::Vector2d offset, double moment_angle) {
    ModuleState m;
    m.id = id;
    m.type = type;
    m.position = {x, y};
    m.magnet_offset = std::move(offset);
    m.moment = in_plane_moment(moment_angle);
    return m;
}

/// Break pulse across the chain, swing the field to -x so the freed module
/// rounds the corner, and hold while it seats antiparallel against its
/// neighbour. The cross-chain component stays at the pulse value until the
/// field is diagonal and never exceeds it.
FieldProgram fold(double magnitude, double side) {
    const Eigen::Vector2d across(0.0, side * magnitude);
    const Eigen::Vector2d back(-magnitude, 0.0);
    FieldProgram p;
    p.hold(across, 0.2);
    p.ramp(across, across + back, 0.25);
    p.ramp(across + back, back, 0.25);
    p.hold(back, 2.0);
    return p;
}

}  // namespace

FieldProgram& FieldProgram::hold(const Eigen::Vector2d& uniform, double duration, const Eigen::Vector2d& gradients) {
    if (!(duration > 0.0)) throw InvalidSpecError("segment duration must be positive");
    segments_.push_back({duration, uniform, gradients});
    return *this;
}

FieldProgram& FieldProgram::rotate(double magnitude, double from_angle, double to_angle, double duration, int steps) {
    if (steps < 1) throw InvalidSpecError("a sweep needs at least one step");
    if (!(duration > 0.0)) throw InvalidSpecError("segment duration must be positive");
    for (int k = 1; k <= steps; ++k) {
        const double a = from_angle + (to_angle - from_angle) * k / steps;
        segments_.push_back({duration / steps, magnitude * Eigen::Vector2d(std::cos(a), std::sin(a)),
                             Eigen::Vector2d::Zero()});
    }
    return *this;
}

FieldProgram& FieldProgram::ramp(const Eigen::Vector2d& from, const Eigen::Vector2d& to, double duration, int steps) {
    if (steps < 1) throw InvalidSpecError("a ramp needs at least one step");
    if (!(duration > 0.0)) throw InvalidSpecError("segment duration must be positive");
    for (int k = 1; k <= steps; ++k) {
        const double s = static_cast<double>(k) / steps;
        segments_.push_back({duration / steps, (1.0 - s) * from + s * to, Eigen::Vector2d::Zero()});
    }
    return *this;
}

FieldProgram& FieldProgram::append(const FieldProgram& other) {
    segments_.insert(segments_.end(), other.segments_.begin(), other.segments_.end());
    return *this;
}

double FieldProgram::duration() const {
    double t = 0.0;
    for (const auto& s : segments_) t += s.duration;
    return t;
}

FieldProgram FieldProgram::perturbed(double gain, double angle) const {
    FieldProgram out;
    const Eigen::Rotation2Dd rot(angle);
    for (const auto& s : segments_) out.segments_.push_back({s.duration, gain * (rot * s.uniform), gain * s.gradients});
    return out;
}

FieldSequence FieldProgram::compile(const CoilSystem& coils) const {
    FieldSequence seq;
    double t = 0.0;
    for (const auto& s : segments_) {
        seq.commands.push_back(coils.currents_for(s.uniform, s.gradients, t));
        t += s.duration;
    }
    seq.end_time = t;
    return seq;
}

World gripper_chain() {
    World w;
    w.modules.push_back(make_module(1, ModuleType::Gripper, -3e-3, 0.0, {0.5e-3, 0.0}, 0.0));
    w.modules.push_back(make_module(2, ModuleType::Free, 0.0, 0.0, {-0.2e-3, 0.0}, 0.0));
    w.modules.push_back(make_module(3, ModuleType::Gripper, 3e-3, 0.0, {0.0, 0.0}, 0.0));
    w.add_bond(1, 2);
    w.add_bond(2, 3);
    return w;
}

FieldProgram gripper_program(double pulse) {
    FieldProgram p = fold(pulse, 1.0);
    p.hold(Eigen::Vector2d::Zero(), 0.3);
    return p;
}

World square_chain() {
    // Modules 3 and 4 carry opposite sideways magnet offsets so that the 3-4
    // bond is 3.0 mm long in the chain but only 2.3 mm once 4 sits on top of 3.
    const double dy = 0.35e-3;
    const double dx = std::sqrt(9e-6 - 4.0 * dy * dy) - 3e-3;
    World w;
    w.modules.push_back(make_module(1, ModuleType::Free, -4.5e-3, 0.0, {0.66e-3, 0.0}, 0.0));
    w.modules.push_back(make_module(2, ModuleType::Free, -1.5e-3, 0.0, {0.3e-3, 0.0}, 0.0));
    w.modules.push_back(make_module(3, ModuleType::Free, 1.5e-3, 0.0, {-0.45e-3, dy}, 0.0));
    w.modules.push_back(make_module(4, ModuleType::Free, 4.5e-3, 0.0, {-0.45e-3 + dx, -dy}, 0.0));
    w.add_bond(1, 2);
    w.add_bond(2, 3);
    w.add_bond(3, 4);
    return w;
}

FieldProgram square_program(double pulse, double second_pulse) {
    FieldProgram p = fold(pulse, 1.0);
    p.append(fold(second_pulse, -1.0));
    p.hold(Eigen::Vector2d::Zero(), 0.3);
    return p;
}

World disassembly_chain() {
    World w;
    w.modules.push_back(make_module(1, ModuleType::Free, -1.5e-3, 0.0, {0.7e-3, 0.0}, 0.0));
    w.modules.push_back(make_module(2, ModuleType::Free, 1.5e-3, 0.0, {-0.7e-3, 0.0}, 0.0));
    w.add_bond(1, 2);
    return w;
}

FieldProgram disassembly_program(double pulse, double duration) {
    FieldProgram p;
    p.hold(Eigen::Vector2d(0.0, pulse), duration);
    return p;
}

World assembly_pair(double separation) {
    if (!(separation >= kModuleEdge)) throw InvalidSpecError("modules would overlap at this separation");
    World w;
    w.modules.push_back(make_module(1, ModuleType::Free, -separation / 2.0, 0.0, Eigen::Vector2d::Zero(), 0.0));
    w.modules.push_back(make_module(2, ModuleType::Free, separation / 2.0, 0.0, Eigen::Vector2d::Zero(), 0.0));
    return w;
}

FieldProgram assembly_program(double assist_field, double duration) {
    FieldProgram p;
    p.hold(Eigen::Vector2d(assist_field, 0.0), duration);
    return p;
}

}  // namespace magbot
