#pragma once

#include <vector>

#include <Eigen/Dense>

#include "magbot/coil.hpp"
#include "magbot/module.hpp"
#include "magbot/sim.hpp"

namespace magbot {

/// One constant stretch of coil output, described in field terms.
struct FieldSegment {
    double duration = 0.0;                                  // s
    Eigen::Vector2d uniform = Eigen::Vector2d::Zero();     // T
    Eigen::Vector2d gradients = Eigen::Vector2d::Zero();   // (G_x, G_y), T/m
    bool operator==(const FieldSegment&) const = default;
};

/// Piecewise-constant field schedule that compiles to coil currents.
class FieldProgram {
public:
    FieldProgram& hold(const Eigen::Vector2d& uniform, double duration,
                       const Eigen::Vector2d& gradients = Eigen::Vector2d::Zero());
    /// Uniform field of constant magnitude swept from one angle to another in `steps` increments.
    FieldProgram& rotate(double magnitude, double from_angle, double to_angle, double duration, int steps = 50);
    /// Uniform field interpolated linearly between two values in `steps` increments.
    FieldProgram& ramp(const Eigen::Vector2d& from, const Eigen::Vector2d& to, double duration, int steps = 25);
    FieldProgram& append(const FieldProgram& other);

    const std::vector<FieldSegment>& segments() const { return segments_; }
    double duration() const;
    /// Uniform parts scaled by `gain` and rotated by `angle`; gradients scaled by `gain`.
    FieldProgram perturbed(double gain, double angle) const;
    /// Throws InfeasibleTargetError when a segment exceeds the coil limits.
    FieldSequence compile(const CoilSystem& coils) const;

private:
    std::vector<FieldSegment> segments_;
};

/// Two gripper modules around a free module, bonded head-to-tail along x.
/// Magnet separations 2.3 mm (1-2) and 3.2 mm (2-3).
World gripper_chain();
/// Perpendicular pulse, swing to -x without lowering the perpendicular part
/// until the field is diagonal, hold, release. Folds module 3 onto module 2
/// when the pulse tears the 3.2 mm bond.
FieldProgram gripper_program(double pulse);

/// Four free modules bonded along x. Magnet separations 2.64 mm (1-2),
/// 2.28 mm (2-3) and 3.0 mm (3-4); folded pairs sit 2.3 mm apart.
World square_chain();
/// Gated fold of module 4 onto module 3, then a fixed `second_pulse` fold of
/// module 1 onto module 2 that closes the square.
FieldProgram square_program(double pulse, double second_pulse = 3.0e-3);

/// Two free modules whose magnets sit 1.6 mm apart.
World disassembly_chain();
FieldProgram disassembly_program(double pulse, double duration = 0.2);

/// Two unbonded free modules `separation` apart (centre to centre) on the x axis,
/// moments co-aligned along x.
World assembly_pair(double separation);
/// Optional uniform assist field along x held for `duration`.
FieldProgram assembly_program(double assist_field, double duration);

}  // namespace magbot
