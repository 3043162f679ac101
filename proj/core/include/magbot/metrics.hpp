#pragma once

#include <vector>

#include <Eigen/Dense>

namespace magbot {

/// Displacement of a sampled trajectory, in the trajectory's length unit.
struct DisplacementMetrics {
    double euclidean = 0.0;    // |end - start|
    double manhattan = 0.0;    // sum over samples of |dx| + |dy|
    double endpoint_l1 = 0.0;  // |end - start| in the L1 norm
    double x = 0.0;            // |end - start| along the commanded axis
    double y = 0.0;            // |end - start| across the commanded axis
    bool degenerate = false;   // fewer than two samples
};

/// `axis` is the commanded direction; it is normalised internally. Throws
/// InvalidSpecError for an empty trajectory or a zero axis.
DisplacementMetrics displacement_metrics(const std::vector<Eigen::Vector2d>& trajectory,
                                         const Eigen::Vector2d& axis = Eigen::Vector2d::UnitX());

}  // namespace magbot
