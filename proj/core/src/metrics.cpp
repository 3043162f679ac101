#include "magbot/metrics.hpp"

#include <cmath>

#include "magbot/errors.hpp"

namespace magbot {

DisplacementMetrics displacement_metrics(const std::vector<Eigen::Vector2d>& trajectory, const Eigen::Vector2d& axis) {
    if (trajectory.empty()) throw InvalidSpecError("trajectory is empty");
    if (!(axis.norm() > 0.0)) throw InvalidSpecError("commanded axis must be non-zero");
    DisplacementMetrics m;
    if (trajectory.size() < 2) {
        m.degenerate = true;
        return m;
    }
    const Eigen::Vector2d u = axis.normalized();
    const Eigen::Vector2d v(-u.y(), u.x());
    const Eigen::Vector2d d = trajectory.back() - trajectory.front();
    m.euclidean = d.norm();
    m.endpoint_l1 = d.cwiseAbs().sum();
    for (std::size_t i = 1; i < trajectory.size(); ++i) m.manhattan += (trajectory[i] - trajectory[i - 1]).cwiseAbs().sum();
    m.x = std::abs(d.dot(u));
    m.y = std::abs(d.dot(v));
    return m;
}

}  // namespace magbot
