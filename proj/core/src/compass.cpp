#include "magbot/compass.hpp"

#include <cmath>

#include "magbot/errors.hpp"
#include "magbot/magnetics.hpp"

namespace magbot {

double compass_angle(Compass c) { return static_cast<int>(c) * kPi / 4.0; }

Eigen::Vector2d compass_unit(Compass c) {
    return Eigen::Vector2d(compass_dx(c), compass_dy(c)).normalized();
}

Compass compass_from_delta(int dx, int dy) {
    for (Compass c : kAllCompass) {
        if (compass_dx(c) == dx && compass_dy(c) == dy) return c;
    }
    throw InvalidDirectionError("not an 8-neighbour step");
}

Compass nearest_compass(double angle) {
    const double sector = angle / (kPi / 4.0);
    double k = std::floor(sector);
    const double frac = sector - k;
    // Exactly half-way: take the clockwise (lower-angle) neighbour.
    if (frac > 0.5) k += 1.0;
    int idx = static_cast<int>(k) % 8;
    if (idx < 0) idx += 8;
    return static_cast<Compass>(idx);
}

const char* to_string(Compass c) {
    constexpr std::array<const char*, 8> names{"E", "NE", "N", "NW", "W", "SW", "S", "SE"};
    return names[static_cast<int>(c)];
}

std::optional<Compass> compass_from_string(std::string_view s) {
    for (Compass c : kAllCompass) {
        if (s == to_string(c)) return c;
    }
    return std::nullopt;
}

std::optional<Compass> compass_from_index(int index) {
    if (index < 0 || index > 7) return std::nullopt;
    return static_cast<Compass>(index);
}

}  // namespace magbot
