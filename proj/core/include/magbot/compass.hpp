#pragma once

#include <array>
#include <optional>
#include <string_view>

#include <Eigen/Dense>

namespace magbot {

/// Eight planar move directions, counter-clockwise from East.
enum class Compass { E = 0, NE, N, NW, W, SW, S, SE };

inline constexpr std::array<Compass, 8> kAllCompass{Compass::E,  Compass::NE, Compass::N,  Compass::NW,
                                                    Compass::W,  Compass::SW, Compass::S,  Compass::SE};

inline constexpr int compass_dx(Compass c) {
    constexpr std::array<int, 8> dx{1, 1, 0, -1, -1, -1, 0, 1};
    return dx[static_cast<int>(c)];
}
inline constexpr int compass_dy(Compass c) {
    constexpr std::array<int, 8> dy{0, 1, 1, 1, 0, -1, -1, -1};
    return dy[static_cast<int>(c)];
}
inline constexpr bool is_diagonal(Compass c) { return static_cast<int>(c) % 2 == 1; }

/// Heading of the direction in radians.
double compass_angle(Compass c);
/// Unit vector along the direction.
Eigen::Vector2d compass_unit(Compass c);
Compass compass_from_delta(int dx, int dy);
/// Nearest of the eight directions; exact ties resolve clockwise.
Compass nearest_compass(double angle);
const char* to_string(Compass c);
std::optional<Compass> compass_from_string(std::string_view s);
/// Validates an integer code (0..7) received from outside.
std::optional<Compass> compass_from_index(int index);

}  // namespace magbot
