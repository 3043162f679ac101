#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "magbot/compass.hpp"

namespace magbot {

struct Cell {
    int x = 0;
    int y = 0;
    auto operator<=>(const Cell&) const = default;
};

struct Polygon {
    std::vector<Eigen::Vector2d> vertices;  // m, any winding

    static Polygon rectangle(double x0, double y0, double x1, double y1);
    bool contains(const Eigen::Vector2d& p) const;
    /// Euclidean distance to the polygon (0 inside).
    double distance(const Eigen::Vector2d& p) const;
};

/// Square workspace centred on the origin with optional obstacles.
struct Workspace {
    double half_extent = 17.5e-3;
    std::vector<Polygon> obstacles;
};

/// 35 mm serpentine maze with three 8 mm corridors joined by 8 mm gaps at
/// alternating ends. Start lower-left, goal upper-right.
Workspace reference_maze();
Eigen::Vector2d reference_maze_start();
Eigen::Vector2d reference_maze_goal();

/// Binary map; cell (0,0) has its lower-left corner at `origin`.
class OccupancyGrid {
public:
    OccupancyGrid() = default;
    OccupancyGrid(int width, int height, double resolution, Eigen::Vector2d origin);

    int width() const { return width_; }
    int height() const { return height_; }
    double resolution() const { return resolution_; }
    const Eigen::Vector2d& origin() const { return origin_; }
    double inflation_radius() const { return inflation_; }
    void set_inflation_radius(double r) { inflation_ = r; }

    bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }
    /// Out-of-bounds cells count as occupied.
    bool occupied(Cell c) const { return !in_bounds(c) || cells_[index(c)] != 0; }
    bool free(Cell c) const { return !occupied(c); }
    void set(Cell c, bool occ) { cells_[index(c)] = occ ? 1 : 0; }
    std::size_t occupied_count() const;

    Eigen::Vector2d center(Cell c) const;
    Cell cell_at(const Eigen::Vector2d& p) const;

    bool operator==(const OccupancyGrid&) const = default;

private:
    std::size_t index(Cell c) const { return static_cast<std::size_t>(c.y) * width_ + c.x; }

    int width_ = 0;
    int height_ = 0;
    double resolution_ = 0.5e-3;
    Eigen::Vector2d origin_ = Eigen::Vector2d::Zero();
    double inflation_ = 0.0;
    std::vector<std::uint8_t> cells_;
};

/// Cells whose centre lies inside an obstacle; no inflation.
OccupancyGrid rasterize(const Workspace& ws, double resolution);

/// Rasterises obstacles and the workspace boundary, then dilates by
/// `inflation`. Throws NoFreeSpaceError if nothing remains free.
OccupancyGrid build_grid(const Workspace& ws, double resolution, double inflation);

/// Default inflation: cube half-diagonal plus a 0.5 mm margin.
double default_inflation(double cube_edge = 3e-3);

/// Grayscale mask I/O (PGM, P2 or P5). Non-zero pixels are occupied; row 0 is
/// the top of the image (largest y).
OccupancyGrid grid_from_pgm(const std::filesystem::path& path, double resolution, Eigen::Vector2d origin);
void write_pgm(const OccupancyGrid& grid, const std::filesystem::path& path);

/// Path cost as an exact count of cardinal and diagonal moves.
struct PathCost {
    int cardinal = 0;
    int diagonal = 0;
    double value() const;
    bool operator==(const PathCost&) const = default;
};

struct NavPlan {
    std::vector<Cell> waypoints;
    std::vector<Compass> moves;
    PathCost cost;
};

struct PlannerOptions {
    bool allow_diagonal = true;
};

/// Octile (or Manhattan when diagonals are disabled) distance.
double octile_heuristic(Cell a, Cell b, bool allow_diagonal = true);

/// A* over free cells. Diagonal moves need both orthogonal neighbours free.
/// Throws InvalidEndpointError / UnreachableGoalError.
NavPlan plan(const OccupancyGrid& grid, Cell start, Cell goal, const PlannerOptions& opts = {});

/// True if every cell the straight segment between two cell centres touches
/// is free.
bool line_of_sight(const OccupancyGrid& grid, Cell a, Cell b);

/// Converts a cell path into metric waypoints: line-of-sight shortcuts, then
/// segments split so consecutive waypoints are at most `max_spacing` apart.
/// The start cell is not included; the last waypoint is the goal centre.
std::vector<Eigen::Vector2d> waypoint_positions(const OccupancyGrid& grid, const NavPlan& plan,
                                                double max_spacing);

}  // namespace magbot
