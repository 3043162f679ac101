#include "magbot/planner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>

#include "magbot/errors.hpp"

namespace magbot {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

double segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    const Eigen::Vector2d ab = b - a;
    const double len2 = ab.squaredNorm();
    double t = len2 > 0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (a + t * ab - p).norm();
}

}  // namespace

Polygon Polygon::rectangle(double x0, double y0, double x1, double y1) {
    return Polygon{{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}};
}

bool Polygon::contains(const Eigen::Vector2d& p) const {
    bool inside = false;
    const std::size_t n = vertices.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const auto& a = vertices[i];
        const auto& b = vertices[j];
        if ((a.y() > p.y()) != (b.y() > p.y())) {
            const double x = (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x();
            if (p.x() < x) inside = !inside;
        }
    }
    return inside;
}

double Polygon::distance(const Eigen::Vector2d& p) const {
    if (vertices.size() >= 3 && contains(p)) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    const std::size_t n = vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
        best = std::min(best, segment_distance(p, vertices[i], vertices[(i + 1) % n]));
    }
    return best;
}

Workspace reference_maze() {
    // Corridors y in [-17.5,-9.5], [-4,4], [9.5,17.5] mm; 5.5 mm walls between.
    Workspace ws;
    ws.half_extent = 17.5e-3;
    ws.obstacles.push_back(Polygon::rectangle(-17.5e-3, -9.5e-3, 9.5e-3, -4.0e-3));
    ws.obstacles.push_back(Polygon::rectangle(-9.5e-3, 4.0e-3, 17.5e-3, 9.5e-3));
    return ws;
}

Eigen::Vector2d reference_maze_start() { return {-13.5e-3, -13.5e-3}; }
Eigen::Vector2d reference_maze_goal() { return {13.5e-3, 13.5e-3}; }

OccupancyGrid::OccupancyGrid(int width, int height, double resolution, Eigen::Vector2d origin)
    : width_(width), height_(height), resolution_(resolution), origin_(origin),
      cells_(static_cast<std::size_t>(width) * height, 0) {}

std::size_t OccupancyGrid::occupied_count() const {
    return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

Eigen::Vector2d OccupancyGrid::center(Cell c) const {
    return origin_ + resolution_ * Eigen::Vector2d(c.x + 0.5, c.y + 0.5);
}

Cell OccupancyGrid::cell_at(const Eigen::Vector2d& p) const {
    const Eigen::Vector2d q = (p - origin_) / resolution_;
    return {static_cast<int>(std::floor(q.x())), static_cast<int>(std::floor(q.y()))};
}

namespace {

OccupancyGrid empty_grid(const Workspace& ws, double resolution) {
    if (!(resolution > 0.0)) throw InvalidSpecError("grid resolution must be positive");
    const int n = static_cast<int>(std::ceil(2.0 * ws.half_extent / resolution - 1e-9));
    return OccupancyGrid(n, n, resolution, Eigen::Vector2d(-ws.half_extent, -ws.half_extent));
}

}  // namespace

OccupancyGrid rasterize(const Workspace& ws, double resolution) {
    OccupancyGrid grid = empty_grid(ws, resolution);
    for (int y = 0; y < grid.height(); ++y) {
        for (int x = 0; x < grid.width(); ++x) {
            const Eigen::Vector2d p = grid.center({x, y});
            for (const Polygon& poly : ws.obstacles) {
                if (poly.contains(p)) {
                    grid.set({x, y}, true);
                    break;
                }
            }
        }
    }
    return grid;
}

OccupancyGrid build_grid(const Workspace& ws, double resolution, double inflation) {
    OccupancyGrid grid = empty_grid(ws, resolution);
    grid.set_inflation_radius(inflation);
    const double tol = 1e-12;
    for (int y = 0; y < grid.height(); ++y) {
        for (int x = 0; x < grid.width(); ++x) {
            const Eigen::Vector2d p = grid.center({x, y});
            const double wall = ws.half_extent - std::max(std::abs(p.x()), std::abs(p.y()));
            bool occ = inflation > 0.0 && wall < inflation - tol;
            for (std::size_t i = 0; !occ && i < ws.obstacles.size(); ++i) {
                occ = ws.obstacles[i].distance(p) <= inflation + tol;
            }
            grid.set({x, y}, occ);
        }
    }
    if (grid.occupied_count() == static_cast<std::size_t>(grid.width()) * grid.height()) {
        throw NoFreeSpaceError("inflation leaves no free cell in the workspace");
    }
    return grid;
}

double default_inflation(double cube_edge) { return cube_edge * kSqrt2 / 2.0 + 0.5e-3; }

OccupancyGrid grid_from_pgm(const std::filesystem::path& path, double resolution, Eigen::Vector2d origin) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open mask " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P2" && magic != "P5") throw ParseError("mask is not a PGM (P2/P5) image");
    auto next_int = [&]() {
        int v = 0;
        while (true) {
            in >> std::ws;
            if (in.peek() == '#') {
                std::string skip;
                std::getline(in, skip);
                continue;
            }
            if (!(in >> v)) throw ParseError("truncated PGM header");
            return v;
        }
    };
    const int w = next_int();
    const int h = next_int();
    const int maxval = next_int();
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) throw ParseError("unsupported PGM dimensions");
    OccupancyGrid grid(w, h, resolution, origin);
    if (magic == "P5") {
        in.get();
        std::vector<char> buf(static_cast<std::size_t>(w) * h);
        if (!in.read(buf.data(), static_cast<std::streamsize>(buf.size()))) throw ParseError("truncated PGM data");
        for (int row = 0; row < h; ++row)
            for (int x = 0; x < w; ++x)
                grid.set({x, h - 1 - row}, buf[static_cast<std::size_t>(row) * w + x] != 0);
    } else {
        for (int row = 0; row < h; ++row)
            for (int x = 0; x < w; ++x) {
                int v = 0;
                if (!(in >> v)) throw ParseError("truncated PGM data");
                grid.set({x, h - 1 - row}, v != 0);
            }
    }
    return grid;
}

void write_pgm(const OccupancyGrid& grid, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << "P5\n" << grid.width() << ' ' << grid.height() << "\n255\n";
    for (int row = 0; row < grid.height(); ++row)
        for (int x = 0; x < grid.width(); ++x)
            out.put(grid.occupied({x, grid.height() - 1 - row}) ? static_cast<char>(255) : static_cast<char>(0));
}

double PathCost::value() const { return cardinal + kSqrt2 * diagonal; }

double octile_heuristic(Cell a, Cell b, bool allow_diagonal) {
    const int dx = std::abs(a.x - b.x);
    const int dy = std::abs(a.y - b.y);
    if (!allow_diagonal) return dx + dy;
    return std::max(dx, dy) - std::min(dx, dy) + kSqrt2 * std::min(dx, dy);
}

namespace {

bool move_allowed(const OccupancyGrid& g, Cell from, Compass m) {
    const Cell to{from.x + compass_dx(m), from.y + compass_dy(m)};
    if (g.occupied(to)) return false;
    if (is_diagonal(m)) {
        return g.free({from.x + compass_dx(m), from.y}) && g.free({from.x, from.y + compass_dy(m)});
    }
    return true;
}

}  // namespace

NavPlan plan(const OccupancyGrid& grid, Cell start, Cell goal, const PlannerOptions& opts) {
    if (grid.occupied(start)) throw InvalidEndpointError("start cell is occupied or outside the grid");
    if (grid.occupied(goal)) throw InvalidEndpointError("goal cell is occupied or outside the grid");

    const int w = grid.width();
    const std::size_t n = static_cast<std::size_t>(w) * grid.height();
    auto idx = [w](Cell c) { return static_cast<std::size_t>(c.y) * w + c.x; };

    std::vector<PathCost> g(n);
    std::vector<bool> seen(n, false);
    std::vector<bool> closed(n, false);
    std::vector<int> parent_move(n, -1);

    struct Entry {
        double f;
        double g;
        Cell cell;
    };
    // Lowest f first; among equal f the deeper node (higher g), then the
    // lexicographically smaller cell.
    auto worse = [](const Entry& a, const Entry& b) {
        if (a.f != b.f) return a.f > b.f;
        if (a.g != b.g) return a.g < b.g;
        return b.cell < a.cell;
    };
    std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> open(worse);

    seen[idx(start)] = true;
    open.push({octile_heuristic(start, goal, opts.allow_diagonal), 0.0, start});
    bool found = false;
    while (!open.empty()) {
        const Entry cur = open.top();
        open.pop();
        const std::size_t ci = idx(cur.cell);
        if (closed[ci]) continue;
        closed[ci] = true;
        if (cur.cell == goal) {
            found = true;
            break;
        }
        for (Compass m : kAllCompass) {
            if (is_diagonal(m) && !opts.allow_diagonal) continue;
            if (!move_allowed(grid, cur.cell, m)) continue;
            const Cell nb{cur.cell.x + compass_dx(m), cur.cell.y + compass_dy(m)};
            const std::size_t ni = idx(nb);
            if (closed[ni]) continue;
            PathCost cand = g[ci];
            (is_diagonal(m) ? cand.diagonal : cand.cardinal) += 1;
            if (!seen[ni] || cand.value() < g[ni].value()) {
                seen[ni] = true;
                g[ni] = cand;
                parent_move[ni] = static_cast<int>(m);
                open.push({cand.value() + octile_heuristic(nb, goal, opts.allow_diagonal), cand.value(), nb});
            }
        }
    }
    if (!found) throw UnreachableGoalError("no collision-free path to the goal");

    NavPlan out;
    out.cost = g[idx(goal)];
    for (Cell c = goal; !(c == start);) {
        out.waypoints.push_back(c);
        const Compass m = static_cast<Compass>(parent_move[idx(c)]);
        out.moves.push_back(m);
        c = {c.x - compass_dx(m), c.y - compass_dy(m)};
    }
    out.waypoints.push_back(start);
    std::reverse(out.waypoints.begin(), out.waypoints.end());
    std::reverse(out.moves.begin(), out.moves.end());
    return out;
}

bool line_of_sight(const OccupancyGrid& grid, Cell a, Cell b) {
    // Sample densely along the segment between cell centres and test the
    // cells under a small square footprint so corners are not clipped.
    const Eigen::Vector2d pa = grid.center(a);
    const Eigen::Vector2d pb = grid.center(b);
    const double len = (pb - pa).norm();
    const int steps = std::max(1, static_cast<int>(std::ceil(len / (grid.resolution() * 0.25))));
    const double h = grid.resolution() * 0.49;
    for (int i = 0; i <= steps; ++i) {
        const Eigen::Vector2d p = pa + (pb - pa) * (static_cast<double>(i) / steps);
        for (const Eigen::Vector2d& off : {Eigen::Vector2d(-h, -h), Eigen::Vector2d(h, -h), Eigen::Vector2d(-h, h),
                                          Eigen::Vector2d(h, h)}) {
            if (grid.occupied(grid.cell_at(p + off))) return false;
        }
    }
    return true;
}

std::vector<Eigen::Vector2d> waypoint_positions(const OccupancyGrid& grid, const NavPlan& plan,
                                                double max_spacing) {
    std::vector<Eigen::Vector2d> out;
    if (plan.waypoints.size() < 2) return out;
    std::vector<Cell> anchors{plan.waypoints.front()};
    std::size_t i = 0;
    while (i + 1 < plan.waypoints.size()) {
        std::size_t j = i + 1;
        for (std::size_t k = plan.waypoints.size() - 1; k > i + 1; --k) {
            if (line_of_sight(grid, plan.waypoints[i], plan.waypoints[k])) {
                j = k;
                break;
            }
        }
        anchors.push_back(plan.waypoints[j]);
        i = j;
    }
    for (std::size_t a = 1; a < anchors.size(); ++a) {
        const Eigen::Vector2d p0 = grid.center(anchors[a - 1]);
        const Eigen::Vector2d p1 = grid.center(anchors[a]);
        const int pieces = std::max(1, static_cast<int>(std::ceil((p1 - p0).norm() / max_spacing - 1e-9)));
        for (int s = 1; s <= pieces; ++s) out.push_back(p0 + (p1 - p0) * (static_cast<double>(s) / pieces));
    }
    return out;
}

}  // namespace magbot
