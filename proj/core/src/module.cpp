#include "magbot/module.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "magbot/errors.hpp"

namespace magbot {

const char* to_string(ModuleType t) {
    switch (t) {
        case ModuleType::Free: return "free";
        case ModuleType::Fixed: return "fixed";
        case ModuleType::Gripper: return "gripper";
    }
    return "?";
}

ModuleType module_type_from_string(std::string_view s) {
    if (s == "free") return ModuleType::Free;
    if (s == "fixed") return ModuleType::Fixed;
    if (s == "gripper") return ModuleType::Gripper;
    throw InvalidSpecError("unknown module type '" + std::string(s) + "'");
}

double cavity_diameter(ModuleType t) {
    switch (t) {
        case ModuleType::Free: return 2.4e-3;
        case ModuleType::Fixed: return 1.2e-3;
        case ModuleType::Gripper: return 2.0e-3;
    }
    return 0.0;
}

double max_magnet_offset(ModuleType t, const MagnetSpec& magnet) {
    return std::max(0.0, cavity_diameter(t) / 2.0 - magnet.radius);
}

bool has_loose_magnet(ModuleType t) { return t != ModuleType::Fixed; }

const char* to_string(GaitMode m) { return m == GaitMode::H ? "H" : "H+M"; }

GaitMode gait_mode_from_string(std::string_view s) {
    if (s == "H") return GaitMode::H;
    if (s == "H+M" || s == "HM") return GaitMode::HM;
    throw InvalidSpecError("unknown gait mode '" + std::string(s) + "'");
}

Dipole ModuleState::dipole() const {
    const Eigen::Vector2d p = magnet_position();
    return Dipole{Eigen::Vector3d(p.x(), p.y(), 0.0), moment};
}

std::size_t World::index_of(int id) const {
    for (std::size_t i = 0; i < modules.size(); ++i)
        if (modules[i].id == id) return i;
    throw InvalidSpecError("no module with id " + std::to_string(id));
}

std::vector<std::pair<int, int>> World::bond_list() const {
    std::vector<std::pair<int, int>> out;
    for (const auto& m : modules)
        for (int other : m.bonds)
            if (m.id < other) out.emplace_back(m.id, other);
    std::sort(out.begin(), out.end());
    return out;
}

void World::add_bond(int a, int b) {
    if (a == b) throw InvalidSpecError("a module cannot bond to itself");
    module(a).bonds.insert(b);
    module(b).bonds.insert(a);
}

void World::remove_bond(int a, int b) {
    module(a).bonds.erase(b);
    module(b).bonds.erase(a);
}

double footprint_overlap(const ModuleState& a, const ModuleState& b) {
    const Eigen::Vector2d d = (b.position - a.position).cwiseAbs();
    return std::min(kModuleEdge - d.x(), kModuleEdge - d.y());
}

double max_overlap(const World& w) {
    double worst = 0.0;
    for (std::size_t i = 0; i < w.modules.size(); ++i)
        for (std::size_t j = i + 1; j < w.modules.size(); ++j)
            worst = std::max(worst, footprint_overlap(w.modules[i], w.modules[j]));
    return worst;
}

std::vector<std::vector<std::size_t>> bond_components(const World& w) {
    const std::size_t n = w.modules.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t i = 0; i < n; ++i)
        for (int other : w.modules[i].bonds) {
            const std::size_t a = find(i), b = find(w.index_of(other));
            if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
    std::vector<std::vector<std::size_t>> groups;
    std::vector<long> slot(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = find(i);
        if (slot[r] < 0) {
            slot[r] = static_cast<long>(groups.size());
            groups.emplace_back();
        }
        groups[static_cast<std::size_t>(slot[r])].push_back(i);
    }
    return groups;
}

Eigen::Vector3d in_plane_moment(double angle, double magnitude) {
    return {magnitude * std::cos(angle), magnitude * std::sin(angle), 0.0};
}

Eigen::Vector3d resting_moment(double magnitude) { return {0.0, 0.0, magnitude}; }

}  // namespace magbot
