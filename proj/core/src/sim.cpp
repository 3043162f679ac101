#include "magbot/sim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "magbot/errors.hpp"

namespace magbot {

namespace {

Eigen::Vector3d planar(const Eigen::Vector3d& v) { return {v.x(), v.y(), 0.0}; }

/// Magnitude of the part of `field` perpendicular to `moment`.
double perpendicular_part(const Eigen::Vector3d& field, const Eigen::Vector3d& moment) {
    const double n = moment.norm();
    if (n == 0.0) return field.norm();
    const Eigen::Vector3d u = moment / n;
    return (field - field.dot(u) * u).norm();
}

double chebyshev(const ModuleState& a, const ModuleState& b) {
    return (b.position - a.position).cwiseAbs().maxCoeff();
}

Eigen::Vector3d pair_force(const ModuleState& source, const ModuleState& target) {
    const Eigen::Vector3d f = dipole_pair_force(source.dipole(), target.dipole());
    if (!f.allFinite())
        throw SimulationDivergedError("non-finite interaction force between modules " + std::to_string(source.id) +
                                          " and " + std::to_string(target.id),
                                      source.id, target.id);
    return f;
}

void check_separated(const ModuleState& a, const ModuleState& b) {
    if ((a.magnet_position() - b.magnet_position()).norm() < 1e-9)
        throw SimulationDivergedError(
            "magnets of modules " + std::to_string(a.id) + " and " + std::to_string(b.id) + " coincide", a.id, b.id);
}

std::vector<std::size_t> component_labels(const World& w) {
    std::vector<std::size_t> label(w.modules.size());
    const auto comps = bond_components(w);
    for (std::size_t c = 0; c < comps.size(); ++c)
        for (std::size_t i : comps[c]) label[i] = c;
    return label;
}

/// Shift that keeps every member footprint inside the workspace.
Eigen::Vector2d wall_correction(const World& w, const std::vector<std::size_t>& members) {
    const double lim = w.half_extent - kModuleEdge / 2.0;
    Eigen::Vector2d lo = Eigen::Vector2d::Constant(1e300), hi = Eigen::Vector2d::Constant(-1e300);
    for (std::size_t i : members) {
        lo = lo.cwiseMin(w.modules[i].position);
        hi = hi.cwiseMax(w.modules[i].position);
    }
    Eigen::Vector2d shift = Eigen::Vector2d::Zero();
    for (int k = 0; k < 2; ++k) {
        if (hi[k] > lim) shift[k] = lim - hi[k];
        if (lo[k] + shift[k] < -lim) shift[k] = -lim - lo[k];
    }
    return shift;
}

void translate(World& w, const std::vector<std::size_t>& members, const Eigen::Vector2d& shift) {
    for (std::size_t i : members) w.modules[i].position += shift;
}

double angle_between(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return std::atan2(a.x() * b.y() - a.y() * b.x(), a.dot(b));
}

}  // namespace

void SimConfig::validate() const {
    if (!(timestep > 0.0)) throw InvalidSpecError("timestep must be positive");
    if (!(drag > 0.0)) throw InvalidSpecError("drag coefficient must be positive");
    if (!(static_friction >= 0.0)) throw InvalidSpecError("static friction must be non-negative");
    if (!(bond_form_factor >= 1.0)) throw InvalidSpecError("bond-form factor must be at least 1");
    if (!(cutoff >= bond_form_factor * kModuleEdge))
        throw InvalidSpecError("interaction cutoff must be at least the bond-form distance");
    if (!(bond_slack >= 0.0) || !(contact_tolerance > 0.0)) throw InvalidSpecError("bad contact parameters");
    if (!(stall_probability >= 0.0 && stall_probability <= 1.0))
        throw InvalidSpecError("stall probability must lie in [0, 1]");
    if (!(sample_interval > 0.0)) throw InvalidSpecError("sample interval must be positive");
    for (const GaitParams* g : {&fixed_h, &fixed_hm, &free_gait})
        if (!(g->step_mean >= 0.0 && g->step_sigma >= 0.0 && g->gain_sigma >= 0.0 && g->lateral_sigma >= 0.0 &&
              g->heading_sigma >= 0.0))
            throw InvalidSpecError("gait parameters must be non-negative");
    magnet.validate();
}

const GaitParams& SimConfig::gait(ModuleType type, GaitMode mode) const {
    if (type == ModuleType::Fixed) return mode == GaitMode::H ? fixed_h : fixed_hm;
    return free_gait;
}

const char* to_string(SimEventKind k) {
    switch (k) {
        case SimEventKind::BondFormed: return "bond_formed";
        case SimEventKind::BondBroken: return "bond_broken";
        case SimEventKind::AssemblyComplete: return "assembly_complete";
        case SimEventKind::ReconfigurationComplete: return "reconfiguration_complete";
        case SimEventKind::Stall: return "stall";
        case SimEventKind::GoalReached: return "goal_reached";
    }
    return "?";
}

SimEventKind sim_event_kind_from_string(const std::string& s) {
    for (auto k : {SimEventKind::BondFormed, SimEventKind::BondBroken, SimEventKind::AssemblyComplete,
                   SimEventKind::ReconfigurationComplete, SimEventKind::Stall, SimEventKind::GoalReached})
        if (s == to_string(k)) return k;
    throw InvalidSpecError("unknown event kind '" + s + "'");
}

std::string Configuration::to_string() const {
    switch (kind) {
        case ConfigurationKind::Liquid: return "liquid";
        case ConfigurationKind::Chain: return "chain(" + std::to_string(size) + ")";
        case ConfigurationKind::Square: return "square";
        case ConfigurationKind::Gripper: return "gripper";
        case ConfigurationKind::Other: return "other";
    }
    return "other";
}

Configuration detect_configuration(const World& world, double tol) {
    std::vector<std::vector<std::size_t>> groups;
    for (auto& g : bond_components(world))
        if (g.size() >= 2) groups.push_back(std::move(g));
    if (groups.empty()) return {ConfigurationKind::Liquid, 0};
    if (groups.size() > 1) return {ConfigurationKind::Other, 0};
    const auto& g = groups.front();
    const int k = static_cast<int>(g.size());
    std::size_t edges = 0;
    int max_degree = 0;
    for (std::size_t i : g) {
        edges += world.modules[i].bonds.size();
        max_degree = std::max(max_degree, static_cast<int>(world.modules[i].bonds.size()));
    }
    edges /= 2;
    const double right = kPi / 2.0;
    auto corner = [&](const ModuleState& at, int a, int b) {
        return std::abs(angle_between(world.module(a).position - at.position, world.module(b).position - at.position));
    };

    if (static_cast<int>(edges) == k - 1 && max_degree <= 2) {
        if (k == 2) return {ConfigurationKind::Chain, 2};
        bool straight = true;
        bool square_corner = true;
        for (std::size_t i : g) {
            const auto& m = world.modules[i];
            if (m.bonds.size() != 2) continue;
            const double a = corner(m, *m.bonds.begin(), *m.bonds.rbegin());
            straight = straight && std::abs(a - kPi) <= tol;
            square_corner = square_corner && std::abs(a - right) <= tol;
        }
        if (straight) return {ConfigurationKind::Chain, k};
        if (k == 3 && square_corner) return {ConfigurationKind::Gripper, 3};
        return {ConfigurationKind::Other, 0};
    }
    if (k == 4 && edges == 4 && max_degree == 2) {
        for (std::size_t i : g) {
            const auto& m = world.modules[i];
            if (m.bonds.size() != 2) return {ConfigurationKind::Other, 0};
            if (std::abs(corner(m, *m.bonds.begin(), *m.bonds.rbegin()) - right) > tol)
                return {ConfigurationKind::Other, 0};
        }
        return {ConfigurationKind::Square, 4};
    }
    return {ConfigurationKind::Other, 0};
}

double bond_hold_field(const ModuleState& a, const ModuleState& b, const MagnetSpec& magnet) {
    const double d = (a.magnet_position() - b.magnet_position()).norm();
    if (!(d > 0.0)) throw SingularityError("coincident magnets have no hold field");
    return kMu0Over4Pi * magnetic_moment(magnet) / (d * d * d);
}

Simulator::Simulator(SimConfig cfg, CoilSystem coils) : cfg_(std::move(cfg)), coils_(std::move(coils)) {
    cfg_.validate();
}

std::vector<SimEvent> Simulator::step(World& w, const CoilCommand& cmd) const {
    std::vector<SimEvent> events;
    const std::size_t n = w.modules.size();
    const double t_end = w.time + cfg_.timestep;
    const Configuration before = detect_configuration(w);
    const bool was_assembled = n >= 2 && bond_components(w).size() == 1;
    bool bonds_changed = false;

    std::vector<FieldSample> ext(n);
    for (std::size_t i = 0; i < n; ++i) ext[i] = coils_.field_in_plane(cmd, w.modules[i].magnet_position());
    auto ext_field = [&](std::size_t i) { return planar(ext[i].total); };
    auto breaking_field = [&](std::size_t i, std::size_t j) {
        return std::max(perpendicular_part(ext_field(i), w.modules[i].moment),
                        perpendicular_part(ext_field(j), w.modules[j].moment));
    };

    // Bonds tear when the pulse across either moment reaches the hold field, or
    // when the pair has been pulled apart.
    for (const auto& [a, b] : w.bond_list()) {
        const std::size_t ia = w.index_of(a), ib = w.index_of(b);
        const auto& ma = w.modules[ia];
        const auto& mb = w.modules[ib];
        check_separated(ma, mb);
        const double hold = bond_hold_field(ma, mb, cfg_.magnet);
        const bool torn = breaking_field(ia, ib) >= hold * (1.0 - cfg_.break_tolerance);
        const bool apart = chebyshev(ma, mb) > kModuleEdge + cfg_.bond_slack;
        if (torn || apart) {
            w.remove_bond(a, b);
            events.push_back({t_end, SimEventKind::BondBroken, {a, b}, {}});
            bonds_changed = true;
        }
    }

    // Loose magnets of unbonded modules snap to the local field (fast-relaxation
    // limit). A pulse stronger than the nearest neighbour's transverse field
    // takes over on its own; otherwise neighbours contribute.
    std::vector<Eigen::Vector3d> relaxed(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& mi = w.modules[i];
        relaxed[i] = mi.moment;
        if (mi.bonded() || !has_loose_magnet(mi.type)) continue;
        const Eigen::Vector3d b_ext = ext_field(i);
        Eigen::Vector3d neighbours = Eigen::Vector3d::Zero();
        double strongest = 0.0;
        const Eigen::Vector3d at(mi.magnet_position().x(), mi.magnet_position().y(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const auto& mj = w.modules[j];
            const double d = (mj.magnet_position() - mi.magnet_position()).norm();
            if (d > cfg_.cutoff) continue;
            check_separated(mi, mj);
            strongest = std::max(strongest, kMu0Over4Pi * mj.moment.norm() / (d * d * d));
            neighbours += planar(dipole_field(mj.dipole(), at));
        }
        Eigen::Vector3d target = b_ext;
        if (!(b_ext.norm() >= strongest)) target += neighbours;
        if (target.norm() > cfg_.relax_min_field) relaxed[i] = mi.moment.norm() * target.normalized();
    }
    for (std::size_t i = 0; i < n; ++i) w.modules[i].moment = relaxed[i];

    // Net force per rigid component: gradient pull plus interactions with
    // modules of other components (intra-component forces cancel).
    const auto comps = bond_components(w);
    const auto label = component_labels(w);
    std::vector<Eigen::Vector2d> force(comps.size(), Eigen::Vector2d::Zero());
    for (std::size_t i = 0; i < n; ++i) {
        const auto& mi = w.modules[i];
        const Eigen::Vector3d fg = force_on_dipole(mi.moment, ext[i].gradient);
        force[label[i]] += fg.head<2>();
        for (std::size_t j = 0; j < n; ++j) {
            if (label[j] == label[i]) continue;
            const auto& mj = w.modules[j];
            if ((mj.magnet_position() - mi.magnet_position()).norm() > cfg_.cutoff) continue;
            check_separated(mi, mj);
            force[label[i]] += pair_force(mj, mi).head<2>();
        }
    }
    for (std::size_t c = 0; c < comps.size(); ++c) {
        const Eigen::Vector2d f = force[c];
        if (!f.allFinite()) {
            const int id = w.modules[comps[c].front()].id;
            throw SimulationDivergedError("non-finite force on module " + std::to_string(id), id, id);
        }
        const double k = static_cast<double>(comps[c].size());
        const double excess = f.norm() - k * cfg_.static_friction;
        if (excess > 0.0) translate(w, comps[c], (excess / (k * cfg_.drag) * cfg_.timestep) * f.normalized());
        translate(w, comps[c], wall_correction(w, comps[c]));
    }

    // Contact constraints: project overlapping footprints apart along the axis
    // of least penetration, sharing the correction by component size.
    for (int iter = 0; iter < 200; ++iter) {
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                if (label[i] == label[j]) continue;
                const Eigen::Vector2d d = w.modules[j].position - w.modules[i].position;
                const double ox = kModuleEdge - std::abs(d.x());
                const double oy = kModuleEdge - std::abs(d.y());
                if (ox <= 0.0 || oy <= 0.0) continue;
                worst = std::max(worst, std::min(ox, oy));
                Eigen::Vector2d push = Eigen::Vector2d::Zero();
                if (ox < oy)
                    push.x() = d.x() >= 0.0 ? ox : -ox;
                else
                    push.y() = d.y() >= 0.0 ? oy : -oy;
                const auto& ci = comps[label[i]];
                const auto& cj = comps[label[j]];
                const double wi = static_cast<double>(cj.size()) / static_cast<double>(ci.size() + cj.size());
                translate(w, ci, -wi * push);
                translate(w, cj, (1.0 - wi) * push);
                translate(w, ci, wall_correction(w, ci));
                translate(w, cj, wall_correction(w, cj));
            }
        if (worst <= cfg_.contact_tolerance * 1e-3) break;
    }

    // Bond formation: face contact, attractive radial force, and no pulse
    // strong enough to tear the pair straight away.
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            auto& mi = w.modules[i];
            auto& mj = w.modules[j];
            if (mi.bonds.count(mj.id)) continue;
            const Eigen::Vector2d d = mj.position - mi.position;
            const Eigen::Vector2d ad = d.cwiseAbs();
            if (!(ad.maxCoeff() < cfg_.bond_form_factor * kModuleEdge && ad.minCoeff() < kModuleEdge / 2.0)) continue;
            check_separated(mi, mj);
            const Eigen::Vector2d r = mj.magnet_position() - mi.magnet_position();
            const double radial = pair_force(mi, mj).head<2>().dot(r.normalized());
            if (!(radial < 0.0)) continue;
            const auto now = bond_components(w);
            const auto lab = component_labels(w);
            Eigen::Vector2d seat = Eigen::Vector2d::Zero();
            const int axis = ad.x() >= ad.y() ? 0 : 1;
            seat[axis] = d[axis] >= 0.0 ? kModuleEdge : -kModuleEdge;
            if (lab[i] == lab[j]) seat = d;
            // The bond would hold at its seated geometry, so judge it there.
            ModuleState seated = mj;
            seated.position = mi.position + seat;
            if (breaking_field(i, j) >= bond_hold_field(mi, seated, cfg_.magnet) * (1.0 - cfg_.break_tolerance)) continue;

            // Seat the pair flush and centred, sharing the shift by component size.
            if (lab[i] != lab[j]) {
                const auto& ci = now[lab[i]];
                const auto& cj = now[lab[j]];
                const double wi = static_cast<double>(cj.size()) / static_cast<double>(ci.size() + cj.size());
                const Eigen::Vector2d gap = seat - d;
                translate(w, ci, -wi * gap);
                translate(w, cj, (1.0 - wi) * gap);
                bool clash = wall_correction(w, ci).norm() > 0.0 || wall_correction(w, cj).norm() > 0.0;
                for (std::size_t a = 0; a < n && !clash; ++a)
                    for (std::size_t b = a + 1; b < n && !clash; ++b)
                        if (lab[a] != lab[b] && !((lab[a] == lab[i] || lab[a] == lab[j]) && (lab[b] == lab[i] || lab[b] == lab[j])) &&
                            footprint_overlap(w.modules[a], w.modules[b]) > cfg_.contact_tolerance)
                            clash = true;
                if (clash) {
                    translate(w, ci, wi * gap);
                    translate(w, cj, -(1.0 - wi) * gap);
                }
            }
            w.add_bond(mi.id, mj.id);
            events.push_back({t_end, SimEventKind::BondFormed, {mi.id, mj.id}, {}});
            bonds_changed = true;
        }

    w.time = t_end;
    if (bonds_changed) {
        const Configuration after = detect_configuration(w);
        if (n >= 2 && !was_assembled && bond_components(w).size() == 1) {
            std::vector<int> ids;
            for (const auto& m : w.modules) ids.push_back(m.id);
            events.push_back({t_end, SimEventKind::AssemblyComplete, ids, {}});
        }
        if (after != before &&
            (after.kind == ConfigurationKind::Gripper || after.kind == ConfigurationKind::Square)) {
            std::vector<int> ids;
            for (const auto& m : w.modules)
                if (m.bonded()) ids.push_back(m.id);
            events.push_back({t_end, SimEventKind::ReconfigurationComplete, ids, after.to_string()});
        }
    }
    return events;
}

SequenceResult Simulator::run_sequence(World world, const FieldSequence& seq) const {
    SequenceResult out;
    const auto& cmds = seq.commands;
    for (std::size_t k = 1; k < cmds.size(); ++k)
        if (cmds[k].timestamp < cmds[k - 1].timestamp)
            throw InvalidSpecError("sequence timestamps must be nondecreasing");
    if (!cmds.empty() && seq.end_time < cmds.back().timestamp)
        throw InvalidSpecError("sequence ends before its last command");

    const long steps = cmds.empty() ? 0 : std::lround(seq.end_time / cfg_.timestep);
    const long sample_every = std::max(1L, std::lround(cfg_.sample_interval / cfg_.timestep));
    out.trajectory.push_back(world);
    std::size_t active = 0;
    const CoilCommand idle{};
    for (long s = 0; s < steps; ++s) {
        const double tau = static_cast<double>(s) * cfg_.timestep;
        while (active + 1 < cmds.size() && cmds[active + 1].timestamp <= tau + 1e-12) ++active;
        const CoilCommand& cmd = cmds[active].timestamp <= tau + 1e-12 ? cmds[active] : idle;
        auto ev = step(world, cmd);
        out.events.insert(out.events.end(), ev.begin(), ev.end());
        if ((s + 1) % sample_every == 0) out.trajectory.push_back(world);
    }
    if (steps % sample_every != 0) out.trajectory.push_back(world);
    out.final_world = std::move(world);
    return out;
}

void sample_gait_gain(ModuleState& module, const SimConfig& cfg, std::mt19937_64& rng) {
    for (GaitMode mode : {GaitMode::H, GaitMode::HM}) {
        const double sigma = cfg.gait(module.type, mode).gain_sigma;
        std::normal_distribution<double> g(1.0, sigma);
        module.gait_gain[static_cast<int>(mode)] = sigma > 0.0 ? std::max(0.0, g(rng)) : 1.0;
    }
}

GaitOutcome gait_cycle(ModuleState& module, const Eigen::Vector2d& direction, GaitMode mode, const SimConfig& cfg,
                       std::mt19937_64& rng, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw InvalidSpecError("cycle fraction must lie in (0, 1]");
    if (module.bonded()) throw CannotWalkError("module " + std::to_string(module.id) + " is bonded");
    if (module.type == ModuleType::Gripper)
        throw CannotWalkError("gripper module " + std::to_string(module.id) + " does not walk on its own");
    if (!direction.allFinite() || std::abs(direction.norm() - 1.0) > 1e-6)
        throw InvalidDirectionError("direction must be a unit vector");
    const Compass c = nearest_compass(std::atan2(direction.y(), direction.x()));
    if ((compass_unit(c) - direction).norm() > 1e-6) throw InvalidDirectionError("direction is not a compass direction");
    if (module.type == ModuleType::Free && is_diagonal(c))
        throw InvalidDirectionError("free modules move along the four cardinal directions only");

    GaitOutcome out;
    std::bernoulli_distribution stall(cfg.stall_probability);
    if (stall(rng)) {
        out.stalled = true;
        return out;
    }
    const GaitParams& g = cfg.gait(module.type, mode);
    std::normal_distribution<double> unit(0.0, 1.0);
    const double heading = g.heading_sigma * unit(rng);
    const double along = g.step_mean * module.gait_gain[static_cast<int>(mode)] + g.step_sigma * unit(rng);
    const double lateral = g.lateral_sigma * unit(rng);
    const Eigen::Rotation2Dd rot(heading);
    const Eigen::Vector2d u = rot * direction;
    const Eigen::Vector2d v(-u.y(), u.x());
    out.displacement = fraction * (along * u + lateral * v);
    module.position += out.displacement;
    if (module.type == ModuleType::Fixed) {
        module.orientation.parity ^= 1;
        module.orientation.last_move = c;
    }
    return out;
}

}  // namespace magbot
