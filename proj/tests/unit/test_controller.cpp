#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "magbot/controller.hpp"
#include "magbot/planner.hpp"

using namespace magbot;

namespace {

const CoilSystem kCoils;

ModuleState fixed_at(Eigen::Vector2d p) {
    ModuleState m;
    m.id = 1;
    m.type = ModuleType::Fixed;
    m.position = p;
    return m;
}

// Noise-free gait and camera.
SimConfig ideal_config() {
    SimConfig cfg;
    cfg.fixed_h = {0.884e-3, 0.0, 0.0, 0.0, 0.0};
    cfg.fixed_hm = {3.144e-3, 0.0, 0.0, 0.0, 0.0};
    cfg.stall_probability = 0.0;
    return cfg;
}

SimulatedPlantOptions ideal_camera() {
    SimulatedPlantOptions o;
    o.observation_sigma = 0.0;
    return o;
}

std::vector<Eigen::Vector2d> corridor() {
    // The first step is a bare pulse, later ones full flips.
    std::vector<Eigen::Vector2d> w;
    double x = -10e-3 + 0.884e-3;
    w.emplace_back(x, 0.0);
    for (int i = 0; i < 4; ++i) w.emplace_back(x += 3.144e-3, 0.0);
    return w;
}

std::vector<Eigen::Vector2d> maze_waypoints() {
    const Workspace ws = reference_maze();
    const OccupancyGrid grid = build_grid(ws, 0.5e-3, default_inflation());
    const NavPlan p = plan(grid, grid.cell_at(reference_maze_start()), grid.cell_at(reference_maze_goal()));
    return waypoint_positions(grid, p, 3e-3);
}

bool allowed_transition(FsmPhase from, FsmPhase to) {
    if (from == FsmPhase::Idle) return to == FsmPhase::Pulsing;
    return to == FsmPhase::Stepping || to == FsmPhase::Ramping;
}

}  // namespace

TEST(ComputeDirection, Examples) {
    EXPECT_EQ(compute_direction({0, 0}, {5e-3, 0}, 1e-3), Compass::E);
    EXPECT_EQ(compute_direction({0, 0}, {3e-3, 3e-3}, 1e-3), Compass::NE);
    EXPECT_EQ(compute_direction({0, 0}, {5e-3, 2e-3}, 1e-3), Compass::E);
    EXPECT_EQ(compute_direction({0, 0}, {-4e-3, -4.1e-3}, 1e-3), Compass::SW);
    EXPECT_FALSE(compute_direction({0, 0}, {0.5e-3, 0.5e-3}, 1e-3).has_value());
}

TEST(ComputeDirection, TiesResolveClockwise) {
    const double a = 22.5 * kPi / 180.0;
    EXPECT_EQ(compute_direction({0, 0}, {std::cos(a) * 5e-3, std::sin(a) * 5e-3}, 1e-3), Compass::E);
    const double b = 112.5 * kPi / 180.0;
    EXPECT_EQ(compute_direction({0, 0}, {std::cos(b) * 5e-3, std::sin(b) * 5e-3}, 1e-3), Compass::N);
}

TEST(TruthTable, SixteenDistinctRows) {
    std::set<std::tuple<int, int, int, int, int>> seen;
    for (const auto& e : truth_table()) {
        const Eigen::Vector2d u = compass_unit(e.direction);
        const Eigen::Vector2d h(e.helmholtz[0], e.helmholtz[1]);
        EXPECT_NEAR(h.dot(u), 0.0, 1e-12);  // flip axis perpendicular to the move
        EXPECT_EQ(e.maxwell[0], compass_dx(e.direction));
        EXPECT_EQ(e.maxwell[1], compass_dy(e.direction));
        const TruthEntry& other = truth_entry(1 - e.parity, e.direction);
        EXPECT_EQ(other.helmholtz[0], -e.helmholtz[0]);
        EXPECT_EQ(other.helmholtz[1], -e.helmholtz[1]);
        seen.insert({e.parity, e.helmholtz[0], e.helmholtz[1], e.maxwell[0], e.maxwell[1]});
    }
    EXPECT_EQ(seen.size(), 16u);
    EXPECT_EQ(kTruthTableVersion, 1);
}

TEST(RealizeCommand, FirstStepEastIsHyOnly) {
    const MotionCommand c = realize_command(Compass::E, ActuationKind::HelmholtzPulse, 0.0, OrientationTag{}, kCoils);
    EXPECT_EQ(c.currents[Coil::Hx], 0.0);
    EXPECT_GT(c.currents[Coil::Hy], 0.0);
    EXPECT_EQ(c.currents[Coil::Mx], 0.0);
    EXPECT_EQ(c.currents[Coil::My], 0.0);
}

TEST(RealizeCommand, PulseHasNoMaxwellCurrent) {
    for (int parity = 0; parity < 2; ++parity)
        for (Compass d : kAllCompass) {
            const auto c = realize_command(d, ActuationKind::HelmholtzPulse, 0.2, OrientationTag{parity, d}, kCoils);
            EXPECT_EQ(c.currents[Coil::Mx], 0.0);
            EXPECT_EQ(c.currents[Coil::My], 0.0);
        }
}

TEST(RealizeCommand, RampAddsToEveryActiveCoil) {
    const ActuationParams p;
    const auto base = realize_command(Compass::NE, ActuationKind::HelmholtzMaxwell, 0.0, OrientationTag{}, kCoils, p);
    const auto ramped = realize_command(Compass::NE, ActuationKind::HelmholtzMaxwell, 0.3, OrientationTag{}, kCoils, p);
    for (Coil c : {Coil::Hx, Coil::Hy, Coil::Mx, Coil::My}) {
        ASSERT_NE(base.currents[c], 0.0);
        EXPECT_NEAR(std::abs(ramped.currents[c]) - std::abs(base.currents[c]), 0.3, 1e-12);
        EXPECT_EQ(std::signbit(ramped.currents[c]), std::signbit(base.currents[c]));
    }
    EXPECT_NEAR(std::abs(ramped.currents[Coil::Hx]), p.helmholtz_base + 0.3, 1e-12);
    EXPECT_NEAR(std::abs(ramped.currents[Coil::Mx]), p.maxwell_base + 0.3, 1e-12);
}

TEST(RealizeCommand, Errors) {
    EXPECT_THROW(realize_command(8, ActuationKind::HelmholtzPulse, 0.0, OrientationTag{}, kCoils),
                 InvalidDirectionError);
    EXPECT_THROW(realize_command(-1, ActuationKind::HelmholtzPulse, 0.0, OrientationTag{}, kCoils),
                 InvalidDirectionError);
    EXPECT_NO_THROW(realize_command(3, ActuationKind::HelmholtzPulse, 0.0, OrientationTag{}, kCoils));
    EXPECT_THROW(realize_command(Compass::N, ActuationKind::HelmholtzMaxwell, 7.5, OrientationTag{}, kCoils),
                 SaturationError);
    EXPECT_THROW(realize_command(Compass::N, ActuationKind::HelmholtzMaxwell, -0.1, OrientationTag{}, kCoils),
                 InvalidSpecError);
}

TEST(DecodeCommand, RoundTripsEveryRow) {
    for (int parity = 0; parity < 2; ++parity)
        for (Compass d : kAllCompass)
            for (ActuationKind k : {ActuationKind::HelmholtzPulse, ActuationKind::HelmholtzMaxwell}) {
                const auto c = realize_command(d, k, 0.1, OrientationTag{parity, d}, kCoils);
                const auto dec = decode_command(c.currents, parity);
                ASSERT_TRUE(dec.has_value());
                EXPECT_EQ(dec->direction, d);
                EXPECT_EQ(dec->kind, k);
            }
}

TEST(DecodeCommand, WrongParityReversesPulseAndRejectsDrive) {
    for (Compass d : kAllCompass) {
        const auto pulse = realize_command(d, ActuationKind::HelmholtzPulse, 0.0, OrientationTag{0, d}, kCoils);
        const auto dec = decode_command(pulse.currents, 1);
        ASSERT_TRUE(dec.has_value());
        EXPECT_EQ(dec->direction, static_cast<Compass>((static_cast<int>(d) + 4) % 8));
        const auto drive = realize_command(d, ActuationKind::HelmholtzMaxwell, 0.0, OrientationTag{0, d}, kCoils);
        EXPECT_FALSE(decode_command(drive.currents, 1).has_value());
    }
    EXPECT_FALSE(decode_command(CoilCommand{}, 0).has_value());
}

TEST(SimulatedPlant, ExecutesDecodedDirection) {
    SimulatedPlant plant(fixed_at({0, 0}), Workspace{}, ideal_config(), ideal_camera(), 3);
    const auto c = realize_command(Compass::N, ActuationKind::HelmholtzPulse, 0.0, OrientationTag{}, kCoils);
    const Observation o = plant.execute(c, {});
    EXPECT_NEAR(o.position.x(), 0.0, 1e-12);
    EXPECT_NEAR(o.position.y(), 0.884e-3, 1e-12);
    EXPECT_EQ(o.parity, 1);
    EXPECT_EQ(plant.flips(), 1);
}

TEST(SimulatedPlant, WallsBlockMotion) {
    Workspace ws;
    ws.obstacles.push_back(Polygon::rectangle(2.0e-3, -5e-3, 4e-3, 5e-3));
    SimulatedPlant plant(fixed_at({0, 0}), ws, ideal_config(), ideal_camera(), 3);
    auto c = realize_command(Compass::E, ActuationKind::HelmholtzPulse, 0.0, OrientationTag{}, kCoils);
    plant.execute(c, {});
    EXPECT_EQ(plant.module().position, Eigen::Vector2d(0.0, 0.0));
    EXPECT_EQ(plant.blocked(), 1);
    EXPECT_EQ(plant.module().orientation.parity, 0);
}

TEST(SimulatedPlant, CameraAveragesFrames) {
    SimulatedPlantOptions one, three;
    one.frames = 1;
    three.frames = 3;
    SimulatedPlant a(fixed_at({0, 0}), Workspace{}, ideal_config(), one, 5);
    SimulatedPlant b(fixed_at({0, 0}), Workspace{}, ideal_config(), three, 5);
    double va = 0, vb = 0;
    const int n = 4000;
    for (int i = 0; i < n; ++i) {
        va += a.observe().position.squaredNorm();
        vb += b.observe().position.squaredNorm();
    }
    EXPECT_NEAR(std::sqrt(va / (2 * n)), 0.2e-3, 0.01e-3);
    EXPECT_NEAR(std::sqrt(vb / (2 * n)), 0.2e-3 / std::sqrt(3.0), 0.01e-3);
}

TEST(Navigate, IdealCorridorNeedsNoRetries) {
    SimulatedPlant plant(fixed_at({-10e-3, 0}), Workspace{}, ideal_config(), ideal_camera(), 1);
    NavParams p;
    p.guard = 0.0;
    p.tolerance = 0.5e-3;
    const NavResult r = navigate(corridor(), plant, kCoils, p);
    EXPECT_TRUE(r.reached);
    EXPECT_EQ(r.status, NavStatus::Reached);
    EXPECT_EQ(r.cycles, 5);
    for (int n : r.retries) EXPECT_EQ(n, 0);
    EXPECT_LT((plant.module().position - corridor().back()).norm(), 1e-9);
    EXPECT_EQ(r.final_state.phase, FsmPhase::Done);
}

TEST(Navigate, ForcedStallAbortsAtWaypoint) {
    SimulatedPlantOptions o = ideal_camera();
    o.forced_stall_waypoint = 3;
    SimulatedPlant plant(fixed_at({-10e-3, 0}), Workspace{}, ideal_config(), o, 1);
    NavParams p;
    p.guard = 0.0;
    p.tolerance = 0.5e-3;
    const NavResult r = navigate(corridor(), plant, kCoils, p);
    EXPECT_FALSE(r.reached);
    EXPECT_EQ(r.status, NavStatus::AbortedStall);
    ASSERT_TRUE(r.failed_waypoint.has_value());
    EXPECT_EQ(*r.failed_waypoint, 3u);
    EXPECT_EQ(r.retries[3], 5);
    EXPECT_NEAR(r.final_state.ramp_level, 0.5, 1e-12);
    EXPECT_EQ(r.final_state.phase, FsmPhase::Aborted);

    // Six commands at the stalled waypoint with non-decreasing currents.
    std::vector<MotionCommand> at3;
    for (const auto& s : r.log)
        if (s.waypoint == 3) at3.push_back(s.command);
    ASSERT_EQ(at3.size(), 6u);
    for (std::size_t i = 1; i < at3.size(); ++i)
        for (Coil c : {Coil::Hx, Coil::Hy, Coil::Mx, Coil::My})
            EXPECT_GE(std::abs(at3[i].currents[c]), std::abs(at3[i - 1].currents[c]));
}

TEST(Navigate, IoFailureAborts) {
    SimulatedPlantOptions o = ideal_camera();
    o.io_failure_after = 2;
    SimulatedPlant plant(fixed_at({-10e-3, 0}), Workspace{}, ideal_config(), o, 1);
    const NavResult r = navigate(corridor(), plant, kCoils);
    EXPECT_EQ(r.status, NavStatus::AbortedIo);
    EXPECT_EQ(r.cycles, 2);
    EXPECT_FALSE(r.error.empty());
}

TEST(Navigate, RampSaturationAborts) {
    SimulatedPlantOptions o = ideal_camera();
    o.forced_stall_waypoint = 0;
    SimulatedPlant plant(fixed_at({-10e-3, 0}), Workspace{}, ideal_config(), o, 1);
    NavParams p;
    p.ramp_step = 3.0;
    const NavResult r = navigate(corridor(), plant, kCoils, p);
    EXPECT_EQ(r.status, NavStatus::AbortedSaturation);
    EXPECT_LE(r.final_state.retry, p.r_max);
}

TEST(Navigate, EmptyPlanIsReached) {
    SimulatedPlant plant(fixed_at({0, 0}), Workspace{}, ideal_config(), ideal_camera(), 1);
    const NavResult r = navigate({}, plant, kCoils);
    EXPECT_TRUE(r.reached);
    EXPECT_EQ(r.cycles, 0);
}

TEST(Navigate, ParamValidation) {
    NavParams p;
    p.guard = 2e-3;
    EXPECT_THROW(p.validate(), InvalidSpecError);
    p = NavParams{};
    p.tolerance = 0.0;
    EXPECT_THROW(p.validate(), InvalidSpecError);
    p = NavParams{};
    p.r_max = -1;
    EXPECT_THROW(p.validate(), InvalidSpecError);
}

TEST(NavigateProperties, MazeRunsWithStalls) {
    const auto wps = maze_waypoints();
    ASSERT_GT(wps.size(), 5u);
    SimConfig cfg;
    cfg.stall_probability = 0.2;
    NavParams params;
    int reached = 0;
    const int runs = 40;
    for (int seed = 0; seed < runs; ++seed) {
        SimulatedPlant plant(fixed_at(reference_maze_start()), reference_maze(), cfg, SimulatedPlantOptions{},
                             1000 + seed);
        const NavResult r = navigate(wps, plant, kCoils, params);
        // Cycle bound and retry bound.
        EXPECT_LE(r.cycles, static_cast<int>(wps.size()) * (params.r_max + 1));
        for (int n : r.retries) EXPECT_LE(n, params.r_max);
        EXPECT_LE(r.final_state.ramp_level, params.r_max * params.ramp_step + 1e-12);
        // First command pulses, every later one drives with gradients.
        ASSERT_FALSE(r.log.empty());
        EXPECT_EQ(r.log.front().command.kind, ActuationKind::HelmholtzPulse);
        for (std::size_t i = 1; i < r.log.size(); ++i)
            EXPECT_EQ(r.log[i].command.kind, ActuationKind::HelmholtzMaxwell);
        // FSM graph and ramp monotonicity within a waypoint.
        FsmPhase prev = FsmPhase::Idle;
        for (std::size_t i = 0; i < r.log.size(); ++i) {
            EXPECT_TRUE(allowed_transition(prev, r.log[i].phase));
            EXPECT_EQ(r.log[i].phase == FsmPhase::Ramping, r.log[i].retry > 0);
            if (i > 0 && r.log[i].waypoint == r.log[i - 1].waypoint) EXPECT_EQ(r.log[i].retry, r.log[i - 1].retry + 1);
            prev = r.log[i].phase;
        }
        // Orientation bookkeeping against the plant's flip count.
        EXPECT_EQ(r.final_state.orientation.parity, plant.flips() % 2);
        if (r.reached && (plant.module().position - wps.back()).norm() < 1e-3) ++reached;
    }
    EXPECT_GE(reached, runs * 9 / 10);
}
