#include <benchmark/benchmark.h>

#include <random>

#include "magbot/coil.hpp"
#include "magbot/controller.hpp"
#include "magbot/magnetics.hpp"
#include "magbot/planner.hpp"
#include "magbot/scenarios.hpp"
#include "magbot/sim.hpp"
#include "magbot/stats.hpp"

using namespace magbot;

static void BM_FieldAt(benchmark::State& state) {
    const CoilSystem coils;
    CoilCommand cmd;
    cmd.currents = {1.0, -0.5, 2.0, 0.3};
    Eigen::Vector3d r(3e-3, -2e-3, 0.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(coils.field_at(cmd, r));
        r.x() += 1e-9;
    }
}
BENCHMARK(BM_FieldAt);

static void BM_DipolePairForce(benchmark::State& state) {
    const double m = magnetic_moment(MagnetSpec::n40_sphere());
    const Dipole a{Eigen::Vector3d::Zero(), Eigen::Vector3d(m, 0, 0)};
    Dipole b{Eigen::Vector3d(3.2e-3, 0.5e-3, 0), Eigen::Vector3d(0, m, 0)};
    for (auto _ : state) {
        benchmark::DoNotOptimize(dipole_pair_force(a, b));
        b.position.y() += 1e-12;
    }
}
BENCHMARK(BM_DipolePairForce);

static void BM_SimStepGripperChain(benchmark::State& state) {
    const Simulator sim;
    World w = gripper_chain();
    const FieldSequence seq = gripper_program(1.8e-3).compile(sim.coils());
    const CoilCommand cmd = seq.commands.front();
    for (auto _ : state) benchmark::DoNotOptimize(sim.step(w, cmd));
    state.counters["modules"] = static_cast<double>(w.modules.size());
}
BENCHMARK(BM_SimStepGripperChain);

static void BM_PlanMaze(benchmark::State& state) {
    const OccupancyGrid grid = build_grid(reference_maze(), state.range(0) * 1e-6, default_inflation());
    const Cell s = grid.cell_at(reference_maze_start()), g = grid.cell_at(reference_maze_goal());
    for (auto _ : state) benchmark::DoNotOptimize(plan(grid, s, g));
    state.counters["cells"] = grid.width() * grid.height();
}
BENCHMARK(BM_PlanMaze)->Arg(500)->Arg(250)->Unit(benchmark::kMicrosecond);

static void BM_NavigateMaze(benchmark::State& state) {
    const Workspace ws = reference_maze();
    const OccupancyGrid grid = build_grid(ws, 0.5e-3, default_inflation());
    const auto wps = waypoint_positions(grid, plan(grid, grid.cell_at(reference_maze_start()),
                                                   grid.cell_at(reference_maze_goal())), 3e-3);
    SimConfig cfg;
    cfg.stall_probability = 0.2;
    ModuleState m;
    m.id = 1;
    m.type = ModuleType::Fixed;
    m.position = reference_maze_start();
    m.moment = in_plane_moment(0.0);
    std::uint64_t seed = 0;
    for (auto _ : state) {
        SimulatedPlant plant(m, ws, cfg, SimulatedPlantOptions{}, seed++);
        benchmark::DoNotOptimize(navigate(wps, plant, CoilSystem{}));
    }
}
BENCHMARK(BM_NavigateMaze)->Unit(benchmark::kMicrosecond);

static void BM_Ptukey(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(ptukey(3.5, 4, 36));
}
BENCHMARK(BM_Ptukey)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
