#include <gtest/gtest.h>

#include <sstream>

#include "magbot/errors.hpp"
#include "magbot/io.hpp"

using namespace magbot;

namespace {

const char* kPair = R"({
  "format": "magbot-scenario", "version": 1, "name": "pair",
  "modules": {"preset": "assembly_pair", "separation_mm": 5},
  "field": {"program": [{"preset": {"name": "assembly", "duration_s": 1.0}}]}
})";

std::string error_of(const std::string& text) {
    try {
        parse_scenario(text);
    } catch (const ParseError& e) {
        return e.what();
    }
    return {};
}

std::string simulate_text(const Scenario& sc, SimulateOptions opts = {}) {
    std::ostringstream out;
    simulate_scenario(sc, out, opts);
    return out.str();
}

}  // namespace

TEST(ScenarioParse, PresetPair) {
    const Scenario s = parse_scenario(kPair);
    EXPECT_EQ(s.name, "pair");
    ASSERT_EQ(s.world.modules.size(), 2u);
    EXPECT_NEAR((s.world.modules[0].position - s.world.modules[1].position).norm(), 5e-3, 1e-12);
    EXPECT_NEAR(s.duration, 1.0, 1e-9);
}

TEST(ScenarioParse, ExplicitModulesAndCommands) {
    const Scenario s = parse_scenario(R"({"version": 1,
      "modules": [{"id": 4, "type": "fixed", "position_mm": [1, 2], "moment_angle_deg": 90}],
      "field": {"commands": [{"t_s": 0, "currents_A": [1, 0, 0, 0]}, {"t_s": 0.5, "currents_A": [0, 0, 0, 0]}], "end_s": 1},
      "sim": {"timestep_s": 0.002}})");
    ASSERT_EQ(s.world.modules.size(), 1u);
    EXPECT_EQ(s.world.modules[0].id, 4);
    EXPECT_NEAR(s.world.modules[0].position.y(), 2e-3, 1e-15);
    EXPECT_NEAR(s.world.modules[0].moment.x(), 0.0, 1e-12);
    EXPECT_GT(s.world.modules[0].moment.y(), 0.0);
    EXPECT_EQ(s.sequence.commands.size(), 2u);
    EXPECT_DOUBLE_EQ(s.sim.timestep, 0.002);
    EXPECT_DOUBLE_EQ(s.duration, 1.0);
}

TEST(ScenarioParse, SyntaxErrorNamesLineAndColumn) {
    const std::string msg = error_of("{\n  \"version\": 1,\n  \"name\": ,\n}");
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("column"), std::string::npos) << msg;
}

TEST(ScenarioParse, FieldErrorsNameThePath) {
    EXPECT_NE(error_of(R"({"version": 1, "modules": [{"id": 1, "type": "fixed", "position_mm": [1]}]})")
                  .find("/modules/0/position_mm"), std::string::npos);
    EXPECT_NE(error_of(R"({"version": 1, "modules": [{"id": 1, "type": "wobbly", "position_mm": [0, 0]}]})")
                  .find("/modules/0/type"), std::string::npos);
    EXPECT_NE(error_of(R"({"version": 1, "colour": "red"})").find("/colour"), std::string::npos);
    EXPECT_NE(error_of(R"({"version": 2})").find("unsupported version"), std::string::npos);
    EXPECT_NE(error_of(R"({"name": "x"})").find("/version"), std::string::npos);
    EXPECT_NE(error_of(R"({"version": 1, "sim": {"timestep_s": -1}})").find("/sim"), std::string::npos);
}

TEST(ScenarioParse, RejectsInvalidWorlds) {
    // overlapping cubes
    EXPECT_THROW(parse_scenario(R"({"version": 1, "modules": [
      {"id": 1, "type": "fixed", "position_mm": [0, 0]}, {"id": 2, "type": "fixed", "position_mm": [1, 0]}]})"),
                 ParseError);
    // duplicate ids
    EXPECT_THROW(parse_scenario(R"({"version": 1, "modules": [
      {"id": 1, "type": "fixed", "position_mm": [0, 0]}, {"id": 1, "type": "fixed", "position_mm": [8, 0]}]})"),
                 ParseError);
    // outside the workspace
    EXPECT_THROW(parse_scenario(R"({"version": 1, "modules": [{"id": 1, "type": "fixed", "position_mm": [17, 0]}]})"),
                 ParseError);
    // bond to a missing module
    EXPECT_THROW(parse_scenario(R"({"version": 1, "modules": [{"id": 1, "type": "fixed", "position_mm": [0, 0]}],
      "bonds": [[1, 9]]})"),
                 ParseError);
    // commands out of order
    EXPECT_THROW(parse_scenario(R"({"version": 1, "field": {"commands": [
      {"t_s": 1, "currents_A": [0, 0, 0, 0]}, {"t_s": 0.5, "currents_A": [0, 0, 0, 0]}]}})"),
                 ParseError);
}

TEST(ScenarioParse, SaturatingProgramIsAFieldError) {
    const std::string msg = error_of(R"({"version": 1,
      "field": {"program": [{"hold": {"uniform_mT": [500, 0], "duration_s": 1}}]}})");
    EXPECT_NE(msg.find("/field/program"), std::string::npos) << msg;
}

TEST(ScenarioParse, LoadMissingFile) { EXPECT_THROW(load_scenario("/nonexistent/x.json"), ParseError); }

TEST(Trace, SimulateRoundTrip) {
    const Scenario s = parse_scenario(kPair);
    std::ostringstream out;
    const auto outcome = simulate_scenario(s, out);
    EXPECT_FALSE(outcome.diverged);
    std::istringstream in(out.str());
    const Trace t = read_trace(in);
    EXPECT_EQ(t.header.scenario, "pair");
    EXPECT_EQ(t.status, "completed");
    ASSERT_FALSE(t.samples.empty());
    EXPECT_DOUBLE_EQ(t.samples.front().time, 0.0);
    for (std::size_t i = 1; i < t.samples.size(); ++i) EXPECT_GT(t.samples[i].time, t.samples[i - 1].time);
    EXPECT_NEAR(t.samples.back().time, 1.0, 1e-9);
    EXPECT_EQ(t.events.size(), outcome.events.size());
    bool assembled = false;
    for (const auto& e : t.events) assembled |= e.kind == SimEventKind::AssemblyComplete;
    EXPECT_TRUE(assembled);
    EXPECT_FALSE(t.samples.back().bonds.empty());
    // samples carry exactly the final world
    const TraceSample last = trace_sample(outcome.final_world);
    ASSERT_EQ(last.modules.size(), t.samples.back().modules.size());
    for (std::size_t i = 0; i < last.modules.size(); ++i)
        EXPECT_TRUE(last.modules[i].position.isApprox(t.samples.back().modules[i].position, 1e-12));
}

TEST(Trace, EventsInTimeOrder) {
    const Scenario s = parse_scenario(kPair);
    std::istringstream in(simulate_text(s));
    std::string line;
    double last = -1.0;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        const auto pos = line.find("\"t\":");
        ASSERT_NE(pos, std::string::npos);
        const double t = std::stod(line.substr(pos + 4));
        EXPECT_GE(t, last - 1e-12);
        last = t;
    }
}

TEST(Trace, DeterministicBytes) {
    const Scenario s = parse_scenario(kPair);
    EXPECT_EQ(simulate_text(s), simulate_text(s));
}

TEST(Trace, EmptyRosterHasNoSamples) {
    const Scenario s = parse_scenario(R"({"version": 1, "duration_s": 2})");
    std::istringstream in(simulate_text(s));
    const Trace t = read_trace(in);
    EXPECT_TRUE(t.samples.empty());
    EXPECT_TRUE(t.events.empty());
    EXPECT_EQ(t.status, "completed");
}

TEST(Trace, DivergenceEndsTheTrace) {
    Scenario s = parse_scenario(kPair);
    s.world.modules[1].position = s.world.modules[0].position;
    std::ostringstream out;
    const auto outcome = simulate_scenario(s, out);
    EXPECT_TRUE(outcome.diverged);
    std::istringstream in(out.str());
    const Trace t = read_trace(in);
    EXPECT_EQ(t.status, "diverged");
    EXPECT_FALSE(t.error.empty());
}

TEST(Trace, RejectsBadInput) {
    std::istringstream v2(R"({"format":"magbot-trace","version":2,"scenario":"x","timestep_s":0.001,"sample_interval_s":0.01,"seed":1})");
    try {
        read_trace(v2);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("unsupported trace version"), std::string::npos);
    }
    std::istringstream garbage("not json\n");
    EXPECT_THROW(read_trace(garbage), ParseError);
    std::istringstream truncated(
        R"({"format":"magbot-trace","version":1,"scenario":"x","timestep_s":0.001,"sample_interval_s":0.01,"seed":1})");
    EXPECT_THROW(read_trace(truncated), ParseError);
}

TEST(Trace, SeedOverrideChangesHeader) {
    const Scenario s = parse_scenario(kPair);
    std::istringstream in(simulate_text(s, {std::nullopt, 77}));
    EXPECT_EQ(read_trace(in).header.seed, 77u);
}

TEST(NavigateScenario, MazeReachesGoal) {
    const Scenario s = parse_scenario(R"({"version": 1, "workspace": {"preset": "maze"},
      "modules": [{"id": 1, "type": "fixed", "position_mm": [-13.5, -13.5]}],
      "goal_mm": [13.5, 13.5], "navigation": {"seed": 3}})");
    const auto out = navigate_scenario(s);
    EXPECT_EQ(out.result.status, NavStatus::Reached);
    EXPECT_LT(out.final_error, 1e-3);
    EXPECT_FALSE(out.waypoints.empty());
    EXPECT_NE(nav_result_json(out).find("\"status\": \"reached\""), std::string::npos);
}

TEST(NavigateScenario, Errors) {
    EXPECT_THROW(navigate_scenario(parse_scenario(R"({"version": 1,
      "modules": [{"id": 1, "type": "fixed", "position_mm": [0, 0]}]})")),
                 InvalidSpecError);
    EXPECT_THROW(navigate_scenario(parse_scenario(R"({"version": 1, "goal_mm": [1, 1]})")), InvalidSpecError);
    EXPECT_THROW(navigate_scenario(parse_scenario(R"({"version": 1, "workspace": {"preset": "maze"},
      "modules": [{"id": 1, "type": "fixed", "position_mm": [-13.5, -13.5]}], "goal_mm": [40, 0]})")),
                 Error);
}

TEST(ExperimentIo, ParseAndValidate) {
    const auto spec = parse_experiment(R"({"format": "magbot-experiment", "version": 1, "id": "g", "kind": "gait",
      "trials": 3, "seed": 9, "conditions": [
        {"name": "h", "module_type": "fixed", "mode": "H"}, {"name": "hm", "module_type": "fixed", "mode": "HM"}]})");
    EXPECT_EQ(spec.kind, ExperimentKind::Gait);
    EXPECT_EQ(spec.trials, 3);
    ASSERT_EQ(spec.conditions.size(), 2u);
    EXPECT_EQ(spec.conditions[0].mode, GaitMode::H);
    EXPECT_THROW(parse_experiment(R"({"version": 1, "kind": "gait", "conditions": []})"), ParseError);
    EXPECT_THROW(parse_experiment(R"({"version": 1, "kind": "dance", "conditions": [{"name": "a"}]})"), ParseError);
    EXPECT_THROW(parse_experiment(R"({"version": 1, "kind": "gait", "trials": 0, "conditions": [{"name": "a"}]})"),
                 ParseError);
}

TEST(ExperimentIo, RecordRoundTrip) {
    const auto spec = parse_experiment(R"({"version": 1, "kind": "gait", "trials": 2, "threads": 1, "conditions": [
        {"name": "h", "mode": "H"}, {"name": "hm", "mode": "HM"}]})");
    const auto result = run_experiment(spec);
    ASSERT_EQ(result.records.size(), 4u);
    std::ostringstream out;
    write_records(out, result.records);
    std::istringstream in(out.str());
    std::string line;
    std::size_t i = 0;
    while (std::getline(in, line)) EXPECT_EQ(parse_trial_record(line), result.records.at(i++));
    EXPECT_EQ(i, 4u);
    EXPECT_NE(summary_json(result.summary).find("\"comparisons\""), std::string::npos);
    EXPECT_NE(summary_table(result.summary).find("hm"), std::string::npos);
    std::ostringstream csv;
    write_records_csv(csv, result.records);
    const std::string text = csv.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
}
