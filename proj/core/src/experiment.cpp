#include "magbot/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "magbot/errors.hpp"
#include "magbot/scenarios.hpp"

namespace magbot {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double median_of(std::vector<double> x) {
    if (x.empty()) return 0.0;
    std::sort(x.begin(), x.end());
    const std::size_t n = x.size();
    return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

std::vector<double> magnet_separations_mm(const World& w) {
    std::vector<double> out;
    for (std::size_t i = 0; i < w.modules.size(); ++i)
        for (std::size_t j = i + 1; j < w.modules.size(); ++j)
            out.push_back((w.modules[j].magnet_position() - w.modules[i].magnet_position()).norm() * 1e3);
    return out;
}

void gait_trial(const ExperimentSpec& spec, const ConditionSpec& c, int trial, std::mt19937_64& rng, TrialRecord& r) {
    constexpr std::array<Compass, 4> dirs{Compass::E, Compass::N, Compass::W, Compass::S};
    const Compass dir = dirs[static_cast<std::size_t>(trial) % 4];
    ModuleState m;
    m.id = 1;
    m.type = c.module_type;
    sample_gait_gain(m, spec.sim, rng);
    std::vector<Eigen::Vector2d> path{m.position * 1e3};
    for (int k = 0; k < c.cycles; ++k) {
        gait_cycle(m, compass_unit(dir), c.mode, spec.sim, rng);
        path.push_back(m.position * 1e3);
    }
    r.displacement = displacement_metrics(path, compass_unit(dir));
    r.success = true;
}

void assembly_trial(const ExperimentSpec& spec, const ConditionSpec& c, std::mt19937_64& rng, TrialRecord& r) {
    std::normal_distribution<double> unit(0.0, 1.0);
    const double sep = std::max(kModuleEdge, c.separation + spec.assembly.separation_sigma * unit(rng));
    World w = assembly_pair(sep);
    w.modules[1].position.y() += spec.assembly.lateral_sigma * unit(rng);
    r.initial_separations = magnet_separations_mm(w);
    const Simulator sim(spec.sim);
    const CoilCommand cmd = sim.coils().currents_for({c.assist_field, 0.0}, Eigen::Vector2d::Zero());
    const long steps = std::lround(c.timeout / spec.sim.timestep);
    for (long s = 0; s < steps; ++s) {
        for (const auto& e : sim.step(w, cmd)) {
            if (e.kind == SimEventKind::AssemblyComplete) {
                r.assembly_time = e.time;
                r.success = true;
                return;
            }
        }
    }
}

void reconfiguration_trial(const ExperimentSpec& spec, const ConditionSpec& c, std::mt19937_64& rng,
                           TrialRecord& r) {
    const auto& noise = spec.reconfiguration;
    std::normal_distribution<double> unit(0.0, 1.0);
    const bool gripper = c.target == ReconfigurationTarget::Gripper;
    const double pulse = c.pulse.value_or(gripper ? noise.gripper_pulse : noise.square_pulse);
    World w = gripper ? gripper_chain() : square_chain();
    for (auto& m : w.modules) {
        m.magnet_offset += noise.offset_sigma * Eigen::Vector2d(unit(rng), unit(rng));
        const double lim = max_magnet_offset(m.type, spec.sim.magnet);
        if (m.magnet_offset.norm() > lim) m.magnet_offset *= lim / m.magnet_offset.norm();
    }
    r.initial_separations = magnet_separations_mm(w);
    const double gain = std::max(0.0, 1.0 + noise.gain_sigma * unit(rng));
    const double angle = noise.angle_sigma * unit(rng);
    const FieldProgram program = (gripper ? gripper_program(pulse) : square_program(pulse)).perturbed(gain, angle);
    const Simulator sim(spec.sim);
    const FieldSequence seq = program.compile(sim.coils());
    const std::string label = to_string(c.target);
    const double end = std::min(seq.end_time, noise.timeout);
    const long steps = std::lround(end / spec.sim.timestep);
    std::size_t active = 0;
    for (long s = 0; s < steps; ++s) {
        const double t = s * spec.sim.timestep;
        while (active + 1 < seq.commands.size() && seq.commands[active + 1].timestamp <= t + 1e-12) ++active;
        for (const auto& e : sim.step(w, seq.commands[active]))
            if (e.kind == SimEventKind::ReconfigurationComplete && e.label == label && !r.completion_time)
                r.completion_time = e.time;
    }
    r.success = r.completion_time.has_value() && detect_configuration(w).to_string() == label;
    if (!r.success) r.completion_time.reset();
}

}  // namespace

const char* to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::Gait: return "gait";
        case ExperimentKind::Assembly: return "assembly";
        case ExperimentKind::Reconfiguration: return "reconfiguration";
    }
    return "?";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
    if (s == "gait") return ExperimentKind::Gait;
    if (s == "assembly") return ExperimentKind::Assembly;
    if (s == "reconfiguration") return ExperimentKind::Reconfiguration;
    throw InvalidSpecError("unknown experiment kind '" + s + "'");
}

const char* to_string(ReconfigurationTarget t) { return t == ReconfigurationTarget::Gripper ? "gripper" : "square"; }

ReconfigurationTarget reconfiguration_target_from_string(const std::string& s) {
    if (s == "gripper") return ReconfigurationTarget::Gripper;
    if (s == "square") return ReconfigurationTarget::Square;
    throw InvalidSpecError("unknown reconfiguration target '" + s + "'");
}

void ExperimentSpec::validate() const {
    if (conditions.empty()) throw InvalidSpecError("experiment needs at least one condition");
    if (trials < 2) throw InvalidSpecError("at least two trials per condition");
    if (threads < 0) throw InvalidSpecError("thread count must be non-negative");
    std::vector<std::string> names;
    for (const auto& c : conditions) {
        if (c.name.empty()) throw InvalidSpecError("condition names must be non-empty");
        if (std::find(names.begin(), names.end(), c.name) != names.end())
            throw InvalidSpecError("duplicate condition '" + c.name + "'");
        names.push_back(c.name);
        if (c.cycles < 1) throw InvalidSpecError("condition '" + c.name + "': cycles must be positive");
        if (!(c.timeout > 0.0)) throw InvalidSpecError("condition '" + c.name + "': timeout must be positive");
        if (kind == ExperimentKind::Assembly && !(c.separation >= kModuleEdge))
            throw InvalidSpecError("condition '" + c.name + "': separation below one module edge");
        if (c.pulse && !(*c.pulse > 0.0)) throw InvalidSpecError("condition '" + c.name + "': pulse must be positive");
    }
    sim.validate();
}

bool TrialRecord::operator==(const TrialRecord& o) const {
    auto same_disp = [](const std::optional<DisplacementMetrics>& a, const std::optional<DisplacementMetrics>& b) {
        if (a.has_value() != b.has_value()) return false;
        if (!a) return true;
        return a->euclidean == b->euclidean && a->manhattan == b->manhattan && a->endpoint_l1 == b->endpoint_l1 &&
               a->x == b->x && a->y == b->y && a->degenerate == b->degenerate;
    };
    return scenario == o.scenario && condition == o.condition && trial == o.trial && seed == o.seed &&
           success == o.success && failed == o.failed && error == o.error && same_disp(displacement, o.displacement) &&
           assembly_time == o.assembly_time && completion_time == o.completion_time &&
           initial_separations == o.initial_separations;
}

std::uint64_t trial_seed(std::uint64_t base, std::size_t condition, int trial) {
    return splitmix64(splitmix64(base) ^ splitmix64((static_cast<std::uint64_t>(condition) << 32) |
                                                    static_cast<std::uint32_t>(trial)));
}

TrialRecord run_trial(const ExperimentSpec& spec, std::size_t condition, int trial) {
    const ConditionSpec& c = spec.conditions.at(condition);
    TrialRecord r;
    r.scenario = spec.id;
    r.condition = c.name;
    r.trial = trial;
    r.seed = trial_seed(spec.seed, condition, trial);
    std::mt19937_64 rng(r.seed);
    try {
        switch (spec.kind) {
            case ExperimentKind::Gait: gait_trial(spec, c, trial, rng, r); break;
            case ExperimentKind::Assembly: assembly_trial(spec, c, rng, r); break;
            case ExperimentKind::Reconfiguration: reconfiguration_trial(spec, c, rng, r); break;
        }
    } catch (const Error& e) {
        r.failed = true;
        r.success = false;
        r.error = e.what();
    }
    return r;
}

std::optional<double> primary_metric(ExperimentKind kind, const TrialRecord& r) {
    if (r.failed) return std::nullopt;
    switch (kind) {
        case ExperimentKind::Gait:
            if (r.displacement) return r.displacement->euclidean;
            return std::nullopt;
        case ExperimentKind::Assembly: return r.assembly_time;
        case ExperimentKind::Reconfiguration: return r.completion_time;
    }
    return std::nullopt;
}

ExperimentSummary summarize(const ExperimentSpec& spec, const std::vector<TrialRecord>& records) {
    ExperimentSummary s;
    s.id = spec.id;
    s.kind = spec.kind;
    s.metric = spec.kind == ExperimentKind::Gait       ? "euclidean_mm"
               : spec.kind == ExperimentKind::Assembly ? "assembly_time_s"
                                                        : "completion_time_s";
    std::vector<std::vector<double>> samples;
    for (const auto& c : spec.conditions) {
        ConditionSummary cs;
        cs.name = c.name;
        std::vector<double> x;
        for (const auto& r : records) {
            if (r.condition != c.name) continue;
            ++cs.n;
            if (r.success) ++cs.successes;
            if (auto v = primary_metric(spec.kind, r)) x.push_back(*v);
        }
        cs.success_rate = cs.n > 0 ? static_cast<double>(cs.successes) / cs.n : 0.0;
        cs.samples = static_cast<int>(x.size());
        cs.mean = mean(x);
        cs.stddev = stddev(x);
        cs.median = median_of(x);
        s.conditions.push_back(cs);
        samples.push_back(std::move(x));
    }
    // Compare the conditions that contribute at least two metric values.
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i].size() >= 2) usable.push_back(i);
    if (usable.size() == 2) {
        const auto& a = samples[usable[0]];
        const auto& b = samples[usable[1]];
        const double p = t_test(a, b);
        const double diff = mean(b) - mean(a);
        const double pooled = std::sqrt(((a.size() - 1) * std::pow(stddev(a), 2) + (b.size() - 1) * std::pow(stddev(b), 2)) /
                                        static_cast<double>(a.size() + b.size() - 2));
        const double t = pooled > 0.0 ? diff / (pooled * std::sqrt(1.0 / a.size() + 1.0 / b.size())) : 0.0;
        s.comparisons.push_back({spec.conditions[usable[0]].name, spec.conditions[usable[1]].name, diff, t, p, "t"});
    } else if (usable.size() > 2) {
        std::vector<std::vector<double>> groups;
        for (std::size_t i : usable) groups.push_back(samples[i]);
        for (const auto& pc : tukey_hsd(groups))
            s.comparisons.push_back({spec.conditions[usable[pc.first]].name, spec.conditions[usable[pc.second]].name,
                                     pc.mean_difference, pc.statistic, pc.p_value, "tukey"});
    }
    return s;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    const std::size_t nc = spec.conditions.size();
    const std::size_t total = nc * static_cast<std::size_t>(spec.trials);
    std::vector<TrialRecord> records(total);
    unsigned workers = spec.threads > 0 ? static_cast<unsigned>(spec.threads) : std::thread::hardware_concurrency();
    workers = std::clamp<unsigned>(workers, 1u, static_cast<unsigned>(std::max<std::size_t>(total, 1)));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < total; i = next++)
            records[i] = run_trial(spec, i / spec.trials, static_cast<int>(i % spec.trials));
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    ExperimentResult out;
    out.summary = summarize(spec, records);
    out.records = std::move(records);
    return out;
}

}  // namespace magbot
