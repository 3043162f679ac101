#include "magbot/controller.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace magbot {

namespace {

int sign_of(double v, double eps = 1e-12) { return v > eps ? 1 : (v < -eps ? -1 : 0); }

std::array<TruthEntry, 16> build_table() {
    std::array<TruthEntry, 16> t{};
    std::size_t k = 0;
    for (int parity = 0; parity < 2; ++parity) {
        const int s = parity == 0 ? 1 : -1;
        for (Compass c : kAllCompass) {
            const int dx = compass_dx(c), dy = compass_dy(c);
            t[k++] = TruthEntry{parity, c, {-s * dy, s * dx}, {dx, dy}};
        }
    }
    return t;
}

/// Segment against an axis-aligned box (slab test).
bool segment_hits_box(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& lo,
                      const Eigen::Vector2d& hi) {
    double t0 = 0.0, t1 = 1.0;
    const Eigen::Vector2d d = b - a;
    for (int i = 0; i < 2; ++i) {
        if (std::abs(d[i]) < 1e-15) {
            if (a[i] < lo[i] || a[i] > hi[i]) return false;
            continue;
        }
        double ta = (lo[i] - a[i]) / d[i], tb = (hi[i] - a[i]) / d[i];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return false;
    }
    return true;
}

}  // namespace

const char* to_string(ActuationKind k) {
    return k == ActuationKind::HelmholtzPulse ? "helmholtz_pulse" : "helmholtz_maxwell";
}

const std::array<TruthEntry, 16>& truth_table() {
    static const std::array<TruthEntry, 16> table = build_table();
    return table;
}

const TruthEntry& truth_entry(int parity, Compass direction) {
    return truth_table()[static_cast<std::size_t>((parity & 1) * 8 + static_cast<int>(direction))];
}

std::optional<Compass> compute_direction(const Eigen::Vector2d& current, const Eigen::Vector2d& target,
                                         double tolerance) {
    const Eigen::Vector2d d = target - current;
    if (d.norm() <= tolerance) return std::nullopt;
    return nearest_compass(std::atan2(d.y(), d.x()));
}

MotionCommand realize_command(Compass direction, ActuationKind kind, double ramp_level, const OrientationTag& o,
                              const CoilSystem& coils, const ActuationParams& params) {
    if (!(ramp_level >= 0.0)) throw InvalidSpecError("ramp level must be non-negative");
    const TruthEntry& e = truth_entry(o.parity, direction);
    MotionCommand cmd;
    cmd.direction = direction;
    cmd.kind = kind;
    cmd.currents[Coil::Hx] = e.helmholtz[0] * (params.helmholtz_base + ramp_level);
    cmd.currents[Coil::Hy] = e.helmholtz[1] * (params.helmholtz_base + ramp_level);
    if (kind == ActuationKind::HelmholtzMaxwell) {
        cmd.currents[Coil::Mx] = e.maxwell[0] * (params.maxwell_base + ramp_level);
        cmd.currents[Coil::My] = e.maxwell[1] * (params.maxwell_base + ramp_level);
    }
    for (Coil c : {Coil::Hx, Coil::Hy, Coil::Mx, Coil::My}) {
        if (std::abs(cmd.currents[c]) > coils.max_current(c))
            throw SaturationError(std::string("coil ") + to_string(c) + " would exceed its current limit");
    }
    return cmd;
}

MotionCommand realize_command(int direction_code, ActuationKind kind, double ramp_level, const OrientationTag& o,
                              const CoilSystem& coils, const ActuationParams& params) {
    const auto c = compass_from_index(direction_code);
    if (!c) throw InvalidDirectionError("direction code " + std::to_string(direction_code) + " is not 0..7");
    return realize_command(*c, kind, ramp_level, o, coils, params);
}

std::optional<DecodedCommand> decode_command(const CoilCommand& currents, int parity) {
    const std::array<int, 2> h{sign_of(currents[Coil::Hx]), sign_of(currents[Coil::Hy])};
    const std::array<int, 2> m{sign_of(currents[Coil::Mx]), sign_of(currents[Coil::My])};
    const bool maxwell = m[0] != 0 || m[1] != 0;
    for (Compass c : kAllCompass) {
        const TruthEntry& e = truth_entry(parity, c);
        if (e.helmholtz != h) continue;
        if (maxwell && e.maxwell != m) continue;
        return DecodedCommand{c, maxwell ? ActuationKind::HelmholtzMaxwell : ActuationKind::HelmholtzPulse};
    }
    return std::nullopt;
}

SimulatedPlant::SimulatedPlant(ModuleState module, Workspace workspace, SimConfig cfg, SimulatedPlantOptions options,
                               std::uint64_t seed)
    : module_(std::move(module)), workspace_(std::move(workspace)), cfg_(std::move(cfg)), options_(options),
      rng_(seed) {
    if (options_.frames < 1) throw InvalidSpecError("at least one camera frame per observation");
    if (!(options_.observation_sigma >= 0.0)) throw InvalidSpecError("observation sigma must be non-negative");
    sample_gait_gain(module_, cfg_, rng_);
    truth_.push_back(module_.position);
}

Observation SimulatedPlant::observe() {
    std::normal_distribution<double> noise(0.0, options_.observation_sigma);
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    for (int f = 0; f < options_.frames; ++f) sum += module_.position + Eigen::Vector2d(noise(rng_), noise(rng_));
    return Observation{sum / options_.frames, module_.orientation.parity};
}

bool SimulatedPlant::footprint_clear(const Eigen::Vector2d& c) const {
    const double h = kModuleEdge / 2.0;
    const Eigen::Vector2d lo = c.array() - h, hi = c.array() + h;
    if (lo.minCoeff() < -workspace_.half_extent || hi.maxCoeff() > workspace_.half_extent) return false;
    for (const auto& poly : workspace_.obstacles) {
        if (poly.vertices.size() >= 3 && poly.contains(c)) return false;
        const std::size_t n = poly.vertices.size();
        for (std::size_t i = 0; i < n; ++i)
            if (segment_hits_box(poly.vertices[i], poly.vertices[(i + 1) % n], lo, hi)) return false;
    }
    return true;
}

Observation SimulatedPlant::execute(const MotionCommand& cmd, const CycleContext& ctx) {
    if (options_.io_failure_after && cycles_ >= *options_.io_failure_after)
        throw PlantIoError("camera link lost after " + std::to_string(cycles_) + " cycles");
    ++cycles_;
    const auto decoded = decode_command(cmd.currents, module_.orientation.parity);
    const bool forced = options_.forced_stall_waypoint && ctx.waypoint >= *options_.forced_stall_waypoint;
    if (!decoded || forced) {
        ++stalls_;
    } else {
        const GaitMode mode = decoded->kind == ActuationKind::HelmholtzPulse ? GaitMode::H : GaitMode::HM;
        const ModuleState before = module_;
        const GaitOutcome out = gait_cycle(module_, compass_unit(decoded->direction), mode, cfg_, rng_, cmd.fraction);
        if (out.stalled) {
            ++stalls_;
        } else if (!footprint_clear(module_.position)) {
            module_ = before;
            ++blocked_;
        } else if (module_.orientation.parity != before.orientation.parity) {
            ++flips_;
        }
    }
    truth_.push_back(module_.position);
    return observe();
}

const char* to_string(FsmPhase p) {
    switch (p) {
        case FsmPhase::Idle: return "idle";
        case FsmPhase::Pulsing: return "pulsing";
        case FsmPhase::Stepping: return "stepping";
        case FsmPhase::Ramping: return "ramping";
        case FsmPhase::Aborted: return "aborted";
        case FsmPhase::Done: return "done";
    }
    return "?";
}

const char* to_string(NavStatus s) {
    switch (s) {
        case NavStatus::Running: return "running";
        case NavStatus::Reached: return "reached";
        case NavStatus::AbortedStall: return "aborted_stall";
        case NavStatus::AbortedIo: return "aborted_io";
        case NavStatus::AbortedSaturation: return "aborted_saturation";
    }
    return "?";
}

void NavParams::validate() const {
    if (!(tolerance > 0.0)) throw InvalidSpecError("tolerance must be positive");
    if (r_max < 0) throw InvalidSpecError("r_max must be non-negative");
    if (!(ramp_step >= 0.0)) throw InvalidSpecError("ramp step must be non-negative");
    if (!(guard >= 0.0 && guard < tolerance)) throw InvalidSpecError("guard band must lie in [0, tolerance)");
    if (!(pulse_step > 0.0 && maxwell_step > 0.0)) throw InvalidSpecError("nominal steps must be positive");
    if (!(min_fraction > 0.0 && min_fraction <= 1.0)) throw InvalidSpecError("min fraction must lie in (0, 1]");
    if (!(step_learning >= 0.0 && step_learning <= 1.0)) throw InvalidSpecError("step learning must lie in [0, 1]");
}

Navigator::Navigator(std::vector<Eigen::Vector2d> waypoints, Plant& plant, CoilSystem coils, NavParams params)
    : waypoints_(std::move(waypoints)), plant_(plant), coils_(std::move(coils)), params_(std::move(params)) {
    params_.validate();
    result_.retries.assign(waypoints_.size(), 0);
    step_estimate_ = params_.maxwell_step;
}

bool Navigator::accept(std::size_t index) const {
    const double radius = index + 1 == waypoints_.size() ? params_.tolerance - params_.guard : params_.tolerance;
    return (waypoints_[index] - observed_).norm() <= radius;
}

void Navigator::finish(NavStatus status, const std::string& error) {
    result_.status = status;
    result_.reached = status == NavStatus::Reached;
    result_.error = error;
    state_.phase = result_.reached ? FsmPhase::Done : FsmPhase::Aborted;
    if (!result_.reached) result_.failed_waypoint = state_.waypoint;
    result_.final_state = state_;
}

bool Navigator::step() {
    if (finished()) return false;
    try {
        if (!started_) {
            const Observation o = plant_.observe();
            observed_ = o.position;
            state_.orientation.parity = o.parity;
            result_.trajectory.push_back(observed_);
            started_ = true;
        }
        // Skip every waypoint already satisfied, updating the orientation tag.
        while (state_.waypoint < waypoints_.size() && accept(state_.waypoint)) {
            state_.retry = 0;
            state_.ramp_level = 0.0;
            commanded_here_ = false;
            ++state_.waypoint;
        }
        if (state_.waypoint >= waypoints_.size()) {
            finish(NavStatus::Reached);
            return false;
        }
        if (commanded_here_) {
            if (state_.retry >= params_.r_max) {
                finish(NavStatus::AbortedStall, "waypoint " + std::to_string(state_.waypoint) + " not reached after " +
                                                    std::to_string(state_.retry) + " retries");
                return false;
            }
            ++state_.retry;
            state_.ramp_level = state_.retry * params_.ramp_step;
            result_.retries[state_.waypoint] = state_.retry;
        }

        const Eigen::Vector2d target = waypoints_[state_.waypoint];
        const Eigen::Vector2d d = target - observed_;
        Compass u = nearest_compass(std::atan2(d.y(), d.x()));
        if (params_.cardinal_only && is_diagonal(u)) {
            const double a = std::atan2(d.y(), d.x());
            const double ax = std::abs(std::cos(a)), ay = std::abs(std::sin(a));
            u = ax >= ay ? (d.x() >= 0 ? Compass::E : Compass::W) : (d.y() >= 0 ? Compass::N : Compass::S);
        }
        const ActuationKind kind = first_command_ ? ActuationKind::HelmholtzPulse : ActuationKind::HelmholtzMaxwell;
        state_.phase = first_command_ ? FsmPhase::Pulsing : (state_.retry > 0 ? FsmPhase::Ramping : FsmPhase::Stepping);

        MotionCommand cmd;
        try {
            cmd = realize_command(u, kind, state_.ramp_level, state_.orientation, coils_, params_.actuation);
        } catch (const SaturationError& e) {
            finish(NavStatus::AbortedSaturation, e.what());
            return false;
        }
        const double nominal = kind == ActuationKind::HelmholtzPulse ? params_.pulse_step : step_estimate_;
        const double along = std::max(0.0, d.dot(compass_unit(u)));
        cmd.fraction = std::clamp(along / nominal, params_.min_fraction, 1.0);

        const Observation o = plant_.execute(cmd, CycleContext{state_.waypoint, state_.retry});
        first_command_ = false;
        commanded_here_ = true;
        ++result_.cycles;
        // Learn the drive step from cycles that clearly moved; stalls are ignored.
        const double advance = (o.position - observed_).dot(compass_unit(u));
        if (kind == ActuationKind::HelmholtzMaxwell && advance > 0.25 * cmd.fraction * step_estimate_) {
            const double measured = advance / cmd.fraction;
            step_estimate_ += params_.step_learning * (measured - step_estimate_);
            step_estimate_ = std::clamp(step_estimate_, 0.3 * params_.maxwell_step, 2.0 * params_.maxwell_step);
        }
        observed_ = o.position;
        state_.orientation.parity = o.parity;
        if (accept(state_.waypoint)) state_.orientation.last_move = u;
        result_.trajectory.push_back(observed_);
        result_.log.push_back(NavStep{state_.waypoint, state_.retry, state_.phase, cmd, observed_});
    } catch (const PlantIoError& e) {
        finish(NavStatus::AbortedIo, e.what());
        return false;
    }
    return true;
}

NavResult navigate(const std::vector<Eigen::Vector2d>& waypoints, Plant& plant, const CoilSystem& coils,
                   const NavParams& params, const std::function<void(const NavStep&)>& on_step) {
    Navigator nav(waypoints, plant, coils, params);
    while (nav.step()) {
        if (on_step) on_step(nav.result().log.back());
    }
    return nav.result();
}

}  // namespace magbot
