#include "magbot/server.hpp"

#include <cmath>
#include <deque>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "magbot/errors.hpp"

namespace magbot {

namespace {

using json = nlohmann::json;

constexpr double kGripperPulse = 1.8e-3;      // T
constexpr double kSquarePulse = 2.0e-3;       // T
constexpr double kDisassemblyPulse = 13.9e-3; // T, 10% above the disassembly threshold

/// Raised for a command that is well formed but cannot be applied.
struct Rejected {
    std::string message;
};

json vec_mm(const Eigen::Vector2d& v) { return json::array({v.x() * 1e3, v.y() * 1e3}); }

Eigen::Vector2d read_vec2(const json& payload, const char* key, double scale) {
    if (!payload.contains(key)) throw Rejected{std::string("missing ") + key};
    const json& v = payload.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        throw Rejected{std::string(key) + " must be [x, y]"};
    return scale * Eigen::Vector2d(v[0].get<double>(), v[1].get<double>());
}

double read_number(const json& payload, const char* key, double def) {
    if (!payload.contains(key)) return def;
    const json& v = payload.at(key);
    if (!v.is_number() || !std::isfinite(v.get<double>())) throw Rejected{std::string(key) + " must be a number"};
    return v.get<double>();
}

json workspace_json(const Workspace& ws) {
    json obstacles = json::array();
    for (const auto& poly : ws.obstacles) {
        json p = json::array();
        for (const auto& v : poly.vertices) p.push_back(vec_mm(v));
        obstacles.push_back(p);
    }
    return {{"half_extent_mm", ws.half_extent * 1e3}, {"obstacles_mm", obstacles}};
}

}  // namespace

void ServerOptions::validate() const {
    if (!(speedup > 0.0)) throw InvalidSpecError("speedup must be positive");
    if (!(tick_period > 0.0) || tick_period > 0.05) throw InvalidSpecError("tick period must be in (0, 0.05] s");
    if (!(nav_cycle_period > 0.0)) throw InvalidSpecError("navigation cycle period must be positive");
    if (!(assemble_duration > 0.0)) throw InvalidSpecError("assemble duration must be positive");
}

struct ServerCore::State {
    struct Client {
        std::deque<std::string> outbox;
        std::uint64_t update_seq = 0;
        std::uint64_t event_seq = 0;
        bool needs_workspace = true;
    };
    struct Inbound {
        ClientId client;
        std::string text;
    };
    struct Navigation {
        std::unique_ptr<SimulatedPlant> plant;
        std::unique_ptr<Navigator> navigator;
        int module_id = 0;
        Eigen::Vector2d goal;
        long steps_until_cycle = 0;
    };
    struct Sequence {
        std::string name;
        FieldSequence field;
        double start = 0.0;
        std::size_t active = 0;
    };

    Scenario scenario;
    Simulator sim;
    World world;
    CoilCommand manual;          // last set_field
    CoilCommand applied;         // currents driving the coils this step
    bool saturated = false;
    bool paused = false;
    std::optional<ClientId> owner;
    ClientId next_id = 1;
    std::map<ClientId, Client> clients;
    std::deque<Inbound> inbox;
    std::optional<Navigation> nav;
    std::optional<Sequence> sequence;
    long nav_cycle_steps = 1;
    std::uint64_t nav_runs = 0;

    State(Scenario sc, const ServerOptions& opts)
        : scenario(std::move(sc)), sim(scenario.sim, scenario.coils), world(scenario.world) {
        nav_cycle_steps = std::max(1L, std::lround(opts.nav_cycle_period / scenario.sim.timestep));
    }

    bool busy() const { return nav.has_value() || sequence.has_value(); }

    void send(ClientId id, const json& msg) {
        auto it = clients.find(id);
        if (it != clients.end()) it->second.outbox.push_back(msg.dump());
    }

    void broadcast_event(const std::string& name, json payload) {
        payload["event"] = name;
        payload["t"] = world.time;
        for (auto& [id, c] : clients)
            c.outbox.push_back(json{{"type", "event"}, {"seq", ++c.event_seq}, {"payload", payload}}.dump());
    }

    void reply(ClientId id, const json& seq, bool ok, const std::string& command, json payload = json::object()) {
        if (!ok) {
            send(id, {{"type", "error"}, {"seq", seq}, {"payload", payload}});
            return;
        }
        payload["command"] = command;
        send(id, {{"type", "ack"}, {"seq", seq}, {"payload", payload}});
    }

    void error(ClientId id, const json& seq, const std::string& message) {
        reply(id, seq, false, {}, {{"message", message}});
    }

    void set_applied(const CoilCommand& cmd) {
        bool sat = false;
        applied = scenario.coils.clipped(cmd, &sat);
        saturated = sat;
    }

    void handle(ClientId id, const std::string& text, const ServerOptions& opts) {
        json msg;
        try {
            msg = json::parse(text);
        } catch (const json::parse_error&) {
            error(id, nullptr, "malformed message");
            return;
        }
        const json seq = msg.is_object() && msg.contains("seq") && msg["seq"].is_number_integer() ? msg["seq"] : json(nullptr);
        if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
            error(id, seq, "malformed message: missing type");
            return;
        }
        if (seq.is_null()) {
            error(id, seq, "malformed message: missing integer seq");
            return;
        }
        const std::string type = msg["type"];
        const json payload = msg.value("payload", json::object());
        if (!payload.is_object()) {
            error(id, seq, "malformed message: payload must be an object");
            return;
        }
        static const std::set<std::string> commands{"set_field", "set_goal", "start_sequence", "pause", "resume", "reset"};
        if (!commands.count(type)) {
            error(id, seq, "unknown command '" + type + "'");
            return;
        }
        if (owner && *owner != id) {
            error(id, seq, "field busy");
            return;
        }
        try {
            json result = json::object();
            if (type == "set_field") result = set_field(payload);
            else if (type == "set_goal") result = set_goal(payload);
            else if (type == "start_sequence") result = start_sequence(payload, opts);
            else if (type == "pause") paused = true;
            else if (type == "resume") paused = false;
            else if (type == "reset") reset();
            owner = id;
            reply(id, seq, true, type, result);
        } catch (const Rejected& r) {
            error(id, seq, r.message);
        } catch (const Error& e) {
            error(id, seq, e.what());
        }
    }

    json set_field(const json& p) {
        if (busy()) throw Rejected{"field busy"};
        CoilCommand cmd;
        if (p.contains("currents_A")) {
            const json& c = p.at("currents_A");
            if (!c.is_array() || c.size() != 4) throw Rejected{"currents_A must be [Hx, Hy, Mx, My]"};
            for (int k = 0; k < 4; ++k) {
                if (!c[k].is_number() || !std::isfinite(c[k].get<double>())) throw Rejected{"currents_A must be numbers"};
                cmd.currents[k] = c[k].get<double>();
            }
        } else {
            const Eigen::Vector2d b = read_vec2(p, "uniform_mT", 1e-3);
            const Eigen::Vector2d g = p.contains("gradient_mT_per_m") ? read_vec2(p, "gradient_mT_per_m", 1e-3)
                                                                      : Eigen::Vector2d::Zero();
            cmd = scenario.coils.currents_for(b, g);
        }
        manual = cmd;
        set_applied(cmd);
        return {{"currents_A", applied.currents}, {"saturated", saturated}};
    }

    json set_goal(const json& p) {
        if (busy()) throw Rejected{"field busy"};
        const Eigen::Vector2d goal = read_vec2(p, "goal_mm", 1e-3);
        const NavigationSettings& n = scenario.navigation;
        int module_id = 0;
        if (p.contains("module_id")) {
            if (!p["module_id"].is_number_integer()) throw Rejected{"module_id must be an integer"};
            module_id = p["module_id"];
            world.index_of(module_id);
        } else {
            const ModuleState* walker = nullptr;
            for (const auto& m : world.modules)
                if (n.module_id ? m.id == *n.module_id : m.type == ModuleType::Fixed) {
                    walker = &m;
                    break;
                }
            if (!walker) throw Rejected{"no module to navigate"};
            module_id = walker->id;
        }
        const ModuleState& m = world.module(module_id);
        const OccupancyGrid grid = build_grid(scenario.workspace, n.resolution, n.inflation);
        NavPlan path;
        try {
            path = plan(grid, grid.cell_at(m.position), grid.cell_at(goal), PlannerOptions{!n.params.cardinal_only});
        } catch (const InvalidEndpointError& e) {
            throw Rejected{std::string("goal in obstacle or outside the workspace: ") + e.what()};
        }
        std::vector<Eigen::Vector2d> waypoints = waypoint_positions(grid, path, n.waypoint_spacing);
        Navigation nv;
        nv.module_id = module_id;
        nv.goal = goal;
        nv.plant = std::make_unique<SimulatedPlant>(m, scenario.workspace, scenario.sim, n.plant, n.seed + nav_runs++);
        nv.navigator = std::make_unique<Navigator>(waypoints, *nv.plant, scenario.coils, n.params);
        nv.steps_until_cycle = 0;
        nav = std::move(nv);
        json wps = json::array();
        for (const auto& w : waypoints) wps.push_back(vec_mm(w));
        broadcast_event("nav_started", {{"module_id", module_id}, {"goal_mm", vec_mm(goal)}, {"waypoints_mm", wps}});
        return {{"module_id", module_id}, {"waypoints_mm", wps}};
    }

    json start_sequence(const json& p, const ServerOptions& opts) {
        if (busy()) throw Rejected{"field busy"};
        if (!p.contains("name") || !p["name"].is_string()) throw Rejected{"missing sequence name"};
        const std::string name = p["name"];
        FieldSequence field;
        if (name == "scenario") {
            field = scenario.sequence;
        } else {
            FieldProgram prog;
            if (name == "assemble")
                prog = assembly_program(read_number(p, "pulse_mT", 0.0) * 1e-3, read_number(p, "duration_s", opts.assemble_duration));
            else if (name == "gripper") prog = gripper_program(read_number(p, "pulse_mT", kGripperPulse * 1e3) * 1e-3);
            else if (name == "square") prog = square_program(read_number(p, "pulse_mT", kSquarePulse * 1e3) * 1e-3);
            else if (name == "disassemble")
                prog = disassembly_program(read_number(p, "pulse_mT", kDisassemblyPulse * 1e3) * 1e-3,
                                           read_number(p, "duration_s", 0.2));
            else throw Rejected{"unknown sequence '" + name + "' (assemble, gripper, square, disassemble, scenario)"};
            field = prog.compile(scenario.coils);
        }
        sequence = Sequence{name, std::move(field), world.time, 0};
        broadcast_event("sequence_started", {{"name", name}, {"duration_s", sequence->field.end_time}});
        return {{"name", name}, {"duration_s", sequence->field.end_time}};
    }

    void reset() {
        const double t = world.time;
        world = scenario.world;
        world.time = t;  // the clock never runs backwards
        nav.reset();
        sequence.reset();
        manual = CoilCommand{};
        set_applied(manual);
        for (auto& [id, c] : clients) c.needs_workspace = true;
    }

    void finish_navigation() {
        const NavResult& r = nav->navigator->result();
        const double err = (world.module(nav->module_id).position - nav->goal).norm();
        if (r.status == NavStatus::Reached) {
            broadcast_event("goal_reached", {{"module_id", nav->module_id}, {"final_error_mm", err * 1e3}, {"cycles", r.cycles}});
        } else {
            json e{{"status", to_string(r.status)}, {"cycles", r.cycles}, {"final_error_mm", err * 1e3}};
            e["failed_waypoint"] = r.failed_waypoint ? json(*r.failed_waypoint) : json(nullptr);
            if (!r.error.empty()) e["error"] = r.error;
            broadcast_event("nav_aborted", e);
        }
        nav.reset();
        set_applied(manual);
    }

    void navigation_cycle() {
        Navigation& nv = *nav;
        if (nv.navigator->finished() || !nv.navigator->step()) {
            finish_navigation();
            return;
        }
        const NavResult& r = nv.navigator->result();
        ModuleState& m = world.module(nv.module_id);
        m.position = nv.plant->module().position;
        m.moment = nv.plant->module().moment;
        if (!r.log.empty()) {
            const NavStep& s = r.log.back();
            set_applied(s.command.currents);
            broadcast_event("nav_progress", {{"waypoint", s.waypoint},
                                             {"retry", s.retry},
                                             {"phase", to_string(s.phase)},
                                             {"direction", to_string(s.command.direction)},
                                             {"kind", to_string(s.command.kind)},
                                             {"observed_mm", vec_mm(s.observed)}});
        }
        if (nv.navigator->finished()) finish_navigation();
    }

    void step_once() {
        if (nav) {
            if (nav->steps_until_cycle-- <= 0) {
                nav->steps_until_cycle = nav_cycle_steps - 1;
                navigation_cycle();
            }
            world.time += scenario.sim.timestep;
            return;
        }
        if (sequence) {
            const double tau = world.time - sequence->start;
            const auto& cmds = sequence->field.commands;
            if (tau >= sequence->field.end_time - 1e-12) {
                broadcast_event("sequence_complete", {{"name", sequence->name}});
                sequence.reset();
                set_applied(manual);
            } else if (!cmds.empty()) {
                while (sequence->active + 1 < cmds.size() && cmds[sequence->active + 1].timestamp <= tau + 1e-12)
                    ++sequence->active;
                set_applied(cmds[sequence->active].timestamp <= tau + 1e-12 ? cmds[sequence->active] : CoilCommand{});
            }
        }
        if (world.modules.empty()) {
            world.time += scenario.sim.timestep;
            return;
        }
        for (const auto& e : sim.step(world, applied)) {
            json p{{"participants", e.participants}};
            if (!e.label.empty()) p["label"] = e.label;
            broadcast_event(to_string(e.kind), p);
        }
    }

    void queue_updates() {
        const FieldSample f = scenario.coils.field_in_plane(applied, Eigen::Vector2d::Zero());
        json modules = json::array();
        for (const auto& m : world.modules)
            modules.push_back({{"id", m.id},
                               {"type", to_string(m.type)},
                               {"p_mm", vec_mm(m.position)},
                               {"m", {m.moment.x(), m.moment.y(), m.moment.z()}}});
        json bonds = json::array();
        for (const auto& [a, b] : world.bond_list()) bonds.push_back({a, b});
        json base{{"t", world.time},
                  {"paused", paused},
                  {"modules", modules},
                  {"bonds", bonds},
                  {"currents_A", applied.currents},
                  {"field_mT", f.uniform.norm() * 1e3},
                  {"field_ceiling_mT", scenario.coils.uniform_ceiling() * 1e3},
                  {"saturated", saturated},
                  {"navigating", nav.has_value()},
                  {"sequence", sequence ? json(sequence->name) : json(nullptr)}};
        if (nav) base["waypoint"] = nav->navigator->state().waypoint;
        for (auto& [id, c] : clients) {
            json p = base;
            p["owner"] = !owner ? "none" : *owner == id ? "you" : "other";
            if (c.needs_workspace) {
                p["workspace"] = workspace_json(scenario.workspace);
                p["protocol_version"] = kProtocolVersion;
                c.needs_workspace = false;
            }
            c.outbox.push_back(json{{"type", "state_update"}, {"seq", ++c.update_seq}, {"payload", p}}.dump());
        }
    }
};

ServerCore::ServerCore(Scenario scenario, ServerOptions options) : options_(options) {
    options_.validate();
    state_ = std::make_unique<State>(std::move(scenario), options_);
}

ServerCore::~ServerCore() = default;

ClientId ServerCore::connect() {
    std::lock_guard lock(mutex_);
    const ClientId id = state_->next_id++;
    state_->clients[id];
    return id;
}

void ServerCore::disconnect(ClientId id) {
    std::lock_guard lock(mutex_);
    state_->clients.erase(id);
    if (state_->owner == id) state_->owner.reset();
}

void ServerCore::submit(ClientId id, std::string message) {
    std::lock_guard lock(mutex_);
    if (state_->clients.count(id)) state_->inbox.push_back({id, std::move(message)});
}

void ServerCore::tick(int steps) {
    std::lock_guard lock(mutex_);
    State& s = *state_;
    while (!s.inbox.empty()) {
        const auto in = std::move(s.inbox.front());
        s.inbox.pop_front();
        s.handle(in.client, in.text, options_);
    }
    if (!s.paused) {
        try {
            for (int i = 0; i < steps; ++i) s.step_once();
        } catch (const SimulationDivergedError& e) {
            s.paused = true;
            s.nav.reset();
            s.sequence.reset();
            s.broadcast_event("diverged", {{"error", e.what()}});
        }
    }
    s.queue_updates();
}

int ServerCore::steps_per_tick() const {
    return std::max(1, static_cast<int>(std::lround(options_.tick_period * options_.speedup / state_->scenario.sim.timestep)));
}

std::vector<std::string> ServerCore::take(ClientId id) {
    std::lock_guard lock(mutex_);
    auto it = state_->clients.find(id);
    if (it == state_->clients.end()) return {};
    std::vector<std::string> out(std::make_move_iterator(it->second.outbox.begin()),
                                 std::make_move_iterator(it->second.outbox.end()));
    it->second.outbox.clear();
    return out;
}

double ServerCore::time() const {
    std::lock_guard lock(mutex_);
    return state_->world.time;
}

bool ServerCore::paused() const {
    std::lock_guard lock(mutex_);
    return state_->paused;
}

bool ServerCore::navigating() const {
    std::lock_guard lock(mutex_);
    return state_->nav.has_value();
}

std::optional<ClientId> ServerCore::owner() const {
    std::lock_guard lock(mutex_);
    return state_->owner;
}

CoilCommand ServerCore::currents() const {
    std::lock_guard lock(mutex_);
    return state_->applied;
}

World ServerCore::world() const {
    std::lock_guard lock(mutex_);
    return state_->world;
}

}  // namespace magbot
