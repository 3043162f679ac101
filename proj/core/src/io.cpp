#include "magbot/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "magbot/errors.hpp"

namespace magbot {

namespace {

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
    throw ParseError((path.empty() ? std::string("/") : path) + ": " + msg);
}

json parse_text(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ParseError(what + " line " + std::to_string(line) + ", column " + std::to_string(col) +
                         ": syntax error");
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// Object view that checks keys and types and reports JSON paths.
class Obj {
public:
    Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(path_, "expected an object");
    }

    void allow(std::initializer_list<const char*> keys) const {
        const std::set<std::string> ok(keys.begin(), keys.end());
        for (const auto& [k, v] : j_.items())
            if (!ok.count(k)) fail(path_ + "/" + k, "unknown field");
    }
    bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
    const json& raw(const char* key) const {
        if (!has(key)) fail(path_ + "/" + key, "missing field");
        return j_.at(key);
    }
    std::string sub(const char* key) const { return path_ + "/" + key; }
    Obj obj(const char* key) const { return Obj(raw(key), sub(key)); }

    double num(const char* key) const {
        const json& v = raw(key);
        if (!v.is_number()) fail(sub(key), "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) fail(sub(key), "expected a finite number");
        return d;
    }
    double num(const char* key, double def) const { return has(key) ? num(key) : def; }
    int integer(const char* key) const {
        const json& v = raw(key);
        if (!v.is_number_integer()) fail(sub(key), "expected an integer");
        return v.get<int>();
    }
    int integer(const char* key, int def) const { return has(key) ? integer(key) : def; }
    std::uint64_t u64(const char* key, std::uint64_t def) const {
        if (!has(key)) return def;
        const json& v = raw(key);
        if (!v.is_number_unsigned()) fail(sub(key), "expected a non-negative integer");
        return v.get<std::uint64_t>();
    }
    bool boolean(const char* key, bool def) const {
        if (!has(key)) return def;
        const json& v = raw(key);
        if (!v.is_boolean()) fail(sub(key), "expected true or false");
        return v.get<bool>();
    }
    std::string str(const char* key) const {
        const json& v = raw(key);
        if (!v.is_string()) fail(sub(key), "expected a string");
        return v.get<std::string>();
    }
    std::string str(const char* key, const std::string& def) const { return has(key) ? str(key) : def; }
    Eigen::Vector2d vec2(const char* key, double scale) const { return to_vec2(raw(key), sub(key), scale); }

    static Eigen::Vector2d to_vec2(const json& v, const std::string& path, double scale) {
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
            fail(path, "expected [x, y]");
        return scale * Eigen::Vector2d(v[0].get<double>(), v[1].get<double>());
    }

    template <class F>
    auto convert(const char* key, F&& f) const {
        try {
            return f();
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            fail(sub(key), e.what());
        }
    }

private:
    const json& j_;
    std::string path_;
};

void check_version(const Obj& o, const char* format, int version) {
    if (o.has("format") && o.str("format") != format)
        fail(o.sub("format"), std::string("expected \"") + format + "\"");
    const int v = o.integer("version");
    if (v != version) fail(o.sub("version"), "unsupported version " + std::to_string(v));
}

void apply_sim(const Obj& o, SimConfig& cfg) {
    o.allow({"timestep_s", "drag_Ns_per_m", "static_friction_N", "cutoff_mm", "stall_probability", "seed",
             "sample_interval_s", "bond_form_factor", "bond_slack_mm", "contact_tolerance_mm"});
    cfg.timestep = o.num("timestep_s", cfg.timestep);
    cfg.drag = o.num("drag_Ns_per_m", cfg.drag);
    cfg.static_friction = o.num("static_friction_N", cfg.static_friction);
    cfg.cutoff = o.num("cutoff_mm", cfg.cutoff * 1e3) * 1e-3;
    cfg.stall_probability = o.num("stall_probability", cfg.stall_probability);
    cfg.seed = o.u64("seed", cfg.seed);
    cfg.sample_interval = o.num("sample_interval_s", cfg.sample_interval);
    cfg.bond_form_factor = o.num("bond_form_factor", cfg.bond_form_factor);
    cfg.bond_slack = o.num("bond_slack_mm", cfg.bond_slack * 1e3) * 1e-3;
    cfg.contact_tolerance = o.num("contact_tolerance_mm", cfg.contact_tolerance * 1e3) * 1e-3;
    try {
        cfg.validate();
    } catch (const InvalidSpecError& e) {
        fail(o.sub(""), e.what());
    }
}

Workspace parse_workspace(const Obj& o) {
    o.allow({"preset", "half_extent_mm", "obstacles_mm"});
    if (o.has("preset")) {
        const std::string p = o.str("preset");
        if (p == "maze") return reference_maze();
        if (p == "plain") return Workspace{};
        fail(o.sub("preset"), "unknown workspace preset '" + p + "' (maze, plain)");
    }
    Workspace ws;
    ws.half_extent = o.num("half_extent_mm", 17.5) * 1e-3;
    if (!(ws.half_extent > 0.0)) fail(o.sub("half_extent_mm"), "must be positive");
    if (o.has("obstacles_mm")) {
        const json& arr = o.raw("obstacles_mm");
        if (!arr.is_array()) fail(o.sub("obstacles_mm"), "expected a list of polygons");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string path = o.sub("obstacles_mm") + "/" + std::to_string(i);
            if (!arr[i].is_array() || arr[i].size() < 3) fail(path, "a polygon needs at least three vertices");
            Polygon poly;
            for (std::size_t k = 0; k < arr[i].size(); ++k)
                poly.vertices.push_back(Obj::to_vec2(arr[i][k], path + "/" + std::to_string(k), 1e-3));
            ws.obstacles.push_back(std::move(poly));
        }
    }
    return ws;
}

World parse_modules(const json& j, const std::string& path, const SimConfig& cfg) {
    if (j.is_object()) {
        const Obj o(j, path);
        o.allow({"preset", "separation_mm"});
        const std::string p = o.str("preset");
        if (p == "gripper_chain") return gripper_chain();
        if (p == "square_chain") return square_chain();
        if (p == "disassembly_chain") return disassembly_chain();
        if (p == "assembly_pair") return o.convert("separation_mm", [&] { return assembly_pair(o.num("separation_mm") * 1e-3); });
        fail(o.sub("preset"), "unknown roster preset '" + p + "'");
    }
    if (!j.is_array()) fail(path, "expected a list of modules or a preset object");
    World w;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const Obj o(j[i], path + "/" + std::to_string(i));
        o.allow({"id", "type", "position_mm", "moment_angle_deg", "magnet_offset_mm", "heading_deg"});
        ModuleState m;
        m.id = o.integer("id");
        m.type = o.convert("type", [&] { return module_type_from_string(o.str("type")); });
        m.position = o.vec2("position_mm", 1e-3);
        m.heading = o.num("heading_deg", 0.0) * kPi / 180.0;
        if (o.has("magnet_offset_mm")) m.magnet_offset = o.vec2("magnet_offset_mm", 1e-3);
        if (m.magnet_offset.norm() > max_magnet_offset(m.type, cfg.magnet) + 1e-12)
            fail(o.sub("magnet_offset_mm"), "magnet does not fit in the cavity");
        const double mag = cfg.magnet.moment_magnitude();
        // Fixed magnets lie along the cube heading; loose ones rest out of plane unless given an angle.
        if (o.has("moment_angle_deg")) m.moment = in_plane_moment(o.num("moment_angle_deg") * kPi / 180.0, mag);
        else m.moment = m.type == ModuleType::Fixed ? in_plane_moment(m.heading, mag) : resting_moment(mag);
        w.modules.push_back(std::move(m));
    }
    return w;
}

FieldProgram parse_program(const json& j, const std::string& path) {
    if (!j.is_array()) fail(path, "expected a list of field segments");
    FieldProgram p;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string ip = path + "/" + std::to_string(i);
        if (!j[i].is_object() || j[i].size() != 1) fail(ip, "expected one of {hold|ramp|rotate|preset: {...}}");
        const auto it = j[i].begin();
        const std::string kind = it.key();
        const Obj o(it.value(), ip + "/" + kind);
        auto guard = [&](auto&& f) {
            try {
                f();
            } catch (const ParseError&) {
                throw;
            } catch (const Error& e) {
                fail(ip, e.what());
            }
        };
        if (kind == "hold") {
            o.allow({"uniform_mT", "gradient_mT_per_m", "duration_s"});
            const Eigen::Vector2d g = o.has("gradient_mT_per_m") ? o.vec2("gradient_mT_per_m", 1e-3) : Eigen::Vector2d::Zero();
            guard([&] { p.hold(o.vec2("uniform_mT", 1e-3), o.num("duration_s"), g); });
        } else if (kind == "ramp") {
            o.allow({"from_mT", "to_mT", "duration_s", "steps"});
            guard([&] { p.ramp(o.vec2("from_mT", 1e-3), o.vec2("to_mT", 1e-3), o.num("duration_s"), o.integer("steps", 25)); });
        } else if (kind == "rotate") {
            o.allow({"magnitude_mT", "from_deg", "to_deg", "duration_s", "steps"});
            guard([&] {
                p.rotate(o.num("magnitude_mT") * 1e-3, o.num("from_deg") * kPi / 180.0, o.num("to_deg") * kPi / 180.0,
                         o.num("duration_s"), o.integer("steps", 50));
            });
        } else if (kind == "preset") {
            o.allow({"name", "pulse_mT", "duration_s", "second_pulse_mT"});
            const std::string name = o.str("name");
            if (name == "gripper") p.append(gripper_program(o.num("pulse_mT") * 1e-3));
            else if (name == "square") p.append(square_program(o.num("pulse_mT") * 1e-3, o.num("second_pulse_mT", 3.0) * 1e-3));
            else if (name == "disassembly") guard([&] { p.append(disassembly_program(o.num("pulse_mT") * 1e-3, o.num("duration_s", 0.2))); });
            else if (name == "assembly") guard([&] { p.append(assembly_program(o.num("pulse_mT", 0.0) * 1e-3, o.num("duration_s"))); });
            else fail(o.sub("name"), "unknown program preset '" + name + "'");
        } else {
            fail(ip + "/" + kind, "unknown segment kind");
        }
    }
    return p;
}

FieldSequence parse_field(const Obj& o, const CoilSystem& coils) {
    o.allow({"program", "commands", "end_s"});
    if (o.has("program") == o.has("commands")) fail(o.sub(""), "give exactly one of program or commands");
    if (o.has("program")) {
        const FieldProgram p = parse_program(o.raw("program"), o.sub("program"));
        return o.convert("program", [&] { return p.compile(coils); });
    }
    const json& arr = o.raw("commands");
    if (!arr.is_array()) fail(o.sub("commands"), "expected a list");
    FieldSequence seq;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const Obj c(arr[i], o.sub("commands") + "/" + std::to_string(i));
        c.allow({"t_s", "currents_A"});
        CoilCommand cmd;
        cmd.timestamp = c.num("t_s");
        const json& cur = c.raw("currents_A");
        if (!cur.is_array() || cur.size() != 4) fail(c.sub("currents_A"), "expected [Hx, Hy, Mx, My]");
        for (int k = 0; k < 4; ++k) {
            if (!cur[k].is_number()) fail(c.sub("currents_A"), "expected numbers");
            cmd.currents[k] = cur[k].get<double>();
        }
        if (!seq.commands.empty() && cmd.timestamp < seq.commands.back().timestamp)
            fail(c.sub("t_s"), "timestamps must be nondecreasing");
        seq.commands.push_back(cmd);
    }
    seq.end_time = o.num("end_s", seq.commands.empty() ? 0.0 : seq.commands.back().timestamp);
    if (!seq.commands.empty() && seq.end_time < seq.commands.back().timestamp)
        fail(o.sub("end_s"), "sequence ends before its last command");
    return seq;
}

void parse_navigation(const Obj& o, NavigationSettings& n) {
    o.allow({"module_id", "tolerance_mm", "r_max", "ramp_step_A", "guard_mm", "min_fraction", "cardinal_only",
             "observation_sigma_mm", "frames", "resolution_mm", "inflation_mm", "waypoint_spacing_mm", "seed",
             "forced_stall_waypoint", "helmholtz_base_A", "maxwell_base_A"});
    if (o.has("module_id")) n.module_id = o.integer("module_id");
    n.params.tolerance = o.num("tolerance_mm", n.params.tolerance * 1e3) * 1e-3;
    n.params.r_max = o.integer("r_max", n.params.r_max);
    n.params.ramp_step = o.num("ramp_step_A", n.params.ramp_step);
    n.params.guard = o.num("guard_mm", n.params.guard * 1e3) * 1e-3;
    n.params.min_fraction = o.num("min_fraction", n.params.min_fraction);
    n.params.cardinal_only = o.boolean("cardinal_only", n.params.cardinal_only);
    n.params.actuation.helmholtz_base = o.num("helmholtz_base_A", n.params.actuation.helmholtz_base);
    n.params.actuation.maxwell_base = o.num("maxwell_base_A", n.params.actuation.maxwell_base);
    n.plant.observation_sigma = o.num("observation_sigma_mm", n.plant.observation_sigma * 1e3) * 1e-3;
    n.plant.frames = o.integer("frames", n.plant.frames);
    if (o.has("forced_stall_waypoint")) {
        const int w = o.integer("forced_stall_waypoint");
        if (w < 0) fail(o.sub("forced_stall_waypoint"), "must be non-negative");
        n.plant.forced_stall_waypoint = static_cast<std::size_t>(w);
    }
    n.resolution = o.num("resolution_mm", n.resolution * 1e3) * 1e-3;
    n.inflation = o.num("inflation_mm", n.inflation * 1e3) * 1e-3;
    n.waypoint_spacing = o.num("waypoint_spacing_mm", n.waypoint_spacing * 1e3) * 1e-3;
    n.seed = o.u64("seed", n.seed);
    if (!(n.resolution > 0.0)) fail(o.sub("resolution_mm"), "must be positive");
    if (!(n.inflation >= 0.0)) fail(o.sub("inflation_mm"), "must be non-negative");
    if (!(n.waypoint_spacing > 0.0)) fail(o.sub("waypoint_spacing_mm"), "must be positive");
    try {
        n.params.validate();
    } catch (const InvalidSpecError& e) {
        fail(o.sub(""), e.what());
    }
}

void parse_calibration_overrides(const Obj& o, Scenario& s) {
    o.allow({"Hx_T_per_A", "Hy_T_per_A", "Mx_T_per_m_per_A", "My_T_per_m_per_A", "max_current_A"});
    Calibration cal = s.coils.calibration();
    cal.k_hx = o.num("Hx_T_per_A", cal.k_hx);
    cal.k_hy = o.num("Hy_T_per_A", cal.k_hy);
    cal.k_mx = o.num("Mx_T_per_m_per_A", cal.k_mx);
    cal.k_my = o.num("My_T_per_m_per_A", cal.k_my);
    auto specs = s.coils.specs();
    if (o.has("max_current_A")) {
        const double lim = o.num("max_current_A");
        if (!(lim > 0.0)) fail(o.sub("max_current_A"), "must be positive");
        for (auto& sp : specs) sp.max_current = lim;
    }
    s.coils = CoilSystem(specs, cal, s.workspace.half_extent);
}

json vec(const Eigen::Vector2d& v, double scale = 1.0) { return json::array({v.x() * scale, v.y() * scale}); }

json event_json(const SimEvent& e) {
    json j{{"kind", "event"}, {"t", e.time}, {"event", to_string(e.kind)}, {"participants", e.participants}};
    if (!e.label.empty()) j["label"] = e.label;
    return j;
}

}  // namespace

void validate_world(const World& world, const Workspace& ws, double contact_tolerance) {
    std::set<int> ids;
    for (const auto& m : world.modules) {
        if (!ids.insert(m.id).second) throw InvalidSpecError("duplicate module id " + std::to_string(m.id));
        const double reach = m.position.cwiseAbs().maxCoeff() + kModuleEdge / 2.0;
        if (reach > ws.half_extent + 1e-12)
            throw InvalidSpecError("module " + std::to_string(m.id) + " lies outside the workspace");
        for (const auto& poly : ws.obstacles)
            if (poly.contains(m.position))
                throw InvalidSpecError("module " + std::to_string(m.id) + " lies inside an obstacle");
    }
    for (std::size_t i = 0; i < world.modules.size(); ++i)
        for (std::size_t j = i + 1; j < world.modules.size(); ++j)
            if (footprint_overlap(world.modules[i], world.modules[j]) > contact_tolerance)
                throw InvalidSpecError("modules " + std::to_string(world.modules[i].id) + " and " +
                                       std::to_string(world.modules[j].id) + " overlap");
    for (const auto& m : world.modules)
        for (int b : m.bonds)
            if (!ids.count(b)) throw InvalidSpecError("bond to unknown module " + std::to_string(b));
}

Scenario parse_scenario(const std::string& text) {
    const json root = parse_text(text, "scenario");
    const Obj o(root, "");
    o.allow({"format", "version", "name", "workspace", "modules", "bonds", "calibration", "sim", "field", "duration_s",
             "goal_mm", "navigation"});
    check_version(o, "magbot-scenario", kScenarioVersion);
    Scenario s;
    s.name = o.str("name", s.name);
    if (o.has("workspace")) s.workspace = parse_workspace(o.obj("workspace"));
    s.coils = CoilSystem(default_coil_specs(), calibration_constants(default_coil_specs()), s.workspace.half_extent);
    if (o.has("calibration")) parse_calibration_overrides(o.obj("calibration"), s);
    if (o.has("sim")) apply_sim(o.obj("sim"), s.sim);
    if (o.has("modules")) s.world = parse_modules(o.raw("modules"), "/modules", s.sim);
    s.world.half_extent = s.workspace.half_extent;
    if (o.has("bonds")) {
        const json& b = o.raw("bonds");
        if (!b.is_array()) fail("/bonds", "expected a list of [a, b] pairs");
        for (std::size_t i = 0; i < b.size(); ++i) {
            const std::string p = "/bonds/" + std::to_string(i);
            if (!b[i].is_array() || b[i].size() != 2 || !b[i][0].is_number_integer() || !b[i][1].is_number_integer())
                fail(p, "expected [a, b]");
            try {
                s.world.add_bond(b[i][0].get<int>(), b[i][1].get<int>());
            } catch (const Error& e) {
                fail(p, e.what());
            }
        }
    }
    try {
        validate_world(s.world, s.workspace, s.sim.contact_tolerance);
    } catch (const InvalidSpecError& e) {
        fail("/modules", e.what());
    }
    if (o.has("field")) s.sequence = parse_field(o.obj("field"), s.coils);
    s.duration = o.num("duration_s", s.sequence.end_time);
    if (!(s.duration >= 0.0)) fail("/duration_s", "must be non-negative");
    if (o.has("goal_mm")) s.goal = o.vec2("goal_mm", 1e-3);
    if (o.has("navigation")) parse_navigation(o.obj("navigation"), s.navigation);
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    try {
        return parse_scenario(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

TraceSample trace_sample(const World& w) {
    TraceSample s;
    s.time = w.time;
    for (const auto& m : w.modules) s.modules.push_back({m.id, m.position, m.moment});
    s.bonds = w.bond_list();
    return s;
}

TraceWriter::TraceWriter(std::ostream& out, const TraceHeader& h) : out_(out) {
    const json j{{"format", "magbot-trace"}, {"version", h.version},        {"scenario", h.scenario},
                 {"timestep_s", h.timestep}, {"sample_interval_s", h.sample_interval}, {"seed", h.seed}};
    out_ << j.dump() << '\n';
}

void TraceWriter::sample(const World& w) {
    const TraceSample s = trace_sample(w);
    json mods = json::array();
    for (const auto& m : s.modules)
        mods.push_back({{"id", m.id}, {"p", vec(m.position)}, {"m", {m.moment.x(), m.moment.y(), m.moment.z()}}});
    json bonds = json::array();
    for (const auto& [a, b] : s.bonds) bonds.push_back({a, b});
    out_ << json{{"kind", "sample"}, {"t", s.time}, {"modules", mods}, {"bonds", bonds}}.dump() << '\n';
}

void TraceWriter::event(const SimEvent& e) { out_ << event_json(e).dump() << '\n'; }

void TraceWriter::end(const std::string& status, double time, const std::string& error) {
    json j{{"kind", "end"}, {"t", time}, {"status", status}};
    if (!error.empty()) j["error"] = error;
    out_ << j.dump() << '\n';
    out_.flush();
}

Trace read_trace(std::istream& in) {
    Trace t;
    std::string line;
    int line_no = 0;
    bool header = false, ended = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = "trace line " + std::to_string(line_no);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error&) {
            throw ParseError(where + ": malformed JSON");
        }
        try {
            if (!header) {
                if (j.value("format", "") != "magbot-trace") throw ParseError(where + ": not a trace header");
                const int v = j.at("version").get<int>();
                if (v != kTraceVersion) throw ParseError(where + ": unsupported trace version " + std::to_string(v));
                t.header.version = v;
                t.header.scenario = j.at("scenario").get<std::string>();
                t.header.timestep = j.at("timestep_s").get<double>();
                t.header.sample_interval = j.at("sample_interval_s").get<double>();
                t.header.seed = j.at("seed").get<std::uint64_t>();
                header = true;
                continue;
            }
            if (ended) throw ParseError(where + ": record after the end record");
            const std::string kind = j.at("kind").get<std::string>();
            if (kind == "sample") {
                TraceSample s;
                s.time = j.at("t").get<double>();
                for (const auto& m : j.at("modules")) {
                    const auto p = m.at("p"), mm = m.at("m");
                    s.modules.push_back({m.at("id").get<int>(), {p.at(0).get<double>(), p.at(1).get<double>()},
                                         {mm.at(0).get<double>(), mm.at(1).get<double>(), mm.at(2).get<double>()}});
                }
                for (const auto& b : j.at("bonds")) s.bonds.emplace_back(b.at(0).get<int>(), b.at(1).get<int>());
                t.samples.push_back(std::move(s));
            } else if (kind == "event") {
                SimEvent e;
                e.time = j.at("t").get<double>();
                e.kind = sim_event_kind_from_string(j.at("event").get<std::string>());
                e.participants = j.at("participants").get<std::vector<int>>();
                e.label = j.value("label", "");
                t.events.push_back(std::move(e));
            } else if (kind == "end") {
                t.status = j.at("status").get<std::string>();
                t.error = j.value("error", "");
                ended = true;
            } else {
                throw ParseError(where + ": unknown record kind '" + kind + "'");
            }
        } catch (const json::exception& e) {
            throw ParseError(where + ": " + e.what());
        } catch (const InvalidSpecError& e) {
            throw ParseError(where + ": " + e.what());
        }
    }
    if (!header) throw ParseError("trace has no header");
    if (!ended) throw ParseError("trace has no end record");
    return t;
}

Trace read_trace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    return read_trace(in);
}

SimulateOutcome simulate_scenario(const Scenario& sc, std::ostream& trace, const SimulateOptions& opts) {
    SimConfig cfg = sc.sim;
    if (opts.seed) cfg.seed = *opts.seed;
    const Simulator sim(cfg, sc.coils);
    TraceWriter writer(trace, {kTraceVersion, sc.name, cfg.timestep, cfg.sample_interval, cfg.seed});
    SimulateOutcome out;
    World w = sc.world;
    const double duration = opts.duration.value_or(sc.duration);
    if (!(duration >= 0.0)) throw InvalidSpecError("duration must be non-negative");
    if (w.modules.empty()) {
        writer.end("completed", 0.0);
        out.final_world = w;
        return out;
    }
    const auto& cmds = sc.sequence.commands;
    const long steps = std::lround(duration / cfg.timestep);
    const long sample_every = std::max(1L, std::lround(cfg.sample_interval / cfg.timestep));
    const CoilCommand idle{};
    std::size_t active = 0;
    writer.sample(w);
    try {
        for (long s = 0; s < steps; ++s) {
            const double tau = static_cast<double>(s) * cfg.timestep;
            while (active + 1 < cmds.size() && cmds[active + 1].timestamp <= tau + 1e-12) ++active;
            const CoilCommand& cmd = !cmds.empty() && cmds[active].timestamp <= tau + 1e-12 ? cmds[active] : idle;
            for (const auto& e : sim.step(w, cmd)) {
                writer.event(e);
                out.events.push_back(e);
            }
            if ((s + 1) % sample_every == 0) writer.sample(w);
        }
        if (steps % sample_every != 0) writer.sample(w);
        writer.end("completed", w.time);
    } catch (const SimulationDivergedError& e) {
        out.diverged = true;
        out.error = e.what();
        writer.end("diverged", w.time, e.what());
    }
    out.final_world = std::move(w);
    return out;
}

NavigateOutcome navigate_scenario(const Scenario& sc) {
    if (!sc.goal) throw InvalidSpecError("scenario has no navigation goal");
    const NavigationSettings& n = sc.navigation;
    const ModuleState* walker = nullptr;
    for (const auto& m : sc.world.modules) {
        if (n.module_id ? m.id == *n.module_id : m.type == ModuleType::Fixed) {
            walker = &m;
            break;
        }
    }
    if (!walker) throw InvalidSpecError("scenario has no module to navigate");
    NavigateOutcome out;
    const OccupancyGrid grid = build_grid(sc.workspace, n.resolution, n.inflation);
    out.plan = plan(grid, grid.cell_at(walker->position), grid.cell_at(*sc.goal),
                    PlannerOptions{!n.params.cardinal_only});
    out.waypoints = waypoint_positions(grid, out.plan, n.waypoint_spacing);
    SimulatedPlant plant(*walker, sc.workspace, sc.sim, n.plant, n.seed);
    out.result = navigate(out.waypoints, plant, sc.coils, n.params);
    out.truth = plant.truth();
    out.final_error = (plant.module().position - *sc.goal).norm();
    return out;
}

std::string nav_result_json(const NavigateOutcome& o) {
    const NavResult& r = o.result;
    json steps = json::array();
    for (const auto& s : r.log) {
        steps.push_back({{"waypoint", s.waypoint},
                         {"retry", s.retry},
                         {"phase", to_string(s.phase)},
                         {"direction", to_string(s.command.direction)},
                         {"kind", to_string(s.command.kind)},
                         {"currents_A", s.command.currents.currents},
                         {"fraction", s.command.fraction},
                         {"observed_mm", vec(s.observed, 1e3)}});
    }
    json wps = json::array(), truth = json::array();
    for (const auto& w : o.waypoints) wps.push_back(vec(w, 1e3));
    for (const auto& p : o.truth) truth.push_back(vec(p, 1e3));
    json j{{"format", "magbot-navlog"},
           {"version", 1},
           {"status", to_string(r.status)},
           {"reached", r.reached},
           {"cycles", r.cycles},
           {"final_error_mm", o.final_error * 1e3},
           {"plan_cost_cells", o.plan.cost.value()},
           {"retries", r.retries},
           {"waypoints_mm", wps},
           {"steps", steps},
           {"truth_mm", truth}};
    j["failed_waypoint"] = r.failed_waypoint ? json(*r.failed_waypoint) : json(nullptr);
    if (!r.error.empty()) j["error"] = r.error;
    return j.dump(1);
}

ExperimentSpec parse_experiment(const std::string& text) {
    const json root = parse_text(text, "experiment");
    const Obj o(root, "");
    o.allow({"format", "version", "id", "kind", "trials", "seed", "threads", "sim", "noise", "conditions"});
    check_version(o, "magbot-experiment", kExperimentVersion);
    ExperimentSpec s;
    s.id = o.str("id", s.id);
    s.kind = o.convert("kind", [&] { return experiment_kind_from_string(o.str("kind")); });
    s.trials = o.integer("trials", s.trials);
    s.seed = o.u64("seed", s.seed);
    s.threads = o.integer("threads", s.threads);
    if (o.has("sim")) apply_sim(o.obj("sim"), s.sim);
    if (o.has("noise")) {
        const Obj n = o.obj("noise");
        n.allow({"gain_sigma", "angle_sigma_deg", "offset_sigma_mm", "gripper_pulse_mT", "square_pulse_mT", "timeout_s",
                 "separation_sigma_mm", "lateral_sigma_mm"});
        auto& r = s.reconfiguration;
        r.gain_sigma = n.num("gain_sigma", r.gain_sigma);
        r.angle_sigma = n.num("angle_sigma_deg", r.angle_sigma * 180.0 / kPi) * kPi / 180.0;
        r.offset_sigma = n.num("offset_sigma_mm", r.offset_sigma * 1e3) * 1e-3;
        r.gripper_pulse = n.num("gripper_pulse_mT", r.gripper_pulse * 1e3) * 1e-3;
        r.square_pulse = n.num("square_pulse_mT", r.square_pulse * 1e3) * 1e-3;
        r.timeout = n.num("timeout_s", r.timeout);
        s.assembly.separation_sigma = n.num("separation_sigma_mm", s.assembly.separation_sigma * 1e3) * 1e-3;
        s.assembly.lateral_sigma = n.num("lateral_sigma_mm", s.assembly.lateral_sigma * 1e3) * 1e-3;
    }
    const json& conds = o.raw("conditions");
    if (!conds.is_array()) fail("/conditions", "expected a list");
    for (std::size_t i = 0; i < conds.size(); ++i) {
        const Obj c(conds[i], "/conditions/" + std::to_string(i));
        c.allow({"name", "module_type", "mode", "cycles", "separation_mm", "assist_mT", "timeout_s", "target", "pulse_mT"});
        ConditionSpec cs;
        cs.name = c.str("name");
        if (c.has("module_type")) cs.module_type = c.convert("module_type", [&] { return module_type_from_string(c.str("module_type")); });
        if (c.has("mode")) cs.mode = c.convert("mode", [&] { return gait_mode_from_string(c.str("mode")); });
        cs.cycles = c.integer("cycles", cs.cycles);
        cs.separation = c.num("separation_mm", cs.separation * 1e3) * 1e-3;
        cs.assist_field = c.num("assist_mT", 0.0) * 1e-3;
        cs.timeout = c.num("timeout_s", cs.timeout);
        if (c.has("target")) cs.target = c.convert("target", [&] { return reconfiguration_target_from_string(c.str("target")); });
        if (c.has("pulse_mT")) cs.pulse = c.num("pulse_mT") * 1e-3;
        s.conditions.push_back(cs);
    }
    try {
        s.validate();
    } catch (const InvalidSpecError& e) {
        fail("", e.what());
    }
    return s;
}

ExperimentSpec load_experiment(const std::filesystem::path& path) {
    try {
        return parse_experiment(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::string trial_record_json(const TrialRecord& r) {
    json j{{"scenario", r.scenario}, {"condition", r.condition}, {"trial", r.trial},
           {"seed", r.seed},         {"success", r.success},     {"failed", r.failed}};
    if (!r.error.empty()) j["error"] = r.error;
    if (r.displacement) {
        const auto& d = *r.displacement;
        j["euclidean_mm"] = d.euclidean;
        j["manhattan_mm"] = d.manhattan;
        j["endpoint_l1_mm"] = d.endpoint_l1;
        j["x_mm"] = d.x;
        j["y_mm"] = d.y;
        j["degenerate"] = d.degenerate;
    }
    if (r.assembly_time) j["assembly_time_s"] = *r.assembly_time;
    if (r.completion_time) j["completion_time_s"] = *r.completion_time;
    j["initial_separations_mm"] = r.initial_separations;
    return j.dump();
}

TrialRecord parse_trial_record(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error&) {
        throw ParseError("malformed trial record");
    }
    try {
        TrialRecord r;
        r.scenario = j.at("scenario").get<std::string>();
        r.condition = j.at("condition").get<std::string>();
        r.trial = j.at("trial").get<int>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.success = j.at("success").get<bool>();
        r.failed = j.at("failed").get<bool>();
        r.error = j.value("error", "");
        if (j.contains("euclidean_mm")) {
            DisplacementMetrics d;
            d.euclidean = j.at("euclidean_mm").get<double>();
            d.manhattan = j.at("manhattan_mm").get<double>();
            d.endpoint_l1 = j.at("endpoint_l1_mm").get<double>();
            d.x = j.at("x_mm").get<double>();
            d.y = j.at("y_mm").get<double>();
            d.degenerate = j.at("degenerate").get<bool>();
            r.displacement = d;
        }
        if (j.contains("assembly_time_s")) r.assembly_time = j.at("assembly_time_s").get<double>();
        if (j.contains("completion_time_s")) r.completion_time = j.at("completion_time_s").get<double>();
        r.initial_separations = j.at("initial_separations_mm").get<std::vector<double>>();
        return r;
    } catch (const json::exception& e) {
        throw ParseError(std::string("trial record: ") + e.what());
    }
}

void write_records(std::ostream& out, const std::vector<TrialRecord>& records) {
    for (const auto& r : records) out << trial_record_json(r) << '\n';
}

std::string summary_json(const ExperimentSummary& s) {
    json conds = json::array(), comps = json::array();
    for (const auto& c : s.conditions)
        conds.push_back({{"name", c.name},
                         {"n", c.n},
                         {"successes", c.successes},
                         {"success_rate", c.success_rate},
                         {"samples", c.samples},
                         {"mean", c.mean},
                         {"std", c.stddev},
                         {"median", c.median}});
    for (const auto& c : s.comparisons)
        comps.push_back({{"first", c.first},
                         {"second", c.second},
                         {"test", c.test},
                         {"mean_difference", c.mean_difference},
                         {"statistic", std::isfinite(c.statistic) ? json(c.statistic) : json(nullptr)},
                         {"p_value", c.p_value}});
    return json{{"id", s.id}, {"kind", to_string(s.kind)}, {"metric", s.metric}, {"conditions", conds}, {"comparisons", comps}}
        .dump(1);
}

std::string summary_table(const ExperimentSummary& s) {
    std::ostringstream out;
    out << "experiment " << s.id << " (" << to_string(s.kind) << "), metric " << s.metric << "\n";
    out << std::left << std::setw(20) << "condition" << std::right << std::setw(6) << "n" << std::setw(10) << "success"
        << std::setw(12) << "mean" << std::setw(12) << "std" << std::setw(12) << "median" << "\n";
    out << std::fixed;
    for (const auto& c : s.conditions)
        out << std::left << std::setw(20) << c.name << std::right << std::setw(6) << c.n << std::setw(10)
            << std::setprecision(3) << c.success_rate << std::setw(12) << std::setprecision(4) << c.mean << std::setw(12)
            << c.stddev << std::setw(12) << c.median << "\n";
    for (const auto& c : s.comparisons)
        out << c.first << " vs " << c.second << " (" << c.test << "): diff " << std::setprecision(4) << c.mean_difference
            << ", p = " << std::scientific << std::setprecision(4) << c.p_value << std::fixed << "\n";
    return out.str();
}

void write_records_csv(std::ostream& out, const std::vector<TrialRecord>& records) {
    out << "scenario,condition,trial,seed,success,failed,euclidean_mm,manhattan_mm,endpoint_l1_mm,x_mm,y_mm,"
           "assembly_time_s,completion_time_s,initial_separation_mm\n";
    auto opt = [](const std::optional<double>& v) { return v ? json(*v).dump() : std::string(); };
    for (const auto& r : records) {
        out << r.scenario << ',' << r.condition << ',' << r.trial << ',' << r.seed << ',' << (r.success ? 1 : 0) << ','
            << (r.failed ? 1 : 0) << ',';
        if (r.displacement) {
            const auto& d = *r.displacement;
            out << json(d.euclidean).dump() << ',' << json(d.manhattan).dump() << ',' << json(d.endpoint_l1).dump() << ','
                << json(d.x).dump() << ',' << json(d.y).dump() << ',';
        } else {
            out << ",,,,,";
        }
        out << opt(r.assembly_time) << ',' << opt(r.completion_time) << ','
            << (r.initial_separations.empty() ? std::string() : json(r.initial_separations.front()).dump()) << '\n';
    }
}

}  // namespace magbot
