#include "magbot/coil.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "magbot/errors.hpp"
#include "magbot/magnetics.hpp"

namespace magbot {

const char* to_string(Coil c) {
    switch (c) {
        case Coil::Hx: return "Hx";
        case Coil::Hy: return "Hy";
        case Coil::Mx: return "Mx";
        case Coil::My: return "My";
    }
    return "?";
}

Coil coil_from_string(std::string_view name) {
    for (Coil c : kAllCoils) {
        if (name == to_string(c)) return c;
    }
    throw ParseError("unknown coil name '" + std::string(name) + "'");
}

std::array<CoilSpec, 4> default_coil_specs() {
    return {{
        {Coil::Hx, 0.100, 0.050, 100, 10.0},
        {Coil::Hy, 0.176, 0.088, 176, 10.0},
        {Coil::Mx, 0.104, 0.090, 100, 10.0},
        {Coil::My, 0.152, 0.132, 152, 10.0},
    }};
}

double Calibration::operator[](Coil c) const {
    switch (c) {
        case Coil::Hx: return k_hx;
        case Coil::Hy: return k_hy;
        case Coil::Mx: return k_mx;
        case Coil::My: return k_my;
    }
    return 0.0;
}

double& Calibration::operator[](Coil c) {
    switch (c) {
        case Coil::Hx: return k_hx;
        case Coil::Hy: return k_hy;
        case Coil::Mx: return k_mx;
        case Coil::My: break;
    }
    return k_my;
}

double helmholtz_constant(double radius, double spacing, double turns) {
    if (!(radius > 0.0)) throw InvalidSpecError("coil radius must be positive");
    const double a = spacing / 2.0;
    return kMu0 * turns * radius * radius / std::pow(radius * radius + a * a, 1.5);
}

double maxwell_constant(double radius, double spacing, double turns) {
    if (!(radius > 0.0)) throw InvalidSpecError("coil radius must be positive");
    const double a = spacing / 2.0;
    return 3.0 * kMu0 * turns * radius * radius * a / std::pow(radius * radius + a * a, 2.5);
}

Calibration calibration_constants(const std::array<CoilSpec, 4>& specs) {
    Calibration cal;
    for (const CoilSpec& s : specs) {
        cal[s.name] = s.is_helmholtz() ? helmholtz_constant(s.radius(), s.spacing, s.turns)
                                       : maxwell_constant(s.radius(), s.spacing, s.turns);
    }
    return cal;
}

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

}  // namespace

Calibration parse_calibration(std::string_view text, Calibration base) {
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ParseError("calibration line " + std::to_string(line_no) + ": expected 'coil = value unit'");
        }
        const Coil coil = coil_from_string(trim(std::string_view(body).substr(0, eq)));
        std::istringstream rhs(body.substr(eq + 1));
        double value = 0.0;
        std::string unit;
        if (!(rhs >> value)) {
            throw ParseError("calibration line " + std::to_string(line_no) + ": missing numeric value");
        }
        rhs >> unit;
        const bool helm = coil == Coil::Hx || coil == Coil::Hy;
        double scale = 1.0;
        if (helm) {
            if (unit == "T/A" || unit.empty()) scale = 1.0;
            else if (unit == "mT/A") scale = 1e-3;
            else throw ParseError("calibration line " + std::to_string(line_no) + ": bad unit '" + unit + "' for " + to_string(coil));
        } else {
            if (unit == "T/m/A" || unit.empty()) scale = 1.0;
            else if (unit == "mT/m/A") scale = 1e-3;
            else throw ParseError("calibration line " + std::to_string(line_no) + ": bad unit '" + unit + "' for " + to_string(coil));
        }
        base[coil] = value * scale;
    }
    return base;
}

Calibration load_calibration(const std::filesystem::path& path, Calibration base) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open calibration file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_calibration(buf.str(), base);
}

CoilCommand CoilCommand::scaled(double alpha) const {
    CoilCommand out = *this;
    for (double& i : out.currents) i *= alpha;
    return out;
}

CoilSystem::CoilSystem() : CoilSystem(default_coil_specs(), calibration_constants(default_coil_specs())) {}

CoilSystem::CoilSystem(std::array<CoilSpec, 4> specs, Calibration calibration, double workspace_half_extent)
    : specs_(specs), calibration_(calibration), half_extent_(workspace_half_extent) {}

CoilCommand CoilSystem::clipped(const CoilCommand& cmd, bool* saturated) const {
    CoilCommand out = cmd;
    bool sat = false;
    for (Coil c : kAllCoils) {
        const double lim = max_current(c);
        double& i = out[c];
        if (std::abs(i) > lim) {
            i = std::copysign(lim, i);
            sat = true;
        }
    }
    if (saturated) *saturated = sat;
    return out;
}

FieldSample CoilSystem::field_at(const CoilCommand& cmd, const Eigen::Vector3d& r) const {
    FieldSample s;
    const CoilCommand c = clipped(cmd, &s.saturated);
    s.out_of_workspace = std::abs(r.x()) > half_extent_ || std::abs(r.y()) > half_extent_;
    s.uniform = {calibration_.k_hx * c[Coil::Hx], calibration_.k_hy * c[Coil::Hy]};
    const double gx = calibration_.k_mx * c[Coil::Mx];
    const double gy = calibration_.k_my * c[Coil::My];
    s.gradients = {gx, gy};
    s.gradient.setZero();
    s.gradient(0, 0) = gx - gy / 2.0;
    s.gradient(1, 1) = -gx / 2.0 + gy;
    s.gradient(2, 2) = -(gx + gy) / 2.0;
    s.total = Eigen::Vector3d(s.uniform.x(), s.uniform.y(), 0.0) + s.gradient * r;
    return s;
}

FieldSample CoilSystem::field_in_plane(const CoilCommand& cmd, const Eigen::Vector2d& r) const {
    return field_at(cmd, Eigen::Vector3d(r.x(), r.y(), 0.0));
}

CoilCommand CoilSystem::currents_for(const Eigen::Vector2d& uniform, const Eigen::Vector2d& gradients,
                                     double timestamp) const {
    CoilCommand out;
    out.timestamp = timestamp;
    const std::array<std::pair<Coil, double>, 4> targets{{
        {Coil::Hx, uniform.x()}, {Coil::Hy, uniform.y()}, {Coil::Mx, gradients.x()}, {Coil::My, gradients.y()},
    }};
    for (const auto& [coil, target] : targets) {
        if (target == 0.0) continue;
        const double k = calibration_[coil];
        if (k == 0.0) {
            throw InfeasibleTargetError(std::string("coil ") + to_string(coil) + " has zero calibration constant",
                                        to_string(coil));
        }
        const double current = target / k;
        if (std::abs(current) > max_current(coil)) {
            std::ostringstream os;
            os << "target needs " << std::abs(current) << " A on coil " << to_string(coil)
               << " (limit " << max_current(coil) << " A, ceiling " << std::abs(k) * max_current(coil) << ")";
            throw InfeasibleTargetError(os.str(), to_string(coil));
        }
        out[coil] = current;
    }
    return out;
}

double CoilSystem::uniform_ceiling() const {
    return std::min(std::abs(calibration_.k_hx) * max_current(Coil::Hx),
                    std::abs(calibration_.k_hy) * max_current(Coil::Hy));
}

}  // namespace magbot
