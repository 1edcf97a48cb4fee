#include "hgcav/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "hgcav/errors.hpp"
#include "hgcav/units.hpp"

namespace hgcav {

namespace {

using nlohmann::json;

constexpr double kUm = 1e-6;
constexpr double kUs = 1e-6;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Paper cavity defaults (boundary units).
constexpr double kDefaultLengthUm = 123.0;
constexpr double kDefaultRadiusUm = 200000.0;
constexpr double kDefaultWavelengthNm = 780.2;
constexpr double kDefaultKappaMhz = 1.4;
constexpr double kDefaultGammaMhz = 3.0;
constexpr double kDefaultG0Mhz = 16.0;

enum class Check { any, positive, non_negative };

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

/// Reads fields out of a mutable copy of the document, filling in defaults
/// and collecting every problem with its field path.
class Reader {
public:
    std::vector<std::string> errors;

    void fail(const std::string& path, const std::string& message) { errors.push_back(path + ": " + message); }

    json* object(json& parent, const std::string& path, const char* key, bool required) {
        const auto p = join(path, key);
        if (!parent.contains(key)) {
            if (required) {
                fail(p, "missing required object");
                return nullptr;
            }
            parent[key] = json::object();
        }
        if (!parent[key].is_object()) {
            fail(p, "must be an object");
            return nullptr;
        }
        return &parent[key];
    }

    double number(json& obj, const std::string& path, const char* key, std::optional<double> fallback,
                  Check check = Check::any) {
        const auto p = join(path, key);
        if (!obj.contains(key)) {
            if (!fallback) {
                fail(p, "missing required number");
                return kNaN;
            }
            obj[key] = *fallback;
            return *fallback;
        }
        const auto& v = obj[key];
        if (!v.is_number()) {
            fail(p, "must be a number");
            return kNaN;
        }
        const double x = v.get<double>();
        if (!std::isfinite(x)) {
            fail(p, "must be finite");
        } else if (check == Check::positive && !(x > 0.0)) {
            fail(p, "must be positive");
        } else if (check == Check::non_negative && x < 0.0) {
            fail(p, "must be non-negative");
        }
        return x;
    }

    std::optional<double> optional_number(json& obj, const std::string& path, const char* key,
                                          Check check = Check::any) {
        if (!obj.contains(key)) return std::nullopt;
        return number(obj, path, key, std::nullopt, check);
    }

    int integer(json& obj, const std::string& path, const char* key, std::optional<int> fallback, int min_value) {
        const auto p = join(path, key);
        if (!obj.contains(key)) {
            if (!fallback) {
                fail(p, "missing required integer");
                return 0;
            }
            obj[key] = *fallback;
            return *fallback;
        }
        const auto& v = obj[key];
        if (!v.is_number_integer()) {
            fail(p, "must be an integer");
            return 0;
        }
        const auto x = v.get<std::int64_t>();
        if (x < min_value || x > std::numeric_limits<int>::max()) {
            fail(p, "must be an integer >= " + std::to_string(min_value));
            return 0;
        }
        return static_cast<int>(x);
    }

    bool boolean(json& obj, const std::string& path, const char* key, bool fallback) {
        if (!obj.contains(key)) {
            obj[key] = fallback;
            return fallback;
        }
        if (!obj[key].is_boolean()) {
            fail(join(path, key), "must be true or false");
            return fallback;
        }
        return obj[key].get<bool>();
    }

    std::string string(json& obj, const std::string& path, const char* key, std::optional<std::string> fallback) {
        const auto p = join(path, key);
        if (!obj.contains(key)) {
            if (!fallback) {
                fail(p, "missing required string");
                return {};
            }
            obj[key] = *fallback;
            return *fallback;
        }
        if (!obj[key].is_string()) {
            fail(p, "must be a string");
            return {};
        }
        return obj[key].get<std::string>();
    }

    std::vector<int> int_list(json& obj, const std::string& path, const char* key, std::vector<int> fallback,
                              int min_value) {
        const auto p = join(path, key);
        if (!obj.contains(key)) {
            obj[key] = fallback;
            return fallback;
        }
        if (!obj[key].is_array()) {
            fail(p, "must be an array of integers");
            return {};
        }
        std::vector<int> out;
        for (std::size_t i = 0; i < obj[key].size(); ++i) {
            const auto& v = obj[key][i];
            if (!v.is_number_integer() || v.get<std::int64_t>() < min_value || v.get<std::int64_t>() > 100000) {
                fail(p + "[" + std::to_string(i) + "]", "must be an integer >= " + std::to_string(min_value));
                continue;
            }
            out.push_back(static_cast<int>(v.get<std::int64_t>()));
        }
        return out;
    }

    std::string mode_ref(json& obj, const std::string& path, const char* key, const ModeTable& modes) {
        auto id = string(obj, path, key, std::nullopt);
        if (!id.empty() && !modes.count(id)) fail(join(path, key), "mode id '" + id + "' is not defined in modes");
        return id;
    }
};

Detuning read_detuning(Reader& r, json& obj, const std::string& path) {
    return {mhz_to_rad_s(r.number(obj, path, "delta_a_mhz", 0.0)), mhz_to_rad_s(r.number(obj, path, "delta_c_mhz", 0.0))};
}

/// x0 may be given in micrometres or in waists.
double read_offset(Reader& r, json& obj, const std::string& path, const char* um_key, const char* w0_key,
                   double waist, std::optional<double> fallback_w0) {
    if (obj.contains(um_key) && obj.contains(w0_key)) {
        r.fail(join(path, um_key), std::string("give either ") + um_key + " or " + w0_key + ", not both");
        return kNaN;
    }
    if (obj.contains(um_key)) return r.number(obj, path, um_key, std::nullopt) * kUm;
    if (!obj.contains(w0_key) && !fallback_w0) {
        r.fail(join(path, w0_key), std::string("missing required number (or ") + um_key + ")");
        return kNaN;
    }
    return r.number(obj, path, w0_key, fallback_w0) * waist;
}

Trajectory read_trajectory(Reader& r, json& obj, const std::string& path, double waist,
                           const std::optional<Trajectory>& fallback = std::nullopt) {
    Trajectory t;
    const auto d = fallback.value_or(Trajectory{});
    if (fallback && !obj.contains("x0_um") && !obj.contains("x0_w0")) {
        t.x0 = d.x0;
    } else {
        t.x0 = read_offset(r, obj, path, "x0_um", "x0_w0", waist, std::nullopt);
    }
    t.t0 = r.number(obj, path, "t0_us", fallback ? std::optional<double>(d.t0 / kUs) : std::nullopt) * kUs;
    t.v = r.number(obj, path, "v_m_s", fallback ? std::optional<double>(d.v) : std::nullopt);
    if (std::isfinite(t.v) && t.v == 0.0) r.fail(join(path, "v_m_s"), "must be non-zero");
    if (auto flight = r.optional_number(obj, path, "flight_time_ms", Check::positive)) {
        const double elapsed = *flight * 1e-3;
        t.launch = LaunchKinematics{launch_velocity_for(t.v, elapsed), t.t0 - elapsed};
        obj["launch_velocity_m_s"] = t.launch->launch_velocity;
    }
    return t;
}

std::vector<TrajectoryParam> read_free(Reader& r, json& obj, const std::string& path) {
    const auto p = join(path, "free");
    if (!obj.contains("free")) obj["free"] = json::array({"t0", "x0", "v"});
    if (!obj["free"].is_array()) {
        r.fail(p, "must be an array of parameter names");
        return {};
    }
    std::vector<TrajectoryParam> out;
    for (std::size_t i = 0; i < obj["free"].size(); ++i) {
        const auto& v = obj["free"][i];
        try {
            if (!v.is_string()) throw ConfigError("");
            const auto param = trajectory_param_from_string(v.get<std::string>());
            if (std::find(out.begin(), out.end(), param) != out.end()) {
                r.fail(p + "[" + std::to_string(i) + "]", "duplicate parameter");
            } else {
                out.push_back(param);
            }
        } catch (const Error&) {
            r.fail(p + "[" + std::to_string(i) + "]", "must be one of \"t0\", \"x0\", \"v\"");
        }
    }
    if (out.empty()) r.fail(p, "needs at least one free parameter");
    return out;
}

FitOptions read_fit_options(Reader& r, json& obj, const std::string& path, double waist,
                            const std::optional<Trajectory>& truth) {
    FitOptions opt;
    opt.free = read_free(r, obj, path);
    opt.max_evaluations = r.integer(obj, path, "max_evaluations", 10000, 100);
    opt.axial_nodes = r.integer(obj, path, "axial_nodes", kDefaultAxialNodes, 8);
    const bool needs_fixed = opt.free.size() < 3;
    if (obj.contains("fixed") || (needs_fixed && !truth)) {
        if (auto* f = r.object(obj, path, "fixed", true)) {
            Reader partial;
            opt.fixed = read_trajectory(partial, *f, join(path, "fixed"), waist,
                                        Trajectory{truth ? truth->x0 : 0.0, truth ? truth->t0 : 0.0, truth ? truth->v : 1.0, {}});
            r.errors.insert(r.errors.end(), partial.errors.begin(), partial.errors.end());
            for (auto p : {TrajectoryParam::t0, TrajectoryParam::x0, TrajectoryParam::v}) {
                const bool is_free = std::find(opt.free.begin(), opt.free.end(), p) != opt.free.end();
                const char* key = p == TrajectoryParam::t0 ? "t0_us" : p == TrajectoryParam::v ? "v_m_s" : "x0_w0";
                const bool given = p == TrajectoryParam::x0 ? (f->contains("x0_w0") || f->contains("x0_um"))
                                                            : f->contains(key);
                if (!is_free && !given && !truth) r.fail(join(join(path, "fixed"), key), "fixed parameter needs a value");
            }
        }
    } else if (truth) {
        opt.fixed = *truth;
    }
    if (obj.contains("init")) {
        if (auto* i = r.object(obj, path, "init", true)) opt.init = read_trajectory(r, *i, join(path, "init"), waist);
    }
    return opt;
}

void read_cavity(Reader& r, json& root, ScenarioConfig& cfg) {
    json* c = r.object(root, "", "cavity", false);
    if (!c) return;
    auto& p = cfg.cavity;
    p.length = r.number(*c, "cavity", "length_um", kDefaultLengthUm, Check::positive) * kUm;
    p.r1 = r.number(*c, "cavity", "r1_um", kDefaultRadiusUm, Check::positive) * kUm;
    p.r2 = r.number(*c, "cavity", "r2_um", kDefaultRadiusUm, Check::positive) * kUm;
    p.wavelength = r.number(*c, "cavity", "wavelength_nm", kDefaultWavelengthNm, Check::positive) * 1e-9;
    p.kappa = mhz_to_rad_s(r.number(*c, "cavity", "kappa_mhz", kDefaultKappaMhz, Check::positive));
    p.gamma = mhz_to_rad_s(r.number(*c, "cavity", "gamma_mhz", kDefaultGammaMhz, Check::positive));
    p.g0 = mhz_to_rad_s(r.number(*c, "cavity", "g0_mhz", kDefaultG0Mhz, Check::positive));
    if (c->contains("astigmatism") && c->contains("splitting_mhz")) {
        r.fail("cavity.splitting_mhz", "give either astigmatism or splitting_mhz, not both");
        return;
    }
    if (c->contains("astigmatism")) {
        if (auto* a = r.object(*c, "cavity", "astigmatism", true)) {
            const std::string ap = "cavity.astigmatism";
            Astigmatism ast;
            ast.rx1 = r.number(*a, ap, "rx1_um", std::nullopt, Check::positive) * kUm;
            ast.ry1 = r.number(*a, ap, "ry1_um", std::nullopt, Check::positive) * kUm;
            ast.rx2 = r.number(*a, ap, "rx2_um", std::nullopt, Check::positive) * kUm;
            ast.ry2 = r.number(*a, ap, "ry2_um", std::nullopt, Check::positive) * kUm;
            ast.axis_angle = r.number(*a, ap, "axis_angle_deg", 0.0) * kPi / 180.0;
            p.astigmatism = ast;
        }
    }
    const std::size_t before = r.errors.size();
    try {
        validate(p);
    } catch (const Error& e) {
        r.fail("cavity", e.what());
    }
    if (c->contains("splitting_mhz") && r.errors.size() == before) {
        const double s = r.number(*c, "cavity", "splitting_mhz", std::nullopt, Check::non_negative);
        if (std::isfinite(s) && p.r1 != p.r2) {
            r.fail("cavity.splitting_mhz", "requires r1_um == r2_um");
        } else if (std::isfinite(s) && s > 0.0) {
            try {
                p = with_splitting(p, mhz_to_rad_s(s));
                (*c)["astigmatism_derived"] = {{"rx1_um", p.astigmatism->rx1 / kUm}, {"ry1_um", p.astigmatism->ry1 / kUm},
                                               {"rx2_um", p.astigmatism->rx2 / kUm}, {"ry2_um", p.astigmatism->ry2 / kUm}};
            } catch (const Error& e) {
                r.fail("cavity.splitting_mhz", e.what());
            }
        }
    }
    if (r.errors.size() == before) {
        cfg.derived = derive(p);
        (*c)["derived"] = {{"fsr_hz", cfg.derived.fsr},
                           {"waist_um", cfg.derived.waist / kUm},
                           {"linewidth_hz", cfg.derived.linewidth},
                           {"finesse", cfg.derived.finesse}};
    }
}

void read_modes(Reader& r, json& root, ScenarioConfig& cfg, bool required) {
    if (!root.contains("modes")) {
        if (required) r.fail("modes", "missing required mode table");
        return;
    }
    if (!root["modes"].is_object()) {
        r.fail("modes", "must be an object mapping mode ids to modes");
        return;
    }
    if (required && root["modes"].empty()) r.fail("modes", "mode table is empty");
    for (auto& [id, spec] : root["modes"].items()) {
        const auto path = "modes." + id;
        if (!spec.is_object()) {
            r.fail(path, "must be an object");
            continue;
        }
        ModeSpec m;
        m.m = r.integer(spec, path, "m", std::nullopt, 0);
        m.n = r.integer(spec, path, "n", std::nullopt, 0);
        if (m.m + m.n > 200) r.fail(path, "order m + n above 200 is not supported");
        const double default_w = std::isfinite(cfg.derived.waist) && cfg.derived.waist > 0.0 ? cfg.derived.waist / kUm : 1.0;
        m.waist = r.number(spec, path, "waist_um", default_w, Check::positive) * kUm;
        const double deg = r.number(spec, path, "angle_deg", 0.0);
        if (std::isfinite(deg) && (deg < -90.0 || deg >= 90.0)) r.fail(join(path, "angle_deg"), "must lie in [-90, 90)");
        m.angle = deg * kPi / 180.0;
        cfg.modes[id] = m;
    }
}

std::optional<TransitRecord> load_record(Reader& r, const std::filesystem::path& base, const std::string& rel,
                                         const std::string& path, const ModeTable& modes) {
    const std::filesystem::path file = std::filesystem::path(rel).is_absolute() ? std::filesystem::path(rel) : base / rel;
    std::ifstream in(file);
    if (!in) {
        r.fail(path, "cannot open record file '" + file.string() + "'");
        return std::nullopt;
    }
    try {
        auto rec = io::record_from_json(json::parse(in));
        for (const auto& b : rec.bins) {
            if (!modes.count(b.probe.mode_id)) {
                r.fail(path, "record mode id '" + b.probe.mode_id + "' is not defined in modes");
                return std::nullopt;
            }
        }
        return rec;
    } catch (const std::exception& e) {
        r.fail(path, std::string("invalid record: ") + e.what());
        return std::nullopt;
    }
}

void check_schedule(Reader& r, const ProbeSchedule& s, const std::string& path) {
    try {
        s.validate();
    } catch (const Error& e) {
        r.fail(path, e.what());
    }
}

void read_simulate(Reader& r, json& root, ScenarioConfig& cfg) {
    json* s = r.object(root, "", "simulate", true);
    if (!s) return;
    auto& sim = cfg.simulate;
    const double w = cfg.derived.waist;
    if (auto* t = r.object(*s, "simulate", "trajectory", true)) sim.trajectory = read_trajectory(r, *t, "simulate.trajectory", w);
    sim.rate = r.number(*s, "simulate", "rate_per_us", 1.0, Check::positive) / kUs;
    sim.axial_nodes = r.integer(*s, "simulate", "axial_nodes", kDefaultAxialNodes, 8);

    const bool has_probe = s->contains("probe");
    const bool has_switched = s->contains("switched");
    if (has_probe == has_switched) {
        r.fail("simulate", "give exactly one of probe or switched");
        return;
    }
    if (has_probe) {
        json* p = r.object(*s, "simulate", "probe", true);
        if (!p) return;
        const std::string pp = "simulate.probe";
        const auto id = r.mode_ref(*p, pp, "mode", cfg.modes);
        const auto det = read_detuning(r, *p, pp);
        const double start = r.number(*p, pp, "start_us", std::nullopt) * kUs;
        const double end = r.number(*p, pp, "end_us", std::nullopt) * kUs;
        const double bin = r.number(*p, pp, "bin_us", 10.0, Check::positive) * kUs;
        if (std::isfinite(start) && std::isfinite(end) && !(end > start)) r.fail(join(pp, "end_us"), "must exceed start_us");
        if (r.errors.empty()) {
            sim.schedule = make_single_schedule(id, det, start, end, bin);
            check_schedule(r, sim.schedule, pp);
        }
    } else {
        json* p = r.object(*s, "simulate", "switched", true);
        if (!p) return;
        const std::string pp = "simulate.switched";
        sim.switched = true;
        std::vector<std::string> ids(2);
        std::vector<Detuning> dets(2);
        if (!p->contains("modes") || !(*p)["modes"].is_array() || (*p)["modes"].size() != 2) {
            r.fail(join(pp, "modes"), "must be an array of two mode ids");
        } else {
            for (int i = 0; i < 2; ++i) {
                auto& v = (*p)["modes"][i];
                const auto ip = join(pp, "modes") + "[" + std::to_string(i) + "]";
                if (!v.is_string()) {
                    r.fail(ip, "must be a mode id");
                } else if (!cfg.modes.count(v.get<std::string>())) {
                    r.fail(ip, "mode id '" + v.get<std::string>() + "' is not defined in modes");
                } else {
                    ids[i] = v.get<std::string>();
                }
            }
        }
        if (!p->contains("detunings")) (*p)["detunings"] = json::array({json::object(), json::object()});
        if (!(*p)["detunings"].is_array() || (*p)["detunings"].size() != 2) {
            r.fail(join(pp, "detunings"), "must be an array of two detuning objects");
        } else {
            for (int i = 0; i < 2; ++i) {
                auto& v = (*p)["detunings"][i];
                const auto ip = join(pp, "detunings") + "[" + std::to_string(i) + "]";
                if (!v.is_object()) {
                    r.fail(ip, "must be an object");
                } else {
                    dets[i] = read_detuning(r, v, ip);
                }
            }
        }
        const double f = r.number(*p, pp, "frequency_khz", 200.0, Check::positive) * 1e3;
        const double settle = r.number(*p, pp, "settle_us", 0.3, Check::non_negative) * kUs;
        const double start = r.number(*p, pp, "start_us", std::nullopt) * kUs;
        const double end = r.number(*p, pp, "end_us", std::nullopt) * kUs;
        const double bin = r.number(*p, pp, "bin_us", 0.0, Check::non_negative) * kUs;
        if (std::isfinite(start) && std::isfinite(end) && !(end > start)) r.fail(join(pp, "end_us"), "must exceed start_us");
        if (r.errors.empty()) {
            try {
                sim.schedule = make_switched_schedule(ids[0], ids[1], dets[0], dets[1], f, settle, start, end, bin);
                sim.schedule.validate();
            } catch (const Error& e) {
                r.fail(pp, e.what());
            }
        }
    }

    if (s->contains("fit")) {
        json* f = r.object(*s, "simulate", "fit", true);
        if (!f) return;
        sim.fit = true;
        sim.fit_options = read_fit_options(r, *f, "simulate.fit", w, sim.trajectory);
        if (sim.switched) {
            sim.fit_mode = r.mode_ref(*f, "simulate.fit", "fit_mode", cfg.modes);
            sim.companion_mode = r.mode_ref(*f, "simulate.fit", "companion_mode", cfg.modes);
            if (!sim.fit_mode.empty() && sim.fit_mode == sim.companion_mode) {
                r.fail("simulate.fit.companion_mode", "must differ from fit_mode");
            }
        }
    }
}

void read_fit(Reader& r, json& root, ScenarioConfig& cfg, const std::filesystem::path& base) {
    json* f = r.object(root, "", "fit", true);
    if (!f) return;
    const auto file = r.string(*f, "fit", "record", std::nullopt);
    if (!file.empty()) {
        if (auto rec = load_record(r, base, file, "fit.record", cfg.modes)) cfg.fit.record = std::move(*rec);
    }
    cfg.fit.options = read_fit_options(r, *f, "fit", cfg.derived.waist, cfg.fit.record.trajectory);
}

CouplingMeasurement read_measurement(Reader& r, json& obj, const std::string& path) {
    return {mhz_to_rad_s(r.number(obj, path, "magnitude_mhz", std::nullopt, Check::non_negative)),
            mhz_to_rad_s(r.number(obj, path, "sigma_mhz", 0.0, Check::non_negative))};
}

void read_invert(Reader& r, json& root, ScenarioConfig& cfg) {
    json* v = r.object(root, "", "invert", true);
    if (!v) return;
    auto& inv = cfg.invert;
    inv.first_mode = r.mode_ref(*v, "invert", "first_mode", cfg.modes);
    inv.second_mode = r.mode_ref(*v, "invert", "second_mode", cfg.modes);
    const bool has_truth = v->contains("truth");
    const bool has_meas = v->contains("first") || v->contains("second");
    if (has_truth == has_meas) {
        r.fail("invert", "give either truth or both first and second measurements");
        return;
    }
    if (has_truth) {
        json* t = r.object(*v, "invert", "truth", true);
        if (!t) return;
        const double w = cfg.derived.waist;
        Point p{read_offset(r, *t, "invert.truth", "x_um", "x_w0", w, std::nullopt),
                read_offset(r, *t, "invert.truth", "y_um", "y_w0", w, std::nullopt)};
        const double sigma = mhz_to_rad_s(r.number(*t, "invert.truth", "sigma_mhz", 0.0, Check::non_negative));
        inv.truth = p;
        if (r.errors.empty()) {
            inv.first = {std::abs(coupling(cfg.cavity, cfg.modes.at(inv.first_mode), p.x, p.y)), sigma};
            inv.second = {std::abs(coupling(cfg.cavity, cfg.modes.at(inv.second_mode), p.x, p.y)), sigma};
        }
    } else {
        if (auto* a = r.object(*v, "invert", "first", true)) inv.first = read_measurement(r, *a, "invert.first");
        if (auto* b = r.object(*v, "invert", "second", true)) inv.second = read_measurement(r, *b, "invert.second");
    }
}

void read_g2(Reader& r, json& root, ScenarioConfig& cfg, const std::filesystem::path& base) {
    json* g = r.object(root, "", "g2", true);
    if (!g) return;
    auto& spec = cfg.g2;
    spec.tau_max = r.number(*g, "g2", "tau_max_us", std::nullopt, Check::positive) * kUs;
    if (auto lim = r.optional_number(*g, "g2", "tau_limit_us", Check::positive)) spec.tau_limit = *lim * kUs;
    if (auto* p = r.object(*g, "g2", "pooling", false)) {
        const std::string pp = "g2.pooling";
        spec.pooling.trim = r.boolean(*p, pp, "trim", true);
        spec.pooling.smoothing_bins = r.integer(*p, pp, "smoothing_bins", 10, 1);
        spec.pooling.threshold_sigma = r.number(*p, pp, "threshold_sigma", 3.0, Check::positive);
        if (auto pad = r.optional_number(*p, pp, "padding_us", Check::non_negative)) spec.pooling.padding = *pad * kUs;
        spec.pooling.tail_fraction = r.number(*p, pp, "tail_fraction", 0.2, Check::positive);
        if (spec.pooling.tail_fraction > 1.0) r.fail(join(pp, "tail_fraction"), "must not exceed 1");
    }
    const bool has_ens = g->contains("ensemble");
    const bool has_rec = g->contains("records");
    if (has_ens == has_rec) {
        r.fail("g2", "give exactly one of ensemble or records");
        return;
    }
    if (has_ens) {
        json* e = r.object(*g, "g2", "ensemble", true);
        if (!e) return;
        const std::string ep = "g2.ensemble";
        EnsembleSpec ens;
        ens.transits = r.integer(*e, ep, "transits", 200, 1);
        ens.mode = r.mode_ref(*e, ep, "mode", cfg.modes);
        if (auto* d = r.object(*e, ep, "detuning", false)) ens.detuning = read_detuning(r, *d, join(ep, "detuning"));
        ens.rate = r.number(*e, ep, "rate_per_us", 1.0, Check::positive) / kUs;
        ens.bin_width = r.number(*e, ep, "bin_us", 1.0, Check::positive) * kUs;
        ens.start = r.number(*e, ep, "start_us", std::nullopt) * kUs;
        ens.end = r.number(*e, ep, "end_us", std::nullopt) * kUs;
        ens.t0 = r.number(*e, ep, "t0_us", std::nullopt) * kUs;
        ens.v = r.number(*e, ep, "v_m_s", std::nullopt, Check::positive);
        ens.v_sd = r.number(*e, ep, "v_sd_m_s", 0.0, Check::non_negative);
        ens.x0_max = read_offset(r, *e, ep, "x0_max_um", "x0_max_w0", cfg.derived.waist, 0.5);
        if (std::isfinite(ens.x0_max) && ens.x0_max < 0.0) r.fail(join(ep, "x0_max_w0"), "must be non-negative");
        ens.axial_nodes = r.integer(*e, ep, "axial_nodes", kDefaultAxialNodes, 8);
        if (std::isfinite(ens.start) && std::isfinite(ens.end)) {
            if (!(ens.end > ens.start)) {
                r.fail(join(ep, "end_us"), "must exceed start_us");
            } else if (std::isfinite(spec.tau_max) && !(2.0 * spec.tau_max < ens.end - ens.start)) {
                r.fail("g2.tau_max_us", "must be below half the ensemble window");
            }
        }
        spec.ensemble = ens;
    } else {
        auto& list = (*g)["records"];
        if (!list.is_array() || list.empty()) {
            r.fail("g2.records", "must be a non-empty array of record file paths");
            return;
        }
        for (std::size_t i = 0; i < list.size(); ++i) {
            const auto ip = "g2.records[" + std::to_string(i) + "]";
            if (!list[i].is_string()) {
                r.fail(ip, "must be a file path");
                continue;
            }
            if (auto rec = load_record(r, base, list[i].get<std::string>(), ip, cfg.modes)) {
                spec.records.push_back(std::move(*rec));
            }
        }
    }
}

void read_scaling(Reader& r, json& root, ScenarioConfig& cfg) {
    json* s = r.object(root, "", "scaling", false);
    if (!s) return;
    std::vector<int> def;
    for (int n = 4; n <= 100; ++n) def.push_back(n);
    if (s->contains("from") || s->contains("to")) {
        if (s->contains("orders")) {
            r.fail("scaling.orders", "give either orders or from/to, not both");
            return;
        }
        const int from = r.integer(*s, "scaling", "from", 4, 1);
        const int to = r.integer(*s, "scaling", "to", 100, 1);
        if (to <= from) r.fail("scaling.to", "must exceed from");
        for (int n = from; n <= to; ++n) cfg.scaling.orders.push_back(n);
        return;
    }
    cfg.scaling.orders = r.int_list(*s, "scaling", "orders", def, 1);
    if (cfg.scaling.orders.size() < 2) r.fail("scaling.orders", "needs at least two orders");
}

void read_spectrum(Reader& r, json& root, ScenarioConfig& cfg) {
    json* s = r.object(root, "", "spectrum", false);
    if (!s) return;
    cfg.spectrum.orders = r.int_list(*s, "spectrum", "orders", {0, 1, 2}, 0);
    if (cfg.spectrum.orders.empty()) r.fail("spectrum.orders", "needs at least one order");
    const int q = r.errors.empty() ? nearest_longitudinal_index(cfg.cavity) : 1;
    cfg.spectrum.q = r.integer(*s, "spectrum", "q", q, 1);
}

void read_mode_image(Reader& r, json& root, ScenarioConfig& cfg) {
    json* s = r.object(root, "", "mode-image", true);
    if (!s) return;
    const std::string sp = "mode-image";
    auto& img = cfg.mode_image;
    const bool has_mode = s->contains("mode");
    const bool has_sup = s->contains("superposition");
    if (has_mode == has_sup) {
        r.fail(sp, "give exactly one of mode or superposition");
    } else if (has_mode) {
        const auto id = r.mode_ref(*s, sp, "mode", cfg.modes);
        if (cfg.modes.count(id)) img.terms.push_back({cfg.modes.at(id), 1.0});
    } else {
        auto& list = (*s)["superposition"];
        if (!list.is_array() || list.empty()) {
            r.fail(join(sp, "superposition"), "must be a non-empty array");
        } else {
            for (std::size_t i = 0; i < list.size(); ++i) {
                const auto ip = join(sp, "superposition") + "[" + std::to_string(i) + "]";
                if (!list[i].is_object()) {
                    r.fail(ip, "must be an object");
                    continue;
                }
                const auto id = r.mode_ref(list[i], ip, "mode", cfg.modes);
                const double re = r.number(list[i], ip, "re", 1.0);
                const double im = r.number(list[i], ip, "im", 0.0);
                if (cfg.modes.count(id)) img.terms.push_back({cfg.modes.at(id), {re, im}});
            }
            if (r.errors.empty()) {
                try {
                    FieldSuperposition check(img.terms);
                } catch (const Error& e) {
                    r.fail(join(sp, "superposition"), e.what());
                }
            }
        }
    }
    const double w = img.terms.empty() ? cfg.derived.waist : img.terms.front().mode.waist;
    img.extent = read_offset(r, *s, sp, "extent_um", "extent_w0", w, 3.0);
    if (std::isfinite(img.extent) && !(img.extent > 0.0)) r.fail(join(sp, "extent_w0"), "must be positive");
    img.resolution = r.integer(*s, sp, "resolution", 201, 2);
    if (img.resolution > 4001) r.fail(join(sp, "resolution"), "must not exceed 4001");
}

bool stochastic(const ScenarioConfig& cfg) {
    return cfg.kind == ScenarioKind::simulate || (cfg.kind == ScenarioKind::g2 && cfg.g2.ensemble);
}

void write_text(RunResult& out, const std::filesystem::path& file, const std::string& text) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw Error("cannot write '" + file.string() + "'");
    os << text;
    if (!os) throw Error("failed writing '" + file.string() + "'");
    out.files.push_back(file);
}

void write_json(RunResult& out, const std::filesystem::path& file, const json& j) {
    write_text(out, file, j.dump(2) + "\n");
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream os;
    os.precision(precision);
    os << v;
    return os.str();
}

std::string fit_summary(const TransitFit& fit, double waist) {
    std::string s;
    for (auto p : {TrajectoryParam::t0, TrajectoryParam::x0, TrajectoryParam::v}) {
        const bool is_free = std::find(fit.free.begin(), fit.free.end(), p) != fit.free.end();
        double value = fit.value(p), sigma = fit.sigma(p);
        std::string unit;
        if (p == TrajectoryParam::t0) {
            value /= kUs;
            sigma /= kUs;
            unit = " us";
        } else if (p == TrajectoryParam::x0) {
            value /= waist;
            sigma /= waist;
            unit = " w0";
        } else {
            unit = " m/s";
        }
        s += std::string(" ") + to_string(p) + "=" + fmt(value) + (is_free ? " +- " + fmt(sigma, 2) : " (fixed)") + unit;
    }
    s += " deviance=" + fmt(fit.deviance) + "/" + std::to_string(fit.expected.size()) + " bins";
    return s;
}

json spectrum_json(const ScenarioConfig& cfg, std::string& csv) {
    const auto& p = cfg.cavity;
    const double base = mode_frequency(p, 0, 0, cfg.spectrum.q);
    json families = json::array();
    std::ostringstream os;
    os << "order,m,n,offset_mhz\n";
    for (int order : cfg.spectrum.orders) {
        json members = json::array();
        for (const auto& f : family_spectrum(p, order, cfg.spectrum.q)) {
            const double off = rad_s_to_mhz(f.frequency - base);
            members.push_back({{"m", f.m}, {"n", f.n}, {"offset_mhz", off}});
            os << order << ',' << f.m << ',' << f.n << ',' << io::format_number(off) << '\n';
        }
        families.push_back({{"order", order}, {"members", std::move(members)}});
    }
    csv = os.str();
    const double split = first_order_splitting(p);
    return {{"q", cfg.spectrum.q},
            {"fsr_hz", cfg.derived.fsr},
            {"waist_um", cfg.derived.waist / kUm},
            {"linewidth_hz", cfg.derived.linewidth},
            {"finesse", cfg.derived.finesse},
            {"tem00_frequency_hz", rad_s_to_hz(base)},
            {"first_order_splitting_mhz", rad_s_to_mhz(split)},
            {"first_order_selectivity", mode_selectivity(split, p)},
            {"families", std::move(families)}};
}

void run_spectrum(const ScenarioConfig& cfg, const std::filesystem::path& dir, RunResult& out) {
    std::string csv;
    const auto j = spectrum_json(cfg, csv);
    write_json(out, dir / (cfg.name + ".json"), j);
    write_text(out, dir / (cfg.name + ".csv"), csv);
    out.summaries.push_back("spectrum: FSR " + fmt(cfg.derived.fsr * 1e-12) + " THz, w0 " + fmt(cfg.derived.waist / kUm) +
                            " um, finesse " + fmt(cfg.derived.finesse) + ", N=1 splitting " +
                            fmt(j["first_order_splitting_mhz"].get<double>()) + " MHz (selectivity " +
                            fmt(j["first_order_selectivity"].get<double>()) + ")");
}

void run_mode_image(const ScenarioConfig& cfg, const std::filesystem::path& dir, RunResult& out) {
    const FieldSuperposition field(cfg.mode_image.terms);
    const auto grid = intensity_grid(field, cfg.mode_image.extent, cfg.mode_image.resolution);
    const double peak = *std::max_element(grid.values.begin(), grid.values.end());
    const double ref = fundamental_peak(field.waist());
    json terms = json::array();
    for (const auto& t : field.terms()) {
        terms.push_back({{"m", t.mode.m}, {"n", t.mode.n}, {"re", t.coefficient.real()}, {"im", t.coefficient.imag()}});
    }
    json j{{"extent_um", grid.extent / kUm},
           {"resolution", grid.resolution},
           {"waist_um", field.waist() / kUm},
           {"angle_deg", field.angle() * 180.0 / kPi},
           {"terms", std::move(terms)},
           {"peak_intensity_um2", peak * kUm * kUm},
           {"peak_coupling_mhz", rad_s_to_mhz(cfg.cavity.g0 * std::sqrt(peak / (ref * ref)))}};
    write_json(out, dir / (cfg.name + ".json"), j);
    write_text(out, dir / (cfg.name + ".csv"), io::intensity_grid_csv(grid));
    out.summaries.push_back("mode-image: " + std::to_string(grid.resolution) + "x" + std::to_string(grid.resolution) +
                            " grid over +-" + fmt(grid.extent / kUm) + " um, peak |g| " +
                            fmt(j["peak_coupling_mhz"].get<double>()) + " MHz");
}

void run_simulate(const ScenarioConfig& cfg, const std::filesystem::path& dir, RunResult& out) {
    const auto& sim = cfg.simulate;
    const auto rec = simulate_transit(sim.trajectory, sim.schedule, cfg.modes, cfg.cavity, sim.rate, *cfg.seed,
                                      sim.axial_nodes);
    write_json(out, dir / (cfg.name + ".record.json"), io::record_to_json(rec));
    write_text(out, dir / (cfg.name + ".record.csv"), io::record_csv(rec));
    std::int64_t total = 0;
    for (const auto& b : rec.bins) total += b.count;
    out.summaries.push_back("simulate: " + std::to_string(rec.bins.size()) + " bins, " + std::to_string(total) +
                            " counts, seed " + std::to_string(rec.seed));
    if (!sim.fit) return;
    const double w = cfg.derived.waist;
    if (sim.switched) {
        const auto fit = fit_switched_transit(rec, cfg.modes, cfg.cavity, sim.fit_mode, sim.companion_mode, sim.fit_options);
        write_json(out, dir / (cfg.name + ".fit.json"), io::switched_fit_to_json(fit, w));
        write_text(out, dir / (cfg.name + ".fit.csv"), io::fit_residual_csv(rec.select_mode(sim.fit_mode), fit.fit));
        TransitFit companion;
        companion.expected = fit.companion_expected;
        for (std::size_t i = 0; i < fit.companion.bins.size(); ++i) {
            companion.residuals.push_back(static_cast<double>(fit.companion.bins[i].count) - fit.companion_expected[i]);
        }
        write_text(out, dir / (cfg.name + ".companion.csv"), io::fit_residual_csv(fit.companion, companion));
        out.summaries.push_back("fit[" + sim.fit_mode + "]:" + fit_summary(fit.fit, w));
        out.summaries.push_back("companion[" + sim.companion_mode + "]: deviance " + fmt(fit.companion_deviance) + "/" +
                                std::to_string(fit.companion_expected.size()) + " bins, no free parameters");
    } else {
        const auto fit = fit_transit(rec, cfg.modes, cfg.cavity, sim.fit_options);
        write_json(out, dir / (cfg.name + ".fit.json"), io::fit_to_json(fit, w));
        write_text(out, dir / (cfg.name + ".fit.csv"), io::fit_residual_csv(rec, fit));
        out.summaries.push_back("fit:" + fit_summary(fit, w));
    }
}

void run_fit(const ScenarioConfig& cfg, const std::filesystem::path& dir, RunResult& out) {
    const auto fit = fit_transit(cfg.fit.record, cfg.modes, cfg.cavity, cfg.fit.options);
    const double w = cfg.derived.waist;
    write_json(out, dir / (cfg.name + ".json"), io::fit_to_json(fit, w));
    write_text(out, dir / (cfg.name + ".csv"), io::fit_residual_csv(cfg.fit.record, fit));
    out.summaries.push_back("fit:" + fit_summary(fit, w));
}

void run_invert(const ScenarioConfig& cfg, const std::filesystem::path& dir, RunResult& out) {
    const auto& inv = cfg.invert;
    const auto& m1 = cfg.modes.at(inv.first_mode);
    const auto& m2 = cfg.modes.at(inv.second_mode);
    const auto set = invert_two_mode(inv.first, inv.second, m1, m2, cfg.cavity);
    const double w = cfg.derived.waist;
    auto j = io::candidates_to_json(set, w);
    j["first_mode"] = inv.first_mode;
    j["second_mode"] = inv.second_mode;
    if (inv.truth) j["truth"] = {{"x_w0", inv.truth->x / w}, {"y_w0", inv.truth->y / w}};
    write_json(out, dir / (cfg.name + ".json"), j);
    std::ostringstream os;
    os << "x_um,y_um,first_mhz,second_mhz\n";
    for (const auto& p : set.candidates) {
        os << io::format_number(p.x / kUm) << ',' << io::format_number(p.y / kUm) << ','
           << io::format_number(rad_s_to_mhz(std::abs(coupling(cfg.cavity, m1, p.x, p.y)))) << ','
           << io::format_number(rad_s_to_mhz(std::abs(coupling(cfg.cavity, m2, p.x, p.y)))) << '\n';
    }
    write_text(out, dir / (cfg.name + ".csv"), os.str());
    out.summaries.push_back("invert: " + std::to_string(set.candidates.size()) + " candidate positions" +
                            (set.generic ? " (generic)" : "") + " for |g1|=" + fmt(rad_s_to_mhz(inv.first.magnitude)) +
                            " MHz, |g2|=" + fmt(rad_s_to_mhz(inv.second.magnitude)) + " MHz");
}

void run_g2(const ScenarioConfig& cfg, const std::filesystem::path& dir, RunResult& out) {
    const auto& spec = cfg.g2;
    const auto records = spec.ensemble ? simulate_ensemble(*spec.ensemble, cfg.modes, cfg.cavity, *cfg.seed) : spec.records;
    const auto est = average_over_transits(records, spec.tau_max, spec.pooling);
    const double limit = spec.tau_limit > 0.0 ? spec.tau_limit : -1.0;
    const auto maxima = significant_maxima(est, limit);
    auto j = io::correlation_to_json(est);
    json taus = json::array();
    for (auto i : maxima) taus.push_back(std::round(est.tau[i] / kUs * 1e6) / 1e6);
    j["significant_maxima_us"] = std::move(taus);
    std::string freq;
    try {
        const auto f = characteristic_frequency(est, limit);
        j["characteristic_frequency_khz"] = f.frequency * 1e-3;
        j["characteristic_frequency_sigma_khz"] = f.sigma * 1e-3;
        freq = ", f = " + fmt(f.frequency * 1e-3) + " +- " + fmt(f.sigma * 1e-3, 2) + " kHz";
    } catch (const InsufficientStructureError&) {
        j["characteristic_frequency_khz"] = nullptr;
    }
    if (spec.ensemble) j["seed"] = *cfg.seed;
    write_json(out, dir / (cfg.name + ".json"), j);
    write_text(out, dir / (cfg.name + ".csv"), io::correlation_csv(est));
    out.summaries.push_back("g2: " + std::to_string(est.transits) + " transits, " + std::to_string(maxima.size()) +
                            " significant maxima" + freq);
}

void run_scaling(const ScenarioConfig& cfg, const std::filesystem::path& dir, RunResult& out) {
    const auto report = scaling_report(cfg.cavity, cfg.derived.waist, cfg.scaling.orders);
    write_json(out, dir / (cfg.name + ".json"), io::scaling_to_json(report, cfg.derived.waist, cfg.cavity.g0));
    write_text(out, dir / (cfg.name + ".csv"), io::scaling_csv(report));
    out.summaries.push_back("scaling: exponents max coupling " + fmt(report.coupling_exponent) + ", mode size " +
                            fmt(report.size_exponent) + ", gradient " + fmt(report.gradient_exponent) +
                            ", spacing " + fmt(report.spacing_exponent) + ", outermost maximum " +
                            fmt(report.outermost_exponent));
}

}  // namespace

const char* to_string(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::spectrum: return "spectrum";
        case ScenarioKind::mode_image: return "mode-image";
        case ScenarioKind::simulate: return "simulate";
        case ScenarioKind::fit: return "fit";
        case ScenarioKind::invert: return "invert";
        case ScenarioKind::g2: return "g2";
        case ScenarioKind::scaling: return "scaling";
    }
    return "";
}

std::optional<ScenarioKind> scenario_kind_from_string(const std::string& name) {
    for (auto k : {ScenarioKind::spectrum, ScenarioKind::mode_image, ScenarioKind::simulate, ScenarioKind::fit,
                   ScenarioKind::invert, ScenarioKind::g2, ScenarioKind::scaling}) {
        if (name == to_string(k)) return k;
    }
    return std::nullopt;
}

ValidationResult validate_config(const std::string& text, const std::filesystem::path& base_dir,
                                 std::optional<std::uint64_t> seed, std::optional<ScenarioKind> expected_kind) {
    ValidationResult result;
    Reader r;
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        result.errors.push_back(std::string("(document): invalid JSON: ") + e.what());
        return result;
    }
    if (!root.is_object()) {
        result.errors.push_back("(document): must be a JSON object");
        return result;
    }

    ScenarioConfig cfg;
    const auto schema = r.string(root, "", "schema", std::nullopt);
    if (!schema.empty() && schema != kConfigSchema) r.fail("schema", std::string("must be \"") + kConfigSchema + "\"");

    std::optional<ScenarioKind> kind;
    if (root.contains("scenario")) {
        const auto name = r.string(root, "", "scenario", std::nullopt);
        kind = scenario_kind_from_string(name);
        if (!kind && !name.empty()) {
            r.fail("scenario", "unknown scenario '" + name + "'");
        } else if (kind && expected_kind && *kind != *expected_kind) {
            r.fail("scenario", std::string("is '") + name + "' but the command is '" + to_string(*expected_kind) + "'");
        }
    } else if (expected_kind) {
        kind = expected_kind;
        root["scenario"] = to_string(*kind);
    } else {
        r.fail("scenario", "missing required string");
    }
    if (kind) cfg.kind = *kind;
    cfg.name = r.string(root, "", "name", std::string(to_string(cfg.kind)));
    if (cfg.name.empty() || cfg.name.find_first_of("/\\") != std::string::npos) {
        r.fail("name", "must be a non-empty file stem without path separators");
    }

    if (seed) {
        cfg.seed = seed;
        root["seed"] = *seed;
    } else if (root.contains("seed")) {
        if (!root["seed"].is_number_unsigned() && !(root["seed"].is_number_integer() && root["seed"].get<std::int64_t>() >= 0)) {
            r.fail("seed", "must be a non-negative integer");
        } else {
            cfg.seed = root["seed"].get<std::uint64_t>();
        }
    }

    cfg.derived.waist = kNaN;
    read_cavity(r, root, cfg);
    const bool cavity_ok = r.errors.empty();
    if (!cavity_ok) cfg.derived.waist = kNaN;

    const bool needs_modes = kind && *kind != ScenarioKind::spectrum && *kind != ScenarioKind::scaling;
    read_modes(r, root, cfg, needs_modes);

    // Scenario blocks are read even after cavity errors so that every problem
    // is reported at once; their physics checks only run on an error-free state.
    if (kind) {
        switch (*kind) {
            case ScenarioKind::spectrum: read_spectrum(r, root, cfg); break;
            case ScenarioKind::mode_image: read_mode_image(r, root, cfg); break;
            case ScenarioKind::simulate: read_simulate(r, root, cfg); break;
            case ScenarioKind::fit: read_fit(r, root, cfg, base_dir); break;
            case ScenarioKind::invert: read_invert(r, root, cfg); break;
            case ScenarioKind::g2: read_g2(r, root, cfg, base_dir); break;
            case ScenarioKind::scaling: read_scaling(r, root, cfg); break;
        }
    }
    if (kind && stochastic(cfg) && !cfg.seed) r.fail("seed", "required for a stochastic scenario");

    result.errors = std::move(r.errors);
    if (result.errors.empty()) {
        cfg.normalized = std::move(root);
        result.config = std::move(cfg);
    }
    return result;
}

std::vector<TransitRecord> simulate_ensemble(const EnsembleSpec& spec, const ModeTable& modes,
                                             const CavityParams& params, std::uint64_t master_seed) {
    const auto schedule = make_single_schedule(spec.mode, spec.detuning, spec.start, spec.end, spec.bin_width);
    std::vector<TransitRecord> out;
    out.reserve(static_cast<std::size_t>(spec.transits));
    for (int i = 0; i < spec.transits; ++i) {
        const auto seed = transit_seed(master_seed, static_cast<std::uint64_t>(i));
        std::mt19937_64 draw(seed ^ 0x9E3779B97F4A7C15ULL);
        std::uniform_real_distribution<double> offset(-spec.x0_max, spec.x0_max);
        Trajectory traj;
        traj.x0 = spec.x0_max > 0.0 ? offset(draw) : 0.0;
        traj.t0 = spec.t0;
        traj.v = spec.v;
        if (spec.v_sd > 0.0) {
            std::normal_distribution<double> vel(spec.v, spec.v_sd);
            do {
                traj.v = vel(draw);
            } while (!(traj.v > 0.1 * spec.v));
        }
        out.push_back(simulate_transit(traj, schedule, modes, params, spec.rate, seed, spec.axial_nodes));
    }
    return out;
}

RunResult run_scenario(const ScenarioConfig& config, const std::filesystem::path& out_dir) {
    RunResult out;
    try {
        std::filesystem::create_directories(out_dir);
        switch (config.kind) {
            case ScenarioKind::spectrum: run_spectrum(config, out_dir, out); break;
            case ScenarioKind::mode_image: run_mode_image(config, out_dir, out); break;
            case ScenarioKind::simulate: run_simulate(config, out_dir, out); break;
            case ScenarioKind::fit: run_fit(config, out_dir, out); break;
            case ScenarioKind::invert: run_invert(config, out_dir, out); break;
            case ScenarioKind::g2: run_g2(config, out_dir, out); break;
            case ScenarioKind::scaling: run_scaling(config, out_dir, out); break;
        }
    } catch (const std::exception& e) {
        out.exit_code = 3;
        out.error = std::string(to_string(config.kind)) + ": " + e.what();
    }
    return out;
}

}  // namespace hgcav
