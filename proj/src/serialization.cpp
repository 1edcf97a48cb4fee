#include "hgcav/serialization.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "hgcav/errors.hpp"
#include "hgcav/units.hpp"

namespace hgcav::io {

namespace {

constexpr double kUs = 1e-6;
constexpr double kUm = 1e-6;

double num(const json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_number()) throw ConfigError(std::string("missing numeric field '") + key + "'");
    return j.at(key).get<double>();
}

/// Seconds to microseconds on a picosecond grid, so accumulated bin edges print cleanly.
double to_us(double seconds) { return std::round(seconds / kUs * 1e6) / 1e6; }

double num_or(const json& j, const char* key, double fallback) {
    return j.contains(key) && j.at(key).is_number() ? j.at(key).get<double>() : fallback;
}

}  // namespace

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

json detuning_to_json(const Detuning& d) {
    return {{"delta_a_mhz", rad_s_to_mhz(d.delta_a)}, {"delta_c_mhz", rad_s_to_mhz(d.delta_c)}};
}

Detuning detuning_from_json(const json& j) {
    return {mhz_to_rad_s(num_or(j, "delta_a_mhz", 0.0)), mhz_to_rad_s(num_or(j, "delta_c_mhz", 0.0))};
}

json trajectory_to_json(const Trajectory& t) {
    json j{{"x0_um", t.x0 / kUm}, {"t0_us", t.t0 / kUs}, {"v_m_s", t.v}};
    if (t.launch) {
        j["launch"] = {{"velocity_m_s", t.launch->launch_velocity}, {"time_us", t.launch->launch_time / kUs}};
    }
    return j;
}

Trajectory trajectory_from_json(const json& j) {
    Trajectory t;
    t.x0 = num(j, "x0_um") * kUm;
    t.t0 = num(j, "t0_us") * kUs;
    t.v = num(j, "v_m_s");
    if (j.contains("launch")) {
        const auto& l = j.at("launch");
        t.launch = LaunchKinematics{num(l, "velocity_m_s"), num(l, "time_us") * kUs};
    }
    return t;
}

json schedule_to_json(const ProbeSchedule& s) {
    json segs = json::array();
    for (const auto& seg : s.segments) {
        json o = detuning_to_json(seg.detuning);
        o["mode"] = seg.mode_id;
        o["start_us"] = seg.start / kUs;
        o["duration_us"] = seg.duration / kUs;
        segs.push_back(std::move(o));
    }
    return {{"segments", std::move(segs)},
            {"switching_period_us", s.switching_period / kUs},
            {"settle_us", s.settle / kUs},
            {"bin_us", s.bin_width / kUs}};
}

ProbeSchedule schedule_from_json(const json& j) {
    ProbeSchedule s;
    if (!j.contains("segments") || !j.at("segments").is_array()) throw ConfigError("schedule needs a segments array");
    for (const auto& o : j.at("segments")) {
        if (!o.contains("mode") || !o.at("mode").is_string()) throw ConfigError("schedule segment needs a mode id");
        s.segments.push_back(
            {o.at("mode").get<std::string>(), detuning_from_json(o), num(o, "start_us") * kUs, num(o, "duration_us") * kUs});
    }
    s.switching_period = num_or(j, "switching_period_us", 0.0) * kUs;
    s.settle = num_or(j, "settle_us", 0.0) * kUs;
    s.bin_width = num(j, "bin_us") * kUs;
    s.validate();
    return s;
}

json record_to_json(const TransitRecord& rec) {
    json j;
    j["schema"] = kRecordSchema;
    j["time_unit"] = "us";
    j["seed"] = rec.seed;
    j["rate_per_us"] = rec.rate * kUs;
    json det = json::object();
    for (const auto& b : rec.bins) {
        if (!det.contains(b.probe.mode_id)) det[b.probe.mode_id] = detuning_to_json(b.probe.detuning);
    }
    j["detunings"] = std::move(det);
    if (rec.trajectory) j["trajectory"] = trajectory_to_json(*rec.trajectory);
    if (rec.schedule) j["schedule"] = schedule_to_json(*rec.schedule);
    json bins = json::array();
    for (const auto& b : rec.bins) {
        bins.push_back(json::array({to_us(b.probe.start), to_us(b.probe.end), b.probe.mode_id, b.count}));
    }
    j["bins"] = std::move(bins);
    return j;
}

TransitRecord record_from_json(const json& j) {
    if (j.contains("schema") && j.at("schema") != kRecordSchema) {
        throw ConfigError("unsupported record schema " + j.at("schema").dump());
    }
    TransitRecord rec;
    rec.seed = j.value("seed", std::uint64_t{0});
    rec.rate = num(j, "rate_per_us") / kUs;
    if (j.contains("trajectory")) rec.trajectory = trajectory_from_json(j.at("trajectory"));
    if (j.contains("schedule")) rec.schedule = schedule_from_json(j.at("schedule"));
    if (!j.contains("bins") || !j.at("bins").is_array()) throw ConfigError("record needs a bins array");

    std::vector<ProbeBin> from_schedule;
    if (rec.schedule) from_schedule = schedule_bins(*rec.schedule);
    const auto& arr = j.at("bins");
    if (rec.schedule && from_schedule.size() != arr.size()) {
        throw ConfigError("record bins do not match its schedule");
    }
    rec.bins.reserve(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto& b = arr[i];
        if (!b.is_array() || b.size() != 4) throw ConfigError("bin " + std::to_string(i) + " must be [t_start, t_end, mode_id, count]");
        RecordBin rb;
        rb.probe.start = b[0].get<double>() * kUs;
        rb.probe.end = b[1].get<double>() * kUs;
        rb.probe.mode_id = b[2].get<std::string>();
        rb.count = b[3].get<std::int64_t>();
        if (rb.count < 0) throw ConfigError("bin " + std::to_string(i) + " has a negative count");
        if (!(rb.probe.end > rb.probe.start)) throw ConfigError("bin " + std::to_string(i) + " has non-positive width");
        if (i > 0 && rb.probe.start < rec.bins.back().probe.start) throw ConfigError("bins are not time-ordered");
        if (rec.schedule) {
            const auto& s = from_schedule[i];
            const double tol = 1e-6 * (s.end - s.start);
            if (s.mode_id != rb.probe.mode_id || std::abs(s.start - rb.probe.start) > tol) {
                throw ConfigError("bin " + std::to_string(i) + " does not match its schedule");
            }
            rb.probe.live = s.live;
            rb.probe.detuning = s.detuning;
        } else {
            rb.probe.live = rb.probe.end - rb.probe.start;
            if (j.contains("detunings") && j.at("detunings").contains(rb.probe.mode_id)) {
                rb.probe.detuning = detuning_from_json(j.at("detunings").at(rb.probe.mode_id));
            }
        }
        rec.bins.push_back(std::move(rb));
    }
    return rec;
}

std::string record_csv(const TransitRecord& rec) {
    std::ostringstream os;
    os << "t_start_us,t_end_us,mode_id,count,live_us\n";
    for (const auto& b : rec.bins) {
        os << format_number(to_us(b.probe.start)) << ',' << format_number(to_us(b.probe.end)) << ',' << b.probe.mode_id
           << ',' << b.count << ',' << format_number(to_us(b.probe.live)) << '\n';
    }
    return os.str();
}

json fit_to_json(const TransitFit& fit, double waist) {
    json est{{"t0_us", fit.estimate.t0 / kUs},
             {"x0_um", fit.estimate.x0 / kUm},
             {"x0_w0", fit.estimate.x0 / waist},
             {"v_m_s", fit.estimate.v}};
    json sig{{"t0_us", fit.sigma_t0 / kUs}, {"x0_um", fit.sigma_x0 / kUm}, {"x0_w0", fit.sigma_x0 / waist}, {"v_m_s", fit.sigma_v}};
    json free = json::array(), fixed = json::array(), eq = json::array();
    for (auto p : fit.free) free.push_back(to_string(p));
    for (auto p : fit.fixed) fixed.push_back(to_string(p));
    for (double x : fit.equivalent_x0) eq.push_back(x / waist);
    return {{"estimates", std::move(est)},
            {"sigmas", std::move(sig)},
            {"free", std::move(free)},
            {"fixed", std::move(fixed)},
            {"deviance", fit.deviance},
            {"bins", fit.expected.size()},
            {"equivalent_x0_w0", std::move(eq)},
            {"converged", fit.converged},
            {"covariance_ok", fit.covariance_ok},
            {"evaluations", fit.evaluations}};
}

std::string fit_residual_csv(const TransitRecord& rec, const TransitFit& fit) {
    std::ostringstream os;
    os << "t_mid_us,mode_id,count,expected,residual\n";
    for (std::size_t i = 0; i < rec.bins.size() && i < fit.expected.size(); ++i) {
        const auto& b = rec.bins[i];
        os << format_number(to_us(b.probe.mid())) << ',' << b.probe.mode_id << ',' << b.count << ','
           << format_number(fit.expected[i]) << ',' << format_number(fit.residuals[i]) << '\n';
    }
    return os.str();
}

json switched_fit_to_json(const SwitchedFit& fit, double waist) {
    json j = fit_to_json(fit.fit, waist);
    j["fit_mode"] = fit.fit_mode;
    j["companion_mode"] = fit.companion_mode;
    j["companion_deviance"] = fit.companion_deviance;
    j["companion_bins"] = fit.companion_expected.size();
    return j;
}

json candidates_to_json(const PositionCandidateSet& set, double waist) {
    json cands = json::array();
    for (const auto& p : set.candidates) {
        cands.push_back({{"x_um", p.x / kUm}, {"y_um", p.y / kUm}, {"x_w0", p.x / waist}, {"y_w0", p.y / waist}});
    }
    return {{"measured",
             {{"first_mhz", rad_s_to_mhz(set.first.magnitude)},
              {"first_sigma_mhz", rad_s_to_mhz(set.first.sigma)},
              {"second_mhz", rad_s_to_mhz(set.second.magnitude)},
              {"second_sigma_mhz", rad_s_to_mhz(set.second.sigma)}}},
            {"candidates", std::move(cands)},
            {"count", set.candidates.size()},
            {"generic", set.generic}};
}

json correlation_to_json(const CorrelationEstimate& est) {
    return {{"bin_us", to_us(est.bin_width)},
            {"points", est.tau.size()},
            {"transits", est.transits},
            {"normalization", est.normalization},
            {"tau_max_us", static_cast<double>(est.tau.empty() ? 0 : est.tau.size() - 1) * to_us(est.bin_width)}};
}

std::string correlation_csv(const CorrelationEstimate& est) {
    std::ostringstream os;
    os << "tau_us,g2,error,raw\n";
    const double bin_us = to_us(est.bin_width);
    for (std::size_t k = 0; k < est.tau.size(); ++k) {
        os << format_number(static_cast<double>(k) * bin_us) << ',' << format_number(est.g2[k]) << ',' << format_number(est.error[k])
           << ',' << format_number(est.raw[k]) << '\n';
    }
    return os.str();
}

std::string intensity_grid_csv(const IntensityGrid& grid) {
    std::ostringstream os;
    os << "# extent_um=" << format_number(grid.extent / kUm) << " resolution=" << grid.resolution
       << " rows=y cols=x\n";
    for (int j = 0; j < grid.resolution; ++j) {
        for (int i = 0; i < grid.resolution; ++i) {
            if (i > 0) os << ',';
            os << format_number(grid.at(j, i));
        }
        os << '\n';
    }
    return os.str();
}

json scaling_to_json(const ScalingReport& report, double waist, double g0) {
    json entries = json::array();
    for (const auto& e : report.entries) {
        entries.push_back({{"order", e.order},
                           {"central_max_coupling_over_g0", e.central_max_coupling / g0},
                           {"outermost_max_w0", e.outermost_max_position / waist},
                           {"rms_width_w0", e.rms_width / waist},
                           {"neighbor_spacing_w0", e.neighbor_spacing / waist},
                           {"max_gradient_g0_per_w0", e.max_gradient * waist / g0},
                           {"maxima", e.maxima_count}});
    }
    return {{"entries", std::move(entries)},
            {"exponents",
             {{"max_coupling", report.coupling_exponent},
              {"mode_size", report.size_exponent},
              {"outermost_max", report.outermost_exponent},
              {"neighbor_spacing", report.spacing_exponent},
              {"coupling_gradient", report.gradient_exponent}}}};
}

std::string scaling_csv(const ScalingReport& report) {
    std::ostringstream os;
    os << "order,central_max_coupling_mhz,outermost_max_um,rms_width_um,neighbor_spacing_um,max_gradient_mhz_per_um,"
          "maxima\n";
    for (const auto& e : report.entries) {
        os << e.order << ',' << format_number(rad_s_to_mhz(e.central_max_coupling)) << ','
           << format_number(e.outermost_max_position / kUm) << ',' << format_number(e.rms_width / kUm) << ','
           << format_number(e.neighbor_spacing / kUm) << ',' << format_number(rad_s_to_mhz(e.max_gradient) * kUm) << ','
           << e.maxima_count << '\n';
    }
    return os.str();
}

}  // namespace hgcav::io
