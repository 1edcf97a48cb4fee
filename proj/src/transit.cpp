#include "hgcav/transit.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "hgcav/errors.hpp"
#include "hgcav/units.hpp"

namespace hgcav {

Point position_at(const Trajectory& traj, double t) { return {traj.x0, traj.v * (t - traj.t0)}; }

double launch_velocity_for(double arrival_velocity, double elapsed) { return arrival_velocity + kGravity * elapsed; }

double ballistic_velocity(const LaunchKinematics& launch, double t) {
    return launch.launch_velocity - kGravity * (t - launch.launch_time);
}

// --- schedules ---------------------------------------------------------------

void ProbeSchedule::validate() const {
    if (segments.empty()) throw ScheduleError("schedule has no segments");
    if (!(bin_width > 0.0)) throw ScheduleError("bin width must be positive");
    if (settle < 0.0) throw ScheduleError("settle duration must be non-negative");
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto& s = segments[i];
        if (s.mode_id.empty()) throw ScheduleError("segment " + std::to_string(i) + " has no mode id");
        if (!(s.duration > 0.0)) throw ScheduleError("segment " + std::to_string(i) + " has non-positive duration");
        if (!(settle < s.duration)) {
            throw ScheduleError("settle window must be shorter than segment " + std::to_string(i));
        }
        if (bin_width > s.duration * (1.0 + 1e-9)) {
            throw ScheduleError("bin width exceeds the duration of segment " + std::to_string(i));
        }
        if (i > 0) {
            const double gap = s.start - segments[i - 1].end();
            if (std::abs(gap) > 1e-9 * s.duration) {
                throw ScheduleError("segments " + std::to_string(i - 1) + " and " + std::to_string(i) +
                                    " are not contiguous");
            }
        }
    }
}

ProbeSchedule make_single_schedule(const std::string& mode_id, const Detuning& detuning, double start, double end,
                                   double bin_width) {
    if (!(end > start)) throw ScheduleError("observation window is empty");
    ProbeSchedule s;
    s.segments.push_back({mode_id, detuning, start, end - start});
    s.bin_width = bin_width;
    s.validate();
    return s;
}

ProbeSchedule make_switched_schedule(const std::string& first_id, const std::string& second_id,
                                     const Detuning& first, const Detuning& second, double switch_frequency,
                                     double settle, double start, double end, double bin_width) {
    if (!(switch_frequency > 0.0)) throw ScheduleError("switch frequency must be positive");
    const double half = 0.5 / switch_frequency;
    if (!(settle < half)) throw ScheduleError("settle window must be shorter than half the switching period");
    if (settle < 0.0) throw ScheduleError("settle duration must be non-negative");
    if (!(end > start)) throw ScheduleError("observation window is empty");

    const bool continuous =
        first_id == second_id && first.delta_a == second.delta_a && first.delta_c == second.delta_c;
    if (continuous) {
        return make_single_schedule(first_id, first, start, end, bin_width > 0.0 ? bin_width : half);
    }

    const auto count = static_cast<long>(std::floor((end - start) / half + 1e-9));
    if (count < 1) throw ScheduleError("observation window shorter than one probe segment");
    ProbeSchedule s;
    s.switching_period = 2.0 * half;
    s.settle = settle;
    s.bin_width = bin_width > 0.0 ? bin_width : half;
    s.segments.reserve(static_cast<std::size_t>(count));
    for (long i = 0; i < count; ++i) {
        const bool even = i % 2 == 0;
        s.segments.push_back({even ? first_id : second_id, even ? first : second, start + i * half, half});
    }
    s.validate();
    return s;
}

std::vector<ProbeBin> schedule_bins(const ProbeSchedule& schedule) {
    schedule.validate();
    std::vector<ProbeBin> bins;
    for (const auto& seg : schedule.segments) {
        const auto n = static_cast<long>(std::ceil(seg.duration / schedule.bin_width - 1e-9));
        const double live_from = seg.start + schedule.settle;
        for (long i = 0; i < n; ++i) {
            ProbeBin b;
            b.start = seg.start + i * schedule.bin_width;
            b.end = i + 1 == n ? seg.end() : seg.start + (i + 1) * schedule.bin_width;
            b.mode_id = seg.mode_id;
            b.detuning = seg.detuning;
            b.live = std::max(0.0, b.end - std::max(b.start, live_from));
            bins.push_back(std::move(b));
        }
    }
    return bins;
}

// --- expected flux -------------------------------------------------------------

TransitModel::TransitModel(std::vector<ProbeBin> bins, const ModeTable& modes, CavityParams params, double rate,
                           int axial_nodes)
    : bins_(std::move(bins)), params_(std::move(params)), rate_(rate), nodes_(axial_nodes) {
    if (!(rate_ >= 0.0)) throw ConfigError("detection rate must be non-negative");
    bin_modes_.reserve(bins_.size());
    for (const auto& b : bins_) {
        auto it = modes.find(b.mode_id);
        if (it == modes.end()) throw ConfigError("unknown mode id '" + b.mode_id + "'");
        bin_modes_.push_back(it->second);
    }
}

void TransitModel::flux(const Trajectory& traj, std::span<double> out) const {
    for (std::size_t i = 0; i < bins_.size(); ++i) {
        const auto p = position_at(traj, bins_[i].mid());
        const double g = std::abs(coupling(params_, bin_modes_[i], p.x, p.y));
        out[i] = rate_ * axial_average(g, bins_[i].detuning, params_, nodes_);
    }
}

std::vector<double> TransitModel::flux(const Trajectory& traj) const {
    std::vector<double> out(bins_.size());
    flux(traj, out);
    return out;
}

void TransitModel::expected_counts(const Trajectory& traj, std::span<double> out) const {
    flux(traj, out);
    for (std::size_t i = 0; i < bins_.size(); ++i) out[i] *= bins_[i].live;
}

std::vector<double> TransitModel::expected_counts(const Trajectory& traj) const {
    std::vector<double> out(bins_.size());
    expected_counts(traj, out);
    return out;
}

std::vector<double> TransitModel::baseline_counts() const {
    std::vector<double> out(bins_.size());
    for (std::size_t i = 0; i < bins_.size(); ++i) {
        out[i] = rate_ * transmission_ratio(0.0, bins_[i].detuning, params_) * bins_[i].live;
    }
    return out;
}

std::vector<ExpectedBin> expected_flux(const Trajectory& traj, const ProbeSchedule& schedule, const ModeTable& modes,
                                       const CavityParams& params, double rate, int axial_nodes) {
    TransitModel model(schedule_bins(schedule), modes, params, rate, axial_nodes);
    const auto flux = model.flux(traj);
    std::vector<ExpectedBin> out;
    out.reserve(flux.size());
    for (std::size_t i = 0; i < flux.size(); ++i) {
        const auto& b = model.bins()[i];
        out.push_back({b, flux[i], flux[i] * b.live});
    }
    return out;
}

// --- records -------------------------------------------------------------------

std::vector<ProbeBin> TransitRecord::probe_bins() const {
    std::vector<ProbeBin> out;
    out.reserve(bins.size());
    for (const auto& b : bins) out.push_back(b.probe);
    return out;
}

std::vector<std::int64_t> TransitRecord::counts() const {
    std::vector<std::int64_t> out;
    out.reserve(bins.size());
    for (const auto& b : bins) out.push_back(b.count);
    return out;
}

bool TransitRecord::has_mode(const std::string& mode_id) const {
    return std::any_of(bins.begin(), bins.end(), [&](const RecordBin& b) { return b.probe.mode_id == mode_id; });
}

TransitRecord TransitRecord::select_mode(const std::string& mode_id) const {
    TransitRecord out;
    out.rate = rate;
    out.seed = seed;
    out.trajectory = trajectory;
    out.schedule = schedule;
    for (const auto& b : bins) {
        if (b.probe.mode_id == mode_id) out.bins.push_back(b);
    }
    return out;
}

TransitRecord sample_counts(std::span<const ExpectedBin> expected, std::uint64_t seed, double rate) {
    std::mt19937_64 rng(seed);
    TransitRecord rec;
    rec.rate = rate;
    rec.seed = seed;
    rec.bins.reserve(expected.size());
    for (const auto& e : expected) {
        if (!(e.expected >= 0.0)) throw ConfigError("expected counts must be non-negative");
        std::int64_t n = 0;
        if (e.expected > 0.0) {
            std::poisson_distribution<std::int64_t> dist(e.expected);
            n = dist(rng);
        }
        rec.bins.push_back({e.bin, n});
    }
    return rec;
}

TransitRecord simulate_transit(const Trajectory& traj, const ProbeSchedule& schedule, const ModeTable& modes,
                               const CavityParams& params, double rate, std::uint64_t seed, int axial_nodes) {
    const auto expected = expected_flux(traj, schedule, modes, params, rate, axial_nodes);
    auto rec = sample_counts(expected, seed, rate);
    rec.trajectory = traj;
    rec.schedule = schedule;
    return rec;
}

}  // namespace hgcav
