#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hgcav/geometry.hpp"
#include "hgcav/modes.hpp"
#include "hgcav/transmission.hpp"

namespace hgcav {

struct LaunchKinematics {
    double launch_velocity = 0.0;  ///< m/s, upward
    double launch_time = 0.0;      ///< s
};

/// Straight vertical path: x = x0 fixed, y = v (t - t0).
struct Trajectory {
    double x0 = 0.0;  ///< m, signed closest distance to the cavity axis
    double t0 = 0.0;  ///< s, time of the y = 0 crossing
    double v = 0.0;   ///< m/s
    std::optional<LaunchKinematics> launch;
};

struct Point {
    double x = 0.0;
    double y = 0.0;
};

Point position_at(const Trajectory& traj, double t);

/// Ballistic launch speed that arrives with `arrival_velocity` after `elapsed` seconds.
double launch_velocity_for(double arrival_velocity, double elapsed);

/// Vertical velocity at time t of a ballistic launch.
double ballistic_velocity(const LaunchKinematics& launch, double t);

using ModeTable = std::map<std::string, ModeSpec>;

struct ProbeSegment {
    std::string mode_id;
    Detuning detuning;
    double start = 0.0;     ///< s
    double duration = 0.0;  ///< s

    double end() const { return start + duration; }
};

struct ProbeSchedule {
    std::vector<ProbeSegment> segments;
    double switching_period = 0.0;  ///< s; zero for continuous single-mode probing
    double settle = 0.0;            ///< s discarded at the start of every segment
    double bin_width = 0.0;         ///< s

    /// Throws ScheduleError on overlapping / non-contiguous segments, a settle
    /// window at least as long as a segment, or a bin wider than a segment.
    void validate() const;

    double window_start() const { return segments.front().start; }
    double window_end() const { return segments.back().end(); }
};

ProbeSchedule make_single_schedule(const std::string& mode_id, const Detuning& detuning, double start, double end,
                                   double bin_width);

/// Alternates the two modes every half period of `switch_frequency` (Hz).
/// A bin width of zero means one bin per segment. Equal mode ids with equal
/// detunings degrade to continuous probing of that mode.
ProbeSchedule make_switched_schedule(const std::string& first_id, const std::string& second_id,
                                     const Detuning& first, const Detuning& second, double switch_frequency,
                                     double settle, double start, double end, double bin_width = 0.0);

/// One detection bin. `live` is the part of [start, end) outside settle windows.
struct ProbeBin {
    double start = 0.0;
    double end = 0.0;
    std::string mode_id;
    double live = 0.0;
    Detuning detuning;

    double mid() const { return 0.5 * (start + end); }
};

/// Splits every segment into bins of the schedule's bin width (the last bin of
/// a segment may be shorter).
std::vector<ProbeBin> schedule_bins(const ProbeSchedule& schedule);

/// Expected detection rate over a fixed set of bins, with modes resolved once.
class TransitModel {
public:
    /// Throws ConfigError if a bin's mode id is missing from `modes`.
    TransitModel(std::vector<ProbeBin> bins, const ModeTable& modes, CavityParams params, double rate,
                 int axial_nodes = kDefaultAxialNodes);

    const std::vector<ProbeBin>& bins() const { return bins_; }
    double rate() const { return rate_; }
    const CavityParams& params() const { return params_; }

    /// Flux (counts/s) at each bin midpoint.
    void flux(const Trajectory& traj, std::span<double> out) const;
    std::vector<double> flux(const Trajectory& traj) const;

    /// flux * live duration.
    void expected_counts(const Trajectory& traj, std::span<double> out) const;
    std::vector<double> expected_counts(const Trajectory& traj) const;

    /// Counts expected with no atom present.
    std::vector<double> baseline_counts() const;

private:
    std::vector<ProbeBin> bins_;
    std::vector<ModeSpec> bin_modes_;
    CavityParams params_;
    double rate_ = 0.0;
    int nodes_ = kDefaultAxialNodes;
};

struct ExpectedBin {
    ProbeBin bin;
    double flux = 0.0;      ///< counts/s at the bin midpoint
    double expected = 0.0;  ///< flux * live
};

std::vector<ExpectedBin> expected_flux(const Trajectory& traj, const ProbeSchedule& schedule, const ModeTable& modes,
                                       const CavityParams& params, double rate,
                                       int axial_nodes = kDefaultAxialNodes);

struct RecordBin {
    ProbeBin probe;
    std::int64_t count = 0;
};

struct TransitRecord {
    std::vector<RecordBin> bins;
    double rate = 0.0;  ///< R0, counts/s through the empty resonant cavity
    std::uint64_t seed = 0;
    std::optional<Trajectory> trajectory;
    std::optional<ProbeSchedule> schedule;

    std::vector<ProbeBin> probe_bins() const;
    std::vector<std::int64_t> counts() const;
    bool has_mode(const std::string& mode_id) const;
    /// Bins probing one mode, metadata kept.
    TransitRecord select_mode(const std::string& mode_id) const;
};

/// Independent Poisson draw per bin with mean `expected`; deterministic in seed.
TransitRecord sample_counts(std::span<const ExpectedBin> expected, std::uint64_t seed, double rate);

TransitRecord simulate_transit(const Trajectory& traj, const ProbeSchedule& schedule, const ModeTable& modes,
                               const CavityParams& params, double rate, std::uint64_t seed,
                               int axial_nodes = kDefaultAxialNodes);

/// Seed for transit `index` of an ensemble.
constexpr std::uint64_t transit_seed(std::uint64_t master, std::uint64_t index) { return master + index; }

}  // namespace hgcav
