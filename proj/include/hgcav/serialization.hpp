#pragma once

#include <string>

#include "json.hpp"

#include "hgcav/correlation.hpp"
#include "hgcav/inference.hpp"
#include "hgcav/modes.hpp"
#include "hgcav/transit.hpp"

// JSON and CSV forms of the library's results. At this boundary lengths are
// in micrometres, times in microseconds and rates in MHz (as omega / 2 pi);
// every value is converted back to SI / rad/s on input.
namespace hgcav::io {

using nlohmann::json;

inline constexpr const char* kRecordSchema = "hgcav.transit_record/1";

json detuning_to_json(const Detuning& d);
Detuning detuning_from_json(const json& j);

json trajectory_to_json(const Trajectory& t);
Trajectory trajectory_from_json(const json& j);

json schedule_to_json(const ProbeSchedule& s);
ProbeSchedule schedule_from_json(const json& j);

/// Metadata object plus bins as [t_start_us, t_end_us, mode_id, count].
json record_to_json(const TransitRecord& rec);
/// Live durations and detunings are rebuilt from the schedule when present;
/// otherwise bins are fully live and detunings come from the "detunings" map
/// (resonant when absent).
TransitRecord record_from_json(const json& j);

/// Columns: t_start_us,t_end_us,mode_id,count,live_us
std::string record_csv(const TransitRecord& rec);

json fit_to_json(const TransitFit& fit, double waist);
/// Columns: t_mid_us,mode_id,count,expected,residual
std::string fit_residual_csv(const TransitRecord& rec, const TransitFit& fit);

json switched_fit_to_json(const SwitchedFit& fit, double waist);

json candidates_to_json(const PositionCandidateSet& set, double waist);

json correlation_to_json(const CorrelationEstimate& est);
/// Columns: tau_us,g2,error,raw
std::string correlation_csv(const CorrelationEstimate& est);

/// First line "# extent_um=<e> resolution=<n> rows=y cols=x", then one row per y.
std::string intensity_grid_csv(const IntensityGrid& grid);

json scaling_to_json(const ScalingReport& report, double waist, double g0);
/// Columns: order,central_max_coupling_mhz,outermost_max_um,rms_width_um,neighbor_spacing_um,max_gradient_mhz_per_um,maxima
std::string scaling_csv(const ScalingReport& report);

/// Shortest round-trip decimal form of a double, as used in every CSV.
std::string format_number(double v);

}  // namespace hgcav::io
