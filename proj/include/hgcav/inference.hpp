#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hgcav/transit.hpp"

namespace hgcav {

enum class TrajectoryParam { t0, x0, v };

const char* to_string(TrajectoryParam p);
TrajectoryParam trajectory_param_from_string(const std::string& name);

struct FitOptions {
    std::vector<TrajectoryParam> free{TrajectoryParam::t0, TrajectoryParam::x0, TrajectoryParam::v};
    /// Values for parameters not in `free` (and the fallback start for free ones).
    Trajectory fixed;
    /// Explicit start point; disables the data-driven multistart grid.
    std::optional<Trajectory> init;
    int max_evaluations = 10000;
    int axial_nodes = kDefaultAxialNodes;
};

struct TransitFit {
    Trajectory estimate;
    double sigma_t0 = 0.0;  ///< zero when the parameter is fixed
    double sigma_x0 = 0.0;
    double sigma_v = 0.0;
    std::vector<TrajectoryParam> free;
    std::vector<TrajectoryParam> fixed;
    double deviance = 0.0;
    double negative_log_likelihood = 0.0;
    std::vector<double> expected;   ///< per bin, under the estimate
    std::vector<double> residuals;  ///< observed - expected
    std::vector<double> equivalent_x0;  ///< offsets producing the same signal, includes the estimate
    bool converged = false;
    bool covariance_ok = false;
    int evaluations = 0;

    double sigma(TrajectoryParam p) const;
    double value(TrajectoryParam p) const;
};

/// Poisson deviance 2 sum[n ln(n/mu) - (n - mu)].
double poisson_deviance(std::span<const std::int64_t> counts, std::span<const double> expected);

/// Maximum-likelihood fit of the straight-path model to binned counts.
///
/// Starts are seeded from the dip centroid and width of the baseline-subtracted
/// counts and spread over a grid of offsets and velocities; the best few are
/// polished with Nelder-Mead. Errors come from the finite-difference Hessian of
/// the negative log-likelihood. Throws NoTransitError when the best model stays
/// within 10% of the empty-cavity level in every bin or improves the deviance
/// against that level by less than 20, and ConfigError for
/// records with fewer than 10 bins or unknown mode ids.
TransitFit fit_transit(const TransitRecord& record, const ModeTable& modes, const CavityParams& params,
                       const FitOptions& options = {});

/// All offsets x' giving the same along-path amplitude as x0 for a mode
/// traversed parallel to its y axis (unrotated). For HG_{1,0} this is
/// {+-x0, +-x1} with x1 the conjugate root across the maximum at w0/sqrt(2).
/// Sorted ascending. Throws ZeroCouplingError when x0 sits on a nodal line.
std::vector<double> equivalent_offsets(const ModeSpec& mode, double x0);

struct CouplingMeasurement {
    double magnitude = 0.0;  ///< |g|, rad/s
    double sigma = 0.0;      ///< rad/s
};

struct PositionCandidateSet {
    CouplingMeasurement first;
    CouplingMeasurement second;
    std::vector<Point> candidates;
    bool generic = false;  ///< true when the generic multiplicity 8 was found
};

/// Largest |g| a mode reaches anywhere in the transverse plane.
double max_coupling(const CavityParams& params, const ModeSpec& mode);

/// Every transverse position whose coupling magnitudes to `first_mode` and
/// `second_mode` match the measurements. Contours are bracketed on a grid for
/// all four sign combinations, then refined by Newton iteration. Candidates
/// closer than 1e-2 w0 are merged. A magnitude above its mode's maximum by
/// more than its sigma throws InfeasibleMeasurementError.
PositionCandidateSet invert_two_mode(const CouplingMeasurement& first, const CouplingMeasurement& second,
                                     const ModeSpec& first_mode, const ModeSpec& second_mode,
                                     const CavityParams& params);

struct SwitchedFit {
    TransitFit fit;                    ///< on the fitted mode's bins
    std::string fit_mode;
    std::string companion_mode;
    TransitRecord companion;           ///< companion bins as observed
    std::vector<double> companion_expected;  ///< zero-free-parameter prediction
    double companion_deviance = 0.0;
};

/// Fits (t0, x0, v) on the `fit_mode` bins of an interleaved record and
/// predicts the `companion_mode` bins without further free parameters.
SwitchedFit fit_switched_transit(const TransitRecord& record, const ModeTable& modes, const CavityParams& params,
                                 const std::string& fit_mode, const std::string& companion_mode,
                                 const FitOptions& options = {});

}  // namespace hgcav
