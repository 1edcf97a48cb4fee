#pragma once

#include <complex>
#include <span>
#include <vector>

#include "hgcav/geometry.hpp"

namespace hgcav {

/// A Hermite-Gaussian transverse mode HG_{m,n} with waist and in-plane
/// orientation. `angle` rotates the mode's x axis counter-clockwise.
struct ModeSpec {
    int m = 0;
    int n = 0;
    double waist = 0.0;  ///< m
    double angle = 0.0;  ///< rad, in [-pi/2, pi/2)

    int order() const { return m + n; }
};

struct SuperpositionTerm {
    ModeSpec mode;
    std::complex<double> coefficient;
};

/// Normalized linear combination of members of one transverse family.
class FieldSuperposition {
public:
    /// Normalizes the coefficients. Throws ConfigError when members disagree
    /// on order, waist or angle, or when every coefficient is zero.
    explicit FieldSuperposition(std::vector<SuperpositionTerm> terms);

    static FieldSuperposition single(const ModeSpec& mode);

    const std::vector<SuperpositionTerm>& terms() const { return terms_; }
    int order() const { return terms_.front().mode.order(); }
    double waist() const { return terms_.front().mode.waist; }
    double angle() const { return terms_.front().mode.angle; }

    std::complex<double> amplitude(double x, double y) const;

private:
    std::vector<SuperpositionTerm> terms_;
};

struct EffectiveDecomposition {
    FieldSuperposition effective;
    std::complex<double> residual_at_atom;  ///< driven field's residual part, evaluated at the atom
    double g_eff = 0.0;                     ///< rad/s
};

/// Physicists' Hermite polynomial H_m(u) by three-term recurrence.
double hermite_poly(int m, double u);

/// Normalized Hermite function h_m(u) = H_m(u) exp(-u^2/2) / sqrt(2^m m! sqrt(pi)),
/// evaluated with running rescaling so large orders neither overflow nor
/// lose the tails prematurely.
double hermite_function(int m, double u);

/// Derivative of the normalized Hermite function with respect to u.
double hermite_function_derivative(int m, double u);

/// psi_{m,n}(x, y) with unit norm over the transverse plane (1/m).
double mode_amplitude(const ModeSpec& mode, double x, double y);

/// psi_{0,0}(0,0) for a given waist.
double fundamental_peak(double waist);

/// g_{m,n}(x, y) = g0 psi_{m,n}(x, y) / psi_{0,0}(0, 0). Signed.
double coupling(const CavityParams& params, const ModeSpec& mode, double x, double y);

/// Intensity grid on the centered square [-extent, extent]^2. Row-major;
/// row j holds y_j = -extent + 2 extent j / (resolution - 1), column i holds x_i.
struct IntensityGrid {
    double extent = 0.0;
    int resolution = 0;
    std::vector<double> values;

    double coordinate(int index) const;
    double at(int row, int col) const { return values[static_cast<std::size_t>(row) * resolution + col]; }
};

IntensityGrid intensity_grid(const FieldSuperposition& field, double extent, int resolution);
IntensityGrid intensity_grid(const ModeSpec& mode, double extent, int resolution);

/// Effective mode of a degenerate family at the atom position (x, y). When a
/// driven field is given, its residual (orthogonal to the effective mode) is
/// evaluated at the atom. Throws UndefinedDecompositionError on a common node.
EffectiveDecomposition effective_mode(const CavityParams& params, std::span<const ModeSpec> family,
                                      double x, double y,
                                      const FieldSuperposition* driven = nullptr);

/// Component of `driven` orthogonal to `effective` (coefficient-space projection).
std::vector<SuperpositionTerm> residual_terms(const FieldSuperposition& effective,
                                              const FieldSuperposition& driven);

/// Coupling of a superposition: g0 * amplitude / psi_00(0,0).
std::complex<double> coupling(const CavityParams& params, const FieldSuperposition& field, double x, double y);

struct ScalingEntry {
    int order = 0;
    double central_max_coupling = 0.0;  ///< rad/s, innermost intensity maximum
    double outermost_max_position = 0.0;  ///< m from the axis
    double rms_width = 0.0;             ///< m, second-moment half width along the mode axis
    double neighbor_spacing = 0.0;      ///< m, between the two innermost maxima
    double max_gradient = 0.0;          ///< rad/s per m, max |dg/dx| along the mode axis
    int maxima_count = 0;
};

struct ScalingReport {
    std::vector<ScalingEntry> entries;
    double coupling_exponent = 0.0;
    double outermost_exponent = 0.0;
    double size_exponent = 0.0;      ///< from the second-moment width
    double spacing_exponent = 0.0;
    double gradient_exponent = 0.0;
};

/// Locates the on-axis intensity maxima of HG_{N,0} for each N and fits
/// log-log slopes. Needs at least two N values, all >= 1.
ScalingReport scaling_report(const CavityParams& params, double waist, std::span<const int> orders);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace hgcav
