#pragma once

#include <optional>
#include <vector>

namespace hgcav {

/// Per-axis radii of curvature for a mildly astigmatic pair of mirrors.
struct Astigmatism {
    double rx1 = 0.0;  ///< mirror 1, x axis (m)
    double ry1 = 0.0;  ///< mirror 1, y axis (m)
    double rx2 = 0.0;
    double ry2 = 0.0;
    double axis_angle = 0.0;  ///< rad, orientation of the x axis
};

/// Physical constants of the cavity and the atom. Rates are in rad/s.
struct CavityParams {
    double length = 0.0;      ///< m
    double r1 = 0.0;          ///< m
    double r2 = 0.0;          ///< m
    std::optional<Astigmatism> astigmatism;
    double wavelength = 0.0;  ///< m
    double kappa = 0.0;       ///< cavity field decay rate
    double gamma = 0.0;       ///< atomic dipole decay rate
    double g0 = 0.0;          ///< peak coupling on axis, fundamental mode

    double rx1() const { return astigmatism ? astigmatism->rx1 : r1; }
    double ry1() const { return astigmatism ? astigmatism->ry1 : r1; }
    double rx2() const { return astigmatism ? astigmatism->rx2 : r2; }
    double ry2() const { return astigmatism ? astigmatism->ry2 : r2; }
};

struct DerivedParams {
    double fsr = 0.0;        ///< Hz
    double waist = 0.0;      ///< m
    double linewidth = 0.0;  ///< Hz, FWHM
    double finesse = 0.0;
};

struct FamilyMember {
    int m = 0;
    int n = 0;
    double frequency = 0.0;  ///< rad/s
};

/// Throws StabilityError unless the geometry (every axis, when astigmatic) is
/// a stable resonator, and ConfigError for non-positive rates or lengths.
void validate(const CavityParams& params);

DerivedParams derive(const CavityParams& params);

/// Angular eigenfrequency of HG_{m,n} with longitudinal index q. With
/// astigmatic mirrors the Gouy phase is split per transverse axis; when both
/// axes agree the result is identical to the spherical-mirror expression.
double mode_frequency(const CavityParams& params, int m, int n, int q);

/// The N+1 members of family N, sorted by frequency (stable on ties, m
/// descending).
std::vector<FamilyMember> family_spectrum(const CavityParams& params, int order, int q);

/// Longitudinal index of the TEM00 resonance closest to the configured wavelength.
int nearest_longitudinal_index(const CavityParams& params);

/// Frequency of HG_{1,0} minus HG_{0,1} (rad/s).
double first_order_splitting(const CavityParams& params);

/// Symmetric astigmatism (both mirrors, Rx = R + dR/2, Ry = R - dR/2) whose
/// N=1 splitting equals `splitting` (rad/s). Returns dR in meters; requires
/// r1 == r2 in `params`.
double astigmatism_for_splitting(const CavityParams& params, double splitting);

/// Copy of `params` with the symmetric astigmatism of `astigmatism_for_splitting`.
CavityParams with_splitting(const CavityParams& params, double splitting, double axis_angle = 0.0);

}  // namespace hgcav
