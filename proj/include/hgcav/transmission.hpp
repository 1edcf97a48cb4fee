#pragma once

#include "hgcav/geometry.hpp"

namespace hgcav {

/// Probe-laser detunings in rad/s: delta_a = w_L - w_A, delta_c = w_L - w_C.
struct Detuning {
    double delta_a = 0.0;
    double delta_c = 0.0;
};

inline constexpr int kDefaultAxialNodes = 64;

/// Weak-probe transmission relative to the resonant empty cavity,
/// kappa^2 (dA^2 + gamma^2) / [(dC gamma + dA kappa)^2 + (g^2 - dA dC + gamma kappa)^2].
double transmission_ratio(double g, const Detuning& det, const CavityParams& params);

/// Mean of transmission_ratio(g cos(phi)) over one standing-wave period.
///
/// Periodic trapezoid rule in a stretched angle psi, tan(phi) = tan(psi) / s,
/// where s is chosen from the complex pole of the integrand so nodes gather
/// where the integrand varies fastest. On resonance the stretched integrand
/// is integrated to rounding error for any coupling; `nodes` >= 8.
double axial_average(double g_transverse, const Detuning& det, const CavityParams& params,
                     int nodes = kDefaultAxialNodes);

/// Empty-cavity on/off resonance transmission ratio, 1 + (splitting / kappa)^2.
double mode_selectivity(double splitting, const CavityParams& params);

}  // namespace hgcav
