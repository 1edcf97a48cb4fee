#include "hgcav/transmission.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "hgcav/errors.hpp"
#include "hgcav/units.hpp"

namespace hgcav {

double transmission_ratio(double g, const Detuning& det, const CavityParams& params) {
    const double k = params.kappa;
    const double gm = params.gamma;
    const double da = det.delta_a;
    const double dc = det.delta_c;
    const double a = dc * gm + da * k;
    const double b = g * g - da * dc + gm * k;
    return k * k * (da * da + gm * gm) / (a * a + b * b);
}

double axial_average(double g_transverse, const Detuning& det, const CavityParams& params, int nodes) {
    if (nodes < 8) throw ConfigError("axial average needs at least 8 nodes");
    if (g_transverse == 0.0) return transmission_ratio(0.0, det, params);

    // As a function of c = cos^2(phi) the integrand has poles at g^2 c = z,
    // z = (dA dC - gamma kappa) + i (dC gamma + dA kappa). In t = tan(phi) they
    // sit at |t|^2 = |g^2/z - 1|; scaling t by that modulus moves them as far
    // from the real psi axis as a real scaling can.
    const double g2 = g_transverse * g_transverse;
    const std::complex<double> z(det.delta_a * det.delta_c - params.gamma * params.kappa,
                                 det.delta_c * params.gamma + det.delta_a * params.kappa);
    const double t_pole = std::sqrt(std::abs(g2 / z - 1.0));
    const double stretch = std::clamp(t_pole > 0.0 ? 1.0 / t_pole : 1.0, 1e-6, 1e6);

    double sum = 0.0;
    for (int i = 0; i < nodes; ++i) {
        const double psi = (i + 0.5) * kPi / nodes - kPi / 2.0;
        const double tau = std::tan(psi);
        const double t = tau / stretch;
        const double c2 = 1.0 / (1.0 + t * t);  // cos^2(phi)
        const double cpsi = std::cos(psi);
        const double jac = c2 / (stretch * cpsi * cpsi);  // dphi/dpsi
        sum += transmission_ratio(g_transverse * std::sqrt(c2), det, params) * jac;
    }
    return sum / nodes;
}

double mode_selectivity(double splitting, const CavityParams& params) {
    if (splitting < 0.0) throw ConfigError("splitting must be non-negative");
    const double r = splitting / params.kappa;
    return 1.0 + r * r;
}

}  // namespace hgcav
