#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library except for parameter structs.

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "hgcav/geometry.hpp"
#include "hgcav/transmission.hpp"
#include "hgcav/units.hpp"

namespace oracle {

inline hgcav::CavityParams paper_cavity() {
    hgcav::CavityParams p;
    p.length = 123e-6;
    p.r1 = 0.2;
    p.r2 = 0.2;
    p.wavelength = 780.2e-9;
    p.kappa = hgcav::mhz_to_rad_s(1.4);
    p.gamma = hgcav::mhz_to_rad_s(3.0);
    p.g0 = hgcav::mhz_to_rad_s(16.0);
    return p;
}

/// Symmetric two-mirror waist, w0^2 = (lambda / 2 pi) sqrt(L (2R - L)).
inline double symmetric_waist(double length, double radius, double wavelength) {
    return std::sqrt(wavelength / (2.0 * hgcav::kPi) * std::sqrt(length * (2.0 * radius - length)));
}

/// H_m(u) = m! sum_k (-1)^k (2u)^(m-2k) / (k! (m-2k)!).
inline long double hermite_explicit(int m, long double u) {
    long double sum = 0.0L;
    for (int k = 0; 2 * k <= m; ++k) {
        long double term = std::pow(2.0L * u, m - 2 * k);
        for (int i = 1; i <= m; ++i) term *= i;
        for (int i = 1; i <= k; ++i) term /= i;
        for (int i = 1; i <= m - 2 * k; ++i) term /= i;
        sum += (k % 2 ? -term : term);
    }
    return sum;
}

/// Gauss-Hermite rule for weight exp(-u^2): Newton iteration on the
/// orthonormal recurrence, started from the usual asymptotic guesses.
inline std::pair<std::vector<double>, std::vector<double>> gauss_hermite(int n) {
    std::vector<double> x(n), w(n);
    const long double pim4 = 0.7511255444649425L;  // pi^(-1/4)
    long double z = 0.0L;
    for (int i = 0; i < (n + 1) / 2; ++i) {
        if (i == 0) {
            z = std::sqrt(2.0L * n + 1.0L) - 1.85575L * std::pow(2.0L * n + 1.0L, -0.16667L);
        } else if (i == 1) {
            z -= 1.14L * std::pow(static_cast<long double>(n), 0.426L) / z;
        } else if (i == 2) {
            z = 1.86L * z - 0.86L * x[0];
        } else if (i == 3) {
            z = 1.91L * z - 0.91L * x[1];
        } else {
            z = 2.0L * z - x[i - 2];
        }
        long double pp = 0.0L;
        for (int it = 0; it < 100; ++it) {
            long double p1 = pim4, p2 = 0.0L;
            for (int j = 0; j < n; ++j) {
                const long double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0L / (j + 1)) * p2 - std::sqrt(static_cast<long double>(j) / (j + 1)) * p3;
            }
            pp = std::sqrt(2.0L * n) * p2;
            const long double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) <= 1e-17L) break;
        }
        x[i] = static_cast<double>(z);
        x[n - 1 - i] = static_cast<double>(-z);
        w[i] = static_cast<double>(2.0L / (pp * pp));
        w[n - 1 - i] = w[i];
    }
    return {x, w};
}

/// Closed-form standing-wave average of the weak-probe transmission:
/// <1 / (g^2 c^2 - z)> = -1 / (z sqrt(1 - g^2 / z)) with the principal branch.
inline double axial_average_closed(double g, const hgcav::Detuning& d, const hgcav::CavityParams& p) {
    using C = std::complex<double>;
    const double k = p.kappa, gm = p.gamma;
    if (g == 0.0) return k * k * (d.delta_a * d.delta_a + gm * gm) /
                         ((d.delta_c * gm + d.delta_a * k) * (d.delta_c * gm + d.delta_a * k) +
                          (d.delta_a * d.delta_c - gm * k) * (d.delta_a * d.delta_c - gm * k));
    const C z(d.delta_a * d.delta_c - gm * k, d.delta_c * gm + d.delta_a * k);
    const C mean_inv = -1.0 / (z * std::sqrt(1.0 - g * g / z));
    const double a = z.imag();
    // 1 / |u - z|^2 = Im[1 / (u - z)] / Im(z) for real u.
    if (a == 0.0) {
        // Purely real pole: use the resonant closed form.
        const double s = g * g / (gm * k);
        return (1.0 + s / 2.0) / std::pow(1.0 + s, 1.5);
    }
    const double mean_abs2 = mean_inv.imag() / a;
    return k * k * (d.delta_a * d.delta_a + gm * gm) * mean_abs2;
}

/// On resonance, <T> = (1 + a/2) / (1 + a)^(3/2) with a = g^2 / (gamma kappa).
inline double resonant_axial_average(double a) { return (1.0 + a / 2.0) / std::pow(1.0 + a, 1.5); }

/// Conjugate root of u exp(-u^2) across its maximum at 1/sqrt(2), by bisection.
inline double conjugate_root(double u0) {
    const double target = u0 * std::exp(-u0 * u0);
    const double peak = 1.0 / std::sqrt(2.0);
    double lo = u0 < peak ? peak : 0.0;
    double hi = u0 < peak ? 10.0 : peak;
    auto f = [&](double u) { return u * std::exp(-u * u) - target; };
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if ((f(lo) > 0) == (f(mid) > 0)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

/// Seeded uniform draws for property sweeps.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

}  // namespace oracle
