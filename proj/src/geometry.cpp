#include "hgcav/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hgcav/errors.hpp"
#include "hgcav/units.hpp"

namespace hgcav {

namespace {

double xi(double length, double radius) { return 1.0 - length / radius; }

void check_axis(double length, double ra, double rb, const char* axis) {
    const double p = xi(length, ra) * xi(length, rb);
    if (!(p >= 0.0 && p <= 1.0)) {
        throw StabilityError(std::string("unstable resonator on ") + axis +
                             " axis: xi1*xi2 = " + std::to_string(p) + " outside [0, 1]");
    }
}

double gouy(double length, double ra, double rb) {
    return std::acos(std::sqrt(xi(length, ra) * xi(length, rb)));
}

}  // namespace

void validate(const CavityParams& p) {
    if (!(p.length > 0.0)) throw ConfigError("cavity length must be positive");
    if (!(p.wavelength > 0.0)) throw ConfigError("wavelength must be positive");
    if (!(p.kappa > 0.0)) throw ConfigError("kappa must be positive");
    if (!(p.gamma > 0.0)) throw ConfigError("gamma must be positive");
    if (!(p.g0 > 0.0)) throw ConfigError("g0 must be positive");
    check_axis(p.length, p.r1, p.r2, "nominal");
    if (p.astigmatism) {
        check_axis(p.length, p.rx1(), p.rx2(), "x");
        check_axis(p.length, p.ry1(), p.ry2(), "y");
    }
}

DerivedParams derive(const CavityParams& p) {
    validate(p);
    DerivedParams d;
    d.fsr = kSpeedOfLight / (2.0 * p.length);

    // Two-mirror resonator waist, w0^4 = (lambda/pi)^2 L (R1-L)(R2-L)(R1+R2-L) / (R1+R2-2L)^2.
    const double L = p.length;
    const double denom = p.r1 + p.r2 - 2.0 * L;
    double w0sq = 0.0;
    if (std::abs(denom) <= 1e-12 * (p.r1 + p.r2)) {
        // Symmetric confocal limit.
        w0sq = p.wavelength * L / (2.0 * kPi);
    } else {
        const double prod = L * (p.r1 - L) * (p.r2 - L) * (p.r1 + p.r2 - L);
        w0sq = p.wavelength / kPi * std::sqrt(std::max(prod, 0.0)) / std::abs(denom);
    }
    if (!(w0sq > 0.0) || !std::isfinite(w0sq)) {
        throw StabilityError("resonator on the stability boundary has no finite waist");
    }
    d.waist = std::sqrt(w0sq);
    d.linewidth = p.kappa / kPi;
    d.finesse = d.fsr / d.linewidth;
    return d;
}

double mode_frequency(const CavityParams& p, int m, int n, int q) {
    if (m < 0 || n < 0) throw ConfigError("mode indices must be non-negative");
    if (q < 1) throw ConfigError("longitudinal index must be >= 1");
    validate(p);
    const double scale = kPi * kSpeedOfLight / p.length;
    const double phx = gouy(p.length, p.rx1(), p.rx2());
    const double phy = gouy(p.length, p.ry1(), p.ry2());
    if (phx == phy) {
        return (q + (m + n + 1) / kPi * phx) * scale;
    }
    return (q + (m + 0.5) / kPi * phx + (n + 0.5) / kPi * phy) * scale;
}

std::vector<FamilyMember> family_spectrum(const CavityParams& p, int order, int q) {
    if (order < 0) throw ConfigError("family order must be non-negative");
    std::vector<FamilyMember> out;
    out.reserve(order + 1);
    for (int m = order; m >= 0; --m) {
        out.push_back({m, order - m, mode_frequency(p, m, order - m, q)});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const FamilyMember& a, const FamilyMember& b) { return a.frequency < b.frequency; });
    return out;
}

int nearest_longitudinal_index(const CavityParams& p) {
    validate(p);
    const double target = kTwoPi * kSpeedOfLight / p.wavelength;
    const double scale = kPi * kSpeedOfLight / p.length;
    const double phx = gouy(p.length, p.rx1(), p.rx2());
    const double phy = gouy(p.length, p.ry1(), p.ry2());
    const double q = target / scale - 0.5 * (phx + phy) / kPi;
    return std::max(1, static_cast<int>(std::lround(q)));
}

double first_order_splitting(const CavityParams& p) {
    return mode_frequency(p, 0, 1, 1) - mode_frequency(p, 1, 0, 1);
}

double astigmatism_for_splitting(const CavityParams& p, double splitting) {
    validate(p);
    if (p.r1 != p.r2) throw ConfigError("splitting calibration assumes nominally identical mirrors");
    if (splitting == 0.0) return 0.0;

    auto split_at = [&](double dr) {
        CavityParams q = p;
        q.astigmatism = Astigmatism{p.r1 + dr / 2, p.r1 - dr / 2, p.r2 + dr / 2, p.r2 - dr / 2, 0.0};
        return first_order_splitting(q) - splitting;
    };

    // Both axes must stay stable: R - |dR|/2 > L/2 for identical mirrors.
    const double limit = 2.0 * (p.r1 - p.length / 2.0) * (1.0 - 1e-9);
    // The splitting is monotonic in dR only away from the concentric limit, so
    // grow the bracket outward from zero.
    const double sign = splitting > 0 ? 1.0 : -1.0;
    double lo = 0.0;
    double hi = sign * 1e-9 * p.r1;
    while (split_at(lo) * split_at(hi) > 0.0) {
        lo = hi;
        hi *= 2.0;
        if (std::abs(hi) >= limit) {
            throw ConfigError("requested splitting is not reachable with a stable astigmatic geometry");
        }
    }
    if (lo > hi) std::swap(lo, hi);
    for (int i = 0; i < 200 && hi - lo > 1e-15 * p.r1; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (split_at(lo) * split_at(mid) <= 0.0) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return 0.5 * (lo + hi);
}

CavityParams with_splitting(const CavityParams& p, double splitting, double axis_angle) {
    const double dr = astigmatism_for_splitting(p, splitting);
    CavityParams q = p;
    q.astigmatism = Astigmatism{p.r1 + dr / 2, p.r1 - dr / 2, p.r2 + dr / 2, p.r2 - dr / 2, axis_angle};
    return q;
}

}  // namespace hgcav
