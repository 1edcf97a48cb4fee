#include "hgcav/modes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hgcav/errors.hpp"
#include "hgcav/units.hpp"

namespace hgcav {

namespace {

// Orders above this use the rescaled Hermite-function recurrence instead of
// the literal C_{m,n} H_m H_n exp(...) product.
constexpr int kDirectOrderLimit = 40;
constexpr double kRescale = 1e150;
const double kLogRescale = std::log(kRescale);

struct HermitePair {
    double current = 0.0;   // h_m(u)
    double previous = 0.0;  // h_{m-1}(u)
};

HermitePair hermite_function_pair(int m, double u) {
    // Carry exp(-u^2/2) pi^(-1/4) as a log scale so the recurrence starts at 1.
    double log_scale = -0.5 * u * u - 0.25 * std::log(kPi);
    double prev = 0.0;
    double cur = 1.0;
    for (int k = 0; k < m; ++k) {
        const double next = std::sqrt(2.0 / (k + 1)) * u * cur - std::sqrt(static_cast<double>(k) / (k + 1)) * prev;
        prev = cur;
        cur = next;
        if (std::abs(cur) > kRescale) {
            cur /= kRescale;
            prev /= kRescale;
            log_scale += kLogRescale;
        }
    }
    const double factor = std::exp(log_scale);
    return {cur * factor, prev * factor};
}

double log_factorial(int k) { return std::lgamma(k + 1.0); }

void rotate_into_mode_frame(const ModeSpec& mode, double x, double y, double& u, double& v) {
    if (mode.angle == 0.0) {
        u = x;
        v = y;
        return;
    }
    const double c = std::cos(mode.angle);
    const double s = std::sin(mode.angle);
    u = c * x + s * y;
    v = -s * x + c * y;
}

void check_family_compatible(const ModeSpec& a, const ModeSpec& b) {
    if (a.order() != b.order()) throw ConfigError("superposition members must share the family order");
    if (a.waist != b.waist) throw ConfigError("superposition members must share the waist");
    if (a.angle != b.angle) throw ConfigError("superposition members must share the orientation");
}

double golden_max(const auto& f, double lo, double hi) {
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double c = b - r * (b - a);
    double d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < 200 && (b - a) > 1e-13 * std::max(1.0, std::abs(a) + std::abs(b)); ++i) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

double hermite_poly(int m, double u) {
    if (m < 0) throw ConfigError("Hermite order must be non-negative");
    if (m == 0) return 1.0;
    double prev = 1.0;
    double cur = 2.0 * u;
    for (int k = 1; k < m; ++k) {
        const double next = 2.0 * u * cur - 2.0 * k * prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

double hermite_function(int m, double u) {
    if (m < 0) throw ConfigError("Hermite order must be non-negative");
    return hermite_function_pair(m, u).current;
}

double hermite_function_derivative(int m, double u) {
    if (m < 0) throw ConfigError("Hermite order must be non-negative");
    const auto h = hermite_function_pair(m, u);
    return std::sqrt(2.0 * m) * h.previous - u * h.current;
}

double fundamental_peak(double waist) { return 1.0 / std::sqrt(waist * waist * kPi / 2.0); }

double mode_amplitude(const ModeSpec& mode, double x, double y) {
    double u = 0.0, v = 0.0;
    rotate_into_mode_frame(mode, x, y, u, v);
    const double su = std::sqrt(2.0) * u / mode.waist;
    const double sv = std::sqrt(2.0) * v / mode.waist;
    if (mode.order() <= kDirectOrderLimit) {
        const double log_norm = -0.5 * ((mode.m + mode.n) * std::log(2.0) + log_factorial(mode.m) + log_factorial(mode.n));
        const double c = std::exp(log_norm) * fundamental_peak(mode.waist);
        return c * std::exp(-(u * u + v * v) / (mode.waist * mode.waist)) * hermite_poly(mode.m, su) *
               hermite_poly(mode.n, sv);
    }
    return std::sqrt(2.0) / mode.waist * hermite_function(mode.m, su) * hermite_function(mode.n, sv);
}

double coupling(const CavityParams& params, const ModeSpec& mode, double x, double y) {
    return params.g0 * mode_amplitude(mode, x, y) / fundamental_peak(mode.waist);
}

// --- FieldSuperposition ----------------------------------------------------

FieldSuperposition::FieldSuperposition(std::vector<SuperpositionTerm> terms) : terms_(std::move(terms)) {
    if (terms_.empty()) throw ConfigError("superposition needs at least one term");
    for (std::size_t i = 1; i < terms_.size(); ++i) check_family_compatible(terms_.front().mode, terms_[i].mode);
    double norm2 = 0.0;
    for (const auto& t : terms_) norm2 += std::norm(t.coefficient);
    if (!(norm2 > 0.0)) throw ConfigError("superposition coefficients are all zero");
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& t : terms_) t.coefficient *= inv;
}

FieldSuperposition FieldSuperposition::single(const ModeSpec& mode) {
    return FieldSuperposition({{mode, {1.0, 0.0}}});
}

std::complex<double> FieldSuperposition::amplitude(double x, double y) const {
    std::complex<double> sum{0.0, 0.0};
    for (const auto& t : terms_) sum += t.coefficient * mode_amplitude(t.mode, x, y);
    return sum;
}

std::complex<double> coupling(const CavityParams& params, const FieldSuperposition& field, double x, double y) {
    return params.g0 * field.amplitude(x, y) / fundamental_peak(field.waist());
}

// --- grids -----------------------------------------------------------------

double IntensityGrid::coordinate(int index) const {
    return -extent + 2.0 * extent * index / (resolution - 1);
}

IntensityGrid intensity_grid(const FieldSuperposition& field, double extent, int resolution) {
    if (resolution < 2) throw ConfigError("grid resolution must be >= 2");
    if (!(extent > 0.0)) throw ConfigError("grid extent must be positive");
    IntensityGrid grid;
    grid.extent = extent;
    grid.resolution = resolution;
    grid.values.resize(static_cast<std::size_t>(resolution) * resolution);
    for (int j = 0; j < resolution; ++j) {
        const double y = grid.coordinate(j);
        for (int i = 0; i < resolution; ++i) {
            grid.values[static_cast<std::size_t>(j) * resolution + i] = std::norm(field.amplitude(grid.coordinate(i), y));
        }
    }
    return grid;
}

IntensityGrid intensity_grid(const ModeSpec& mode, double extent, int resolution) {
    return intensity_grid(FieldSuperposition::single(mode), extent, resolution);
}

// --- effective mode ----------------------------------------------------------

EffectiveDecomposition effective_mode(const CavityParams& params, std::span<const ModeSpec> family, double x,
                                      double y, const FieldSuperposition* driven) {
    if (family.empty()) throw ConfigError("effective mode needs a non-empty family");
    for (std::size_t i = 0; i < family.size(); ++i) {
        check_family_compatible(family.front(), family[i]);
        for (std::size_t j = 0; j < i; ++j) {
            if (family[i].m == family[j].m && family[i].n == family[j].n) {
                throw ConfigError("family members must be distinct");
            }
        }
    }

    std::vector<double> psi(family.size());
    double norm2 = 0.0;
    for (std::size_t i = 0; i < family.size(); ++i) {
        psi[i] = mode_amplitude(family[i], x, y);
        norm2 += psi[i] * psi[i];
    }
    if (!(norm2 > 0.0)) {
        throw UndefinedDecompositionError("atom lies on a node common to every family member");
    }
    const double norm = std::sqrt(norm2);

    std::vector<SuperpositionTerm> terms;
    terms.reserve(family.size());
    for (std::size_t i = 0; i < family.size(); ++i) terms.push_back({family[i], {psi[i] / norm, 0.0}});

    EffectiveDecomposition out{FieldSuperposition(std::move(terms)), {0.0, 0.0},
                               params.g0 * norm / fundamental_peak(family.front().waist)};
    if (driven != nullptr) {
        const auto residual = residual_terms(out.effective, *driven);
        std::complex<double> amp{0.0, 0.0};
        for (const auto& t : residual) amp += t.coefficient * mode_amplitude(t.mode, x, y);
        out.residual_at_atom = amp;
    }
    return out;
}

std::vector<SuperpositionTerm> residual_terms(const FieldSuperposition& effective, const FieldSuperposition& driven) {
    const auto& eff = effective.terms();
    std::vector<std::complex<double>> d(eff.size(), {0.0, 0.0});
    for (const auto& t : driven.terms()) {
        auto it = std::find_if(eff.begin(), eff.end(),
                               [&](const SuperpositionTerm& e) { return e.mode.m == t.mode.m && e.mode.n == t.mode.n; });
        if (it == eff.end()) throw ConfigError("driven field contains a mode outside the family");
        check_family_compatible(it->mode, t.mode);
        d[static_cast<std::size_t>(it - eff.begin())] += t.coefficient;
    }
    std::complex<double> overlap{0.0, 0.0};
    for (std::size_t i = 0; i < eff.size(); ++i) overlap += std::conj(eff[i].coefficient) * d[i];

    std::vector<SuperpositionTerm> out;
    out.reserve(eff.size());
    for (std::size_t i = 0; i < eff.size(); ++i) out.push_back({eff[i].mode, d[i] - overlap * eff[i].coefficient});
    return out;
}

// --- scaling -----------------------------------------------------------------

double loglog_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw ConfigError("log-log fit needs >= 2 matching points");
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]);
        const double ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

ScalingReport scaling_report(const CavityParams& params, double waist, std::span<const int> orders) {
    if (orders.size() < 2) throw ConfigError("scaling report needs at least two orders");
    ScalingReport report;
    // Along y = 0, g(x) = g0 pi^(1/4) h_N(sqrt(2) x / w0).
    const double coupling_scale = params.g0 * std::pow(kPi, 0.25);
    const double to_x = waist / std::sqrt(2.0);

    for (int order : orders) {
        if (order < 1) throw ConfigError("scaling report orders must be >= 1");
        auto amp = [order](double u) { return std::abs(hermite_function(order, u)); };
        auto slope = [order](double u) { return std::abs(hermite_function_derivative(order, u)); };

        const double u_max = std::sqrt(2.0 * order) + 4.0;
        const int samples = std::max(50 * order, 2000);
        const double du = u_max / samples;
        std::vector<double> a(samples + 1), s(samples + 1);
        for (int i = 0; i <= samples; ++i) {
            a[i] = amp(i * du);
            s[i] = slope(i * du);
        }

        std::vector<double> maxima;
        // Even orders peak on the axis; the grid is one-sided so test u = 0 against its right neighbour.
        if (order % 2 == 0 && a[0] > a[1]) maxima.push_back(0.0);
        for (int i = 1; i < samples; ++i) {
            if (a[i] >= a[i - 1] && a[i] > a[i + 1]) maxima.push_back(golden_max(amp, (i - 1) * du, (i + 1) * du));
        }
        if (maxima.size() < 2 && !(maxima.size() == 1 && maxima[0] > 0.0)) {
            throw Error("failed to locate intensity maxima for order " + std::to_string(order));
        }

        int best = 0;
        for (int i = 1; i <= samples; ++i) {
            if (s[i] > s[best]) best = i;
        }
        const double u_grad = golden_max(slope, std::max(0.0, (best - 1) * du), std::min(u_max, (best + 1) * du));

        ScalingEntry e;
        e.order = order;
        e.central_max_coupling = coupling_scale * amp(maxima.front());
        e.outermost_max_position = maxima.back() * to_x;
        e.rms_width = waist * std::sqrt(2.0 * order + 1.0) / 2.0;
        e.neighbor_spacing = (maxima.front() == 0.0 ? maxima[1] - maxima[0] : 2.0 * maxima.front()) * to_x;
        e.max_gradient = coupling_scale * slope(u_grad) / to_x;
        e.maxima_count = static_cast<int>(maxima.front() == 0.0 ? 2 * maxima.size() - 1 : 2 * maxima.size());
        report.entries.push_back(e);
    }

    std::vector<double> n, g, outer, rms, spacing, grad;
    for (const auto& e : report.entries) {
        n.push_back(e.order);
        g.push_back(e.central_max_coupling);
        outer.push_back(e.outermost_max_position);
        rms.push_back(e.rms_width);
        spacing.push_back(e.neighbor_spacing);
        grad.push_back(e.max_gradient);
    }
    report.coupling_exponent = loglog_slope(n, g);
    report.outermost_exponent = loglog_slope(n, outer);
    report.size_exponent = loglog_slope(n, rms);
    report.spacing_exponent = loglog_slope(n, spacing);
    report.gradient_exponent = loglog_slope(n, grad);
    return report;
}

}  // namespace hgcav
