#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "hgcav/errors.hpp"
#include "hgcav/modes.hpp"
#include "oracles.hpp"

using namespace hgcav;

namespace {

const auto kParams = oracle::paper_cavity();
const double kW0 = derive(kParams).waist;

double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

/// psi_{m,n} written out with the explicit normalization constant.
double psi_direct(int m, int n, double w0, double x, double y) {
    const double c = 1.0 / std::sqrt(std::pow(2.0, m) * std::pow(2.0, n) * factorial(m) * factorial(n)) /
                     std::sqrt(w0 * w0 * kPi / 2.0);
    return c * std::exp(-(x * x + y * y) / (w0 * w0)) *
           static_cast<double>(oracle::hermite_explicit(m, std::sqrt(2.0) * x / w0)) *
           static_cast<double>(oracle::hermite_explicit(n, std::sqrt(2.0) * y / w0));
}

/// Overlap of two modes by a 2-D Gauss-Hermite rule in u = sqrt(2) x / w0.
double overlap(const ModeSpec& a, const ModeSpec& b, int nodes) {
    const auto [u, w] = oracle::gauss_hermite(nodes);
    const double w0 = a.waist;
    double sum = 0.0;
    for (int i = 0; i < nodes; ++i) {
        for (int j = 0; j < nodes; ++j) {
            const double x = u[i] * w0 / std::sqrt(2.0), y = u[j] * w0 / std::sqrt(2.0);
            const double f = mode_amplitude(a, x, y) * mode_amplitude(b, x, y);
            sum += w[i] * w[j] * f * std::exp(u[i] * u[i] + u[j] * u[j]);
        }
    }
    return sum * w0 * w0 / 2.0;
}

std::vector<double> axis_maxima(const ModeSpec& mode, double extent, double step, bool along_y) {
    std::vector<double> pos, val;
    for (double s = -extent; s <= extent + 0.5 * step; s += step) {
        pos.push_back(s);
        const double a = along_y ? mode_amplitude(mode, 0.0, s) : mode_amplitude(mode, s, 0.0);
        val.push_back(a * a);
    }
    const double peak = *std::max_element(val.begin(), val.end());
    std::vector<double> out;
    for (std::size_t i = 1; i + 1 < val.size(); ++i) {
        if (val[i] > val[i - 1] && val[i] >= val[i + 1] && val[i] > 1e-12 * peak) out.push_back(pos[i]);
    }
    return out;
}

}  // namespace

TEST_CASE("Hermite polynomials match the explicit sum") {
    oracle::Gen gen(3);
    for (int m = 0; m <= 12; ++m) {
        for (int k = 0; k < 20; ++k) {
            const double u = gen.uniform(-4.0, 4.0);
            const double ref = static_cast<double>(oracle::hermite_explicit(m, u));
            CHECK(hermite_poly(m, u) == doctest::Approx(ref).epsilon(1e-12).scale(std::pow(2.0, m)));
        }
    }
    CHECK_THROWS_AS(hermite_poly(-1, 0.0), ConfigError);
}

TEST_CASE("normalized Hermite functions") {
    oracle::Gen gen(5);
    for (int m = 0; m <= 15; ++m) {
        for (int k = 0; k < 20; ++k) {
            const double u = gen.uniform(-5.0, 5.0);
            const double ref = static_cast<double>(oracle::hermite_explicit(m, u)) * std::exp(-u * u / 2.0) /
                               std::sqrt(std::pow(2.0, m) * factorial(m) * std::sqrt(kPi));
            CHECK(hermite_function(m, u) == doctest::Approx(ref).epsilon(1e-10).scale(1.0));
        }
    }
    SUBCASE("derivative by central differences") {
        for (int m : {0, 1, 4, 10, 30}) {
            for (double u : {-2.3, 0.1, 1.7, 4.2}) {
                const double h = 1e-5;
                const double fd = (hermite_function(m, u + h) - hermite_function(m, u - h)) / (2 * h);
                CHECK(hermite_function_derivative(m, u) == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
            }
        }
    }
    SUBCASE("large orders stay finite and normalized") {
        // The trapezoid rule is spectrally accurate for these rapidly decaying integrands.
        const double h = 0.01;
        for (int m : {60, 100, 150}) {
            double norm = 0.0;
            for (double u = -30.0; u < 30.0; u += h) {
                const double f = hermite_function(m, u);
                REQUIRE(std::isfinite(f));
                norm += f * f * h;
            }
            CHECK(norm == doctest::Approx(1.0).epsilon(1e-8));
        }
    }
}

TEST_CASE("mode amplitude matches the explicit mode function") {
    oracle::Gen gen(7);
    for (int i = 0; i < 300; ++i) {
        const int m = gen.integer(0, 8), n = gen.integer(0, 8);
        const double x = gen.uniform(-2.5, 2.5) * kW0, y = gen.uniform(-2.5, 2.5) * kW0;
        const double ref = psi_direct(m, n, kW0, x, y);
        CHECK(mode_amplitude({m, n, kW0, 0.0}, x, y) ==
              doctest::Approx(ref).epsilon(1e-10).scale(fundamental_peak(kW0)));
    }
    CHECK(fundamental_peak(kW0) == doctest::Approx(psi_direct(0, 0, kW0, 0, 0)).epsilon(1e-14));
}

TEST_CASE("normalization and orthogonality up to index 10") {
    const int nodes = 24;
    double worst_norm = 0.0, worst_cross = 0.0;
    for (int m = 0; m <= 10; ++m) {
        for (int n = 0; n <= 10; ++n) {
            const ModeSpec a{m, n, kW0, 0.0};
            worst_norm = std::max(worst_norm, std::abs(overlap(a, a, nodes) - 1.0));
            for (int mm = 0; mm <= 10; ++mm) {
                for (int nn = 0; nn <= 10; ++nn) {
                    if ((mm == m && nn == n) || (mm + nn) % 3 != (m + n) % 3) continue;
                    worst_cross = std::max(worst_cross, std::abs(overlap(a, {mm, nn, kW0, 0.0}, nodes)));
                }
            }
        }
    }
    CHECK(worst_norm < 1e-6);
    CHECK(worst_cross < 1e-6);
}

TEST_CASE("coupling constant") {
    const ModeSpec hg00{0, 0, kW0, 0.0}, hg10{1, 0, kW0, 0.0};
    CHECK(coupling(kParams, hg00, 0.0, 0.0) == doctest::Approx(kParams.g0).epsilon(1e-14));
    const double x = kW0 / std::sqrt(2.0);
    const double g = std::abs(coupling(kParams, hg10, x, 0.0));
    CHECK(g == doctest::Approx(kParams.g0 * std::sqrt(2.0) * std::exp(-0.5)).epsilon(1e-12));
    CHECK(rad_s_to_mhz(g) == doctest::Approx(13.7).epsilon(0.005));
    CHECK(std::abs(rad_s_to_mhz(g) - 14.0) < 0.5);
}

TEST_CASE("rotation and parity") {
    oracle::Gen gen(9);
    for (int i = 0; i < 100; ++i) {
        const int m = gen.integer(0, 5), n = gen.integer(0, 5);
        const double x = gen.uniform(-2, 2) * kW0, y = gen.uniform(-2, 2) * kW0;
        const ModeSpec a{m, n, kW0, 0.0};
        // A quarter turn maps HG_{m,n} onto HG_{n,m} up to sign.
        const ModeSpec r{n, m, kW0, -kPi / 2.0};
        CHECK(std::abs(mode_amplitude(r, x, y)) ==
              doctest::Approx(std::abs(mode_amplitude(a, x, y))).epsilon(1e-9).scale(fundamental_peak(kW0)));
        // |psi| is even in x and in y.
        CHECK(std::abs(mode_amplitude(a, -x, y)) == doctest::Approx(std::abs(mode_amplitude(a, x, y))).epsilon(1e-12));
        CHECK(std::abs(mode_amplitude(a, x, -y)) == doctest::Approx(std::abs(mode_amplitude(a, x, y))).epsilon(1e-12));
    }
}

TEST_CASE("on-axis intensity maxima") {
    const double step = 1e-3 * kW0;
    const auto hg01 = axis_maxima({0, 1, kW0, 0.0}, 3.0 * kW0, step, true);
    REQUIRE(hg01.size() == 2);
    CHECK(std::abs((hg01[1] - hg01[0]) - std::sqrt(2.0) * kW0) <= step);
    const auto hg010 = axis_maxima({0, 10, kW0, 0.0}, 6.0 * kW0, step, true);
    CHECK(hg010.size() == 11);
}

TEST_CASE("intensity grid") {
    const auto grid = intensity_grid(ModeSpec{1, 0, kW0, 0.0}, 2.0 * kW0, 41);
    CHECK(grid.values.size() == 41u * 41u);
    CHECK(grid.coordinate(0) == doctest::Approx(-2.0 * kW0));
    CHECK(grid.coordinate(40) == doctest::Approx(2.0 * kW0));
    CHECK(grid.at(20, 20) == doctest::Approx(0.0).epsilon(1e-20));
    for (int r = 0; r < 41; ++r) {
        for (int c = 0; c < 41; ++c) {
            const double a = mode_amplitude({1, 0, kW0, 0.0}, grid.coordinate(c), grid.coordinate(r));
            CHECK(grid.at(r, c) == doctest::Approx(a * a).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(intensity_grid(ModeSpec{0, 0, kW0, 0.0}, kW0, 1), ConfigError);
}

TEST_CASE("superpositions") {
    const ModeSpec hg10{1, 0, kW0, 0.0}, hg01{0, 1, kW0, 0.0};
    const FieldSuperposition donut({{hg10, {1.0, 0.0}}, {hg01, {0.0, 1.0}}});
    double norm = 0.0;
    for (const auto& t : donut.terms()) norm += std::norm(t.coefficient);
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-15));
    // |HG10 + i HG01|^2 / 2 is rotationally symmetric.
    const double r = 0.8 * kW0;
    const double i0 = std::norm(donut.amplitude(r, 0.0));
    for (double phi : {0.3, 1.1, 2.0, 4.0}) {
        CHECK(std::norm(donut.amplitude(r * std::cos(phi), r * std::sin(phi))) == doctest::Approx(i0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(FieldSuperposition({{hg10, {1.0, 0.0}}, {ModeSpec{2, 0, kW0, 0.0}, {1.0, 0.0}}}), ConfigError);
    CHECK_THROWS_AS(FieldSuperposition({{hg10, {0.0, 0.0}}}), ConfigError);
}

TEST_CASE("effective mode of a degenerate family") {
    const std::vector<ModeSpec> fam{{1, 0, kW0, 0.0}, {0, 1, kW0, 0.0}};
    oracle::Gen gen(13);
    for (int i = 0; i < 100; ++i) {
        const double x = gen.uniform(-2, 2) * kW0, y = gen.uniform(-2, 2) * kW0;
        const FieldSuperposition driven({{fam[0], {gen.uniform(-1, 1), gen.uniform(-1, 1)}},
                                         {fam[1], {gen.uniform(-1, 1), gen.uniform(-1, 1)}}});
        const auto d = effective_mode(kParams, fam, x, y, &driven);
        const double g10 = coupling(kParams, fam[0], x, y), g01 = coupling(kParams, fam[1], x, y);
        CHECK(d.g_eff == doctest::Approx(std::hypot(g10, g01)).epsilon(1e-12));
        CHECK(std::abs(coupling(kParams, d.effective, x, y)) == doctest::Approx(d.g_eff).epsilon(1e-12));
        // No member or superposition couples more strongly than the effective mode.
        CHECK(std::abs(coupling(kParams, driven, x, y)) <= d.g_eff * (1 + 1e-12));
        // The residual does not couple to the atom.
        CHECK(std::abs(d.residual_at_atom) < 1e-9 * fundamental_peak(kW0));
        const auto res = residual_terms(d.effective, driven);
        std::complex<double> ip{0.0, 0.0};
        for (std::size_t k = 0; k < res.size(); ++k) ip += std::conj(d.effective.terms()[k].coefficient) * res[k].coefficient;
        CHECK(std::abs(ip) < 1e-12);
    }
    CHECK_THROWS_AS(effective_mode(kParams, fam, 0.0, 0.0), UndefinedDecompositionError);
}

TEST_CASE("scaling of HG_N0 maxima") {
    std::vector<int> orders;
    for (int n = 4; n <= 100; ++n) orders.push_back(n);
    const auto rep = scaling_report(kParams, kW0, orders);
    CHECK(rep.coupling_exponent == doctest::Approx(-0.25).epsilon(0.03 / 0.25));
    CHECK(std::abs(rep.coupling_exponent + 0.25) <= 0.03);
    CHECK(std::abs(rep.size_exponent - 0.5) <= 0.03);
    CHECK(std::abs(rep.gradient_exponent - 0.25) <= 0.05);
    for (const auto& e : rep.entries) CHECK(e.maxima_count == e.order + 1);
    // Second-moment width of h_N: w0 sqrt(2N + 1) / 2.
    for (const auto& e : rep.entries) CHECK(e.rms_width == doctest::Approx(kW0 * std::sqrt(2.0 * e.order + 1) / 2.0).epsilon(1e-6));
    const std::vector<double> x{1, 2, 4, 8}, y{3, 6 * std::sqrt(2.0), 12 * 2.0, 24 * 2.0 * std::sqrt(2.0)};
    CHECK(loglog_slope(x, y) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK_THROWS_AS(scaling_report(kParams, kW0, std::vector<int>{4}), ConfigError);
}
