#include <cmath>

#include "doctest.h"
#include "hgcav/errors.hpp"
#include "hgcav/geometry.hpp"
#include "hgcav/transmission.hpp"
#include "hgcav/units.hpp"
#include "oracles.hpp"

using namespace hgcav;

TEST_CASE("derived quantities of the reference cavity") {
    const auto p = oracle::paper_cavity();
    const auto d = derive(p);
    CHECK(d.fsr == doctest::Approx(kSpeedOfLight / (2.0 * 123e-6)).epsilon(1e-12));
    CHECK(d.fsr == doctest::Approx(1.22e12).epsilon(0.005));
    CHECK(d.waist == doctest::Approx(oracle::symmetric_waist(123e-6, 0.2, 780.2e-9)).epsilon(1e-12));
    CHECK(std::abs(d.waist - 29e-6) < 1e-6);
    CHECK(d.linewidth == doctest::Approx(p.kappa / kPi).epsilon(1e-12));
    CHECK(d.finesse == doctest::Approx(d.fsr / d.linewidth).epsilon(1e-12));
}

TEST_CASE("asymmetric waist matches the general two-mirror expression") {
    auto p = oracle::paper_cavity();
    p.r1 = 0.1;
    p.r2 = 0.5;
    const double L = p.length, R1 = p.r1, R2 = p.r2;
    const double w2 = p.wavelength / kPi * std::sqrt(L * (R1 - L) * (R2 - L) * (R1 + R2 - L)) / std::abs(R1 + R2 - 2 * L);
    CHECK(derive(p).waist == doctest::Approx(std::sqrt(w2)).epsilon(1e-12));
}

TEST_CASE("stability and parameter validation") {
    auto p = oracle::paper_cavity();
    CHECK_NOTHROW(validate(p));
    p.length = 0.5;  // L > R1 + R2
    CHECK_THROWS_AS(validate(p), StabilityError);
    p = oracle::paper_cavity();
    p.length = 0.3;  // between R and 2R, still stable for identical mirrors
    CHECK_NOTHROW(validate(p));
    p.r2 = 1.0;  // R1 < L < R2
    CHECK_THROWS_AS(validate(p), StabilityError);
    p = oracle::paper_cavity();
    p.kappa = -1.0;
    CHECK_THROWS_AS(validate(p), ConfigError);
    p = oracle::paper_cavity();
    p.wavelength = 0.0;
    CHECK_THROWS_AS(validate(p), ConfigError);
}

TEST_CASE("mode frequencies follow the Gouy-phase expression") {
    const auto p = oracle::paper_cavity();
    const int q = nearest_longitudinal_index(p);
    const double gg = 1.0 - p.length / p.r1;
    for (int m = 0; m <= 3; ++m) {
        for (int n = 0; n <= 3; ++n) {
            const double expect = (q + (m + n + 1) / kPi * std::acos(gg)) * kPi * kSpeedOfLight / p.length;
            CHECK(mode_frequency(p, m, n, q) == doctest::Approx(expect).epsilon(1e-14));
        }
    }
    // The TEM00 resonance nearest the configured wavelength is within half an FSR.
    const double nu = rad_s_to_hz(mode_frequency(p, 0, 0, q));
    CHECK(std::abs(nu - kSpeedOfLight / p.wavelength) <= 0.5 * derive(p).fsr);
}

TEST_CASE("astigmatic radii equal on both axes reproduce the spherical spectrum exactly") {
    oracle::Gen gen(11);
    for (int i = 0; i < 200; ++i) {
        auto p = oracle::paper_cavity();
        p.r1 = gen.uniform(0.01, 1.0);
        p.r2 = gen.uniform(0.01, 1.0);
        auto a = p;
        a.astigmatism = Astigmatism{p.r1, p.r1, p.r2, p.r2, gen.uniform(-1.0, 1.0)};
        const int m = gen.integer(0, 6), n = gen.integer(0, 6), q = gen.integer(1, 1000);
        CHECK(mode_frequency(a, m, n, q) == mode_frequency(p, m, n, q));
    }
}

TEST_CASE("family spectrum") {
    auto p = oracle::paper_cavity();
    const int q = nearest_longitudinal_index(p);
    SUBCASE("degenerate without astigmatism") {
        const auto fam = family_spectrum(p, 3, q);
        REQUIRE(fam.size() == 4);
        for (const auto& f : fam) {
            CHECK(f.m + f.n == 3);
            CHECK(f.frequency == fam.front().frequency);
        }
        CHECK(fam.front().m == 3);
    }
    SUBCASE("split and sorted with astigmatism") {
        const auto a = with_splitting(p, mhz_to_rad_s(25.0));
        const auto fam = family_spectrum(a, 2, q);
        REQUIRE(fam.size() == 3);
        CHECK(fam[0].frequency < fam[1].frequency);
        CHECK(fam[1].frequency < fam[2].frequency);
        CHECK(rad_s_to_mhz(fam[2].frequency - fam[0].frequency) == doctest::Approx(50.0).epsilon(1e-3));
    }
}

TEST_CASE("splitting calibration") {
    const auto p = oracle::paper_cavity();
    CHECK(first_order_splitting(p) == 0.0);
    const double dr = astigmatism_for_splitting(p, mhz_to_rad_s(25.0));
    CHECK(dr > 0.0);
    CHECK(dr == doctest::Approx(0.73e-3).epsilon(0.02));
    const auto a = with_splitting(p, mhz_to_rad_s(25.0));
    CHECK(rad_s_to_mhz(first_order_splitting(a)) == doctest::Approx(25.0).epsilon(1e-9));
    const auto b = with_splitting(p, mhz_to_rad_s(-10.0));
    CHECK(rad_s_to_mhz(first_order_splitting(b)) == doctest::Approx(-10.0).epsilon(1e-9));
    CHECK(astigmatism_for_splitting(p, 0.0) == 0.0);
}

TEST_CASE("mode selectivity") {
    const auto p = oracle::paper_cavity();
    const double s = mode_selectivity(mhz_to_rad_s(25.0), p);
    CHECK(s == doctest::Approx(1.0 + (25.0 / 1.4) * (25.0 / 1.4)).epsilon(1e-12));
    CHECK(std::abs(s / 300.0 - 1.0) < 0.15);
    CHECK(mode_selectivity(0.0, p) == 1.0);
}
