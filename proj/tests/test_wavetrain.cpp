#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "qcgl/fit.hpp"
#include "qcgl/wavetrain.hpp"

using namespace qcgl;

TEST_CASE("amplitude branch: cubic limit is sqrt(1 - k^2)") {
    QcglParams p;
    CHECK(amplitude_of_wavenumber(p, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(amplitude_of_wavenumber(p, 0.5) == doctest::Approx(std::sqrt(0.75)).epsilon(1e-15));
}

TEST_CASE("amplitude branch: quintic root picks the branch continuous from gamma1 = 0") {
    QcglParams p;
    p.gamma1 = 0.05;
    // Oracle: smaller root of 0.05 s^2 - s + 0.75 = 0 evaluated directly.
    const double s_oracle = (1.0 - std::sqrt(1.0 - 4.0 * 0.05 * 0.75)) / (2.0 * 0.05);
    const double r_oracle = std::sqrt(s_oracle);
    const double r = amplitude_of_wavenumber(p, 0.5);
    CHECK(r == doctest::Approx(r_oracle).epsilon(1e-13));
    CHECK(r == doctest::Approx(0.883434).epsilon(2e-5)); // frozen 6-digit value
}

TEST_CASE("amplitude branch: continuity in gamma1 toward the cubic value") {
    QcglParams p;
    const double r_cubic = amplitude_of_wavenumber(p, 0.3);
    for (double g1 : {1e-4, 1e-7, 1e-10, 1e-13}) {
        QcglParams q = p;
        q.gamma1 = g1;
        const double r = amplitude_of_wavenumber(q, 0.3);
        // ds/dgamma1 = s^2/(1 - 2 gamma1 s) ~ s^2, so |r - r_cubic| ~ g1 * s^2 / (2 r).
        CHECK(std::abs(r - r_cubic) < 2.0 * g1);
    }
}

TEST_CASE("amplitude branch: domain errors") {
    QcglParams p;
    CHECK_THROWS_AS((void)amplitude_of_wavenumber(p, 1.0), std::domain_error);
    CHECK_THROWS_AS((void)amplitude_of_wavenumber(p, -1.2), std::domain_error);
    p.gamma1 = 0.3; // discriminant 1 - 1.2 < 0 at k = 0
    CHECK_THROWS_AS((void)amplitude_of_wavenumber(p, 0.0), std::domain_error);
}

TEST_CASE("wave-train constants: cubic q reduces to alpha - beta") {
    QcglParams p;
    p.alpha = 0.7;
    p.beta = -0.4;
    const WaveTrain wt = wave_train_constants(p, 0.3);
    CHECK(wt.q == doctest::Approx(p.alpha - p.beta).epsilon(1e-14));
    CHECK(wt.beta_star == doctest::Approx(p.beta).epsilon(1e-14));
}

TEST_CASE("wave-train constants: frozen hole far-field values at alpha=1, beta=-1") {
    QcglParams p;
    p.alpha = 1.0;
    p.beta = -1.0;
    const double k0 = 0.566030;
    // Oracles from the cubic closed forms.
    const double r0_oracle = std::sqrt(1.0 - k0 * k0);
    const double cg_oracle = std::abs(2.0 * k0 * (p.alpha - p.beta));
    const double d_oracle = (1.0 + p.alpha * p.beta) - 2.0 * k0 * k0 * (1.0 + p.beta * p.beta) / (r0_oracle * r0_oracle);
    const WaveTrain wt = wave_train_constants(p, k0);
    CHECK(wt.r0 == doctest::Approx(r0_oracle).epsilon(1e-14));
    CHECK(wt.cg == doctest::Approx(cg_oracle).epsilon(1e-14));
    CHECK(wt.d == doctest::Approx(d_oracle).epsilon(1e-14));
    CHECK(wt.cg == doctest::Approx(2.264120).epsilon(1e-5));  // frozen
    CHECK(wt.d == doctest::Approx(-1.885728).epsilon(1e-5));  // frozen; d < 0 flags sideband instability
    CHECK(wt.d < 0.0);
    CHECK(wt.orientation == 1);
}

TEST_CASE("wave-train constants: k0 = 0 is rejected as a source far field") {
    QcglParams p;
    p.alpha = 1.0;
    p.beta = -1.0;
    CHECK_THROWS_AS((void)wave_train_constants(p, 0.0), std::domain_error);
    CHECK_NOTHROW((void)wave_train_constants(p, 0.0, /*require_source=*/false));
}

TEST_CASE("wave-train constants: orientation flag flips, group speed stays positive") {
    QcglParams p;
    p.alpha = -1.0;
    p.beta = 1.0; // 2 k0 (alpha - beta) < 0 for k0 > 0
    const WaveTrain wt = wave_train_constants(p, 0.4);
    CHECK(wt.cg > 0.0);
    CHECK(wt.orientation == -1);
    CHECK(wt.cg == doctest::Approx(2.0 * 0.4 * 2.0).epsilon(1e-14));
}

TEST_CASE("group speed equals the finite-difference derivative of omega_nl") {
    // Richardson-extrapolated centered difference, relative tolerance 1e-6.
    const std::vector<QcglParams> ps = [] {
        std::vector<QcglParams> v;
        QcglParams a;
        a.alpha = 1.0;
        a.beta = -1.0;
        v.push_back(a);
        QcglParams b;
        b.alpha = 2.0;
        b.beta = -0.2;
        b.gamma1 = 0.05;
        b.gamma2 = -0.08;
        v.push_back(b);
        QcglParams c;
        c.alpha = -0.6;
        c.beta = 0.9;
        c.gamma1 = -0.1;
        c.gamma2 = 0.04;
        v.push_back(c);
        return v;
    }();
    for (const auto& p : ps) {
        for (double k0 : {0.15, 0.35, 0.55}) {
            const WaveTrain wt = wave_train_constants(p, k0, false);
            const double h = 1e-3;
            auto cdiff = [&](double hh) {
                return (omega_nl(p, k0 + hh) - omega_nl(p, k0 - hh)) / (2.0 * hh);
            };
            const double der = (4.0 * cdiff(h / 2.0) - cdiff(h)) / 3.0;
            const double formula = 2.0 * k0 * (p.alpha - wt.beta_star);
            CHECK(der == doctest::Approx(formula).epsilon(1e-6));
        }
    }
}

TEST_CASE("linear dispersion: lambda1(0) = 0 exactly and lambda2(0) matches the trace") {
    QcglParams p;
    p.alpha = 0.8;
    p.beta = -0.3;
    p.gamma1 = 0.04;
    p.gamma2 = 0.02;
    const WaveTrain wt = wave_train_constants(p, 0.25);
    const auto [l1, l2] = linear_dispersion(p, wt, 0.0, End::plus);
    CHECK(l1 == std::complex<double>(0.0, 0.0)); // exact zero by construction
    const double s = wt.r0 * wt.r0;
    const double l2_oracle = -2.0 * s * (1.0 - 2.0 * p.gamma1 * s);
    CHECK(l2.real() == doctest::Approx(l2_oracle).epsilon(1e-13));
    CHECK(l2.imag() == doctest::Approx(0.0).epsilon(1e-13));
}

TEST_CASE("linear dispersion: cubic k0 = 0 train has lambda2(0) = -2") {
    QcglParams p;
    const WaveTrain wt = wave_train_constants(p, 0.0, false);
    const auto [l1, l2] = linear_dispersion(p, wt, 0.0, End::plus);
    CHECK(l1.real() == 0.0);
    CHECK(l2.real() == doctest::Approx(-2.0).epsilon(1e-15));
}

TEST_CASE("linear dispersion: conjugate symmetry lambda(kappa) = conj(lambda(-kappa))") {
    QcglParams p;
    p.alpha = 1.3;
    p.beta = 0.2;
    p.gamma1 = -0.03;
    p.gamma2 = 0.05;
    const WaveTrain wt = wave_train_constants(p, 0.3, false);
    for (double kappa : {0.01, 0.2, 0.7, 1.4}) {
        const auto [a1, a2] = linear_dispersion(p, wt, kappa, End::plus);
        const auto [b1, b2] = linear_dispersion(p, wt, -kappa, End::plus);
        CHECK(std::abs(a1 - std::conj(b1)) < 1e-12);
        CHECK(std::abs(a2 - std::conj(b2)) < 1e-12);
    }
}

TEST_CASE("linear dispersion: small-kappa fit recovers (-cg, -d) within 1%") {
    QcglParams p;
    p.alpha = 2.0;
    p.beta = -0.2;
    const WaveTrain wt = wave_train_constants(p, 0.36);
    std::vector<double> ks, im, re;
    for (int i = -20; i <= 20; ++i) {
        const double kappa = 0.05 * double(i) / 20.0;
        ks.push_back(kappa);
        const auto [l1, l2] = linear_dispersion(p, wt, kappa, End::plus);
        im.push_back(l1.imag());
        re.push_back(l1.real());
    }
    const auto cim = poly_fit(ks, im, 3);
    const auto cre = poly_fit(ks, re, 3);
    const double cg_signed = wt.orientation * wt.cg;
    CHECK(cim[1] == doctest::Approx(-cg_signed).epsilon(0.01));
    CHECK(cre[2] == doctest::Approx(-wt.d).epsilon(0.01));
}

TEST_CASE("essential margin: sideband-unstable hole far field has positive margin") {
    QcglParams p;
    p.alpha = 1.0;
    p.beta = -1.0;
    const WaveTrain wt = wave_train_constants(p, 0.566030);
    std::vector<double> grid;
    for (int i = -60; i <= 60; ++i) grid.push_back(1.5 * double(i) / 60.0);
    CHECK(essential_spectrum_margin(p, wt, grid) > 0.0);
}

TEST_CASE("essential margin: empty effective grid returns -infinity sentinel") {
    QcglParams p;
    p.alpha = 1.0;
    p.beta = -1.0;
    const WaveTrain wt = wave_train_constants(p, 0.566030);
    const double m = essential_spectrum_margin(p, wt, {0.0, 0.005, -0.005}, 0.02);
    CHECK(std::isinf(m));
    CHECK(m < 0.0);
}
