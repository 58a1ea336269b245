#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "qcgl/linop.hpp"
#include "qcgl/profile.hpp"
#include "qcgl/wavetrain.hpp"

using namespace qcgl;
using cd = std::complex<double>;

namespace {

// closed-form kernel fields of the cubic hole, sampled exactly
Eigen::VectorXd analytic_translation_mode(double alpha, double beta, const Grid& g) {
    const HoleConstants hc = hole_constants(alpha, beta);
    Eigen::VectorXd V1(2 * int(g.n));
    for (std::size_t j = 0; j < g.n; ++j) {
        const double x = g.x(j);
        const double th = std::tanh(hc.kappa * x);
        const double sech2 = 1.0 - th * th;
        const double r = hc.r0 * th;
        const double rx = hc.r0 * hc.kappa * sech2;
        const double phx = -hc.delta * hc.kappa * th;
        V1(2 * int(j)) = rx;
        V1(2 * int(j) + 1) = r * phx;
    }
    return V1;
}

double gram_entry(const Grid& g, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double acc = 0.0;
    const int n = int(g.n);
    for (int j = 0; j < n; ++j) {
        const double term = a(2 * j) * b(2 * j) + a(2 * j + 1) * b(2 * j + 1);
        acc += (j == 0 || j == n - 1) ? 0.5 * term : term;
    }
    return acc * g.h();
}

} // namespace

TEST_CASE("gauge mode is annihilated to roundoff") {
    const Grid g(40.0, 801);
    const SourceProfile s = nozaki_bekki(1.0, -1.0, g);
    const QcglParams p{1.0, -1.0, 0.0, 0.0};
    const DiscretizedOperator op = assemble_operator(s, p, 0.0);
    const auto [V1, V2] = kernel_fields(op);
    CHECK((op.matrix * V2).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("translation mode residual shrinks at second order") {
    const QcglParams p{1.0, -1.0, 0.0, 0.0};
    double err[2];
    const Grid gs[2] = {Grid(40.0, 801), Grid(40.0, 1601)};
    for (int k = 0; k < 2; ++k) {
        const SourceProfile s = nozaki_bekki(1.0, -1.0, gs[k]);
        const DiscretizedOperator op = assemble_operator(s, p, 0.0);
        const Eigen::VectorXd V1 = analytic_translation_mode(1.0, -1.0, gs[k]);
        err[k] = (op.matrix * V1).lpNorm<Eigen::Infinity>();
    }
    CHECK(err[0] < 5e-3);
    const double rate = std::log2(err[0] / err[1]);
    CHECK(rate > 1.6);
    CHECK(rate < 2.6);
}

TEST_CASE("kernel residuals survive on a solved quintic profile") {
    const QcglParams p{1.0, -1.0, 0.01, 0.01};
    const Grid g(60.0, 1201);
    const SourceProfile sol = solve_source(p, nozaki_bekki(p.alpha, p.beta, g));
    const DiscretizedOperator op = assemble_operator(sol, p, 0.0);
    const auto [V1, V2] = kernel_fields(op);
    CHECK((op.matrix * V2).lpNorm<Eigen::Infinity>() < 1e-4);
    CHECK((op.matrix * V1).lpNorm<Eigen::Infinity>() < 5e-3);
}

TEST_CASE("far-field rows carry the wave-train dispersion") {
    const QcglParams p{2.0, -0.2, 0.0, 0.0};
    const Grid g(60.0, 1201);
    const SourceProfile s = nozaki_bekki(p.alpha, p.beta, g);
    const DiscretizedOperator op = assemble_operator(s, p, 0.0);
    const WaveTrain wt = wave_train_constants(p, s.k0);

    const int n = int(g.n);
    const int j = n - 1 - 12; // deep in the right far field, centered stencils
    const double kappa = 0.3;
    Eigen::Matrix2cd M;
    for (int b = 0; b < 2; ++b) {
        Eigen::VectorXd ur = Eigen::VectorXd::Zero(2 * n), ui = Eigen::VectorXd::Zero(2 * n);
        for (int m = 0; m < n; ++m) {
            ur(2 * m + b) = std::cos(kappa * g.x(std::size_t(m)));
            ui(2 * m + b) = std::sin(kappa * g.x(std::size_t(m)));
        }
        const Eigen::VectorXd yr = op.matrix * ur, yi = op.matrix * ui;
        const cd ph = std::exp(cd(0.0, -kappa * g.x(std::size_t(j))));
        M(0, b) = ph * cd(yr(2 * j), yi(2 * j));
        M(1, b) = ph * cd(yr(2 * j + 1), yi(2 * j + 1));
    }
    const cd tr = M(0, 0) + M(1, 1);
    const cd disc = std::sqrt(tr * tr - 4.0 * (M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0)));
    const cd mu1 = 0.5 * (tr + disc), mu2 = 0.5 * (tr - disc);

    const auto [l1, l2] = linear_dispersion(p, wt, kappa, End::plus);
    const double direct = std::max(std::abs(mu1 - l1), std::abs(mu2 - l2));
    const double swapped = std::max(std::abs(mu1 - l2), std::abs(mu2 - l1));
    CHECK(std::min(direct, swapped) < 5e-3);
}

TEST_CASE("assembly guards: weight bound and off-core zeros") {
    const Grid g(40.0, 801);
    const SourceProfile s = nozaki_bekki(1.0, -1.0, g);
    const QcglParams p{1.0, -1.0, 0.0, 0.0};
    CHECK_THROWS_AS((void)assemble_operator(s, p, s.eta0), std::domain_error);

    SourceProfile bad = s;
    bad.r[100] = 0.0;
    CHECK_THROWS_AS((void)assemble_operator(bad, p, 0.0), std::domain_error);

    SourceProfile flipped = s;
    flipped.r[100] = -flipped.r[100];
    CHECK_THROWS_AS((void)assemble_operator(flipped, p, 0.0), std::domain_error);
}

TEST_CASE("shift-invert at zero resolves the near-zero cluster") {
    // Near the origin the hole carries three small eigenvalues, not two: the
    // gauge zero, the translation zero, and the remnant of the cubic holes'
    // velocity family, which the quintic term breaks at O(gamma). Translation
    // and the family mode form a near-defective pair, so the discretization
    // error epsilon splits them at the sqrt(epsilon) ~ h scale rather than
    // h^2. The cluster must still separate cleanly from the rest.
    const QcglParams p{1.0, -1.0, 0.01, 0.01};
    const Grid g(60.0, 2401);
    const SourceProfile sol = solve_source(p, nozaki_bekki(p.alpha, p.beta, g));
    const DiscretizedOperator op = assemble_operator(sol, p, 0.25);
    const auto evs = point_spectrum(op, 3, cd(0.0, 0.0));
    REQUIRE(evs.size() == 3);
    CHECK(std::abs(evs[0]) < 1e-4);
    CHECK(std::abs(evs[1]) < 0.03);
    CHECK(std::abs(evs[2]) < 0.03);

    // halving h must shrink the split pair: it is an artifact, not spectrum
    const Grid g2(60.0, 4801);
    SolveOptions so;
    so.tol = 1e-9;
    const SourceProfile sol2 = solve_source(p, nozaki_bekki(p.alpha, p.beta, g2), so);
    const DiscretizedOperator op2 = assemble_operator(sol2, p, 0.25);
    const auto evs2 = point_spectrum(op2, 3, cd(0.0, 0.0));
    REQUIRE(evs2.size() == 3);
    CHECK(std::abs(evs2[2]) < std::abs(evs[2]) / 1.5);
}

TEST_CASE("flat-phase kink has the exact unstable phase eigenvalue") {
    // alpha = beta = gamma = 0 reduces the phase channel to a Schroedinger
    // operator with a sech^2 well whose single bound state sits at 1/2.
    // Keep eta*L small: the weight conjugation is non-normal and a long
    // domain drowns isolated eigenvalues in pseudospectrum.
    const Grid g(12.0, 4801);
    const SourceProfile s = nozaki_bekki(0.0, 0.0, g);
    const QcglParams p{0.0, 0.0, 0.0, 0.0};

    const DiscretizedOperator op = assemble_operator(s, p, 0.25);

    // this kink has zero group velocity, so the weight pushes the essential
    // spectrum right, onto the unstable side; a low shift detects that
    const auto near_edge = point_spectrum(op, 1, cd(0.1, 0.0));
    REQUIRE(near_edge.size() == 1);
    CHECK(near_edge[0].real() > 0.0);
    CHECK(std::abs(near_edge[0].imag()) < 1e-6);

    // the bound state needs a shift on its side of the cluster
    const auto evs = point_spectrum(op, 1, cd(0.45, 0.0));
    REQUIRE(evs.size() == 1);
    CHECK(std::abs(evs[0] - cd(0.5, 0.0)) < 1e-3);

    // isolated eigenvalues may not move when the weight changes
    const DiscretizedOperator op2 = assemble_operator(s, p, 0.15);
    const auto evs2 = point_spectrum(op2, 1, cd(0.45, 0.0));
    REQUIRE(evs2.size() == 1);
    CHECK(std::abs(evs[0] - evs2[0]) < 1e-6);
}

TEST_CASE("empty spectrum request returns an empty list") {
    const Grid g(40.0, 801);
    const SourceProfile s = nozaki_bekki(1.0, -1.0, g);
    const QcglParams p{1.0, -1.0, 0.0, 0.0};
    const DiscretizedOperator op = assemble_operator(s, p, 0.25);
    CHECK(point_spectrum(op, 0, cd(0.0, 0.0)).empty());
}

TEST_CASE("adjoint pair: biorthogonal, nondegenerate, localized") {
    const QcglParams p{1.0, -1.0, 0.01, 0.01};
    const Grid g(60.0, 1201);
    const SourceProfile sol = solve_source(p, nozaki_bekki(p.alpha, p.beta, g));
    const DiscretizedOperator op = assemble_operator(sol, p, 0.25);
    const SpectralData sd = adjoint_pair(op);

    CHECK(std::abs(gram_entry(g, sd.psi1, sd.V1) - 1.0) < 1e-8);
    CHECK(std::abs(gram_entry(g, sd.psi1, sd.V2)) < 1e-8);
    CHECK(std::abs(gram_entry(g, sd.psi2, sd.V1)) < 1e-8);
    CHECK(std::abs(gram_entry(g, sd.psi2, sd.V2) - 1.0) < 1e-8);

    CHECK(std::abs(sd.M_psi.determinant()) > 1e-6);

    // the adjoint tail rate equals Re of the unstable spatial pair at the
    // origin, which the root-sum identity pins at exactly half the profile
    // rate; compare against that root, with slack for the envelope fit
    const WaveTrain wt = wave_train_constants(p, sol.k0);
    const SpatialRoots roots = spatial_eigenvalues(p, wt, cd(0.0, 0.0), End::plus);
    double kappa_adj = 0.0;
    for (int i = 0; i < 4; ++i)
        if (roots.nu[std::size_t(i)].real() > 1e-8 && std::abs(roots.nu[std::size_t(i)].imag()) > 1e-8)
            kappa_adj = roots.nu[std::size_t(i)].real();
    REQUIRE(kappa_adj > 0.0);
    CHECK(std::abs(sd.psi_decay[0] - kappa_adj) < 0.07 * kappa_adj);
    CHECK(std::abs(sd.psi_decay[1] - kappa_adj) < 0.07 * kappa_adj);
    CHECK(sd.psi_decay[0] >= 0.45 * sol.eta0);
    CHECK(sd.psi_decay[1] >= 0.45 * sol.eta0);
    CHECK(std::abs(sd.eigenvalues[0]) < 0.2);
    CHECK(std::abs(sd.eigenvalues[1]) < 0.2);

    const std::string rep = spectrum_report(op, sd, point_spectrum(op, 2, cd(0.0, 0.0)));
    CHECK(rep.find("kernel_residual_V1") != std::string::npos);
    CHECK(rep.find("M_psi") != std::string::npos);
    CHECK(rep.find("psi_decay") != std::string::npos);
}

TEST_CASE("adjoint extraction requires a weighted operator") {
    const Grid g(40.0, 801);
    const SourceProfile s = nozaki_bekki(1.0, -1.0, g);
    const QcglParams p{1.0, -1.0, 0.0, 0.0};
    const DiscretizedOperator op = assemble_operator(s, p, 0.0);
    CHECK_THROWS_AS((void)adjoint_pair(op), std::domain_error);
}

TEST_CASE("spatial quartic satisfies the companion identities") {
    const QcglParams p{2.0, -0.2, 0.01, 0.01};
    const HoleConstants hc = hole_constants(2.0, -0.2);
    const WaveTrain wt = wave_train_constants(p, hc.k0);

    for (const cd lam : {cd(0.01, 0.3), cd(-0.2, 0.05), cd(0.5, 0.0)}) {
        const SpatialRoots plus = spatial_eigenvalues(p, wt, lam, End::plus);
        const SpatialRoots minus = spatial_eigenvalues(p, wt, lam, End::minus);

        // independent coefficient oracle via Eigen 2x2 algebra
        Eigen::Matrix2d D2inv;
        D2inv << 1.0, p.alpha, -p.alpha, 1.0;
        D2inv /= 1.0 + p.alpha * p.alpha;
        const auto D0 = matrix_D0_inf(p, wt);
        Eigen::Matrix2cd lmD;
        lmD << lam - D0[0][0], 0.0, -D0[1][0], lam;
        const Eigen::Matrix2cd B0 = D2inv.cast<cd>() * lmD;

        cd sum = 0.0, prod = 1.0;
        for (int i = 0; i < 4; ++i) {
            sum += plus.nu[std::size_t(i)];
            prod *= plus.nu[std::size_t(i)];
        }
        CHECK(std::abs(sum) < 1e-10);
        CHECK(std::abs(prod - B0.determinant()) < 1e-10);

        for (int i = 0; i < 4; ++i) {
            double best = 1e300;
            for (int j = 0; j < 4; ++j)
                best = std::min(best, std::abs(minus.nu[std::size_t(j)] + plus.nu[std::size_t(i)]));
            CHECK(best < 1e-10);
        }
    }
}

TEST_CASE("spatial signature at the origin and the tail-rate link") {
    // cubic: the stable root at lambda = 0 equals the closed-form tail rate
    {
        const QcglParams p{1.0, -1.0, 0.0, 0.0};
        const HoleConstants hc = hole_constants(1.0, -1.0);
        const WaveTrain wt = wave_train_constants(p, hc.k0);
        const SpatialRoots roots = spatial_eigenvalues(p, wt, cd(0.0, 0.0), End::plus);

        int zeros = 0, stable = 0, unstable = 0;
        double nu_stable = 0.0;
        for (int i = 0; i < 4; ++i) {
            const cd nu = roots.nu[std::size_t(i)];
            if (std::abs(nu) < 1e-8) {
                ++zeros;
            } else if (nu.real() < 0.0) {
                ++stable;
                nu_stable = nu.real();
            } else {
                ++unstable;
            }
        }
        CHECK(zeros == 1);
        CHECK(stable == 1);
        CHECK(unstable == 2);
        CHECK(std::abs(nu_stable + 2.0 * hc.kappa) < 1e-8);

        const SpatialRoots mirror = spatial_eigenvalues(p, wt, cd(0.0, 0.0), End::minus);
        int m_stable = 0, m_unstable = 0;
        for (int i = 0; i < 4; ++i) {
            const cd nu = mirror.nu[std::size_t(i)];
            if (std::abs(nu) < 1e-8) continue;
            (nu.real() < 0.0 ? m_stable : m_unstable)++;
        }
        CHECK(m_stable == 2);
        CHECK(m_unstable == 1);
    }

    // quintic: the same stable root predicts the solved profile's decay rate
    {
        const QcglParams p{2.0, -0.2, 0.01, 0.01};
        const Grid g(72.0, 1441);
        const SourceProfile sol = solve_source(p, nozaki_bekki(p.alpha, p.beta, g));
        const WaveTrain wt = wave_train_constants(p, sol.k0);
        const SpatialRoots roots = spatial_eigenvalues(p, wt, cd(0.0, 0.0), End::plus);
        double nu_stable = 0.0;
        for (int i = 0; i < 4; ++i)
            if (std::abs(roots.nu[std::size_t(i)]) > 1e-8 && roots.nu[std::size_t(i)].real() < 0.0)
                nu_stable = roots.nu[std::size_t(i)].real();
        CHECK(-nu_stable == doctest::Approx(profile_diagnostics(sol).eta0).epsilon(0.02));
    }
}

TEST_CASE("center root expansion recovers the transport and diffusion scales") {
    for (const auto& pr : {std::pair<double, double>{2.0, -0.2}, std::pair<double, double>{1.0, -1.0}}) {
        const QcglParams p{pr.first, pr.second, 0.0, 0.0};
        const HoleConstants hc = hole_constants(pr.first, pr.second);
        const WaveTrain wt = wave_train_constants(p, hc.k0);

        const ExpansionFit fit = critical_spatial_expansion(p, wt, End::plus);
        CHECK(fit.c1 == doctest::Approx(-1.0 / wt.cg).epsilon(1e-4));
        CHECK(fit.c2 == doctest::Approx(wt.d / (wt.cg * wt.cg * wt.cg)).epsilon(0.02));
        CHECK(fit.residual < 1e-6);

        const ExpansionFit mirror = critical_spatial_expansion(p, wt, End::minus);
        CHECK(mirror.c1 == doctest::Approx(-fit.c1).epsilon(1e-10));
    }
}

TEST_CASE("essential spectrum curve pins one oscillatory spatial root") {
    const QcglParams p{1.0, -1.0, 0.0, 0.0};
    const HoleConstants hc = hole_constants(1.0, -1.0);
    const WaveTrain wt = wave_train_constants(p, hc.k0);
    for (const double kappa : {0.1, 0.3, 0.7}) {
        const auto [l1, l2] = linear_dispersion(p, wt, kappa, End::plus);
        const SpatialRoots roots = spatial_eigenvalues(p, wt, l1, End::plus);
        double best = 1e300;
        for (int i = 0; i < 4; ++i)
            best = std::min(best, std::abs(roots.nu[std::size_t(i)] - cd(0.0, kappa)));
        CHECK(best < 1e-8);
    }
}
