#include "qcgl/wavetrain.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace qcgl {

using Mat2 = std::array<std::array<double, 2>, 2>;
using cplx = std::complex<double>;

Mat2 matrix_D1(const QcglParams& p) {
    return {{{p.alpha, 1.0}, {-1.0, p.alpha}}};
}

Mat2 matrix_D2(const QcglParams& p) {
    return {{{1.0, -p.alpha}, {p.alpha, 1.0}}};
}

Mat2 matrix_D0_inf(const QcglParams& p, const WaveTrain& wt) {
    const double s = wt.r0 * wt.r0;
    return {{{-2.0 * s * (1.0 - 2.0 * p.gamma1 * s), 0.0},
             {-2.0 * s * (p.beta - 2.0 * p.gamma2 * s), 0.0}}};
}

double amplitude_of_wavenumber(const QcglParams& p, double k) {
    if (std::abs(k) >= 1.0)
        throw std::domain_error("amplitude_of_wavenumber: |k| >= 1, wave train does not exist");
    const double c = 1.0 - k * k;
    const double disc = 1.0 - 4.0 * p.gamma1 * c;
    if (disc < 0.0)
        throw std::domain_error("amplitude_of_wavenumber: negative discriminant, no real amplitude");
    // Root of gamma1 s^2 - s + c = 0 continuous from gamma1 = 0, written in the
    // cancellation-free form s = 2c / (1 + sqrt(1 - 4 gamma1 c)).
    const double s = 2.0 * c / (1.0 + std::sqrt(disc));
    if (!(s > 0.0)) throw std::domain_error("amplitude_of_wavenumber: nonpositive amplitude branch");
    return std::sqrt(s);
}

double omega_nl(const QcglParams& p, double k) {
    const double r0 = amplitude_of_wavenumber(p, k);
    const double s = r0 * r0;
    return p.beta + (p.alpha - p.beta) * k * k + (p.beta * p.gamma1 - p.gamma2) * s * s;
}

WaveTrain wave_train_constants(const QcglParams& p, double k0, bool require_source) {
    WaveTrain wt;
    wt.k0 = k0;
    wt.r0 = amplitude_of_wavenumber(p, k0);
    const double s = wt.r0 * wt.r0;
    const double denom = 1.0 - 2.0 * p.gamma1 * s;
    if (denom <= 0.0)
        throw std::domain_error("wave_train_constants: 1 - 2 gamma1 r0^2 <= 0, amplitude branch folds");
    wt.omega0 = p.beta + (p.alpha - p.beta) * k0 * k0 + (p.beta * p.gamma1 - p.gamma2) * s * s;
    wt.beta_star = (p.beta - 2.0 * p.gamma2 * s) / denom;
    wt.d = (1.0 + p.alpha * wt.beta_star) -
           2.0 * k0 * k0 * (1.0 + wt.beta_star * wt.beta_star) / (s * denom);
    const double cg_signed = 2.0 * k0 * (p.alpha - wt.beta_star);
    wt.orientation = (cg_signed < 0.0) ? -1 : +1;
    wt.cg = std::abs(cg_signed);
    wt.q = (p.alpha - wt.beta_star) + 4.0 * k0 * k0 * (p.gamma1 * p.beta - p.gamma2) / (denom * denom * denom);
    if (require_source) {
        if (wt.cg == 0.0)
            throw std::domain_error("wave_train_constants: zero group speed, standing train is not a source far field");
        if (std::abs(wt.q) < 1e-10)
            throw std::domain_error("wave_train_constants: Burgers coefficient q vanishes within tolerance; "
                                    "the Cole-Hopf transform divides by q");
    }
    return wt;
}

// Eigenvalues of the 2x2 complex matrix -kappa^2 D2 -/+ 2 i kappa k0 D1 + D0_inf
// (minus for End::plus). The smaller-magnitude root continues lambda1(0) = 0;
// it is computed as det/lambda2 so that lambda1(0) is exactly zero.
std::pair<cplx, cplx> linear_dispersion(const QcglParams& p, const WaveTrain& wt, double kappa, End end) {
    const Mat2 D1 = matrix_D1(p);
    const Mat2 D2 = matrix_D2(p);
    const Mat2 D0 = matrix_D0_inf(p, wt);
    const double sgn = (end == End::plus) ? -1.0 : 1.0;
    const cplx adv = cplx(0.0, sgn * 2.0 * kappa * wt.k0);
    cplx m[2][2];
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            m[i][j] = -kappa * kappa * D2[std::size_t(i)][std::size_t(j)] +
                      adv * D1[std::size_t(i)][std::size_t(j)] + D0[std::size_t(i)][std::size_t(j)];
    const cplx tr = m[0][0] + m[1][1];
    const cplx det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    const cplx disc = std::sqrt(tr * tr - 4.0 * det);
    // Pick the sign that avoids cancellation in the larger root.
    const cplx big = (std::real(std::conj(tr) * disc) >= 0.0) ? 0.5 * (tr + disc) : 0.5 * (tr - disc);
    if (big == cplx(0.0, 0.0)) return {cplx(0.0, 0.0), cplx(0.0, 0.0)};
    const cplx small = det / big;
    return {small, big};
}

double essential_spectrum_margin(const QcglParams& p, const WaveTrain& wt,
                                 const std::vector<double>& kappa_grid, double exclusion_radius) {
    double margin = -std::numeric_limits<double>::infinity();
    bool effective = false; // at least one sample survives the exclusion window
    for (double kappa : kappa_grid) {
        const auto [l1, l2] = linear_dispersion(p, wt, kappa, End::plus);
        if (std::abs(kappa) >= exclusion_radius) {
            margin = std::max(margin, l1.real());
            effective = true;
        }
        margin = std::max(margin, l2.real());
    }
    return effective ? margin : -std::numeric_limits<double>::infinity();
}

} // namespace qcgl
