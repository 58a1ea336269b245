#pragma once

#include <array>
#include <complex>
#include <utility>
#include <vector>

#include "qcgl/params.hpp"

namespace qcgl {

// Which spatial end of a defect the far field refers to. The plus end carries
// the wave train with wavenumber +k0, the minus end -k0.
enum class End { plus, minus };

// Constants of the wave-train family A = r0 exp(i(k0 x - omega0 t)) and of the
// long-wave (Burgers) description of its phase dynamics.
struct WaveTrain {
    double k0 = 0.0;        // asymptotic wavenumber
    double r0 = 0.0;        // asymptotic amplitude, r0 > 0
    double omega0 = 0.0;    // nonlinear frequency omega_nl(k0)
    double beta_star = 0.0; // (beta - 2 gamma2 r0^2) / (1 - 2 gamma1 r0^2)
    double d = 0.0;         // effective phase diffusion; d > 0 means sideband-stable
    double cg = 0.0;        // outward group speed |2 k0 (alpha - beta_star)|, relative to the phase velocity
    int orientation = +1;   // sign of 2 k0 (alpha - beta_star); -1 means the axis convention is flipped
    double q = 0.0;         // coefficient of the quadratic phase self-interaction
};

// The 2x2 constant matrices entering the linearization about a wave train in
// the co-moving polar coordinates (amplitude, amplitude*phase).
std::array<std::array<double, 2>, 2> matrix_D1(const QcglParams& p);
std::array<std::array<double, 2>, 2> matrix_D2(const QcglParams& p);
std::array<std::array<double, 2>, 2> matrix_D0_inf(const QcglParams& p, const WaveTrain& wt);

// Positive amplitude branch of gamma1 s^2 - s + (1 - k^2) = 0, s = r0^2,
// continuous in gamma1 from the cubic limit s = 1 - k^2.
double amplitude_of_wavenumber(const QcglParams& p, double k);

// Nonlinear dispersion relation omega_nl(k) of the wave-train family.
double omega_nl(const QcglParams& p, double k);

// All wave-train constants at wavenumber k0. With require_source (default) a
// zero group speed is rejected, as is a vanishing Burgers coefficient q.
WaveTrain wave_train_constants(const QcglParams& p, double k0, bool require_source = true);

// Eigenvalue pair of the far-field linearization at sideband wavenumber kappa,
// ordered so that .first is the branch through lambda1(0) = 0.
std::pair<std::complex<double>, std::complex<double>>
linear_dispersion(const QcglParams& p, const WaveTrain& wt, double kappa, End end);

// max Re lambda over both branches of the sampled sideband curves, excluding
// |kappa| < exclusion_radius on the lambda1 branch (the curve is tangent to 0
// there). Negative margin certifies essential spectral stability on the grid;
// an empty effective grid returns -infinity.
double essential_spectrum_margin(const QcglParams& p, const WaveTrain& wt,
                                 const std::vector<double>& kappa_grid,
                                 double exclusion_radius = 0.02);

} // namespace qcgl
