#pragma once

#include <array>
#include <complex>
#include <functional>
#include <vector>

#include "qcgl/grid.hpp"
#include "qcgl/profile.hpp"
#include "qcgl/wavetrain.hpp"

namespace qcgl {

// One member of the Cole-Hopf modulation family riding on a source defect:
// two constants delta+- select the logarithmic phase pair, M0 sets the width
// of the Gaussian comparison envelope. Fields built from the state stay
// well defined as long as |delta| < 1/sup|B| = 1, which every evaluation
// checks before taking logarithms.
struct ModulationState {
    double delta_plus = 0.0;
    double delta_minus = 0.0;
    double t = 0.0; // reference time of the state, >= 0
    WaveTrain wt;
    double M0 = 0.0; // Gaussian envelope width constant, > 0
};

// Cumulative Gaussian normalized to limits 0 and 1.
double errfn(double z);

// Expanding plateau e(x,t): difference of two error-function fronts moving
// outward at the group speed and spreading diffusively with the phase
// diffusion d. Requires d > 0 and t > 0; a nonpositive d means the sideband
// dynamics has no spreading plateau and the whole ansatz is undefined.
double plateau(double x, double t, const WaveTrain& wt);
double plateau_x(double x, double t, const WaveTrain& wt);
double plateau_xx(double x, double t, const WaveTrain& wt);

// Gaussian comparison envelope theta(x,t): two spreading humps riding the
// plateau fronts. Its mass 2 sqrt(pi M0) is time-independent.
double gaussian_profile(double x, double t, const WaveTrain& wt, double M0);

// Default envelope width: comfortably wider than the diffusive front scale in
// both the resting and the comoving frame, so the front Gaussians are
// dominated pointwise.
double default_M0(const WaveTrain& wt);

// Logarithmic phase pair at time t, built on B = e(x, t+1):
//   phi_hat_a = (d/2q) [log(1 + delta+ B) + log(1 + delta- B)]
//   p         = (d/2q k0) [log(1 + delta+ B) - log(1 + delta- B)]
// phi_a = -phi_hat_a is the physical phase modulation at leading order; the
// amplitude-coupled correction beta* R_hat_a / r only enters the assembled
// field container below.
struct PhaseAnsatz {
    std::vector<double> phi_hat_a;
    std::vector<double> p;
    std::vector<double> phi_a;
};

PhaseAnsatz phase_ansatz(const Grid& g, double t, const ModulationState& st);

// Residual of the advected Burgers operator
//   L_B zeta - q (zeta_x)^2,  L_B = d/dt + 2 (alpha - beta*) phi_x d/dx - d d^2/dx^2
// evaluated at the middle slice from samples of zeta at t - dt, t, t + dt
// (centered in time, fourth-order stencils in x). The profile supplies the
// advection coefficient phi_x.
std::vector<double> burgers_residual_slices(const std::vector<double>& prev,
                                            const std::vector<double>& now,
                                            const std::vector<double>& next,
                                            const SourceProfile& s, const WaveTrain& wt, double dt);

// The same residual on the two characteristic combinations
// zeta+- = phi_hat_a +- k0 p = (d/q) log(1 + delta+- B); exact kernel elements
// of the Cole-Hopf transform up to L_B B itself.
struct BurgersResidual {
    std::vector<double> plus;
    std::vector<double> minus;
};

BurgersResidual burgers_residual(const ModulationState& st, const SourceProfile& s, double t,
                                 double dt);

// Amplitude corrections slaved to the phase pair. R_hat0 is the wavenumber
// response of the amplitude, R_hat1 absorbs the quadratic interactions, and
// the physical amplitude correction is their sum (the transform to physical
// variables has a unit first row). Time derivatives are replaced by their
// advective spatial form, so a single time slice suffices.
struct AmplitudeAnsatz {
    std::vector<double> R_hat0;
    std::vector<double> R_hat1;
    std::vector<double> R_a;
};

AmplitudeAnsatz amplitude_ansatz(const SourceProfile& s, const WaveTrain& wt,
                                 const ModulationState& st, const Grid& g, double t);

// Neutral response modes paired with slow drifts of delta+-, sampled on the
// profile grid in the (amplitude row, scaled-phase row) layout:
//   E+- = ( (phi_x +- k0)/(r0 (1 - 2 gamma1 r0^2)) B_x , r B ) -+ (B/k0) (r_x, r phi_x)
// with B = e(x, t+1). Off the plateau both modes vanish with B.
struct NeutralModes {
    std::array<std::vector<double>, 2> E_plus;
    std::array<std::vector<double>, 2> E_minus;
};

NeutralModes neutral_modes(const SourceProfile& s, const WaveTrain& wt, double t);

// Modulated source A_mod = r exp(i (phi + phi_a)) exp(-i omega0 t): the
// defect with its phase field shifted by the leading-order modulation. The
// moduli |A_mod| = |r| are untouched for every delta+-.
std::vector<std::complex<double>> modulated_source(const SourceProfile& s,
                                                   const ModulationState& st, double t);

// All modulation fields on the profile grid at time t. phi_a here carries the
// full transform -phi_hat_a + beta* R_hat_a / r (the 0/0 at the core node is
// filled by its parity limit); E+- are the delta-independent neutral modes,
// so only phi_a, p, R_a vanish when both delta's do.
struct AnsatzFields {
    Grid grid;
    double t = 0.0;
    std::vector<double> phi_a;
    std::vector<double> p;
    std::vector<double> R_a;
    std::array<std::vector<double>, 2> E_plus;
    std::array<std::vector<double>, 2> E_minus;
};

AnsatzFields ansatz_fields(const SourceProfile& s, const ModulationState& st, double t);

// Sensitivity of the assembled ansatz vector (R_a row, beta* R_a - r phi_hat_a
// row) to one of the Cole-Hopf constants, with the translation component
// (dp/ddelta) (r_x, r phi_x) removed: a derived diagnostic for the modes the
// modulation family generates, computed by centered differencing in delta.
struct SigmaMode {
    std::array<std::vector<double>, 2> field;
};

SigmaMode sigma_mode(const SourceProfile& s, const WaveTrain& wt, const ModulationState& st,
                     double t, End which, double step = 1e-5);

} // namespace qcgl
