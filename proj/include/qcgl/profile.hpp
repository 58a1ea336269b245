#pragma once

#include <array>
#include <string>
#include <vector>

#include "qcgl/grid.hpp"
#include "qcgl/params.hpp"

namespace qcgl {

// Standing source defect in polar form A = r(x) exp(i phi(x)) exp(-i omega0 t):
// r is odd-like with a single zero at the core, phi_x -> +/- k0 at +/- infinity,
// and the selected frequency satisfies omega0 = omega_nl(k0).
struct SourceProfile {
    QcglParams params;
    Grid grid;
    std::vector<double> r;
    std::vector<double> phi;   // anchored so phi(0) = 0
    std::vector<double> phi_x;
    double k0 = 0.0;
    double omega0 = 0.0;
    double eta0 = 0.0; // exponential decay rate of the tails toward the wave trains
};

// Constants of the explicit cubic hole solution.
struct HoleConstants {
    double delta = 0.0; // admissible root of delta^2 + 3(1+ab)/(b-a) delta - 2 = 0
    double kappa = 0.0; // core width scale, kappa^2 = 1/(2 - 3 alpha delta)
    double k0 = 0.0;    // -delta * kappa
    double r0 = 0.0;    // sqrt(1 - k0^2)
    double omega0 = 0.0;
};

HoleConstants hole_constants(double alpha, double beta);

// Explicit hole of the cubic equation: r = r0 tanh(kappa x),
// phi = -delta log(cosh(kappa x)). alpha == beta degenerates to the real
// Ginzburg-Landau kink r = tanh(x/sqrt(2)) with delta = 0.
SourceProfile nozaki_bekki(double alpha, double beta, const Grid& grid);

// Pointwise residuals of the steady-state system in (r, phi_x) form, columns
// (amplitude equation, phase equation), evaluated with finite differences of
// the given order.
std::vector<std::array<double, 2>> ode_residual(const SourceProfile& s, const QcglParams& p,
                                                int order = 6);

// Max |residual| over both equations, excluding half a stencil width at each
// boundary.
double max_ode_residual(const SourceProfile& s, const QcglParams& p, int order = 6);

struct SolveOptions {
    int max_iter = 25;
    double tol = 1e-10;        // max-norm of the collocation residual
    int order = 4;             // interior stencil order
    int max_continuation = 10; // quintic ramp steps if the direct solve fails
};

struct SolveReport {
    int newton_iters = 0;
    int continuation_steps = 0;
    double final_residual = 0.0;
    std::vector<double> residual_history;
    double condition_estimate = 0.0; // crude Jacobian condition estimate at the solution
};

// Newton collocation solve for the standing source with unknowns
// (r, phi_x, k0, omega0); boundary rows pin (r, phi_x)(+-L) to the wave train
// of the current k0 iterate and the core row pins r(0) = 0.
SourceProfile solve_source(const QcglParams& p, const SourceProfile& guess, SolveOptions opts = {},
                           SolveReport* report = nullptr);

struct ProfileDiagnostics {
    double r_x0 = 0.0;
    double r_xx0 = 0.0;
    double phi_x0 = 0.0;
    double eta0 = 0.0;       // slowest fitted tail rate among the four fits below
    double eta0_r[2] = {0.0, 0.0};     // left/right fits of log|r -+ r0|
    double eta0_phi_x[2] = {0.0, 0.0}; // left/right fits of log|phi_x -+ k0|
    double min_r_squared = 1.0;
};

// Core derivatives and tail decay rates; throws when no tail window fits a
// clean exponential (R^2 < 0.99), which signals the half-width is too small.
ProfileDiagnostics profile_diagnostics(const SourceProfile& s);

// Default domain half-width for a given tail rate, capped to [40, 400].
double default_half_width(double eta0);

// Columnar text I/O, full precision, bit-exact round trip.
void save_profile(const SourceProfile& s, const std::string& path);
SourceProfile load_profile(const std::string& path);

} // namespace qcgl
