#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "qcgl/ansatz.hpp"
#include "qcgl/grid.hpp"
#include "qcgl/linop.hpp"
#include "qcgl/params.hpp"
#include "qcgl/profile.hpp"
#include "qcgl/wavetrain.hpp"

namespace qcgl {

// Absorbing boundary layers. The source's asymptotic phases +-k0 x are
// incompatible with a periodic closure, so the domain is truncated and the
// field is relaxed toward a stored target inside layers of the given width:
//   A <- A - dt s(x) (A - target(x) e^{-i omega0 t}),
// with s a smoothstep ramp of height `strength`. The target co-rotates at the
// defect frequency; outside the layers s = 0 and the PDE is untouched. Group
// velocity points outward for a source, so the layers absorb outgoing fronts.
struct SpongeSpec {
    double width = 0.0; // per side; 0 disables the sponge
    double strength = 2.0;
    double omega0 = 0.0;
    std::vector<std::complex<double>> target; // time-0 target field
};

// Layers relaxing toward the profile itself (its tails are the asymptotic
// wave trains +-r0 e^{i(+-k0 x)} up to O(e^{-eta0 L})).
SpongeSpec sponge_for_profile(const SourceProfile& s, double width, double strength = 2.0);

// Layers matched to a single wave train r0 e^{i(k0 x - omega_nl t)}.
SpongeSpec sponge_for_wave_train(const WaveTrain& wt, const Grid& g, double width,
                                 double strength = 2.0);

// Minimal layer width that keeps the diffusive interface of a run to time
// T_final away from the hard boundary: five spread scales sqrt(4 d T_final).
double required_sponge_width(const WaveTrain& wt, double T_final);

// Everything needed to reproduce a run byte for byte.
struct RunManifest {
    QcglParams params;
    std::string profile_hash; // digest of the background profile data
    std::uint64_t seed = 0;
    std::string stepper = "strang2";
};

// FNV-1a digest over the full-precision text of the profile columns, used to
// tie trajectories to the profile they were run against.
std::string profile_digest(const SourceProfile& s);

struct SimState {
    Grid grid{60.0, 1201};
    QcglParams params;
    std::vector<std::complex<double>> A;
    double t = 0.0;
    double dt = 0.0;
    SpongeSpec sponge;
    RunManifest manifest;
};

// Default stable step for the semi-implicit splitting; the implicit linear
// solve is unconditionally stable, this resolves the explicit nonlinearity
// and the splitting error.
double default_dt(const Grid& g, const QcglParams& p);

// Raised when the blow-up detector trips (sup|A| > 10 r0(k=0)) or the field
// stops being finite.
struct BlowUp : std::runtime_error {
    BlowUp(const std::string& what, double t, double sup) : std::runtime_error(what), t(t), sup(sup) {}
    double t = 0.0;
    double sup = 0.0;
};

// Strang-split semi-implicit stepper for A_t = (1+i alpha) A_xx + A + N(A):
// explicit midpoint half-steps of the pointwise nonlinearity N(A) =
// -(1+i beta) A|A|^2 + (gamma1+i gamma2) A|A|^4 around a Crank-Nicolson step
// of the stiff linear part, centered fourth-order stencils. The stencil halo
// at each rim is pinned to the co-rotating sponge target (or frozen when the
// state has none), so the truncated domain sees consistent boundary data.
// The factorization is reused across steps, so dt is fixed at construction.
class QcglStepper {
  public:
    QcglStepper(const QcglParams& p, const Grid& g, double dt, int order = 4);

    double dt() const { return dt_; }

    // One full step (nonlinear half, linear, nonlinear half, sponge); advances
    // st.t by dt and checks the blow-up guard.
    void advance(SimState& st) const;

  private:
    Grid grid_;
    QcglParams params_;
    double dt_ = 0.0;
    double blow_limit_ = 0.0;
    int halo_ = 2; // pinned nodes per side
    Eigen::SparseMatrix<std::complex<double>> rhs_; // I + dt/2 Lop
    Eigen::SparseLU<Eigen::SparseMatrix<std::complex<double>>> lu_; // I - dt/2 Lop
};

// Single step with the state's own dt (spec-shaped wrapper around
// QcglStepper::advance).
SimState step_qcgl(SimState state, const QcglStepper& stepper);

// Integrate to t_end with whole steps of stepper.dt (the step count is fixed
// up front, so two runs over the same span take identical paths). Throws when
// the span is not a whole number of steps; see commensurate_dt.
SimState advance_to(SimState state, const QcglStepper& stepper, double t_end);

// Largest step not exceeding dt_max that divides the interval into a whole
// number of steps, so frame times land exactly on step boundaries.
double commensurate_dt(double interval, double dt_max);

// Crank-Nicolson propagator for the linearized flow (d/dt - L)U = 0 on the
// interleaved (R, r phi) layout of an assembled operator.
class LinearPropagator {
  public:
    LinearPropagator(const DiscretizedOperator& op, double dt);

    double dt() const { return dt_; }
    Eigen::VectorXd step(const Eigen::VectorXd& U) const;

  private:
    double dt_ = 0.0;
    Eigen::SparseMatrix<double> rhs_;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
};

Eigen::VectorXd step_linearized(const Eigen::VectorXd& U, const LinearPropagator& prop);

// Library of admissible initial perturbations: A_in = (r + rho) e^{i(phi + sigma)}.
enum class PerturbShape { even_bump, odd_bump, phase_kick };

// Gaussian-weighted C^3 size of a perturbation pair (rho, sigma) off the
// profile: sum over derivative orders 0..3 of sup|d^j(e^{x^2/M0} rho)| plus
// the same for sigma. Finite only when the pair decays faster than the
// inverse weight; the library shapes are built that way.
double initial_norm(const Grid& g, const std::vector<double>& rho, const std::vector<double>& sigma,
                    double M0);

// Library perturbation of the given shape scaled so the weighted norm equals
// epsilon exactly (the norm is 1-homogeneous in the pair, so one evaluation
// fixes the scale).
std::vector<std::complex<double>> perturb_initial(const SourceProfile& s, double epsilon, double M0,
                                                  PerturbShape shape);

// Perturbation of a simulated field relative to the background source, read
// off along the shifted frame x + p(x):
//   A(x + p(x), t) = (r(x) + R(x)) e^{i(phi(x) + phi_pert(x))} e^{-i omega0 t}.
struct PerturbationFrame {
    double t = 0.0;
    std::vector<double> R;
    std::vector<double> phi; // unwrapped, anchored at a far-field reference
    std::array<std::vector<double>, 2> U; // (R, r phi)
    std::vector<double> p_used;
};

// Demodulation against the background: samples A at x + p by sixth-order
// local polynomial interpolation, divides out e^{i(phi - omega0 t)}, and
// takes the amplitude branch from sign(r), which carries both R and phi
// smoothly through the core. phi is the anchored principal-value unwrap of
// sign(r) C outward from a far-field reference. Requires sup|p_x| < 1 so
// the shift map stays invertible.
PerturbationFrame extract_perturbation(const std::vector<std::complex<double>>& A, double t,
                                       const SourceProfile& s, const std::vector<double>& p_field);
PerturbationFrame extract_perturbation(const SimState& state, const SourceProfile& s,
                                       const std::vector<double>& p_field);

// Stored run: sampled frames of the full field.
struct Frame {
    double t = 0.0;
    std::vector<std::complex<double>> A;
};

struct Trajectory {
    Grid grid{60.0, 1201};
    QcglParams params;
    RunManifest manifest;
    std::vector<Frame> frames;
};

// Full-precision columnar snapshot (x, Re A, Im A, Re target, Im target) with
// the manifest in the header; load/save round-trip bit-exactly, so a resumed
// run reproduces subsequent frames byte for byte.
void save_snapshot(const SimState& st, const std::string& path);
SimState load_snapshot(const std::string& path);

// Frame files plus an index listing (filename, t) per line, under dir.
void save_trajectory(const Trajectory& traj, const std::string& dir);
Trajectory load_trajectory(const std::string& dir);

// Per-frame fit of the Cole-Hopf pair. delta entries carry NaN and valid = 0
// until the plateau half-regions [w, cg t - w] contain enough points (w is
// the diffusive interface width sqrt(4 d (t+1))).
struct ModulationFit {
    std::vector<double> t;
    std::vector<double> delta_plus;
    std::vector<double> delta_minus;
    std::vector<char> valid;
    std::vector<std::vector<double>> p;    // implied shift per frame
    std::vector<PerturbationFrame> frames; // extraction the accepted fit used
};

// Least-squares (delta+, delta-) per frame minimizing the distance between
// the measured perturbation phase and the ansatz phase over the two plateau
// half-regions; Gauss-Newton on the 2-parameter log model, with the residual
// of the shift fed back as -phi_x (p(delta) - p_used) so the swap symmetry of
// the even phase model is broken (the right half-region pins delta+, the left
// pins delta-). Extraction is bootstrapped with p = 0 and refined by one
// extract -> fit -> extract pass (p = O(delta), so the fixed point is
// contracting). x_max caps the fit region away from the boundary layers;
// 0 means 0.9 L.
ModulationFit fit_modulation(const Trajectory& traj, const SourceProfile& s, const WaveTrain& wt,
                             double x_max = 0.0);

} // namespace qcgl
