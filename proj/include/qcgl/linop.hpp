#pragma once

#include <array>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "qcgl/grid.hpp"
#include "qcgl/params.hpp"
#include "qcgl/profile.hpp"
#include "qcgl/wavetrain.hpp"

namespace qcgl {

// Linearization of the polar-coordinate flow about a standing source, acting
// on interleaved samples of U = (R, r*phi): index 2*j is the amplitude
// perturbation at node j, index 2*j+1 the scaled phase perturbation. For
// weight_eta > 0 the matrix represents the operator conjugated by the smooth
// exponential weight e^{eta*sqrt(1+x^2)}, which shifts the far-field spectrum
// left of the imaginary axis so isolated eigenvalues near zero can be
// resolved.
struct DiscretizedOperator {
    Eigen::SparseMatrix<double> matrix; // 2n x 2n
    Grid grid;
    double weight_eta = 0.0;
    std::string bc = "onesided-farfield";

    // profile data the spectral routines reuse
    QcglParams params;
    std::vector<double> r, r_x, phi_x;
    double k0 = 0.0;
    double eta0 = 0.0; // tail decay rate of the underlying profile
};

// Kernel pair of the source linearization, sampled on the operator's grid:
// V1 = (r_x, r*phi_x) from translation, V2 = (0, r) from the gauge rotation.
std::pair<Eigen::VectorXd, Eigen::VectorXd> kernel_fields(const DiscretizedOperator& op);

// Second-order centered/one-sided assembly. The zero-order matrix that couples
// the scaled phase back into the amplitude has 0/0 entries at the core node
// where r vanishes; they are filled by the parity limit (numerator and
// denominator both vanish linearly), so no division by r(0) ever occurs.
// Edge rows apply the constant-coefficient far-field operator with one-sided
// stencils. Requires 0 <= eta < profile.eta0 and a profile whose amplitude
// vanishes only at the core node.
DiscretizedOperator assemble_operator(const SourceProfile& s, const QcglParams& p, double eta);

struct PointSpectrumOptions {
    int max_iter = 200;
    // Ritz residual gate, relative to the typical (median) row norm. Tight on
    // purpose: the weight conjugation is non-normal, and a loose gate accepts
    // pseudomodes that sit at the shift itself without being eigenvalues.
    double tol = 1e-12;
    int extra_subspace = 4;
    unsigned long long seed = 20240901ull;
};

// The count eigenvalues nearest shift, by shift-inverted subspace iteration
// with deflation inside the orthonormalized block. Sorted by |lambda - shift|.
std::vector<std::complex<double>> point_spectrum(const DiscretizedOperator& op, int count,
                                                 std::complex<double> shift,
                                                 const PointSpectrumOptions& opts = {});

// Kernel/adjoint data of the double zero eigenvalue.
struct SpectralData {
    std::vector<std::complex<double>> eigenvalues; // Ritz pair nearest zero
    Eigen::VectorXd V1, V2;                        // kernel fields
    Eigen::VectorXd psi1, psi2;                    // normalized adjoint fields
    Eigen::Matrix2d M_psi;                         // raw pairing <psi_i, V_j> before normalization
    Eigen::Matrix2d M;                             // its inverse, applied to the adjoints
    std::array<double, 2> psi_decay = {0.0, 0.0};  // fitted exponential localization rates
};

// Left-null pair of the weighted operator, mapped back to unweighted adjoint
// fields and normalized so the discrete pairing with (V1, V2) is the identity.
// Requires weight_eta > 0 (the unweighted far-field spectrum clusters at the
// origin and would contaminate the pair). Throws if the raw pairing matrix is
// singular: the double zero is then not simple at these parameters.
SpectralData adjoint_pair(const DiscretizedOperator& op);

enum class RootClass { stable, center, unstable };

struct SpatialRoots {
    std::array<std::complex<double>, 4> nu;
    std::array<RootClass, 4> cls;
};

// Roots nu of the far-field spatial symbol det(D2 nu^2 -+ 2 k0 D1 nu + D0inf
// - lambda I) = 0 at the chosen end, solved through the companion matrix of
// the quartic. A root is tagged center when |Re nu| < tol_rel*|lambda| +
// floor, otherwise stable/unstable by the sign of Re nu.
SpatialRoots spatial_eigenvalues(const QcglParams& p, const WaveTrain& wt,
                                 std::complex<double> lambda, End end,
                                 double tol_rel = 1e-6, double floor = 1e-9);

struct ExpansionFit {
    double c1 = 0.0;       // linear coefficient of the center root in lambda
    double c2 = 0.0;       // quadratic coefficient
    double residual = 0.0; // max deviation of the cubic fit over the sample
};

// Cubic fit of the center spatial root over real lambda in (0, 0.02]. For a
// source the expansion is nu_c = -lambda/cg + d lambda^2/cg^3 + O(lambda^3)
// at the plus end, with the sign of c1 flipped at the minus end.
ExpansionFit critical_spatial_expansion(const QcglParams& p, const WaveTrain& wt,
                                        End end = End::plus);

// Structured text block: weight, grid, eigenvalues, kernel residuals, pairing
// matrix and localization fits.
std::string spectrum_report(const DiscretizedOperator& op, const SpectralData& sd,
                            const std::vector<std::complex<double>>& eigenvalues);

} // namespace qcgl
