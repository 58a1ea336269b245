#include "qcgl/linop.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SparseLU>

#include "qcgl/findiff.hpp"
#include "qcgl/fit.hpp"

namespace qcgl {

namespace {

using cd = std::complex<double>;

double rho_p(double x) { return x / std::sqrt(1.0 + x * x); }
double rho_pp(double x) { return 1.0 / std::pow(1.0 + x * x, 1.5); }

struct Mat2 {
    double a11, a12, a21, a22;
};

// row-local stencil bundle: first and second derivative weights over the same
// node window
struct RowStencil {
    int start = 0;
    std::vector<double> d1, d2;
};

RowStencil row_stencil(int j, int n, double h) {
    RowStencil rs;
    if (j == 0 || j == n - 1) {
        const Stencil s2 = fd_stencil(2, 3, j == 0 ? 0 : 4, h); // 5 one-sided points
        const Stencil s1 = fd_stencil(1, 3, j == 0 ? 0 : 2, h); // 3 one-sided points
        rs.start = (j == 0) ? 0 : n - s2.npoints;
        rs.d2 = s2.w;
        rs.d1.assign(rs.d2.size(), 0.0);
        const int shift = (j == 0) ? 0 : s2.npoints - s1.npoints;
        for (int m = 0; m < s1.npoints; ++m) rs.d1[std::size_t(shift + m)] = s1.w[std::size_t(m)];
    } else {
        rs.start = j - 1;
        rs.d2 = {1.0 / (h * h), -2.0 / (h * h), 1.0 / (h * h)};
        rs.d1 = {-0.5 / h, 0.0, 0.5 / h};
    }
    return rs;
}

} // namespace

std::pair<Eigen::VectorXd, Eigen::VectorXd> kernel_fields(const DiscretizedOperator& op) {
    const int n = int(op.grid.n);
    Eigen::VectorXd V1 = Eigen::VectorXd::Zero(2 * n), V2 = Eigen::VectorXd::Zero(2 * n);
    for (int j = 0; j < n; ++j) {
        V1(2 * j) = op.r_x[std::size_t(j)];
        V1(2 * j + 1) = op.r[std::size_t(j)] * op.phi_x[std::size_t(j)];
        V2(2 * j + 1) = op.r[std::size_t(j)];
    }
    return {V1, V2};
}

DiscretizedOperator assemble_operator(const SourceProfile& s, const QcglParams& p, double eta) {
    const Grid& g = s.grid;
    const int n = int(g.n);
    const int mid = int(g.mid());
    const double h = g.h();
    if (!(eta >= 0.0)) throw std::domain_error("assemble_operator: weight must be nonnegative");
    if (s.eta0 > 0.0 && eta >= s.eta0)
        throw std::domain_error("assemble_operator: weight must stay below the profile decay rate");

    double rmax = 0.0;
    for (double v : s.r) rmax = std::max(rmax, std::abs(v));
    for (int j = 0; j < n; ++j) {
        if (j == mid) continue;
        if (std::abs(s.r[std::size_t(j)]) < 1e-10 * rmax)
            throw std::domain_error("assemble_operator: amplitude vanishes away from the core");
    }
    for (int j = 0; j + 1 < n; ++j) {
        if (j == mid - 1 || j == mid) continue;
        if (s.r[std::size_t(j)] * s.r[std::size_t(j + 1)] < 0.0)
            throw std::domain_error("assemble_operator: amplitude changes sign away from the core");
    }

    const double al = p.alpha;
    const std::vector<double> r_x = fd_derivative(s.r, h, 1, 2);
    const std::vector<double> r_xx = fd_derivative(s.r, h, 2, 2);
    const std::vector<double> phi_xx = fd_derivative(s.phi_x, h, 1, 2);

    // numerators of the phase-to-amplitude zero-order coupling; both vanish
    // linearly at the core together with r
    std::vector<double> N1(static_cast<std::size_t>(n)), N2(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        const std::size_t k = std::size_t(j);
        N1[k] = 2.0 * s.phi_x[k] * r_x[k] + al * r_xx[k];
        N2[k] = 2.0 * al * s.phi_x[k] * r_x[k] - r_xx[k];
    }

    const double r0far = amplitude_of_wavenumber(p, s.k0);
    const double d0inf11 = -2.0 * r0far * r0far * (1.0 - 2.0 * p.gamma1 * r0far * r0far);
    const double d0inf21 = -2.0 * r0far * r0far * (p.beta - 2.0 * p.gamma2 * r0far * r0far);

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(std::size_t(n) * 24);
    for (int j = 0; j < n; ++j) {
        const std::size_t k = std::size_t(j);
        const double x = g.x(k);
        const double rp = rho_p(x), rpp = rho_pp(x);
        const bool edge = (j == 0 || j == n - 1);

        const double phx = edge ? (j == 0 ? -s.k0 : s.k0) : s.phi_x[k];
        Mat2 D0phi{0.0, 0.0, 0.0, 0.0};
        Mat2 D0{0.0, 0.0, 0.0, 0.0};
        if (edge) {
            D0.a11 = d0inf11;
            D0.a21 = d0inf21;
        } else {
            if (j == mid) {
                // parity limit of N/r at the simple zero of r
                const double dN1 = (N1[k + 1] - N1[k - 1]) / (2.0 * h);
                const double dN2 = (N2[k + 1] - N2[k - 1]) / (2.0 * h);
                D0phi.a12 = dN1 / r_x[k];
                D0phi.a22 = dN2 / r_x[k];
            } else {
                D0phi.a12 = N1[k] / s.r[k];
                D0phi.a22 = N2[k] / s.r[k];
            }
            const double r2 = s.r[k] * s.r[k];
            D0.a11 = 1.0 - 3.0 * r2 - al * phi_xx[k] - phx * phx + 5.0 * p.gamma1 * r2 * r2;
            D0.a21 = s.omega0 - 3.0 * p.beta * r2 - al * phx * phx + phi_xx[k] + 5.0 * p.gamma2 * r2 * r2;
        }

        // L_eta = D2 (d_x + eta rho')^2 - 2 phi_x D1 (d_x + eta rho') + D0^phi + D0
        const Mat2 A2{1.0, -al, al, 1.0};
        const double e1 = 2.0 * eta * rp;
        const Mat2 A1{-2.0 * phx * al + e1 * 1.0, -2.0 * phx * 1.0 + e1 * (-al),
                      -2.0 * phx * (-1.0) + e1 * al, -2.0 * phx * al + e1 * 1.0};
        const double e0 = eta * eta * rp * rp + eta * rpp;
        const double w0 = -2.0 * eta * rp * phx;
        const Mat2 A0{e0 * 1.0 + w0 * al + D0phi.a11 + D0.a11,
                      e0 * (-al) + w0 * 1.0 + D0phi.a12 + D0.a12,
                      e0 * al + w0 * (-1.0) + D0phi.a21 + D0.a21,
                      e0 * 1.0 + w0 * al + D0phi.a22 + D0.a22};

        const RowStencil rs = row_stencil(j, n, h);
        for (std::size_t m = 0; m < rs.d2.size(); ++m) {
            const int col = rs.start + int(m);
            const double w2 = rs.d2[m], w1 = rs.d1[m];
            trip.emplace_back(2 * j, 2 * col, A2.a11 * w2 + A1.a11 * w1);
            trip.emplace_back(2 * j, 2 * col + 1, A2.a12 * w2 + A1.a12 * w1);
            trip.emplace_back(2 * j + 1, 2 * col, A2.a21 * w2 + A1.a21 * w1);
            trip.emplace_back(2 * j + 1, 2 * col + 1, A2.a22 * w2 + A1.a22 * w1);
        }
        trip.emplace_back(2 * j, 2 * j, A0.a11);
        trip.emplace_back(2 * j, 2 * j + 1, A0.a12);
        trip.emplace_back(2 * j + 1, 2 * j, A0.a21);
        trip.emplace_back(2 * j + 1, 2 * j + 1, A0.a22);
    }

    DiscretizedOperator op;
    op.matrix.resize(2 * n, 2 * n);
    op.matrix.setFromTriplets(trip.begin(), trip.end());
    op.matrix.makeCompressed();
    op.grid = g;
    op.weight_eta = eta;
    op.params = p;
    op.r = s.r;
    op.r_x = r_x;
    op.phi_x = s.phi_x;
    op.k0 = s.k0;
    op.eta0 = s.eta0;
    return op;
}

namespace {

// median absolute row sum: a scale for the residual gate that the fat
// one-sided boundary rows cannot inflate. A loose gate lets pseudomodes of
// the weight conjugation (non-normality ~ e^{2 eta L}) pass as eigenpairs.
double typical_row_norm(const Eigen::SparseMatrix<double>& A) {
    std::vector<double> rowsum(std::size_t(A.rows()), 0.0);
    for (int k = 0; k < A.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
            rowsum[std::size_t(it.row())] += std::abs(it.value());
    std::nth_element(rowsum.begin(), rowsum.begin() + long(rowsum.size() / 2), rowsum.end());
    return rowsum[rowsum.size() / 2];
}

Eigen::MatrixXcd thin_q(const Eigen::MatrixXcd& Z) {
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(Z);
    return qr.householderQ() * Eigen::MatrixXcd::Identity(Z.rows(), Z.cols());
}

Eigen::MatrixXd thin_q_real(const Eigen::MatrixXd& Z) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Z);
    return qr.householderQ() * Eigen::MatrixXd::Identity(Z.rows(), Z.cols());
}

// exponential rate of one decaying tail, by log-linear regression over the
// window where the envelope is well above roundoff and below its peak.
// Adjoint tails oscillate (complex spatial roots), so fit the local maxima:
// raw samples dip through the oscillation nodes and bias the slope low.
double tail_rate(const std::vector<double>& xs, const std::vector<double>& gs) {
    double gmax = 0.0;
    for (double v : gs) gmax = std::max(gmax, v);
    if (!(gmax > 0.0)) return 0.0;
    std::vector<double> fx, fy, px, py;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (gs[i] > 1e-11 * gmax && gs[i] < 0.05 * gmax) {
            fx.push_back(xs[i]);
            fy.push_back(std::log(gs[i]));
            if (i > 0 && i + 1 < xs.size() && gs[i] >= gs[i - 1] && gs[i] >= gs[i + 1]) {
                px.push_back(xs[i]);
                py.push_back(std::log(gs[i]));
            }
        }
    }
    if (px.size() >= 6) {
        const LinearFit f = linear_fit(px, py);
        return -f.slope;
    }
    if (fx.size() < 8) return 0.0;
    const LinearFit f = linear_fit(fx, fy);
    return -f.slope;
}

} // namespace

std::vector<cd> point_spectrum(const DiscretizedOperator& op, int count, cd shift,
                               const PointSpectrumOptions& opts) {
    if (count < 0) throw std::domain_error("point_spectrum: negative count");
    if (count == 0) return {};
    const int N = int(op.matrix.rows());
    const int p = std::min(N, count + opts.extra_subspace);

    Eigen::SparseMatrix<cd> C(N, N);
    {
        std::vector<Eigen::Triplet<cd>> trip;
        trip.reserve(std::size_t(op.matrix.nonZeros()) + std::size_t(N));
        for (int k = 0; k < op.matrix.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator it(op.matrix, k); it; ++it)
                trip.emplace_back(int(it.row()), int(it.col()), cd(it.value(), 0.0));
        for (int i = 0; i < N; ++i) trip.emplace_back(i, i, -shift);
        C.setFromTriplets(trip.begin(), trip.end());
        C.makeCompressed();
    }
    Eigen::SparseLU<Eigen::SparseMatrix<cd>> lu;
    lu.compute(C);
    if (lu.info() != Eigen::Success)
        throw std::runtime_error("point_spectrum: factorization of the shifted operator failed");

    const double anorm = typical_row_norm(op.matrix);
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> nd;
    Eigen::MatrixXcd V(N, p);
    for (int j = 0; j < p; ++j)
        for (int i = 0; i < N; ++i) V(i, j) = cd(nd(rng), 0.0);
    V = thin_q(V);

    std::vector<cd> result;
    for (int iter = 0; iter < opts.max_iter; ++iter) {
        V = thin_q(lu.solve(V));
        const Eigen::MatrixXcd W = C * V + shift * V; // = A V
        const Eigen::MatrixXcd G = V.adjoint() * W;
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> ces(G);
        if (ces.info() != Eigen::Success) continue;

        std::vector<int> idx(static_cast<std::size_t>(p));
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](int a, int b) {
            return std::abs(ces.eigenvalues()(a) - shift) < std::abs(ces.eigenvalues()(b) - shift);
        });

        bool ok = true;
        result.clear();
        for (int m = 0; m < count; ++m) {
            const int i = idx[std::size_t(m)];
            const cd lam = ces.eigenvalues()(i);
            const Eigen::VectorXcd z = V * ces.eigenvectors().col(i);
            const double res = (W * ces.eigenvectors().col(i) - lam * z).norm() / z.norm();
            if (res > opts.tol * anorm) {
                ok = false;
                break;
            }
            result.push_back(lam);
        }
        if (ok) return result;
    }
    throw std::runtime_error("point_spectrum: no convergence within the iteration budget");
}

SpectralData adjoint_pair(const DiscretizedOperator& op) {
    if (!(op.weight_eta > 0.0))
        throw std::domain_error("adjoint_pair: needs a weighted operator (weight_eta > 0)");
    const int N = int(op.matrix.rows());
    const int n = int(op.grid.n);
    const double h = op.grid.h();

    Eigen::SparseMatrix<double> AT = Eigen::SparseMatrix<double>(op.matrix.transpose());
    AT.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(AT);
    if (lu.info() != Eigen::Success)
        throw std::runtime_error("adjoint_pair: factorization of the transposed operator failed");

    std::mt19937_64 rng(987654321ull);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd V(N, 2);
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < N; ++i) V(i, j) = nd(rng);
    V = thin_q_real(V);
    for (int iter = 0; iter < 120; ++iter) {
        const Eigen::MatrixXd Vn = thin_q_real(lu.solve(V));
        const double drift = (Vn - V * (V.transpose() * Vn)).norm();
        V = Vn;
        if (drift < 1e-14 * std::sqrt(double(N)) && iter > 4) break;
    }

    SpectralData sd;
    {
        const Eigen::Matrix2d G = V.transpose() * (AT * V);
        const Eigen::EigenSolver<Eigen::Matrix2d> es(G);
        sd.eigenvalues = {es.eigenvalues()(0), es.eigenvalues()(1)};
    }

    auto kv = kernel_fields(op);
    sd.V1 = kv.first;
    sd.V2 = kv.second;

    // undo the weight: left null vectors of the conjugated matrix carry a
    // factor e^{+eta rho} relative to the unweighted adjoints
    Eigen::MatrixXd psi(N, 2);
    for (int j = 0; j < n; ++j) {
        const double w = std::exp(-op.weight_eta * std::sqrt(1.0 + op.grid.x(std::size_t(j)) * op.grid.x(std::size_t(j))));
        psi(2 * j, 0) = V(2 * j, 0) * w;
        psi(2 * j + 1, 0) = V(2 * j + 1, 0) * w;
        psi(2 * j, 1) = V(2 * j, 1) * w;
        psi(2 * j + 1, 1) = V(2 * j + 1, 1) * w;
    }

    auto pairing = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) {
            const double term = a(2 * j) * b(2 * j) + a(2 * j + 1) * b(2 * j + 1);
            acc += (j == 0 || j == n - 1) ? 0.5 * term : term;
        }
        return acc * h;
    };
    sd.M_psi << pairing(psi.col(0), sd.V1), pairing(psi.col(0), sd.V2),
        pairing(psi.col(1), sd.V1), pairing(psi.col(1), sd.V2);

    const double det = sd.M_psi.determinant();
    const double scale = std::abs(sd.M_psi(0, 0) * sd.M_psi(1, 1)) + std::abs(sd.M_psi(0, 1) * sd.M_psi(1, 0));
    if (!(std::abs(det) > 1e-12 * (scale + 1e-300)))
        throw std::runtime_error(
            "adjoint_pair: pairing matrix is singular; the double zero eigenvalue is not simple at "
            "these parameters");
    sd.M << sd.M_psi(1, 1) / det, -sd.M_psi(0, 1) / det, -sd.M_psi(1, 0) / det, sd.M_psi(0, 0) / det;

    sd.psi1 = sd.M(0, 0) * psi.col(0) + sd.M(0, 1) * psi.col(1);
    sd.psi2 = sd.M(1, 0) * psi.col(0) + sd.M(1, 1) * psi.col(1);

    for (int i = 0; i < 2; ++i) {
        const Eigen::VectorXd& ps = (i == 0) ? sd.psi1 : sd.psi2;
        std::vector<double> xr, gr, xl, gl;
        // adjoints of the one-sided closures carry a spike on the last few
        // nodes; keep it out of the rate fit
        const double xcut = 0.95 * op.grid.L;
        for (int j = 0; j < n; ++j) {
            const double g = std::hypot(ps(2 * j), ps(2 * j + 1));
            const double x = op.grid.x(std::size_t(j));
            if (std::abs(x) > xcut) continue;
            if (x >= 0.0) {
                xr.push_back(x);
                gr.push_back(g);
            }
            if (x <= 0.0) {
                xl.push_back(-x);
                gl.push_back(g);
            }
        }
        const double rr = tail_rate(xr, gr), rl = tail_rate(xl, gl);
        sd.psi_decay[std::size_t(i)] = (rr > 0.0 && rl > 0.0) ? std::min(rr, rl) : std::max(rr, rl);
    }
    return sd;
}

SpatialRoots spatial_eigenvalues(const QcglParams& p, const WaveTrain& wt, cd lambda, End end,
                                 double tol_rel, double floor) {
    const double al = p.alpha;
    const double idet = 1.0 / (1.0 + al * al);
    const auto D0 = matrix_D0_inf(p, wt);
    // B0 = D2^{-1} (lambda I - D0inf)
    const cd m11 = lambda - D0[0][0], m21 = cd(-D0[1][0], 0.0);
    const cd b11 = idet * (m11 + al * m21);
    const cd b21 = idet * (-al * m11 + m21);
    const cd b12 = idet * (al * lambda);
    const cd b22 = idet * (lambda);

    const double s = (end == End::plus) ? 1.0 : -1.0;
    const double k0 = wt.k0;
    const cd c2 = 4.0 * k0 * k0 - (b11 + b22);
    const cd c1 = -s * 2.0 * k0 * (b21 - b12);
    const cd c0 = b11 * b22 - b12 * b21;

    Eigen::Matrix4cd comp = Eigen::Matrix4cd::Zero();
    comp(1, 0) = 1.0;
    comp(2, 1) = 1.0;
    comp(3, 2) = 1.0;
    comp(0, 3) = -c0;
    comp(1, 3) = -c1;
    comp(2, 3) = -c2;
    const Eigen::ComplexEigenSolver<Eigen::Matrix4cd> ces(comp);

    SpatialRoots out;
    const double band = tol_rel * std::abs(lambda) + floor;
    for (int i = 0; i < 4; ++i) {
        out.nu[std::size_t(i)] = ces.eigenvalues()(i);
        const double re = out.nu[std::size_t(i)].real();
        out.cls[std::size_t(i)] =
            (std::abs(re) < band) ? RootClass::center : (re > 0.0 ? RootClass::unstable : RootClass::stable);
    }
    return out;
}

ExpansionFit critical_spatial_expansion(const QcglParams& p, const WaveTrain& wt, End end) {
    std::vector<double> ls, vs;
    for (int k = 1; k <= 8; ++k) {
        const double lam = 0.0025 * double(k);
        const SpatialRoots roots = spatial_eigenvalues(p, wt, cd(lam, 0.0), end);
        int best = 0;
        for (int i = 1; i < 4; ++i)
            if (std::abs(roots.nu[std::size_t(i)]) < std::abs(roots.nu[std::size_t(best)])) best = i;
        ls.push_back(lam);
        vs.push_back(roots.nu[std::size_t(best)].real());
    }
    const std::vector<double> c = poly_fit_through_origin(ls, vs, 3);
    ExpansionFit fit;
    fit.c1 = c[1];
    fit.c2 = c[2];
    for (std::size_t i = 0; i < ls.size(); ++i)
        fit.residual = std::max(fit.residual, std::abs(poly_eval(c, ls[i]) - vs[i]));
    return fit;
}

std::string spectrum_report(const DiscretizedOperator& op, const SpectralData& sd,
                            const std::vector<cd>& eigenvalues) {
    std::ostringstream os;
    os.precision(12);
    os << "# spectrum report\n";
    os << "grid " << op.grid.L << " " << op.grid.n << "\n";
    os << "weight_eta " << op.weight_eta << "\n";
    os << "bc " << op.bc << "\n";
    os << "eigenvalues " << eigenvalues.size() << "\n";
    for (const cd& ev : eigenvalues) os << ev.real() << " " << ev.imag() << "\n";
    const double res1 = (op.matrix * sd.V1).lpNorm<Eigen::Infinity>();
    const double res2 = (op.matrix * sd.V2).lpNorm<Eigen::Infinity>();
    os << "kernel_residual_V1 " << res1 << "\n";
    os << "kernel_residual_V2 " << res2 << "\n";
    os << "M_psi " << sd.M_psi(0, 0) << " " << sd.M_psi(0, 1) << " " << sd.M_psi(1, 0) << " "
       << sd.M_psi(1, 1) << "\n";
    os << "psi_decay " << sd.psi_decay[0] << " " << sd.psi_decay[1] << "\n";
    return os.str();
}

} // namespace qcgl
