#include "qcgl/profile.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "qcgl/findiff.hpp"
#include "qcgl/fit.hpp"
#include "qcgl/wavetrain.hpp"

namespace qcgl {

namespace {

double log_cosh(double z) {
    const double az = std::abs(z);
    return az + std::log1p(std::exp(-2.0 * az)) - std::log(2.0);
}

double amplitude_slope(const QcglParams& p, double k0) {
    const double r0 = amplitude_of_wavenumber(p, k0);
    return -k0 / (r0 * (1.0 - 2.0 * p.gamma1 * r0 * r0));
}

} // namespace

HoleConstants hole_constants(double alpha, double beta) {
    HoleConstants hc;
    if (alpha == beta) {
        hc.delta = 0.0; // degenerate limit: phase-free kink
    } else {
        const double b = 3.0 * (1.0 + alpha * beta) / (beta - alpha);
        // Roots of delta^2 + b delta - 2 = 0 have product -2; evaluate the
        // large one first to avoid cancellation.
        const double big = -0.5 * (b + std::copysign(std::sqrt(b * b + 8.0), b));
        const double small = -2.0 / big;
        if (small * (alpha - beta) < 0.0)
            hc.delta = small;
        else if (big * (alpha - beta) < 0.0)
            hc.delta = big;
        else
            throw std::domain_error("hole_constants: no admissible root of the delta quadratic");
    }
    double kappa2;
    if (alpha == beta) {
        kappa2 = 0.5;
    } else {
        kappa2 = (alpha - beta) /
                 ((alpha - beta) * hc.delta * hc.delta - 3.0 * hc.delta * (1.0 + alpha * alpha));
    }
    if (!(kappa2 > 0.0)) throw std::domain_error("hole_constants: kappa^2 <= 0, hole does not exist");
    hc.kappa = std::sqrt(kappa2);
    hc.k0 = -hc.delta * hc.kappa;
    if (!(std::abs(hc.k0) < 1.0)) throw std::domain_error("hole_constants: |k0| >= 1");
    hc.r0 = std::sqrt(1.0 - hc.k0 * hc.k0);
    hc.omega0 = beta + (alpha - beta) * hc.k0 * hc.k0;
    return hc;
}

SourceProfile nozaki_bekki(double alpha, double beta, const Grid& grid) {
    const HoleConstants hc = hole_constants(alpha, beta);
    SourceProfile s;
    s.params = QcglParams{alpha, beta, 0.0, 0.0};
    s.grid = grid;
    s.k0 = hc.k0;
    s.omega0 = hc.omega0;
    s.eta0 = 2.0 * hc.kappa;
    s.r.resize(grid.n);
    s.phi.resize(grid.n);
    s.phi_x.resize(grid.n);
    for (std::size_t i = 0; i < grid.n; ++i) {
        const double z = hc.kappa * grid.x(i);
        s.r[i] = hc.r0 * std::tanh(z);
        s.phi[i] = -hc.delta * log_cosh(z);
        s.phi_x[i] = -hc.delta * hc.kappa * std::tanh(z);
    }
    return s;
}

std::vector<std::array<double, 2>> ode_residual(const SourceProfile& s, const QcglParams& p, int order) {
    const std::size_t n = s.grid.n;
    if (s.r.size() != n || s.phi_x.size() != n)
        throw std::domain_error("ode_residual: field sizes do not match the grid");
    const double h = s.grid.h();
    const auto rx = fd_derivative(s.r, h, 1, order);
    const auto rxx = fd_derivative(s.r, h, 2, order);
    const auto wx = fd_derivative(s.phi_x, h, 1, order);
    std::vector<std::array<double, 2>> res(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double rv = s.r[i], wv = s.phi_x[i];
        const double r3 = rv * rv * rv, r5 = r3 * rv * rv;
        res[i][0] = rxx[i] + rv - rv * wv * wv - 2.0 * p.alpha * rx[i] * wv - p.alpha * rv * wx[i] -
                    r3 + p.gamma1 * r5;
        res[i][1] = rv * wx[i] + 2.0 * rx[i] * wv + p.alpha * rxx[i] + s.omega0 * rv -
                    p.alpha * rv * wv * wv - p.beta * r3 + p.gamma2 * r5;
    }
    return res;
}

double max_ode_residual(const SourceProfile& s, const QcglParams& p, int order) {
    const auto res = ode_residual(s, p, order);
    const std::size_t band = std::size_t((fd_stencil_points(2, order) - 1) / 2);
    double m = 0.0;
    for (std::size_t i = band; i + band < res.size(); ++i)
        m = std::max(m, std::max(std::abs(res[i][0]), std::abs(res[i][1])));
    return m;
}

namespace {

// Weights of (value, d/dx, d2/dx2) functionals at one collocation point,
// acting on nodes start..start+val.size()-1.
struct Colloc {
    int start = 0;
    std::vector<double> val, d1, d2;
};

Colloc node_colloc(int i, int n, int order, double h) {
    const int npts = fd_stencil_points(2, order);
    const int half = (npts - 1) / 2;
    int start = std::max(0, std::min(i - half, n - npts));
    Colloc c;
    c.start = start;
    std::vector<double> xs;
    xs.resize(std::size_t(npts));
    for (int j = 0; j < npts; ++j) xs[std::size_t(j)] = h * double(start + j - i);
    const auto w = fd_weights(0.0, xs, 2);
    c.val.assign(std::size_t(npts), 0.0);
    c.val[std::size_t(i - start)] = 1.0;
    c.d1 = w[1];
    c.d2 = w[2];
    return c;
}

// Collocation at the midpoint of cell [x_j, x_{j+1}], using order+2 nodes so
// the truncation order matches the node stencils.
Colloc midpoint_colloc(int j, int n, int order, double h) {
    const int npts = order + 2;
    int start = std::max(0, std::min(j - (npts / 2 - 1), n - npts));
    Colloc c;
    c.start = start;
    std::vector<double> xs;
    xs.resize(std::size_t(npts));
    for (int m = 0; m < npts; ++m) xs[std::size_t(m)] = h * (double(start + m - j) - 0.5);
    const auto w = fd_weights(0.0, xs, 2);
    c.val = w[0];
    c.d1 = w[1];
    c.d2 = w[2];
    return c;
}

struct CollocValues {
    double rv, rx, rxx, wv, wx;
};

CollocValues eval_colloc(const Colloc& c, const std::vector<double>& r, const std::vector<double>& w) {
    CollocValues v{0, 0, 0, 0, 0};
    for (std::size_t j = 0; j < c.val.size(); ++j) {
        const std::size_t k = std::size_t(c.start) + j;
        v.rv += c.val[j] * r[k];
        v.rx += c.d1[j] * r[k];
        v.rxx += c.d2[j] * r[k];
        v.wv += c.val[j] * w[k];
        v.wx += c.d1[j] * w[k];
    }
    return v;
}

// The amplitude equation is collocated at interior nodes; the phase equation,
// first order in phi_x, lives on the staggered midpoint grid, so the core
// node, where it degenerates with r(0) = 0, is never a collocation point.
//
// Boundary rows need care. The linearization about the odd profile splits
// into odd and even sectors, and a plain Dirichlet set r(+-L) = +-r0,
// phi_x(+-L) = +-k0 plus the phase row r(0) = 0 leaves the odd sector one
// condition short (r(0) = 0 is automatic there): the Jacobian then carries an
// exact null vector that trades k0 against decaying boundary layers. We keep
// the phi_x rows as stated, impose the amplitude condition as the odd
// difference r(L) - r(-L) = 2 r0(k0), and close the odd sector with the
// asymptotic-regularity row r''(L) - r''(-L) = 0, which holds on the true
// profile up to the same exponentially small truncation as the Dirichlet
// data. The even part of r(+-L) is then an output, correct to
// discretization order.
struct NewtonSystem {
    std::vector<Colloc> eq1_pts; // node collocations for the amplitude equation
    std::vector<Colloc> eq2_pts; // midpoint collocations for the phase equation
    Colloc d2_left, d2_right;    // one-sided second-derivative rows at the ends
    int n = 0;
    int mid = 0;
};

NewtonSystem build_system(const Grid& g, int order) {
    NewtonSystem sys;
    sys.n = int(g.n);
    sys.mid = int(g.mid());
    const double h = g.h();
    for (int i = 1; i + 1 < sys.n; ++i) sys.eq1_pts.push_back(node_colloc(i, sys.n, order, h));
    for (int j = 0; j + 1 < sys.n; ++j) sys.eq2_pts.push_back(midpoint_colloc(j, sys.n, order, h));
    sys.d2_left = node_colloc(0, sys.n, order, h);
    sys.d2_right = node_colloc(sys.n - 1, sys.n, order, h);
    return sys;
}

// Unknown layout: [r_0..r_{n-1}, w_0..w_{n-1}, k0, omega0].
Eigen::VectorXd assemble_residual(const NewtonSystem& sys, const QcglParams& p,
                                  const Eigen::VectorXd& X) {
    const int n = sys.n;
    std::vector<double> r(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        r[std::size_t(i)] = X(i);
        w[std::size_t(i)] = X(n + i);
    }
    const double k0 = X(2 * n);
    const double om = X(2 * n + 1);
    const double r0k = amplitude_of_wavenumber(p, k0);

    Eigen::VectorXd F(2 * n + 2);
    int row = 0;
    for (const auto& c : sys.eq1_pts) {
        const auto v = eval_colloc(c, r, w);
        const double r3 = v.rv * v.rv * v.rv, r5 = r3 * v.rv * v.rv;
        F(row++) = v.rxx + v.rv - v.rv * v.wv * v.wv - 2.0 * p.alpha * v.rx * v.wv -
                   p.alpha * v.rv * v.wx - r3 + p.gamma1 * r5;
    }
    for (const auto& c : sys.eq2_pts) {
        const auto v = eval_colloc(c, r, w);
        const double r3 = v.rv * v.rv * v.rv, r5 = r3 * v.rv * v.rv;
        F(row++) = v.rv * v.wx + 2.0 * v.rx * v.wv + p.alpha * v.rxx + om * v.rv -
                   p.alpha * v.rv * v.wv * v.wv - p.beta * r3 + p.gamma2 * r5;
    }
    F(row++) = w[0] + k0;
    F(row++) = w[std::size_t(n - 1)] - k0;
    F(row++) = r[std::size_t(n - 1)] - r[0] - 2.0 * r0k;
    {
        double d2l = 0.0, d2r = 0.0;
        for (std::size_t j = 0; j < sys.d2_left.val.size(); ++j)
            d2l += sys.d2_left.d2[j] * r[std::size_t(sys.d2_left.start) + j];
        for (std::size_t j = 0; j < sys.d2_right.val.size(); ++j)
            d2r += sys.d2_right.d2[j] * r[std::size_t(sys.d2_right.start) + j];
        F(row++) = d2r - d2l;
    }
    F(row++) = r[std::size_t(sys.mid)];
    return F;
}

Eigen::SparseMatrix<double> assemble_jacobian(const NewtonSystem& sys, const QcglParams& p,
                                              const Eigen::VectorXd& X) {
    const int n = sys.n;
    std::vector<double> r(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        r[std::size_t(i)] = X(i);
        w[std::size_t(i)] = X(n + i);
    }
    const double k0 = X(2 * n);
    const double om = X(2 * n + 1);
    const int ik = 2 * n, iom = 2 * n + 1;

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(std::size_t(n) * 40);
    int row = 0;
    for (const auto& c : sys.eq1_pts) {
        const auto v = eval_colloc(c, r, w);
        const double cval_r = 1.0 - v.wv * v.wv - p.alpha * v.wx - 3.0 * v.rv * v.rv +
                              5.0 * p.gamma1 * v.rv * v.rv * v.rv * v.rv;
        const double cd1_r = -2.0 * p.alpha * v.wv;
        const double cval_w = -2.0 * v.rv * v.wv - 2.0 * p.alpha * v.rx;
        const double cd1_w = -p.alpha * v.rv;
        for (std::size_t j = 0; j < c.val.size(); ++j) {
            const int k = c.start + int(j);
            trip.emplace_back(row, k, cval_r * c.val[j] + cd1_r * c.d1[j] + c.d2[j]);
            trip.emplace_back(row, n + k, cval_w * c.val[j] + cd1_w * c.d1[j]);
        }
        ++row;
    }
    for (const auto& c : sys.eq2_pts) {
        const auto v = eval_colloc(c, r, w);
        const double cval_r = v.wx + om - p.alpha * v.wv * v.wv - 3.0 * p.beta * v.rv * v.rv +
                              5.0 * p.gamma2 * v.rv * v.rv * v.rv * v.rv;
        const double cd1_r = 2.0 * v.wv;
        const double cd2_r = p.alpha;
        const double cval_w = 2.0 * v.rx - 2.0 * p.alpha * v.rv * v.wv;
        const double cd1_w = v.rv;
        for (std::size_t j = 0; j < c.val.size(); ++j) {
            const int k = c.start + int(j);
            trip.emplace_back(row, k, cval_r * c.val[j] + cd1_r * c.d1[j] + cd2_r * c.d2[j]);
            trip.emplace_back(row, n + k, cval_w * c.val[j] + cd1_w * c.d1[j]);
        }
        trip.emplace_back(row, iom, v.rv);
        ++row;
    }
    const double dr0 = amplitude_slope(p, k0);
    trip.emplace_back(row, n + 0, 1.0);
    trip.emplace_back(row, ik, 1.0);
    ++row;
    trip.emplace_back(row, n + (n - 1), 1.0);
    trip.emplace_back(row, ik, -1.0);
    ++row;
    trip.emplace_back(row, n - 1, 1.0);
    trip.emplace_back(row, 0, -1.0);
    trip.emplace_back(row, ik, -2.0 * dr0);
    ++row;
    for (std::size_t j = 0; j < sys.d2_right.val.size(); ++j)
        trip.emplace_back(row, sys.d2_right.start + int(j), sys.d2_right.d2[j]);
    for (std::size_t j = 0; j < sys.d2_left.val.size(); ++j)
        trip.emplace_back(row, sys.d2_left.start + int(j), -sys.d2_left.d2[j]);
    ++row;
    trip.emplace_back(row, sys.mid, 1.0);
    ++row;

    Eigen::SparseMatrix<double> J(2 * n + 2, 2 * n + 2);
    J.setFromTriplets(trip.begin(), trip.end());
    return J;
}

// phi with phi(0) = 0 by 4th-order cumulative integration of phi_x outward
// from the core node.
std::vector<double> integrate_phase(const std::vector<double>& f, double h, std::size_t mid) {
    const int n = int(f.size());
    auto cell = [&](int j) { // integral over [x_j, x_{j+1}]
        if (j == 0)
            return h * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]) / 24.0;
        if (j == n - 2)
            return h * (9.0 * f[std::size_t(n - 1)] + 19.0 * f[std::size_t(n - 2)] -
                        5.0 * f[std::size_t(n - 3)] + f[std::size_t(n - 4)]) / 24.0;
        return h * (-f[std::size_t(j - 1)] + 13.0 * f[std::size_t(j)] + 13.0 * f[std::size_t(j + 1)] -
                    f[std::size_t(j + 2)]) / 24.0;
    };
    std::vector<double> phi(std::size_t(n), 0.0);
    for (int i = int(mid); i + 1 < n; ++i) phi[std::size_t(i + 1)] = phi[std::size_t(i)] + cell(i);
    for (int i = int(mid); i > 0; --i) phi[std::size_t(i - 1)] = phi[std::size_t(i)] - cell(i - 1);
    return phi;
}

} // namespace

SourceProfile solve_source(const QcglParams& p, const SourceProfile& guess, SolveOptions opts,
                           SolveReport* report) {
    const Grid& g = guess.grid;
    const int n = int(g.n);
    if (guess.r.size() != g.n || guess.phi_x.size() != g.n)
        throw std::domain_error("solve_source: guess fields do not match the grid");
    {
        double rmax = 0.0;
        for (double v : guess.r) rmax = std::max(rmax, std::abs(v));
        if (!(std::abs(guess.r[g.mid()]) <= 0.05 * rmax))
            throw std::domain_error("solve_source: guess violates the phase condition r(0) = 0");
    }

    auto newton = [&](const QcglParams& pp, const SourceProfile& start, SolveReport* rep,
                      int max_iter) {
        const NewtonSystem sys = build_system(g, opts.order);
        Eigen::VectorXd X(2 * n + 2);
        for (int i = 0; i < n; ++i) {
            X(i) = start.r[std::size_t(i)];
            X(n + i) = start.phi_x[std::size_t(i)];
        }
        X(2 * n) = start.k0;
        X(2 * n + 1) = start.omega0;

        std::vector<double> history;
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        double res = assemble_residual(sys, pp, X).lpNorm<Eigen::Infinity>();
        history.push_back(res);
        int iter = 0;
        for (; iter < max_iter && res >= opts.tol; ++iter) {
            const Eigen::VectorXd F = assemble_residual(sys, pp, X);
            const Eigen::SparseMatrix<double> J = assemble_jacobian(sys, pp, X);
            lu.compute(J);
            if (lu.info() != Eigen::Success)
                throw std::runtime_error("solve_source: singular collocation Jacobian");
            const Eigen::VectorXd dX = lu.solve(-F);
            double lambda = 1.0;
            double new_res = std::numeric_limits<double>::infinity();
            Eigen::VectorXd Xn;
            for (int ls = 0; ls < 8; ++ls) {
                Xn = X + lambda * dX;
                try {
                    new_res = assemble_residual(sys, pp, Xn).lpNorm<Eigen::Infinity>();
                } catch (const std::domain_error&) {
                    new_res = std::numeric_limits<double>::infinity(); // trial left the wave-train branch
                }
                if (new_res < res || new_res < opts.tol) break;
                lambda *= 0.5;
            }
            if (!(new_res < res) && new_res >= opts.tol) {
                std::ostringstream os;
                os << "solve_source: Newton stalled; residual history:";
                for (double v : history) os << " " << v;
                throw std::runtime_error(os.str());
            }
            X = Xn;
            res = new_res;
            history.push_back(res);
        }
        if (res >= opts.tol) {
            std::ostringstream os;
            os << "solve_source: no convergence in " << max_iter
               << " Newton steps; residual history:";
            for (double v : history) os << " " << v;
            throw std::runtime_error(os.str());
        }

        SourceProfile out;
        out.params = pp;
        out.grid = g;
        out.r.resize(g.n);
        out.phi_x.resize(g.n);
        for (int i = 0; i < n; ++i) {
            out.r[std::size_t(i)] = X(i);
            out.phi_x[std::size_t(i)] = X(n + i);
        }
        out.k0 = X(2 * n);
        out.omega0 = X(2 * n + 1);
        out.phi = integrate_phase(out.phi_x, g.h(), g.mid());

        if (rep) {
            rep->newton_iters = iter;
            rep->final_residual = res;
            rep->residual_history = history;
            // crude condition estimate: ||J||_inf * max ||J^-1 b|| / ||b||
            const Eigen::SparseMatrix<double> J = assemble_jacobian(sys, pp, X);
            lu.compute(J);
            double jnorm = 0.0;
            for (int k = 0; k < J.outerSize(); ++k)
                for (Eigen::SparseMatrix<double>::InnerIterator it(J, k); it; ++it)
                    jnorm = std::max(jnorm, std::abs(it.value()));
            std::mt19937_64 rng(12345);
            std::normal_distribution<double> nd;
            double inv = 0.0;
            for (int trial = 0; trial < 4; ++trial) {
                Eigen::VectorXd b(2 * n + 2);
                for (int i = 0; i < 2 * n + 2; ++i) b(i) = nd(rng);
                inv = std::max(inv, lu.solve(b).lpNorm<Eigen::Infinity>() / b.lpNorm<Eigen::Infinity>());
            }
            rep->condition_estimate = jnorm * inv;
        }
        return out;
    };

    SolveReport local;
    SolveReport* rep = report ? report : &local;
    try {
        SourceProfile out = newton(p, guess, rep, opts.max_iter);
        rep->continuation_steps = 0;
        try {
            out.eta0 = profile_diagnostics(out).eta0;
        } catch (const std::exception&) {
            out.eta0 = guess.eta0;
        }
        return out;
    } catch (const std::runtime_error&) {
        if (p.is_cubic() || opts.max_continuation < 1) throw;
    }

    // Quintic ramp from the cubic problem. A starved iteration budget on the
    // direct attempt must not starve the fallback, so each ramp step gets at
    // least a dozen iterations.
    const int steps = std::min(opts.max_continuation, 10);
    const int ramp_iters = std::max(opts.max_iter, 12);
    SourceProfile cur = guess;
    SolveReport step_rep;
    for (int s = 1; s <= steps; ++s) {
        QcglParams ps = p;
        const double frac = double(s) / double(steps);
        ps.gamma1 = p.gamma1 * frac;
        ps.gamma2 = p.gamma2 * frac;
        cur = newton(ps, cur, &step_rep, ramp_iters);
    }
    *rep = step_rep;
    rep->continuation_steps = steps;
    try {
        cur.eta0 = profile_diagnostics(cur).eta0;
    } catch (const std::exception&) {
        cur.eta0 = guess.eta0;
    }
    return cur;
}

ProfileDiagnostics profile_diagnostics(const SourceProfile& s) {
    const Grid& g = s.grid;
    const double h = g.h();
    const std::size_t mid = g.mid();
    ProfileDiagnostics d;
    {
        const Stencil s1 = fd_stencil(1, 4, 2, h);
        const Stencil s2 = fd_stencil(2, 4, 2, h);
        double rx = 0, rxx = 0;
        for (int j = 0; j < s1.npoints; ++j) {
            rx += s1.w[std::size_t(j)] * s.r[mid + std::size_t(j) - 2];
            rxx += s2.w[std::size_t(j)] * s.r[mid + std::size_t(j) - 2];
        }
        d.r_x0 = rx;
        d.r_xx0 = rxx;
        d.phi_x0 = s.phi_x[mid];
    }

    const double r0 = amplitude_of_wavenumber(s.params, s.k0);
    double slowest = std::numeric_limits<double>::infinity();
    bool any = false;
    double min_r2 = 1.0;
    // Solved profiles carry an even-parity truncation component (the grid is
    // finite) on top of the odd fields; project it out before fitting, or it
    // flattens the log-linear tail.
    auto odd_part = [&](const std::vector<double>& f) {
        std::vector<double> o(g.n);
        for (std::size_t i = 0; i < g.n; ++i) o[i] = 0.5 * (f[i] - f[g.n - 1 - i]);
        return o;
    };
    auto fit_tail = [&](const std::vector<double>& f, double target, bool right, double scale,
                        double* rate_out) {
        // usable window: deviation clearly above the solver tolerance floor,
        // clearly below the nonlinear core level
        std::vector<double> xs, ys;
        for (std::size_t i = 0; i < g.n; ++i) {
            const double x = g.x(i);
            if ((right && x <= 0.0) || (!right && x >= 0.0)) continue;
            const double dev = std::abs(f[i] - target);
            if (dev < 1e-8 * scale || dev > 0.2 * scale) continue;
            xs.push_back(x);
            ys.push_back(std::log(dev));
        }
        if (xs.size() < 8) {
            *rate_out = 0.0;
            return; // tail entirely resolved or entirely flat; not fittable
        }
        // outer half of the usable window
        const double split = 0.5 * (xs.front() + xs.back());
        std::vector<double> fx, fy;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if ((right && xs[i] >= split) || (!right && xs[i] <= split)) {
                fx.push_back(xs[i]);
                fy.push_back(ys[i]);
            }
        }
        if (fx.size() < 8) {
            *rate_out = 0.0;
            return;
        }
        const LinearFit lf = linear_fit(fx, fy);
        min_r2 = std::min(min_r2, lf.r_squared);
        if (lf.r_squared < 0.99)
            throw std::runtime_error("profile_diagnostics: tail fit R^2 < 0.99; enlarge the half-width");
        const double rate = right ? -lf.slope : lf.slope;
        *rate_out = rate;
        if (rate > 0.0) {
            slowest = std::min(slowest, rate);
            any = true;
        }
    };
    const std::vector<double> r_odd = odd_part(s.r);
    const std::vector<double> w_odd = odd_part(s.phi_x);
    fit_tail(r_odd, -r0, false, r0, &d.eta0_r[0]);
    fit_tail(r_odd, +r0, true, r0, &d.eta0_r[1]);
    const double phiscale = std::max(std::abs(s.k0), 0.1);
    fit_tail(w_odd, -s.k0, false, phiscale, &d.eta0_phi_x[0]);
    fit_tail(w_odd, +s.k0, true, phiscale, &d.eta0_phi_x[1]);
    if (!any)
        throw std::runtime_error("profile_diagnostics: no usable tail window; enlarge the half-width");
    d.eta0 = slowest;
    d.min_r_squared = min_r2;
    return d;
}

double default_half_width(double eta0) {
    if (!(eta0 > 0.0)) throw std::domain_error("default_half_width: eta0 must be positive");
    return std::clamp(50.0 / eta0, 40.0, 400.0);
}

namespace {

std::string fmt_full(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

void save_profile(const SourceProfile& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_profile: cannot open " + path);
    out << "# qcgl source profile\n";
    out << "# alpha " << fmt_full(s.params.alpha) << "\n";
    out << "# beta " << fmt_full(s.params.beta) << "\n";
    out << "# gamma1 " << fmt_full(s.params.gamma1) << "\n";
    out << "# gamma2 " << fmt_full(s.params.gamma2) << "\n";
    out << "# k0 " << fmt_full(s.k0) << "\n";
    out << "# omega0 " << fmt_full(s.omega0) << "\n";
    out << "# eta0 " << fmt_full(s.eta0) << "\n";
    out << "# L " << fmt_full(s.grid.L) << "\n";
    out << "# n " << s.grid.n << "\n";
    out << "# columns: x r phi phi_x\n";
    for (std::size_t i = 0; i < s.grid.n; ++i)
        out << fmt_full(s.grid.x(i)) << " " << fmt_full(s.r[i]) << " " << fmt_full(s.phi[i]) << " "
            << fmt_full(s.phi_x[i]) << "\n";
    if (!out) throw std::runtime_error("save_profile: write failed for " + path);
}

SourceProfile load_profile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingInput("load_profile: cannot open " + path);
    std::map<std::string, std::string> header;
    std::vector<std::array<double, 4>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ls(line.substr(1));
            std::string key;
            ls >> key;
            std::string rest;
            std::getline(ls, rest);
            if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
            header[key] = rest;
            continue;
        }
        std::istringstream ls(line);
        std::array<double, 4> row{};
        if (!(ls >> row[0] >> row[1] >> row[2] >> row[3]))
            throw MissingInput("load_profile: malformed row in " + path);
        rows.push_back(row);
    }
    auto need = [&](const std::string& key) {
        auto it = header.find(key);
        if (it == header.end()) throw MissingInput("load_profile: missing header " + key + " in " + path);
        return std::stod(it->second);
    };
    SourceProfile s;
    s.params.alpha = need("alpha");
    s.params.beta = need("beta");
    s.params.gamma1 = need("gamma1");
    s.params.gamma2 = need("gamma2");
    s.k0 = need("k0");
    s.omega0 = need("omega0");
    s.eta0 = need("eta0");
    const double L = need("L");
    const std::size_t n = std::size_t(need("n"));
    if (rows.size() != n) throw MissingInput("load_profile: row count does not match header n");
    s.grid = Grid(L, n);
    s.r.resize(n);
    s.phi.resize(n);
    s.phi_x.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(rows[i][0] - s.grid.x(i)) > 1e-9 * std::max(1.0, L))
            throw MissingInput("load_profile: non-uniform or shifted grid in " + path);
        s.r[i] = rows[i][1];
        s.phi[i] = rows[i][2];
        s.phi_x[i] = rows[i][3];
    }
    return s;
}

} // namespace qcgl
