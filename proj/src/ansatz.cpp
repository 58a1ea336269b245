#include "qcgl/ansatz.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qcgl/findiff.hpp"

namespace qcgl {

namespace {

constexpr double inv_sqrt_pi = 0.56418958354775628695;

void require_spreading(const WaveTrain& wt) {
    if (!(wt.d > 0.0))
        throw std::domain_error("ansatz: phase diffusion d <= 0, no spreading plateau at this "
                                "configuration");
}

void require_state(const ModulationState& st) {
    require_spreading(st.wt);
    if (std::abs(st.delta_plus) >= 1.0 || std::abs(st.delta_minus) >= 1.0)
        throw std::domain_error("ansatz: |delta| must stay below 1/sup|B| = 1");
    if (std::abs(st.wt.q) < 1e-12)
        throw std::domain_error("ansatz: q = 0, the Cole-Hopf phase family is undefined");
}

double gauss(double z) { return inv_sqrt_pi * std::exp(-z * z); }

// log(1 + delta B) with two x-derivatives, B = e(x, tau).
struct LogField {
    double v = 0.0;
    double vx = 0.0;
    double vxx = 0.0;
};

LogField log_field(double delta, double B, double Bx, double Bxx) {
    const double den = 1.0 + delta * B;
    if (!(den > 1e-12)) throw std::domain_error("ansatz: 1 + delta B reached zero, log undefined");
    LogField f;
    f.v = std::log1p(delta * B);
    f.vx = delta * Bx / den;
    f.vxx = delta * Bxx / den - f.vx * f.vx;
    return f;
}

void require_same_grid(const Grid& a, const Grid& b, const char* who) {
    if (a.n != b.n || a.L != b.L) throw std::invalid_argument(std::string(who) + ": grid mismatch");
}

} // namespace

double errfn(double z) { return 0.5 * std::erfc(-z); }

double plateau(double x, double t, const WaveTrain& wt) {
    require_spreading(wt);
    if (!(t > 0.0)) throw std::domain_error("plateau: needs t > 0");
    const double w = std::sqrt(4.0 * wt.d * t);
    return errfn((x + wt.cg * t) / w) - errfn((x - wt.cg * t) / w);
}

double plateau_x(double x, double t, const WaveTrain& wt) {
    require_spreading(wt);
    if (!(t > 0.0)) throw std::domain_error("plateau: needs t > 0");
    const double w = std::sqrt(4.0 * wt.d * t);
    return (gauss((x + wt.cg * t) / w) - gauss((x - wt.cg * t) / w)) / w;
}

double plateau_xx(double x, double t, const WaveTrain& wt) {
    require_spreading(wt);
    if (!(t > 0.0)) throw std::domain_error("plateau: needs t > 0");
    const double w = std::sqrt(4.0 * wt.d * t);
    const double zp = (x + wt.cg * t) / w;
    const double zm = (x - wt.cg * t) / w;
    return (-2.0 * zp * gauss(zp) + 2.0 * zm * gauss(zm)) / (w * w);
}

double gaussian_profile(double x, double t, const WaveTrain& wt, double M0) {
    if (!(M0 > 0.0)) throw std::domain_error("gaussian_profile: needs M0 > 0");
    const double s = M0 * (t + 1.0);
    const double up = x - wt.cg * t;
    const double um = x + wt.cg * t;
    return (std::exp(-up * up / s) + std::exp(-um * um / s)) / std::sqrt(1.0 + t);
}

double default_M0(const WaveTrain& wt) {
    require_spreading(wt);
    return 16.0 * std::max(4.0 * wt.d, 8.0 * wt.d / (wt.cg * wt.cg));
}

PhaseAnsatz phase_ansatz(const Grid& g, double t, const ModulationState& st) {
    require_state(st);
    if (t < 0.0) throw std::domain_error("phase_ansatz: needs t >= 0");
    const double tau = t + 1.0;
    const double a = 0.5 * st.wt.d / st.wt.q;
    PhaseAnsatz out;
    out.phi_hat_a.resize(g.n);
    out.p.resize(g.n);
    out.phi_a.resize(g.n);
    for (std::size_t i = 0; i < g.n; ++i) {
        const double B = plateau(g.x(i), tau, st.wt);
        const LogField lp = log_field(st.delta_plus, B, 0.0, 0.0);
        const LogField lm = log_field(st.delta_minus, B, 0.0, 0.0);
        out.phi_hat_a[i] = a * (lp.v + lm.v);
        out.p[i] = a / st.wt.k0 * (lp.v - lm.v);
        out.phi_a[i] = -out.phi_hat_a[i];
    }
    return out;
}

std::vector<double> burgers_residual_slices(const std::vector<double>& prev,
                                            const std::vector<double>& now,
                                            const std::vector<double>& next,
                                            const SourceProfile& s, const WaveTrain& wt,
                                            double dt) {
    const std::size_t n = s.grid.n;
    if (prev.size() != n || now.size() != n || next.size() != n)
        throw std::invalid_argument("burgers_residual_slices: slice/grid size mismatch");
    if (!(dt > 0.0)) throw std::domain_error("burgers_residual_slices: needs dt > 0");
    const double h = s.grid.h();
    const double adv = 2.0 * (s.params.alpha - wt.beta_star);
    const std::vector<double> zx = fd_derivative(now, h, 1, 4);
    const std::vector<double> zxx = fd_derivative(now, h, 2, 4);
    std::vector<double> res(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double zt = (next[i] - prev[i]) / (2.0 * dt);
        res[i] = zt + adv * s.phi_x[i] * zx[i] - wt.d * zxx[i] - wt.q * zx[i] * zx[i];
    }
    return res;
}

BurgersResidual burgers_residual(const ModulationState& st, const SourceProfile& s, double t,
                                 double dt) {
    require_state(st);
    if (!(dt > 0.0) || !(t + 1.0 - dt > 0.0))
        throw std::domain_error("burgers_residual: needs 0 < dt < t + 1");
    const double b = st.wt.d / st.wt.q;
    auto slice = [&](double delta, double tau) {
        std::vector<double> z(s.grid.n);
        for (std::size_t i = 0; i < s.grid.n; ++i)
            z[i] = b * log_field(delta, plateau(s.grid.x(i), tau, st.wt), 0.0, 0.0).v;
        return z;
    };
    BurgersResidual out;
    for (int side = 0; side < 2; ++side) {
        const double delta = side == 0 ? st.delta_plus : st.delta_minus;
        const std::vector<double> zp = slice(delta, t + 1.0 - dt);
        const std::vector<double> zn = slice(delta, t + 1.0);
        const std::vector<double> zx = slice(delta, t + 1.0 + dt);
        (side == 0 ? out.plus : out.minus) = burgers_residual_slices(zp, zn, zx, s, st.wt, dt);
    }
    return out;
}

AmplitudeAnsatz amplitude_ansatz(const SourceProfile& s, const WaveTrain& wt,
                                 const ModulationState& st, const Grid& g, double t) {
    require_state(st);
    require_same_grid(g, s.grid, "amplitude_ansatz");
    if (t < 0.0) throw std::domain_error("amplitude_ansatz: needs t >= 0");
    const std::size_t n = g.n;
    const double h = g.h();
    const double tau = t + 1.0;
    const double a = 0.5 * wt.d / wt.q;
    const double alpha = s.params.alpha;
    const double cdenom = wt.r0 * (1.0 - 2.0 * s.params.gamma1 * wt.r0 * wt.r0);
    const double c = wt.k0 / cdenom;
    const double adv = 2.0 * (alpha - wt.beta_star);

    std::vector<double> phax(n), phaxx(n), px(n), pxx(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = g.x(i);
        const double B = plateau(x, tau, wt);
        const double Bx = plateau_x(x, tau, wt);
        const double Bxx = plateau_xx(x, tau, wt);
        const LogField lp = log_field(st.delta_plus, B, Bx, Bxx);
        const LogField lm = log_field(st.delta_minus, B, Bx, Bxx);
        phax[i] = a * (lp.vx + lm.vx);
        phaxx[i] = a * (lp.vxx + lm.vxx);
        px[i] = a / wt.k0 * (lp.vx - lm.vx);
        pxx[i] = a / wt.k0 * (lp.vxx - lm.vxx);
    }

    AmplitudeAnsatz out;
    out.R_hat0.resize(n);
    out.R_hat1.resize(n);
    out.R_a.resize(n);

    std::vector<double> u(n), v(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.R_hat0[i] = c * (phax[i] + s.phi_x[i] * px[i]);
        u[i] = s.phi_x[i] * phax[i];
        v[i] = s.phi_x[i] * px[i];
    }
    const std::vector<double> ux = fd_derivative(u, h, 1, 4);
    const std::vector<double> vx = fd_derivative(v, h, 1, 4);
    const std::vector<double> R0x = fd_derivative(out.R_hat0, h, 1, 4);

    const double denom = 2.0 * wt.r0 * wt.r0 * (1.0 - 2.0 * s.params.gamma1 * wt.r0 * wt.r0);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = s.r[i];
        const double w = s.phi_x[i];
        const double R0 = out.R_hat0[i];
        // advective replacement of the time derivative of R_hat0
        const double R0t = -adv * c * (ux[i] + w * vx[i]);
        const double rhs = -R0t - 2.0 * (alpha + wt.beta_star) * w * R0x[i] +
                           alpha * r * (phaxx[i] + w * pxx[i]) +
                           2.0 * w * (phax[i] + w * px[i]) * R0 - r * phax[i] * phax[i] -
                           3.0 * r * w * w * px[i] * px[i] - 4.0 * r * w * px[i] * phax[i] -
                           (3.0 * r - 10.0 * s.params.gamma1 * r * r * r) * R0 * R0;
        out.R_hat1[i] = rhs / denom;
        out.R_a[i] = out.R_hat0[i] + out.R_hat1[i];
    }
    return out;
}

NeutralModes neutral_modes(const SourceProfile& s, const WaveTrain& wt, double t) {
    require_spreading(wt);
    if (t < 0.0) throw std::domain_error("neutral_modes: needs t >= 0");
    const std::size_t n = s.grid.n;
    const double tau = t + 1.0;
    const double cdenom = wt.r0 * (1.0 - 2.0 * s.params.gamma1 * wt.r0 * wt.r0);
    const std::vector<double> r_x = fd_derivative(s.r, s.grid.h(), 1, 4);

    NeutralModes out;
    for (auto f : {&out.E_plus, &out.E_minus})
        for (auto& c : *f) c.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = s.grid.x(i);
        const double B = plateau(x, tau, wt);
        const double Bx = plateau_x(x, tau, wt);
        const double shift = B / wt.k0;
        out.E_plus[0][i] = (s.phi_x[i] + wt.k0) / cdenom * Bx - shift * r_x[i];
        out.E_plus[1][i] = s.r[i] * B - shift * s.r[i] * s.phi_x[i];
        out.E_minus[0][i] = (s.phi_x[i] - wt.k0) / cdenom * Bx + shift * r_x[i];
        out.E_minus[1][i] = s.r[i] * B + shift * s.r[i] * s.phi_x[i];
    }
    return out;
}

std::vector<std::complex<double>> modulated_source(const SourceProfile& s,
                                                   const ModulationState& st, double t) {
    const PhaseAnsatz ph = phase_ansatz(s.grid, t, st);
    std::vector<std::complex<double>> A(s.grid.n);
    for (std::size_t i = 0; i < s.grid.n; ++i)
        A[i] = s.r[i] * std::exp(std::complex<double>(
                            0.0, s.phi[i] + ph.phi_a[i] - s.omega0 * t));
    return A;
}

AnsatzFields ansatz_fields(const SourceProfile& s, const ModulationState& st, double t) {
    const PhaseAnsatz ph = phase_ansatz(s.grid, t, st);
    const AmplitudeAnsatz amp = amplitude_ansatz(s, st.wt, st, s.grid, t);
    const NeutralModes nm = neutral_modes(s, st.wt, t);

    AnsatzFields out;
    out.grid = s.grid;
    out.t = t;
    out.p = ph.p;
    out.R_a = amp.R_a;
    out.E_plus = nm.E_plus;
    out.E_minus = nm.E_minus;
    out.phi_a.resize(s.grid.n);
    for (std::size_t i = 0; i < s.grid.n; ++i)
        out.phi_a[i] = s.r[i] == 0.0 ? 0.0 : -ph.phi_hat_a[i] + st.wt.beta_star * amp.R_a[i] / s.r[i];
    // core node: R_a and r both vanish linearly, fill the parity limit
    const std::size_t m = s.grid.mid();
    if (s.r[m] == 0.0 && m > 0 && m + 1 < s.grid.n) {
        const double Rx = (amp.R_a[m + 1] - amp.R_a[m - 1]);
        const double rx = (s.r[m + 1] - s.r[m - 1]);
        out.phi_a[m] = -ph.phi_hat_a[m] + (rx != 0.0 ? st.wt.beta_star * Rx / rx : 0.0);
    }
    return out;
}

SigmaMode sigma_mode(const SourceProfile& s, const WaveTrain& wt, const ModulationState& st,
                     double t, End which, double step) {
    if (!(step > 0.0)) throw std::domain_error("sigma_mode: needs step > 0");
    ModulationState hi = st;
    ModulationState lo = st;
    double& dhi = which == End::plus ? hi.delta_plus : hi.delta_minus;
    double& dlo = which == End::plus ? lo.delta_plus : lo.delta_minus;
    dhi += step;
    dlo -= step;

    const std::size_t n = s.grid.n;
    const std::vector<double> r_x = fd_derivative(s.r, s.grid.h(), 1, 4);
    auto assemble = [&](const ModulationState& m) {
        const PhaseAnsatz ph = phase_ansatz(s.grid, t, m);
        const AmplitudeAnsatz amp = amplitude_ansatz(s, m.wt, m, s.grid, t);
        std::array<std::vector<double>, 3> rows; // U rows and p
        for (auto& r : rows) r.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            rows[0][i] = amp.R_a[i];
            rows[1][i] = m.wt.beta_star * amp.R_a[i] - s.r[i] * ph.phi_hat_a[i];
            rows[2][i] = ph.p[i];
        }
        return rows;
    };
    const auto up = assemble(hi);
    const auto dn = assemble(lo);

    SigmaMode out;
    for (auto& c : out.field) c.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double dU1 = (up[0][i] - dn[0][i]) / (2.0 * step);
        const double dU2 = (up[1][i] - dn[1][i]) / (2.0 * step);
        const double dp = (up[2][i] - dn[2][i]) / (2.0 * step);
        out.field[0][i] = dU1 - dp * r_x[i];
        out.field[1][i] = dU2 - dp * s.r[i] * s.phi_x[i];
    }
    return out;
}

} // namespace qcgl
