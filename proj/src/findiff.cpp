#include "qcgl/findiff.hpp"

#include <algorithm>
#include <stdexcept>

namespace qcgl {

std::vector<std::vector<double>> fd_weights(double x0, const std::vector<double>& xs, int max_deriv) {
    const int n = int(xs.size());
    if (n == 0) throw std::domain_error("fd_weights: empty node set");
    std::vector<std::vector<double>> c(std::size_t(max_deriv) + 1, std::vector<double>(std::size_t(n), 0.0));
    double c1 = 1.0;
    double c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for (int i = 1; i < n; ++i) {
        const int mn = std::min(i, max_deriv);
        double c2 = 1.0;
        double c5 = c4;
        c4 = xs[std::size_t(i)] - x0;
        for (int j = 0; j < i; ++j) {
            const double c3 = xs[std::size_t(i)] - xs[std::size_t(j)];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k)
                    c[std::size_t(k)][std::size_t(i)] =
                        c1 * (k * c[std::size_t(k) - 1][std::size_t(i) - 1] - c5 * c[std::size_t(k)][std::size_t(i) - 1]) / c2;
                c[0][std::size_t(i)] = -c1 * c5 * c[0][std::size_t(i) - 1] / c2;
            }
            for (int k = mn; k >= 1; --k)
                c[std::size_t(k)][std::size_t(j)] =
                    (c4 * c[std::size_t(k)][std::size_t(j)] - k * c[std::size_t(k) - 1][std::size_t(j)]) / c3;
            c[0][std::size_t(j)] = c4 * c[0][std::size_t(j)] / c3;
        }
        c1 = c2;
    }
    return c;
}

int fd_stencil_points(int deriv, int order) {
    int npts = deriv + order - 1;
    if (npts % 2 == 0) ++npts; // symmetric interior stencils need an odd count
    return npts;
}

Stencil fd_stencil(int deriv, int order, int offset, double h) {
    if (deriv < 1 || order < 1) throw std::domain_error("fd_stencil: bad derivative/order");
    const int npts = fd_stencil_points(deriv, order);
    if (offset < 0 || offset >= npts) throw std::domain_error("fd_stencil: offset outside stencil");
    std::vector<double> xs;
    xs.resize(std::size_t(npts));
    for (int j = 0; j < npts; ++j) xs[std::size_t(j)] = h * double(j - offset);
    Stencil s;
    s.npoints = npts;
    s.offset = offset;
    s.w = fd_weights(0.0, xs, deriv)[std::size_t(deriv)];
    return s;
}

std::vector<double> fd_derivative(const std::vector<double>& f, double h, int deriv, int order) {
    const int n = int(f.size());
    const int npts = fd_stencil_points(deriv, order);
    if (n < npts) throw std::domain_error("fd_derivative: field shorter than stencil");
    const int half = (npts - 1) / 2;

    std::vector<Stencil> stencils;
    stencils.resize(std::size_t(npts));
    for (int off = 0; off < npts; ++off) stencils[std::size_t(off)] = fd_stencil(deriv, order, off, h);

    std::vector<double> out(std::size_t(n), 0.0);
    for (int i = 0; i < n; ++i) {
        int start = i - half;
        start = std::max(0, std::min(start, n - npts));
        const Stencil& s = stencils[std::size_t(i - start)];
        double acc = 0.0;
        for (int j = 0; j < npts; ++j) acc += s.w[std::size_t(j)] * f[std::size_t(start + j)];
        out[std::size_t(i)] = acc;
    }
    return out;
}

} // namespace qcgl
