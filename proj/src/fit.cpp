#include "qcgl/fit.hpp"

#include <Eigen/Dense>

#include <stdexcept>

namespace qcgl {

LinearFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
    const std::size_t n = xs.size();
    if (n != ys.size() || n < 2) throw std::domain_error("linear_fit: need >= 2 paired samples");
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += xs[i];
        sy += ys[i];
    }
    const double mx = sx / double(n), my = sy / double(n);
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw std::domain_error("linear_fit: degenerate abscissae");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r_squared = (syy == 0.0) ? 1.0 : (sxy * sxy) / (sxx * syy);
    return f;
}

static std::vector<double> poly_fit_impl(const std::vector<double>& xs, const std::vector<double>& ys,
                                         int degree, bool through_origin) {
    const std::size_t n = xs.size();
    const int k0 = through_origin ? 1 : 0;
    const int ncoef = degree + 1 - k0;
    if (n != ys.size() || int(n) < ncoef) throw std::domain_error("poly_fit: not enough samples");
    Eigen::MatrixXd A(n, ncoef);
    Eigen::VectorXd b(n);
    for (std::size_t i = 0; i < n; ++i) {
        double p = 1.0;
        for (int k = 0; k < k0; ++k) p *= xs[i];
        for (int k = 0; k < ncoef; ++k) {
            A(Eigen::Index(i), k) = p;
            p *= xs[i];
        }
        b(Eigen::Index(i)) = ys[i];
    }
    Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
    std::vector<double> out(std::size_t(degree) + 1, 0.0);
    for (int k = 0; k < ncoef; ++k) out[std::size_t(k + k0)] = c(k);
    return out;
}

std::vector<double> poly_fit(const std::vector<double>& xs, const std::vector<double>& ys, int degree) {
    return poly_fit_impl(xs, ys, degree, false);
}

std::vector<double> poly_fit_through_origin(const std::vector<double>& xs, const std::vector<double>& ys,
                                            int degree) {
    return poly_fit_impl(xs, ys, degree, true);
}

double poly_eval(const std::vector<double>& coeffs, double x) {
    double acc = 0.0;
    for (std::size_t k = coeffs.size(); k-- > 0;) acc = acc * x + coeffs[k];
    return acc;
}

} // namespace qcgl
