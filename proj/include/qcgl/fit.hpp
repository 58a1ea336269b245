#pragma once

#include <cstddef>
#include <vector>

namespace qcgl {

// Ordinary least-squares line y = slope*x + intercept with coefficient of
// determination. Inputs must have equal size >= 2.
struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

LinearFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys);

// Least-squares polynomial fit; returns coefficients c with
// y ~ sum_k c[k] x^k, k = 0..degree.
std::vector<double> poly_fit(const std::vector<double>& xs, const std::vector<double>& ys, int degree);

// Same, with the constant term pinned to zero (y ~ c[1] x + ... ; c[0] == 0).
std::vector<double> poly_fit_through_origin(const std::vector<double>& xs, const std::vector<double>& ys,
                                            int degree);

double poly_eval(const std::vector<double>& coeffs, double x);

} // namespace qcgl
