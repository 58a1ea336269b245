#pragma once

#include <cstddef>
#include <vector>

namespace qcgl {

// Finite-difference weights on arbitrary nodes (Fornberg's recursion).
// Returns w with w[k][j] such that f^(k)(x0) ~ sum_j w[k][j] f(xs[j])
// for k = 0..max_deriv. Exact for polynomials of degree < xs.size().
std::vector<std::vector<double>> fd_weights(double x0, const std::vector<double>& xs, int max_deriv);

// Stencil for the deriv-th derivative at uniform spacing h, accurate to the
// given order. offset is the index of the evaluation node within the stencil;
// a centered stencil has offset == (npoints-1)/2.
struct Stencil {
    int npoints = 0;
    int offset = 0;
    std::vector<double> w;
};

// Number of points a stencil of the given derivative and order needs.
int fd_stencil_points(int deriv, int order);

Stencil fd_stencil(int deriv, int order, int offset, double h);

// deriv-th derivative of a uniformly sampled field: centered stencils of the
// requested order in the interior, shifted stencils of the same order at the
// edges.
std::vector<double> fd_derivative(const std::vector<double>& f, double h, int deriv, int order);

} // namespace qcgl
