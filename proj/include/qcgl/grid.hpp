#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace qcgl {

// Uniform symmetric grid on [-L, L] with an odd point count so x = 0 is a node.
struct Grid {
    double L = 0.0;
    std::size_t n = 0;

    Grid() = default;
    Grid(double half_width, std::size_t points) : L(half_width), n(points) {
        if (!(L > 0.0)) throw std::domain_error("grid: half-width must be positive");
        if (n < 9) throw std::domain_error("grid: needs at least 9 points");
        if (n % 2 == 0) throw std::domain_error("grid: point count must be odd so x = 0 is a node");
    }

    double h() const { return 2.0 * L / double(n - 1); }
    double x(std::size_t i) const { return -L + h() * double(i); }
    std::size_t mid() const { return (n - 1) / 2; }

    std::vector<double> nodes() const {
        std::vector<double> xs(n);
        for (std::size_t i = 0; i < n; ++i) xs[i] = x(i);
        return xs;
    }
};

} // namespace qcgl
