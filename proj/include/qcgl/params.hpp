#pragma once

#include <stdexcept>
#include <string>

namespace qcgl {

// Coefficients of the cubic-quintic complex Ginzburg-Landau equation
//   A_t = (1 + i alpha) A_xx + A - (1 + i beta) A |A|^2 + (gamma1 + i gamma2) A |A|^4.
// The linear gain is rescaled to 1 and the cubic loss to 1, so the quintic
// coefficients are the only free magnitudes besides the two dispersions.
struct QcglParams {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma1 = 0.0;
    double gamma2 = 0.0;

    bool is_cubic() const { return gamma1 == 0.0 && gamma2 == 0.0; }
};

// A required input file or artifact is absent or malformed.
struct MissingInput : std::runtime_error {
    explicit MissingInput(const std::string& what_arg) : std::runtime_error(what_arg) {}
};

} // namespace qcgl
