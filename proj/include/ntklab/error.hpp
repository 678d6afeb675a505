#pragma once

#include <stdexcept>
#include <string>

namespace ntklab {

/// Raised when a computation fails for numerical reasons (non-converged
/// quadrature, indefinite Gram matrix, divergent training). Precondition
/// violations use std::invalid_argument / std::out_of_range instead.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace ntklab
