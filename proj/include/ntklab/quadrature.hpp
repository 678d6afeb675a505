#pragma once

#include <vector>

namespace ntklab::quad {

/// Nodes (ascending) and weights of an interpolatory rule.
struct Rule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Jacobi polynomial P_n^{(alpha, beta)}(x) by the three-term recurrence.
double jacobi_p(int n, double alpha, double beta, double x);

/// n-point Gauss–Jacobi rule on [-1, 1] for the weight (1-x)^alpha (1+x)^beta,
/// alpha, beta > -1. Nodes are seeded from the eigenvalues of the Jacobi
/// matrix and polished by Newton iteration on the recurrence to 1e-14.
Rule gauss_jacobi(int n, double alpha, double beta);

/// n-point Gauss–Legendre rule mapped to [a, b].
Rule gauss_legendre(int n, double a, double b);

} // namespace ntklab::quad
