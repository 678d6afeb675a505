#include "ntklab/quadrature.hpp"

#include "ntklab/error.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>
#include <utility>

namespace ntklab::quad {

namespace {

// P_n and P_{n-1} at x.
std::pair<double, double> jacobi_pair(int n, double a, double b, double x)
{
    double pm1 = 1.0;
    if (n == 0)
        return {pm1, 0.0};
    double p = (a + 1.0) + 0.5 * (a + b + 2.0) * (x - 1.0);
    for (int k = 2; k <= n; ++k) {
        const double s = 2.0 * k + a + b;
        const double c1 = 2.0 * k * (k + a + b) * (s - 2.0);
        const double c2 = (s - 1.0) * (s * (s - 2.0) * x + a * a - b * b);
        const double c3 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * s;
        const double next = (c2 * p - c3 * pm1) / c1;
        pm1 = p;
        p = next;
    }
    return {p, pm1};
}

double jacobi_derivative(int n, double a, double b, double x, double pn, double pnm1)
{
    const double s = 2.0 * n + a + b;
    return (n * ((a - b) - s * x) * pn + 2.0 * (n + a) * (n + b) * pnm1) / (s * (1.0 - x * x));
}

} // namespace

double jacobi_p(int n, double alpha, double beta, double x)
{
    if (n < 0)
        throw std::invalid_argument("jacobi_p: negative degree");
    return jacobi_pair(n, alpha, beta, x).first;
}

Rule gauss_jacobi(int n, double alpha, double beta)
{
    if (n < 1)
        throw std::invalid_argument("gauss_jacobi: need at least one node");
    if (!(alpha > -1.0 && beta > -1.0))
        throw std::invalid_argument("gauss_jacobi: exponents must exceed -1");

    const double ab = alpha + beta;
    Eigen::VectorXd diag(n);
    Eigen::VectorXd sub(std::max(n - 1, 0));
    for (int k = 0; k < n; ++k) {
        const double s = 2.0 * k + ab;
        diag(k) = (k == 0) ? (beta - alpha) / (ab + 2.0)
                           : (beta * beta - alpha * alpha) / (s * (s + 2.0));
    }
    for (int k = 1; k < n; ++k) {
        const double s = 2.0 * k + ab;
        if (k == 1) {
            // (k + ab) / (s - 1) cancels; it is 0/0 at alpha + beta = -1
            sub(0) = std::sqrt(4.0 * (1.0 + alpha) * (1.0 + beta) / (s * s * (s + 1.0)));
            continue;
        }
        const double num = 4.0 * k * (k + alpha) * (k + beta) * (k + ab);
        const double den = s * s * (s + 1.0) * (s - 1.0);
        sub(k - 1) = std::sqrt(num / den);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw NumericalError("gauss_jacobi: Jacobi-matrix eigensolve failed");

    const double log_const = (ab + 1.0) * std::log(2.0) + std::lgamma(n + alpha + 1.0) +
                             std::lgamma(n + beta + 1.0) - std::lgamma(n + ab + 1.0) -
                             std::lgamma(n + 1.0);
    Rule rule;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double x = es.eigenvalues()(i);
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            const auto [pn, pnm1] = jacobi_pair(n, alpha, beta, x);
            dp = jacobi_derivative(n, alpha, beta, x, pn, pnm1);
            const double dx = pn / dp;
            x -= dx;
            if (std::abs(dx) <= 1e-14 * std::max(1.0, std::abs(x)))
                break;
        }
        const auto [pn, pnm1] = jacobi_pair(n, alpha, beta, x);
        dp = jacobi_derivative(n, alpha, beta, x, pn, pnm1);
        rule.nodes[static_cast<std::size_t>(i)] = x;
        rule.weights[static_cast<std::size_t>(i)] = std::exp(log_const) / ((1.0 - x * x) * dp * dp);
    }
    for (int i = 1; i < n; ++i)
        if (!(rule.nodes[static_cast<std::size_t>(i)] > rule.nodes[static_cast<std::size_t>(i - 1)]))
            throw NumericalError("gauss_jacobi: Newton polish merged two nodes");
    return rule;
}

Rule gauss_legendre(int n, double a, double b)
{
    Rule r = gauss_jacobi(n, 0.0, 0.0);
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    for (std::size_t i = 0; i < r.nodes.size(); ++i) {
        r.nodes[i] = mid + half * r.nodes[i];
        r.weights[i] *= half;
    }
    return r;
}

} // namespace ntklab::quad
