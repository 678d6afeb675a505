#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

/// Harmonic analysis of dot-product kernels on the unit sphere S^d in
/// R^{d+1}. All Mercer modes are taken with respect to the normalized
/// uniform measure, so k(x, x) = sum_n mu_n a_n.
namespace ntklab::sphere {

/// Largest degree for which the upward Gegenbauer recurrence is trusted.
inline constexpr int kMaxGegenbauerDegree = 200;

struct SphereGeometry {
    int d = 2;
    double lambda = 0.5; ///< (d - 1) / 2
    double omega_d = 0.0; ///< surface area of S^d

    /// Throws std::invalid_argument("invalid dimension") for d < 2.
    static SphereGeometry make(int d);
};

/// Gegenbauer polynomial C_n^lambda(u) (three-term recurrence, long-double
/// accumulation). Refuses n > kMaxGegenbauerDegree.
double gegenbauer(int n, double lambda, double u);

/// C_n^lambda(1) = (2 lambda)_n / n!.
double gegenbauer_at_one(int n, double lambda);

/// Zonal polynomial Z_n(u) = ((n + lambda) / lambda) C_n^lambda(u).
double zonal(int n, const SphereGeometry& g, double u);

/// Dimension a_n of degree-n spherical harmonics on S^d.
std::uint64_t multiplicity(int n, int d);

/// omega_{d-1} / omega_d: normalizes the Funk–Hecke integral so that the
/// constant profile has mu_0 = 1.
double funk_hecke_constant(int d);

struct ModeSpectrum {
    std::vector<double> mu;   ///< mu_n, n = 0..N_max
    std::vector<double> mult; ///< a_n
    SphereGeometry geometry;

    int n_max() const noexcept { return static_cast<int>(mu.size()) - 1; }
    /// Degrees with mu_n < 0 (not allowed for a positive-definite profile).
    std::vector<int> negative_modes() const;
    /// sum_{n<=N} mu_n a_n; tends to f(1).
    double trace(int N) const;
};

enum class QuadratureRule {
    angular, ///< Gauss–Legendre in theta, t = cos(theta)
    jacobi,  ///< Gauss–Jacobi in t with weight (1-t^2)^{(d-2)/2}
};

struct FunkHeckeOptions {
    int quad_order = 400;
    QuadratureRule rule = QuadratureRule::angular;
    double rel_tol = 1e-8;
};

using Profile = std::function<double(double)>;

/// mu_n = c_d * int_{-1}^{1} f(t) C_n(t)/C_n(1) (1-t^2)^{(d-2)/2} dt for
/// n <= n_max. The integral is evaluated at quad_order and 2*quad_order
/// nodes; a disagreement beyond rel_tol throws NumericalError("quadrature
/// not converged"). Returns the finer pass.
ModeSpectrum funk_hecke_modes(const Profile& f, const SphereGeometry& g, int n_max,
                              const FunkHeckeOptions& opts = {});

/// The `count` largest operator eigenvalues lambda_i, each mu_n repeated
/// a_n times, in descending order.
std::vector<double> modes_to_lambda(const ModeSpectrum& spec, std::size_t count);

/// Order-d Cesàro mean of the zonal polynomials,
/// K_n(u) = (1/A_n^d) sum_{k<=n} A_{n-k}^d Z_k(u). Nonnegative on [-1, 1].
double cesaro_kernel(int n, const SphereGeometry& g, double u);

/// CSV with header "n,a_n,mu_n".
void write_csv(const ModeSpectrum& spec, std::ostream& os);

} // namespace ntklab::sphere
