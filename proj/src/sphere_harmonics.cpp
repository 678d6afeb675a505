#include "ntklab/sphere_harmonics.hpp"

#include "ntklab/error.hpp"
#include "ntklab/quadrature.hpp"
#include "ntklab/seq_calculus.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace ntklab::sphere {

SphereGeometry SphereGeometry::make(int d)
{
    if (d < 2)
        throw std::invalid_argument("invalid dimension: sphere harmonics need d >= 2");
    SphereGeometry g;
    g.d = d;
    g.lambda = 0.5 * (d - 1);
    const double h = 0.5 * (d + 1);
    g.omega_d = 2.0 * std::pow(std::numbers::pi, h) / std::tgamma(h);
    return g;
}

namespace {

void check_degree(int n)
{
    if (n < 0)
        throw std::invalid_argument("negative degree");
    if (n > kMaxGegenbauerDegree) {
        std::ostringstream os;
        os << "degree " << n << " exceeds the Gegenbauer recurrence guard (" << kMaxGegenbauerDegree
           << ")";
        throw std::invalid_argument(os.str());
    }
}

// C_0..C_{n_max} normalized by C_k(1), evaluated at u.
void normalized_gegenbauer_row(int n_max, double lambda, double u, const std::vector<long double>& at_one,
                               std::vector<double>& out)
{
    long double c_prev = 1.0L;
    long double c = 2.0L * lambda * u;
    out[0] = 1.0;
    if (n_max >= 1)
        out[1] = static_cast<double>(c / at_one[1]);
    for (int k = 2; k <= n_max; ++k) {
        const long double next =
            (2.0L * (k + lambda - 1.0L) * u * c - (k + 2.0L * lambda - 2.0L) * c_prev) / k;
        c_prev = c;
        c = next;
        out[static_cast<std::size_t>(k)] = static_cast<double>(c / at_one[static_cast<std::size_t>(k)]);
    }
}

std::vector<long double> gegenbauer_ones(int n_max, double lambda)
{
    std::vector<long double> v(static_cast<std::size_t>(n_max) + 1);
    v[0] = 1.0L;
    for (int k = 1; k <= n_max; ++k)
        v[static_cast<std::size_t>(k)] = v[static_cast<std::size_t>(k - 1)] * (2.0L * lambda + k - 1.0L) / k;
    return v;
}

} // namespace

double gegenbauer(int n, double lambda, double u)
{
    check_degree(n);
    if (n == 0)
        return 1.0;
    long double c_prev = 1.0L;
    long double c = 2.0L * lambda * u;
    for (int k = 2; k <= n; ++k) {
        const long double next =
            (2.0L * (k + lambda - 1.0L) * u * c - (k + 2.0L * lambda - 2.0L) * c_prev) / k;
        c_prev = c;
        c = next;
    }
    return static_cast<double>(c);
}

double gegenbauer_at_one(int n, double lambda)
{
    check_degree(n);
    return static_cast<double>(gegenbauer_ones(n, lambda)[static_cast<std::size_t>(n)]);
}

double zonal(int n, const SphereGeometry& g, double u)
{
    return (n + g.lambda) / g.lambda * gegenbauer(n, g.lambda, u);
}

std::uint64_t multiplicity(int n, int d)
{
    if (n < 0 || d < 1)
        throw std::invalid_argument("multiplicity: need n >= 0 and d >= 1");
    if (n == 0)
        return 1;
    if (n == 1)
        return static_cast<std::uint64_t>(d) + 1;
    const auto un = static_cast<std::uint64_t>(n);
    const auto ud = static_cast<std::uint64_t>(d);
    return seq::binomial_exact(un + ud, un) - seq::binomial_exact(un - 2 + ud, un - 2);
}

double funk_hecke_constant(int d)
{
    return std::exp(std::lgamma(0.5 * (d + 1)) - std::lgamma(0.5 * d)) / std::sqrt(std::numbers::pi);
}

std::vector<int> ModeSpectrum::negative_modes() const
{
    std::vector<int> out;
    for (std::size_t n = 0; n < mu.size(); ++n)
        if (mu[n] < 0.0)
            out.push_back(static_cast<int>(n));
    return out;
}

double ModeSpectrum::trace(int N) const
{
    double s = 0.0;
    for (int n = 0; n <= std::min(N, n_max()); ++n)
        s += mu[static_cast<std::size_t>(n)] * mult[static_cast<std::size_t>(n)];
    return s;
}

namespace {

struct RawModes {
    std::vector<double> mu;
    double scale = 0.0; // c_d * int |f| w, the natural absolute error scale
};

RawModes integrate_modes(const Profile& f, const SphereGeometry& g, int n_max, int order,
                         QuadratureRule rule)
{
    const auto ones = gegenbauer_ones(n_max, g.lambda);
    const double cd = funk_hecke_constant(g.d);
    std::vector<long double> acc(static_cast<std::size_t>(n_max) + 1, 0.0L);
    long double abs_acc = 0.0L;
    std::vector<double> row(static_cast<std::size_t>(n_max) + 1);

    auto accumulate = [&](double t, double w) {
        const double ft = f(t);
        if (!std::isfinite(ft))
            throw NumericalError("profile is not finite at a quadrature node");
        normalized_gegenbauer_row(n_max, g.lambda, t, ones, row);
        const long double fw = static_cast<long double>(ft) * w;
        abs_acc += std::abs(fw);
        for (int n = 0; n <= n_max; ++n)
            acc[static_cast<std::size_t>(n)] += fw * row[static_cast<std::size_t>(n)];
    };

    if (rule == QuadratureRule::angular) {
        const quad::Rule r = quad::gauss_legendre(order, 0.0, std::numbers::pi);
        for (std::size_t i = 0; i < r.nodes.size(); ++i) {
            const double th = r.nodes[i];
            accumulate(std::cos(th), r.weights[i] * std::pow(std::sin(th), g.d - 1));
        }
    } else {
        const double a = 0.5 * (g.d - 2);
        const quad::Rule r = quad::gauss_jacobi(order, a, a);
        for (std::size_t i = 0; i < r.nodes.size(); ++i)
            accumulate(r.nodes[i], r.weights[i]);
    }

    RawModes out;
    out.mu.resize(acc.size());
    for (std::size_t n = 0; n < acc.size(); ++n)
        out.mu[n] = static_cast<double>(cd * acc[n]);
    out.scale = static_cast<double>(cd * abs_acc);
    return out;
}

} // namespace

ModeSpectrum funk_hecke_modes(const Profile& f, const SphereGeometry& g, int n_max,
                              const FunkHeckeOptions& opts)
{
    if (g.d < 2)
        throw std::invalid_argument("invalid dimension: sphere harmonics need d >= 2");
    check_degree(n_max);
    if (opts.quad_order < 1)
        throw std::invalid_argument("quadrature order must be positive");

    const RawModes coarse = integrate_modes(f, g, n_max, opts.quad_order, opts.rule);
    const RawModes fine = integrate_modes(f, g, n_max, 2 * opts.quad_order, opts.rule);
    const double floor_abs = 1e-14 * std::max(fine.scale, 1e-300);
    for (int n = 0; n <= n_max; ++n) {
        const double a = coarse.mu[static_cast<std::size_t>(n)];
        const double b = fine.mu[static_cast<std::size_t>(n)];
        if (std::abs(a - b) > opts.rel_tol * std::max(std::abs(a), std::abs(b)) + floor_abs) {
            std::ostringstream os;
            os << "quadrature not converged at degree " << n << " (" << std::setprecision(17) << a
               << " vs " << b << ")";
            throw NumericalError(os.str());
        }
    }

    ModeSpectrum spec;
    spec.geometry = g;
    spec.mu = fine.mu;
    spec.mult.resize(spec.mu.size());
    for (int n = 0; n <= n_max; ++n)
        spec.mult[static_cast<std::size_t>(n)] = static_cast<double>(multiplicity(n, g.d));
    return spec;
}

std::vector<double> modes_to_lambda(const ModeSpectrum& spec, std::size_t count)
{
    std::vector<std::pair<double, std::uint64_t>> modes;
    std::uint64_t total = 0;
    for (std::size_t n = 0; n < spec.mu.size(); ++n) {
        if (spec.mu[n] < 0.0)
            throw std::invalid_argument("modes_to_lambda: negative mode");
        const auto a = static_cast<std::uint64_t>(spec.mult[n]);
        modes.emplace_back(spec.mu[n], a);
        total += a;
    }
    if (total < count)
        throw std::invalid_argument("insufficient stored degrees for the requested count");
    std::stable_sort(modes.begin(), modes.end(),
                     [](const auto& x, const auto& y) { return x.first > y.first; });
    std::vector<double> out;
    out.reserve(count);
    for (const auto& [mu, a] : modes) {
        for (std::uint64_t j = 0; j < a && out.size() < count; ++j)
            out.push_back(mu);
        if (out.size() == count)
            break;
    }
    return out;
}

double cesaro_kernel(int n, const SphereGeometry& g, double u)
{
    if (n < 1)
        throw std::invalid_argument("cesaro_kernel: n must be >= 1");
    check_degree(n);
    const auto p = static_cast<std::size_t>(g.d);
    long double c_prev = 1.0L;
    long double c = 2.0L * g.lambda * u;
    long double sum = seq::cesaro_weight(static_cast<std::size_t>(n), p); // k = 0, Z_0 = 1
    for (int k = 1; k <= n; ++k) {
        if (k >= 2) {
            const long double next =
                (2.0L * (k + g.lambda - 1.0L) * u * c - (k + 2.0L * g.lambda - 2.0L) * c_prev) / k;
            c_prev = c;
            c = next;
        }
        const long double z = (k + g.lambda) / g.lambda * c;
        sum += seq::cesaro_weight(static_cast<std::size_t>(n - k), p) * z;
    }
    return static_cast<double>(sum / seq::cesaro_weight(static_cast<std::size_t>(n), p));
}

void write_csv(const ModeSpectrum& spec, std::ostream& os)
{
    os << "n,a_n,mu_n\n" << std::setprecision(17);
    for (std::size_t n = 0; n < spec.mu.size(); ++n)
        os << n << ',' << static_cast<std::uint64_t>(spec.mult[n]) << ',' << spec.mu[n] << '\n';
}

} // namespace ntklab::sphere
