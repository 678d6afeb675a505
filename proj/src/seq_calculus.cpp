#include "ntklab/seq_calculus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ntklab::seq {

void TailModel::validate(int d) const
{
    if (!(c0 > 0.0))
        throw std::invalid_argument("tail model: c0 must be positive");
    switch (kind) {
    case Kind::power_law:
        if (!(beta > d))
            throw std::invalid_argument("tail model: power law requires beta > d");
        break;
    case Kind::exponential:
        if (!(c1 > 0.0 && beta > 0.0))
            throw std::invalid_argument("tail model: exponential requires c1 > 0 and beta > 0");
        break;
    case Kind::log_corrected:
        if (!(beta > d || (beta == d && log_power > 1.0)))
            throw std::invalid_argument(
                "tail model: log-corrected law requires beta > d, or beta == d and p > 1");
        break;
    }
}

double TailModel::value(double n) const
{
    switch (kind) {
    case Kind::power_law:
        return c0 * std::pow(n + 1.0, -beta);
    case Kind::exponential:
        return c0 * std::exp(-c1 * std::pow(n, beta));
    case Kind::log_corrected:
        return c0 * std::pow(n + 2.0, -beta) * std::pow(std::log(n + 2.0), log_power);
    }
    return 0.0;
}

Seq::Seq(std::vector<double> values) : Seq(std::move(values), false) {}

Seq::Seq(std::vector<double> values, bool finite) : values_(std::move(values)), finite_(finite)
{
    if (values_.empty())
        throw std::invalid_argument("sequence must have at least one value");
}

Seq Seq::finite(std::vector<double> values)
{
    return Seq(std::move(values), true);
}

Seq Seq::with_tail(const TailModel& tail, int d) const
{
    tail.validate(d);
    Seq out = *this;
    out.tail_ = tail;
    return out;
}

double Seq::operator[](std::size_t k) const
{
    if (k < values_.size())
        return values_[k];
    if (finite_)
        return 0.0;
    throw std::out_of_range("index past the stored prefix");
}

std::uint64_t binomial_exact(std::uint64_t n, std::uint64_t k)
{
    if (k > n)
        return 0;
    k = std::min(k, n - k);
    __extension__ typedef unsigned __int128 u128;
    u128 r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        // r * (n - k + i) / i stays integral: it is C(n - k + i, i).
        r = r * (n - k + i) / i;
        if (r > std::numeric_limits<std::uint64_t>::max())
            throw std::overflow_error("binomial coefficient exceeds 64 bits");
    }
    return static_cast<std::uint64_t>(r);
}

double cesaro_weight(std::size_t k, std::size_t p)
{
    if (k + p <= 60)
        return static_cast<double>(binomial_exact(k + p, k));
    const std::size_t lo = std::min(k, p);
    const std::size_t hi = std::max(k, p);
    double r = 1.0;
    for (std::size_t i = 1; i <= lo; ++i)
        r = r * static_cast<double>(hi + i) / static_cast<double>(i);
    return r;
}

Seq forward_difference(const Seq& a, int p)
{
    if (p < 0)
        throw std::invalid_argument("difference order must be nonnegative");
    std::vector<double> v = a.values();
    if (a.finitely_supported()) {
        for (int step = 0; step < p; ++step)
            for (std::size_t k = 0; k < v.size(); ++k)
                v[k] -= (k + 1 < v.size() ? v[k + 1] : 0.0);
        return Seq::finite(std::move(v));
    }
    if (v.size() <= static_cast<std::size_t>(p))
        throw std::invalid_argument("insufficient sequence length");
    for (int step = 0; step < p; ++step) {
        for (std::size_t k = 0; k + 1 < v.size(); ++k)
            v[k] -= v[k + 1];
        v.pop_back();
    }
    return Seq(std::move(v));
}

Seq tail_sum(const Seq& a, int p)
{
    if (p < 0)
        throw std::invalid_argument("tail-sum order must be nonnegative");
    if (!a.finitely_supported())
        throw std::invalid_argument("tail sum requires finite support");
    std::vector<double> v = a.values();
    for (int step = 0; step < p; ++step) {
        double acc = 0.0;
        for (std::size_t k = v.size(); k-- > 0;) {
            acc += v[k];
            v[k] = acc;
        }
    }
    return Seq::finite(std::move(v));
}

double cesaro_partial(const Seq& a, int p, std::size_t n)
{
    if (p < 0)
        throw std::invalid_argument("Cesàro order must be nonnegative");
    if (n >= a.size())
        throw std::out_of_range("Cesàro index out of range");
    double s = 0.0;
    for (std::size_t k = 0; k <= n; ++k)
        s += cesaro_weight(n - k, static_cast<std::size_t>(p)) * a[k];
    return s;
}

double cesaro_mean(const Seq& a, int p, std::size_t n)
{
    return cesaro_partial(a, p, n) / cesaro_weight(n, static_cast<std::size_t>(p));
}

namespace {

// Δ^l mu_N for l = 0..p-1, from the window mu_N..mu_{N+p-1}.
std::vector<double> differences_at(const Seq& mu, int p, std::size_t pivot)
{
    std::vector<double> window(static_cast<std::size_t>(p));
    for (int i = 0; i < p; ++i)
        window[static_cast<std::size_t>(i)] = mu[pivot + static_cast<std::size_t>(i)];
    std::vector<double> out(static_cast<std::size_t>(p));
    for (int l = 0; l < p; ++l) {
        out[static_cast<std::size_t>(l)] = window[0];
        for (std::size_t k = 0; k + 1 < window.size(); ++k)
            window[k] -= window[k + 1];
        window.pop_back();
    }
    return out;
}

void require_pivot_in_range(const Seq& mu, int p, std::size_t pivot)
{
    if (p < 1)
        throw std::invalid_argument("extrapolation order must be positive");
    if (!mu.finitely_supported() && pivot + static_cast<std::size_t>(p) >= mu.size())
        throw std::invalid_argument("pivot too close to the end of the prefix");
}

} // namespace

double leading_functional(const Seq& mu, int p, std::size_t pivot)
{
    require_pivot_in_range(mu, p, pivot);
    const auto diffs = differences_at(mu, p, pivot);
    double s = 0.0;
    for (int l = 0; l < p; ++l)
        s += cesaro_weight(pivot, static_cast<std::size_t>(l)) * diffs[static_cast<std::size_t>(l)];
    return s;
}

ExtrapolationResult left_extrapolate(const Seq& mu, int p, std::size_t pivot)
{
    require_pivot_in_range(mu, p, pivot);
    const Seq dp = forward_difference(mu, p);
    for (std::size_t k = 0; k < dp.size(); ++k)
        if (dp[k] < 0.0)
            throw std::invalid_argument("input not p-monotone");

    const auto diffs = differences_at(mu, p, pivot);
    std::vector<double> tilde = mu.values();
    if (tilde.size() < pivot + static_cast<std::size_t>(p))
        tilde.resize(pivot + static_cast<std::size_t>(p), 0.0);
    for (std::size_t r = 1; r <= pivot; ++r) {
        double v = 0.0;
        for (int l = 0; l < p; ++l)
            v += cesaro_weight(r - 1, static_cast<std::size_t>(l)) * diffs[static_cast<std::size_t>(l)];
        tilde[pivot - r] = v;
    }
    std::vector<double> resid(tilde.size());
    for (std::size_t k = 0; k < tilde.size(); ++k)
        resid[k] = k < pivot ? mu[k] - tilde[k] : 0.0;

    const double leading = tilde[0];
    if (mu.finitely_supported())
        return {Seq::finite(std::move(tilde)), Seq::finite(std::move(resid)), leading, p, pivot};
    return {Seq(std::move(tilde)), Seq(std::move(resid)), leading, p, pivot};
}

namespace {

// N(eps) = max{n : mu_n > eps} on the prefix; -1 if no entry exceeds eps.
long count_above(const std::vector<double>& v, double eps)
{
    for (std::size_t k = v.size(); k-- > 0;)
        if (v[k] > eps)
            return static_cast<long>(k);
    return -1;
}

} // namespace

EdrConditionReport check_edr_condition(const Seq& mu, int d, int q, double D, std::size_t n_max,
                                       double halving_ratio_bound)
{
    if (d < 1 || q < 1)
        throw std::invalid_argument("d and q must be positive");
    const std::size_t need = static_cast<std::size_t>(q) * n_max + static_cast<std::size_t>(d) + 1;
    if (mu.size() < need)
        throw std::invalid_argument("insufficient sequence length");

    EdrConditionReport rep;

    // (b)
    {
        const Seq diff = forward_difference(mu, d + 1);
        rep.b.passed = true;
        for (std::size_t k = 0; k < diff.size(); ++k) {
            if (diff[k] < 0.0) {
                rep.b.passed = false;
                rep.b.first_violation = k;
                break;
            }
        }
        std::ostringstream os;
        os << "checked Delta^" << d + 1 << " on " << diff.size() << " entries";
        rep.b.detail = os.str();
    }

    // (c)
    {
        std::vector<Seq> diffs;
        diffs.reserve(static_cast<std::size_t>(d) + 1);
        for (int l = 0; l <= d; ++l)
            diffs.push_back(forward_difference(mu, l));
        rep.c.passed = true;
        for (std::size_t n = 0; n <= n_max; ++n) {
            const std::size_t nt = static_cast<std::size_t>(q) * n;
            double lhs = 0.0;
            for (int l = 0; l <= d; ++l)
                lhs += cesaro_weight(nt, static_cast<std::size_t>(l)) * diffs[static_cast<std::size_t>(l)][nt];
            if (lhs > D * mu[n]) {
                rep.c.passed = false;
                rep.c.first_violation = n;
                break;
            }
        }
        std::ostringstream os;
        os << "q=" << q << " D=" << D << " n<=" << n_max;
        rep.c.detail = os.str();
    }

    // (a): heuristic halving-ratio scan over eps = max/2, max/4, ...
    {
        const auto& v = mu.values();
        const double top = *std::max_element(v.begin(), v.end());
        const double floor_value = *std::min_element(v.begin(), v.end());
        rep.a.heuristic = true;
        int grid_points = 0;
        double worst = 0.0;
        for (double eps = top / 2.0; eps / 2.0 > floor_value && eps > 0.0; eps /= 2.0) {
            const long n1 = count_above(v, eps);
            const long n2 = count_above(v, eps / 2.0);
            const double ratio = static_cast<double>(n2 + 1) / static_cast<double>(n1 + 1);
            worst = std::max(worst, ratio);
            ++grid_points;
        }
        rep.max_halving_ratio = worst;
        rep.a.passed = grid_points >= 2 && worst <= halving_ratio_bound;
        std::ostringstream os;
        os << "heuristic: " << grid_points << " eps grid points, max N(eps/2)/N(eps) = " << worst;
        if (grid_points < 2)
            os << " (inconclusive: prefix too short)";
        rep.a.detail = os.str();
    }
    return rep;
}

} // namespace ntklab::seq
