#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

/// Sequence calculus on finite prefixes: forward differences, tail sums,
/// Cesàro means, left extrapolation and a numerical checker for the
/// eigenvalue-decay regularity condition used for restricted domains.
namespace ntklab::seq {

/// Declared analytic tail of a sequence, used only for admissibility checks.
struct TailModel {
    enum class Kind { power_law, exponential, log_corrected };

    Kind kind = Kind::power_law;
    double beta = 0.0;      ///< decay exponent
    double c0 = 1.0;        ///< leading constant (> 0)
    double c1 = 1.0;        ///< exponential rate, exp(-c1 n^beta)
    double log_power = 0.0; ///< p in n^{-beta} (ln n)^p

    /// Throws std::invalid_argument unless the parameters are admissible for
    /// dimension d: beta > d for power laws, c1, beta > 0 for exponentials,
    /// beta > d or (beta == d and p > 1) for log-corrected laws.
    void validate(int d) const;

    double value(double n) const;
};

/// Finite list of reals indexed from 0. Either a prefix of an infinite
/// sequence, or a finitely supported sequence that is zero past size().
class Seq {
public:
    /// Prefix of an infinite sequence (values beyond size() are unknown).
    explicit Seq(std::vector<double> values);

    /// Finitely supported sequence: identically zero for k >= values.size().
    static Seq finite(std::vector<double> values);

    /// Attach a declared tail, validated against dimension d.
    Seq with_tail(const TailModel& tail, int d) const;

    const std::vector<double>& values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool finitely_supported() const noexcept { return finite_; }
    const std::optional<TailModel>& tail_model() const noexcept { return tail_; }

    /// Value at k. Zero beyond the support for finite sequences; throws
    /// std::out_of_range past the stored prefix otherwise.
    double operator[](std::size_t k) const;

private:
    Seq(std::vector<double> values, bool finite);

    std::vector<double> values_;
    bool finite_ = false;
    std::optional<TailModel> tail_;
};

/// Exact binomial C(n, k); throws std::overflow_error if it does not fit.
std::uint64_t binomial_exact(std::uint64_t n, std::uint64_t k);

/// Cesàro weight A_k^p = C(k+p, k). Exact integer path for k+p <= 60,
/// multiplicative recurrence in floating point above.
double cesaro_weight(std::size_t k, std::size_t p);

/// p-th forward difference, (Δa)_k = a_k - a_{k+1}, applied p times.
/// Prefixes shrink by p; finitely supported sequences keep their length.
Seq forward_difference(const Seq& a, int p);

/// p-th tail sum, (Sa)_k = sum_{r>=k} a_r, applied p times. Requires a
/// finitely supported sequence.
Seq tail_sum(const Seq& a, int p);

/// sum_{k<=n} A_{n-k}^p a_k, i.e. A_n^p s_n^p.
double cesaro_partial(const Seq& a, int p, std::size_t n);

/// p-Cesàro mean s_n^p = (1/A_n^p) sum_{k<=n} A_{n-k}^p a_k.
double cesaro_mean(const Seq& a, int p, std::size_t n);

struct ExtrapolationResult {
    Seq tilde_mu;      ///< extrapolated sequence
    Seq residual;      ///< mu - tilde_mu
    double leading;    ///< tilde_mu_0 = sum_{l<p} A_{N-1}^l Δ^l mu_N (mu_0 when N = 0)
    int order_p;
    std::size_t pivot_N;
};

/// Left extrapolation of a p-monotone sequence at pivot N: below N the
/// sequence is replaced by the extension with vanishing p-th differences.
/// Below the pivot, tilde_mu_{N-r} = sum_{l<p} A_{r-1}^l Δ^l mu_N.
ExtrapolationResult left_extrapolate(const Seq& mu, int p, std::size_t pivot);

/// L_N^p mu = sum_{l<p} A_N^l Δ^l mu_N, the left-hand side of the
/// condition-(c) bound at ñ = N. Dominates the extrapolation's leading term
/// whenever Δ^l mu_N >= 0 for l < p.
double leading_functional(const Seq& mu, int p, std::size_t pivot);

struct ConditionCheck {
    bool passed = false;
    std::optional<std::size_t> first_violation;
    bool heuristic = false;
    std::string detail;
};

struct EdrConditionReport {
    ConditionCheck a; ///< N(c eps) = Theta(N(eps)): grid heuristic on the prefix
    ConditionCheck b; ///< Δ^{d+1} mu_n >= 0
    ConditionCheck c; ///< sum_{l<=d} C(qn+l, l) Δ^l mu_{qn} <= D mu_n
    double max_halving_ratio = 0.0;

    bool all_passed() const noexcept { return a.passed && b.passed && c.passed; }
};

/// Check the decay-regularity condition on n = 0..n_max. Requires
/// size(mu) >= q*n_max + d + 1. Part (a) is asymptotic and only checked
/// heuristically: N(eps/2)/N(eps) must stay below halving_ratio_bound.
EdrConditionReport check_edr_condition(const Seq& mu, int d, int q, double D, std::size_t n_max,
                                       double halving_ratio_bound = 4.0);

} // namespace ntklab::seq
