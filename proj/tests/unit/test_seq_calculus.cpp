#include "ntklab/seq_calculus.hpp"

#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <random>
#include <vector>

using namespace ntklab::seq;

namespace {

// Pascal's triangle, independent of the library's binomials.
std::vector<std::vector<double>> pascal(int rows)
{
    std::vector<std::vector<double>> c(rows + 1);
    for (int n = 0; n <= rows; ++n) {
        c[n].assign(n + 1, 1.0);
        for (int k = 1; k < n; ++k)
            c[n][k] = c[n - 1][k - 1] + c[n - 1][k];
    }
    return c;
}

const auto C = pascal(80);

double A(int k, int p) { return C[k + p][k]; }

// Delta^p a_k = sum_r C(p, r) (-1)^r a_{k+r}
double delta_closed(const std::vector<double>& a, int p, int k)
{
    double s = 0.0;
    for (int r = 0; r <= p; ++r) {
        const int idx = k + r;
        const double v = idx < static_cast<int>(a.size()) ? a[idx] : 0.0;
        s += (r % 2 ? -1.0 : 1.0) * C[p][r] * v;
    }
    return s;
}

std::vector<double> power_law(int n, double beta)
{
    std::vector<double> v(n);
    for (int k = 0; k < n; ++k)
        v[k] = std::pow(k + 1.0, -beta);
    return v;
}

std::vector<double> random_ints(std::mt19937_64& rng, int n)
{
    std::uniform_int_distribution<int> u(-9, 9);
    std::vector<double> v(n);
    for (auto& x : v)
        x = u(rng);
    return v;
}

} // namespace

TEST_CASE("forward differences")
{
    CHECK(forward_difference(Seq({1, 1, 1, 1}), 2).values() == std::vector<double>{0, 0});
    CHECK(forward_difference(Seq({1, 0, 0, 0}), 1).values() == std::vector<double>{1, 0, 0});
    CHECK(forward_difference(Seq({3, 1}), 0).values() == std::vector<double>{3, 1});
    CHECK_THROWS_WITH(forward_difference(Seq({1, 2}), 2), "insufficient sequence length");

    std::mt19937_64 rng(11);
    for (int p = 0; p <= 6; ++p) {
        const auto a = random_ints(rng, 20);
        const auto d = forward_difference(Seq(a), p);
        REQUIRE(d.size() == a.size() - p);
        for (std::size_t k = 0; k < d.size(); ++k)
            CHECK(d[k] == delta_closed(a, p, static_cast<int>(k)));
    }
}

TEST_CASE("differences of a power law are positive and bounded")
{
    const double beta = 2.5;
    const auto a = power_law(80, beta);
    for (int p = 1; p <= 4; ++p) {
        const auto d = forward_difference(Seq(a), p);
        double rising = 1.0;
        for (int i = 0; i < p; ++i)
            rising *= beta + i;
        for (std::size_t k = 0; k < d.size(); ++k) {
            CHECK(d[k] > 0.0);
            CHECK(d[k] <= rising * std::pow(k + 1.0, -(beta + p)) * (1 + 1e-12));
        }
    }
}

TEST_CASE("tail sums")
{
    CHECK(tail_sum(Seq::finite({0, 0, 0}), 2).values() == std::vector<double>{0, 0, 0});
    CHECK(tail_sum(Seq::finite({0, 0, 0, 1}), 1).values() == std::vector<double>{1, 1, 1, 1});
    CHECK_THROWS_WITH(tail_sum(Seq({1, 2, 3}), 1), "tail sum requires finite support");

    std::mt19937_64 rng(5);
    for (int p = 1; p <= 5; ++p) {
        const auto a = random_ints(rng, 15);
        const auto s = tail_sum(Seq::finite(a), p);
        for (std::size_t n = 0; n < a.size(); ++n) {
            double expect = 0.0;
            for (std::size_t k = 0; n + k < a.size(); ++k)
                expect += A(static_cast<int>(k), p - 1) * a[n + k];
            CHECK(s[n] == expect);
        }
    }
}

TEST_CASE("tail sum inverts the forward difference exactly")
{
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial)
        for (int p = 0; p <= 6; ++p) {
            const auto a = random_ints(rng, 12);
            const Seq fa = Seq::finite(a);
            CHECK(tail_sum(forward_difference(fa, p + 1), p + 1).values() == a);
            CHECK(forward_difference(tail_sum(fa, p + 1), p + 1).values() == a);
        }
}

TEST_CASE("difference and tail sum are linear")
{
    std::mt19937_64 rng(9);
    for (int p = 0; p <= 4; ++p) {
        const auto a = random_ints(rng, 10);
        const auto b = random_ints(rng, 10);
        std::vector<double> c(10);
        for (int k = 0; k < 10; ++k)
            c[k] = 3 * a[k] - 2 * b[k];
        const auto da = forward_difference(Seq::finite(a), p), db = forward_difference(Seq::finite(b), p),
                   dc = forward_difference(Seq::finite(c), p);
        const auto sa = tail_sum(Seq::finite(a), p), sb = tail_sum(Seq::finite(b), p),
                   sc = tail_sum(Seq::finite(c), p);
        for (std::size_t k = 0; k < 10; ++k) {
            CHECK(dc[k] == 3 * da[k] - 2 * db[k]);
            CHECK(sc[k] == 3 * sa[k] - 2 * sb[k]);
        }
    }
}

TEST_CASE("binomials and Cesaro weights")
{
    CHECK(binomial_exact(10, 3) == 120);
    CHECK(binomial_exact(60, 30) == 118264581564861424ULL);
    CHECK_THROWS_AS(binomial_exact(70, 35), std::overflow_error);
    for (int k = 0; k <= 30; ++k)
        for (int p = 0; p <= 30; ++p)
            CHECK(cesaro_weight(k, p) == doctest::Approx(A(k, p)).epsilon(1e-14));
    CHECK(cesaro_weight(100, 3) == doctest::Approx(176851.0));
}

TEST_CASE("hockey-stick normalization")
{
    for (int n = 0; n <= 8; ++n)
        for (int p = 0; p <= 8; ++p) {
            double s = 0.0;
            for (int k = 0; k <= n; ++k)
                s += cesaro_weight(n - k, p);
            CHECK(s == cesaro_weight(n, p + 1));
            // weights A_{n-k}^p sum to A_n^{p+1}, so the mean of ones is A_n^{p+1} / A_n^p
            CHECK(cesaro_mean(Seq(std::vector<double>(n + 1, 1.0)), p, n) ==
                  doctest::Approx((n + p + 1.0) / (p + 1.0)));
        }
}

TEST_CASE("Cesaro means")
{
    const Seq a({2, -1, 4, 3});
    CHECK(cesaro_mean(a, 0, 3) == 8.0);
    CHECK(cesaro_partial(a, 1, 2) == 3 * 2 + 2 * -1 + 1 * 4);
    CHECK_THROWS_AS(cesaro_mean(a, 1, 4), std::out_of_range);
}

TEST_CASE("summation by parts")
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial)
        for (int p = 0; p <= 4; ++p) {
            const auto a = random_ints(rng, 14);
            auto b = random_ints(rng, 14);
            for (int k = 10; k < 14; ++k)
                b[k] = 0;
            double lhs = 0.0, rhs = 0.0;
            const auto db = forward_difference(Seq::finite(b), p + 1);
            for (std::size_t k = 0; k < 14; ++k) {
                lhs += a[k] * b[k];
                rhs += db[k] * cesaro_partial(Seq(a), p, k);
            }
            CHECK(lhs == rhs);
        }
}

TEST_CASE("left extrapolation of a power law")
{
    const auto mu = power_law(60, 4.0);
    const int p = 3;
    const std::size_t N = 5;
    const auto res = left_extrapolate(Seq(mu), p, N);

    double functional = 0.0, value_at_zero = 0.0;
    for (int l = 0; l < p; ++l) {
        functional += A(N, l) * delta_closed(mu, l, N);
        value_at_zero += A(N - 1, l) * delta_closed(mu, l, N);
    }
    CHECK(leading_functional(Seq(mu), p, N) == doctest::Approx(functional).epsilon(1e-14));
    CHECK(res.leading == doctest::Approx(value_at_zero).epsilon(1e-14));
    CHECK(res.leading <= functional);
    CHECK(res.order_p == p);
    CHECK(res.pivot_N == N);

    const auto& t = res.tilde_mu.values();
    const auto& r = res.residual.values();
    for (std::size_t k = 0; k < mu.size(); ++k) {
        if (k >= N) {
            CHECK(t[k] == mu[k]);
            CHECK(r[k] == 0.0);
        } else {
            CHECK(t[k] <= mu[k]);
            CHECK(r[k] == doctest::Approx(mu[k] - t[k]));
        }
    }
    for (std::size_t k = 0; k + p < mu.size(); ++k) {
        const double dt = delta_closed(t, p, static_cast<int>(k));
        CHECK(dt >= -1e-15);
        if (k < N)
            CHECK(std::abs(dt) < 1e-14);
        CHECK(delta_closed(r, p, static_cast<int>(k)) >= -1e-15);
    }
}

TEST_CASE("left extrapolation edge cases")
{
    const auto mu = power_law(20, 3.0);
    const auto res = left_extrapolate(Seq(mu), 2, 0);
    CHECK(res.tilde_mu.values() == mu);
    CHECK(res.leading == mu[0]);
    for (double v : res.residual.values())
        CHECK(v == 0.0);

    CHECK_THROWS_WITH(left_extrapolate(Seq({1, 0.5, 1, 0.5, 1, 0.5}), 1, 2), "input not p-monotone");
    CHECK_THROWS_AS(left_extrapolate(Seq(mu), 3, 17), std::invalid_argument);
}

TEST_CASE("decay regularity condition")
{
    const int d = 3;
    const double beta = 4.5;
    double rising = 1.0;
    for (int i = 0; i < d; ++i)
        rising *= beta + i;
    const auto mu = power_law(60, beta);
    const auto rep = check_edr_condition(Seq(mu), d, 1, rising * std::pow(2.0, beta + d), 50);
    CHECK(rep.b.passed);
    CHECK(rep.c.passed);
    CHECK(rep.a.passed);
    CHECK(rep.a.heuristic);
    CHECK(rep.all_passed());

    std::vector<double> alt(60);
    for (int k = 0; k < 60; ++k)
        alt[k] = k % 2 ? 0.5 : 1.0;
    const auto bad = check_edr_condition(Seq(alt), 3, 1, 10.0, 50);
    CHECK_FALSE(bad.b.passed);
    REQUIRE(bad.b.first_violation);
    // the fourth difference starts positive and flips sign at k = 1
    CHECK(*bad.b.first_violation == 1);

    std::vector<double> ex(90);
    for (int k = 0; k < 90; ++k)
        ex[k] = std::exp(-k);
    CHECK(check_edr_condition(Seq(ex), 2, 2, 10.0, 40).b.passed);

    CHECK_THROWS_WITH(check_edr_condition(Seq(mu), 3, 2, 1.0, 50), "insufficient sequence length");
}

TEST_CASE("tail models")
{
    TailModel t;
    t.beta = 4.0;
    CHECK_NOTHROW(t.validate(3));
    CHECK_THROWS_AS(t.validate(4), std::invalid_argument);
    t.kind = TailModel::Kind::log_corrected;
    t.beta = 3.0;
    t.log_power = 2.0;
    CHECK_NOTHROW(t.validate(3));
    t.log_power = 1.0;
    CHECK_THROWS_AS(t.validate(3), std::invalid_argument);
    TailModel power;
    power.beta = 2.0;
    const Seq s = Seq({1.0, 0.5}).with_tail(power, 1);
    CHECK(s.tail_model().has_value());
    CHECK_THROWS_AS(Seq({1.0})[3], std::out_of_range);
    CHECK(Seq::finite({1.0})[3] == 0.0);
}
