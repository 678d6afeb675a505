#include "ntklab/ntk_kernels.hpp"
#include "ntklab/random.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace ntklab;
using namespace ntklab::ntk;

namespace {

constexpr double pi = std::numbers::pi;

PointSet uniform_points(int d, int n, std::uint64_t seed)
{
    Rng rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    PointSet X(d, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < d; ++i)
            X(i, j) = u(rng);
    return X;
}

// Profile from its defining recursion, written against kappa0 / kappa1.
double profile_oracle(int L, double u)
{
    std::vector<double> k1{u};
    for (int s = 0; s < L; ++s)
        k1.push_back(kappa1(k1.back()));
    double total = 0.0;
    for (int r = 0; r <= L; ++r) {
        double prod = k1[r];
        for (int s = r; s < L; ++s)
            prod *= kappa0(k1[s]);
        total += prod;
    }
    return total;
}

Eigen::VectorXd eigenvalues_desc(const Eigen::MatrixXd& M)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    return es.eigenvalues().reverse();
}

} // namespace

TEST_CASE("arc-cosine kernels")
{
    CHECK(kappa0(1.0) == 1.0);
    CHECK(kappa1(1.0) == 1.0);
    CHECK(kappa0(0.0) == doctest::Approx(0.5));
    CHECK(kappa1(0.0) == doctest::Approx(1.0 / pi));
    CHECK(kappa0(-1.0) == 0.0);
    CHECK(kappa1(-1.0) == 0.0);
    CHECK(kappa0(1.0 + 5e-10) == 1.0);
    CHECK_THROWS_WITH(kappa0(1.0 + 1e-8), "argument out of range");
    CHECK_THROWS_WITH(kappa1(-1.0 - 1e-8), "argument out of range");
    CHECK_THROWS_AS(kappa1(std::nan("")), std::domain_error);
    for (int i = 0; i <= 200; ++i) {
        const double u = -1.0 + 0.01 * i;
        CHECK(kappa0(u) >= 0.0);
        CHECK(kappa0(u) <= 1.0);
        CHECK(kappa1(u) >= 0.0);
        CHECK(kappa1(u) <= 1.0 + 1e-15);
    }
}

TEST_CASE("power series of the arc-cosine kernels")
{
    // arcsin u = sum_k c_k u^{2k+1}; kappa0 = 1/2 + arcsin(u)/pi and
    // kappa1 - 1/pi - u/2 = (1/pi) sum_k c_k u^{2k+2} / (2k+2)
    const double u = 0.3;
    double s0 = 0.0, s1 = 0.0, c = 1.0;
    for (int k = 0; k < 40; ++k) {
        if (k > 0)
            c *= (2.0 * k - 1.0) / (2.0 * k);
        const double ck = c / (2 * k + 1);
        s0 += ck * std::pow(u, 2 * k + 1);
        s1 += ck * std::pow(u, 2 * k + 2) / (2 * k + 2);
    }
    CHECK(std::abs(kappa0(u) - (0.5 + s0 / pi)) < 1e-10);
    CHECK(std::abs(kappa1(u) - (1.0 / pi + u / 2 + s1 / pi)) < 1e-10);
    // even part only
    CHECK(std::abs((kappa1(u) - 1.0 / pi - u / 2) - (kappa1(-u) - 1.0 / pi + u / 2)) < 1e-14);
}

TEST_CASE("homogeneous profile")
{
    for (int L = 1; L <= 5; ++L)
        CHECK(homogeneous_profile(L, 1.0) == doctest::Approx(L + 1.0).epsilon(1e-14));
    CHECK(homogeneous_profile(1, 0.0) == doctest::Approx(1.0 / pi));
    CHECK(ntk_profile(NtkDescriptor::homogeneous(3), 1.0) == doctest::Approx(4.0));
    CHECK_THROWS_AS(ntk_profile(NtkDescriptor::full(2), 0.5), std::invalid_argument);

    for (int L = 1; L <= 3; ++L) {
        double prev = -1.0;
        for (int i = 0; i <= 200; ++i) {
            const double u = -1.0 + 0.01 * i;
            const double v = homogeneous_profile(L, u);
            CHECK(v == doctest::Approx(profile_oracle(L, u)).epsilon(1e-12));
            // the u * kappa0 term makes the profile dip near u = -1
            if (u >= 0.0)
                CHECK(v > prev);
            prev = v;
        }
    }
    for (int L = 1; L <= 4; ++L)
        for (double th : {1e-9, 1e-6, 1e-3, 0.5, 2.0, pi})
            CHECK(homogeneous_profile_angle(L, th) ==
                  doctest::Approx(profile_oracle(L, std::cos(th))).epsilon(1e-8));
    CHECK_THROWS_AS(homogeneous_profile(0, 0.3), std::invalid_argument);
}

TEST_CASE("descriptors")
{
    CHECK_THROWS_AS(NtkDescriptor::full(0), std::invalid_argument);
    NtkDescriptor bad{2, true, Variant::homogeneous};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK_FALSE(NtkDescriptor::homogeneous(2).include_bias_constant);
    CHECK(NtkDescriptor::full(1).include_bias_constant);
}

TEST_CASE("sphere lift")
{
    const PointSet X = uniform_points(3, 20, 4) * 3.0;
    for (int j = 0; j < X.cols(); ++j) {
        const auto p = LiftedPoint::lift(X.col(j));
        CHECK(std::abs(p.y.norm() - 1.0) < 1e-12);
        CHECK(p.y(3) > 0.0);
        CHECK(p.norm_tilde == doctest::Approx(std::sqrt(X.col(j).squaredNorm() + 1.0)));
        CHECK(p.x_tilde(3) == 1.0);
        CHECK((sphere_lift(X.col(j)) - p.y).norm() == 0.0);
    }
}

TEST_CASE("full NTK evaluation")
{
    const auto full = NtkDescriptor::full(2);
    for (int d : {1, 3, 6})
        CHECK(ntk_eval(full, Point::Zero(d), Point::Zero(d)) == doctest::Approx(4.0));

    const PointSet X = uniform_points(3, 30, 8);
    for (int j = 0; j + 1 < X.cols(); ++j) {
        const auto a = X.col(j), b = X.col(j + 1);
        CHECK(ntk_eval(full, a, b) == ntk_eval(full, b, a));
        const auto la = LiftedPoint::lift(a), lb = LiftedPoint::lift(b);
        const double u = la.y.dot(lb.y);
        CHECK(ntk_eval(full, a, b) - 1.0 ==
              doctest::Approx(la.norm_tilde * lb.norm_tilde * profile_oracle(2, u)).epsilon(1e-12));
        CHECK(ntk_eval(NtkDescriptor::full(2, false), a, b) == doctest::Approx(ntk_eval(full, a, b) - 1.0));
    }
    CHECK_THROWS_AS(ntk_eval(NtkDescriptor::homogeneous(2), X.col(0), X.col(1)), std::invalid_argument);
}

TEST_CASE("profile and evaluation agree on the sphere")
{
    const auto K0 = make_kernel(NtkDescriptor::homogeneous(3));
    const PointSet X = uniform_points(4, 12, 10);
    for (int j = 0; j + 1 < X.cols(); ++j) {
        const Point a = X.col(j).normalized(), b = X.col(j + 1).normalized();
        CHECK(std::abs(K0(a, b) - homogeneous_profile(3, a.dot(b))) < 1e-12);
    }
}

TEST_CASE("kernel algebra reproduces the full NTK")
{
    const auto full = NtkDescriptor::full(3);
    const PointSet X = uniform_points(2, 25, 12);
    const Kernel lifted = pullback_kernel(make_kernel(NtkDescriptor::homogeneous(3)),
                                          [](PointRef x) { return sphere_lift(x); });
    const Kernel scaled =
        scaled_kernel(lifted, [](PointRef x) { return std::sqrt(x.squaredNorm() + 1.0); });
    const Kernel with_bias = sum_kernel(scaled, [](PointRef, PointRef) { return 1.0; });
    const auto G = gram(full, X).entries();
    const auto H = gram(with_bias, X).entries();
    CHECK((G - H).cwiseAbs().maxCoeff() < 1e-12);

    const Kernel same = scaled_kernel(make_kernel(full), [](PointRef) { return 1.0; });
    CHECK((gram(same, X).entries() - G).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("scale sandwich and Weyl bound on Gram matrices")
{
    const auto desc = NtkDescriptor::full(2);
    const PointSet X = uniform_points(3, 30, 14);
    const Kernel k = make_kernel(desc);
    const Kernel rk = scaled_kernel(k, [](PointRef x) { return 1.0 + 0.5 * std::tanh(x(0)); });
    const auto lk = gram(k, X).eigenvalues();
    const auto lr = gram(rk, X).eigenvalues();
    double c = 1e300, C = 0.0;
    for (int j = 0; j < X.cols(); ++j) {
        const double r = 1.0 + 0.5 * std::tanh(X(0, j));
        c = std::min(c, r * r);
        C = std::max(C, r * r);
    }
    for (int i = 0; i < lk.size(); ++i) {
        CHECK(lr(i) >= c * lk(i) * (1 - 1e-10));
        CHECK(lr(i) <= C * lk(i) * (1 + 1e-10));
    }

    const Eigen::MatrixXd A = gram(desc, X).entries();
    const Eigen::MatrixXd B = gram(NtkDescriptor::full(4), X).entries();
    const auto la = eigenvalues_desc(A), lb = eigenvalues_desc(B), lab = eigenvalues_desc(A + B);
    const int n = static_cast<int>(la.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; i + j < n; ++j)
            CHECK(lab(i + j) <= la(i) + lb(j) + 1e-9 * lab(0));
}

TEST_CASE("Gram assembly")
{
    const auto desc = NtkDescriptor::full(2);
    const PointSet one = uniform_points(3, 1, 2);
    const auto K1 = gram(desc, one);
    CHECK(K1.size() == 1);
    CHECK(K1.entries()(0, 0) == doctest::Approx(ntk_eval(desc, one.col(0), one.col(0))));
    CHECK(K1.entries()(0, 0) > 0.0);

    const PointSet X = uniform_points(3, 50, 3);
    const auto K = gram(desc, X);
    CHECK(K.entries() == K.entries().transpose());
    CHECK(K.check_positive_definite());
    CHECK(K.positive_definite() == true);
    CHECK(K.lambda_max() >= K.lambda_min());
    const auto& V = K.eigenvectors();
    CHECK((V.transpose() * V - Eigen::MatrixXd::Identity(50, 50)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((V * K.eigenvalues().asDiagonal() * V.transpose() - K.entries()).cwiseAbs().maxCoeff() < 1e-9);
    for (int j = 0; j < 50; j += 7)
        for (int i = 0; i < 50; i += 5)
            CHECK(K.entries()(i, j) == doctest::Approx(ntk_eval(desc, X.col(i), X.col(j))).epsilon(1e-12));

    const PointSet B = uniform_points(3, 7, 5);
    const auto C = cross_gram(desc, X, B);
    CHECK(C.rows() == 50);
    CHECK(C.cols() == 7);
    CHECK(C(4, 2) == doctest::Approx(ntk_eval(desc, X.col(4), B.col(2))).epsilon(1e-12));

    PointSet dup = X.leftCols(10);
    dup.col(9) = dup.col(3);
    const auto D = gram(desc, dup);
    CHECK(std::abs(D.lambda_min()) < 1e-8 * D.trace());

    PointSet bad = X.leftCols(3);
    bad(1, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_WITH(gram(desc, bad), "non-finite input coordinates");
    CHECK_THROWS_AS(gram(NtkDescriptor::homogeneous(2), X), std::invalid_argument);
    CHECK_THROWS_AS(KernelMatrix(Eigen::MatrixXd::Random(3, 3)), std::invalid_argument);
}

TEST_CASE("nearly coincident inputs stay positive definite")
{
    PointSet X = uniform_points(1, 40, 21);
    X(0, 39) = X(0, 5) + 1e-7;
    X(0, 38) = X(0, 6) - 3e-8;
    const auto K = gram(NtkDescriptor::full(2), X);
    CHECK(K.lambda_min() > 0.0);
}

TEST_CASE("positive definiteness on random configurations")
{
    for (int d = 1; d <= 3; ++d)
        for (int rep = 0; rep < 5; ++rep) {
            const auto K = gram(NtkDescriptor::full(2), uniform_points(d, 200, 100 * d + rep));
            CHECK(K.lambda_min() > 0.0);
        }
}

TEST_CASE("Gram CSV")
{
    const auto K = gram(NtkDescriptor::full(2), uniform_points(2, 3, 1));
    std::ostringstream os;
    write_gram_csv(K, {2, 2, 77}, os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "# d=2 L=2 n=3 seed=77");
    int rows = 0;
    while (std::getline(is, line)) {
        ++rows;
        CHECK(std::count(line.begin(), line.end(), ',') == 2);
    }
    CHECK(rows == 3);
}
