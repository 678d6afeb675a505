#include "ntklab/error.hpp"
#include "ntklab/kernel_flow.hpp"
#include "ntklab/random.hpp"
#include "ntklab/sampling.hpp"

#include <doctest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

using namespace ntklab;
using namespace ntklab::flow;

namespace {

struct Instance {
    ntk::PointSet X;
    Eigen::VectorXd y;
    CrossKernel k;
};

Instance instance(int d, int n, std::uint64_t seed)
{
    Instance in;
    in.X = sampling::sample(sampling::parse_distribution("ucube", d, seed), n);
    Rng rng(seed + 1);
    std::normal_distribution<double> g(0.0, 1.0);
    in.y.resize(n);
    for (int i = 0; i < n; ++i)
        in.y(i) = g(rng);
    in.k = cross_kernel(ntk::NtkDescriptor::full(2));
    return in;
}

// K(x, X) K^{-1} (I - exp(-K t / n)) y, through the matrix exponential.
Eigen::VectorXd expm_oracle(const Instance& in, const ntk::PointSet& Xq, double t)
{
    const Eigen::MatrixXd K = in.k(in.X, in.X);
    const double n = static_cast<double>(in.X.cols());
    const Eigen::MatrixXd E = (-K * (t / n)).exp();
    const Eigen::VectorXd c = K.lu().solve(in.y - E * in.y);
    return in.k(Xq, in.X) * c;
}

} // namespace

TEST_CASE("flow predictor matches the matrix exponential")
{
    for (int n : {5, 12, 20}) {
        const auto in = instance(2, n, 100 + n);
        const auto Xq = sampling::sample(sampling::parse_distribution("ucube", 2, 7), 15);
        const auto pred = FlowPredictor::fit(in.k, in.X, in.y);
        for (double t : {0.3, 5.0, 80.0, 2000.0}) {
            const Eigen::VectorXd a = pred.with_time(t).predict(Xq);
            const Eigen::VectorXd b = expm_oracle(in, Xq, t);
            CHECK((a - b).norm() <= 1e-8 * b.norm());
        }
    }
}

TEST_CASE("training residual is the exponential envelope")
{
    const auto in = instance(3, 10, 4);
    const auto pred = FlowPredictor::fit(in.k, in.X, in.y);
    const Eigen::MatrixXd K = in.k(in.X, in.X);
    double prev = in.y.norm();
    for (double t : {0.0, 0.5, 2.0, 10.0, 50.0, 400.0}) {
        const auto p = pred.with_time(t);
        const Eigen::VectorXd exact = (-K * (t / 10.0)).exp() * in.y;
        CHECK(std::abs(p.train_residual() - exact.norm()) <= 1e-10 * in.y.norm());
        CHECK((p.train_predictions() - in.y + exact).norm() <= 1e-10 * in.y.norm());
        CHECK(p.train_residual() <= std::exp(-pred.lambda_min() * t / 10.0) * in.y.norm() * (1 + 1e-12));
        CHECK(p.train_residual() <= prev * (1 + 1e-14));
        prev = p.train_residual();
    }
}

TEST_CASE("time limits")
{
    const auto in = instance(2, 8, 9);
    const auto pred = FlowPredictor::fit(in.k, in.X, in.y);
    CHECK(pred.time() == 0.0);
    CHECK(pred.predict(in.X).isZero(0.0));
    CHECK(pred.predict(ntk::PointRef(in.X.col(3))) == 0.0);
    const auto late = pred.with_time(1e12);
    CHECK((late.predict(in.X) - in.y).norm() < 1e-8 * in.y.norm());
    CHECK(late.train_residual() < 1e-8 * in.y.norm());
    CHECK_THROWS_AS(pred.with_time(-1.0), std::invalid_argument);
    CHECK(pred.filter(2.0) == 0.0);
    CHECK(pred.with_time(4.0).filter(2.0) == doctest::Approx((1 - std::exp(-1.0)) / 2.0));
    CHECK_THROWS_WITH(pred.filter(0.0), "Gram not PD");
    CHECK(pred.n() == 8);
    for (Eigen::Index i = 1; i < pred.eigenvalues().size(); ++i)
        CHECK(pred.eigenvalues()(i) <= pred.eigenvalues()(i - 1));
}

TEST_CASE("predictor solves the flow equation")
{
    const auto in = instance(2, 9, 13);
    const auto pred = FlowPredictor::fit(in.k, in.X, in.y);
    const auto Xq = sampling::sample(sampling::parse_distribution("ucube", 2, 3), 6);
    const Eigen::MatrixXd Kq = in.k(Xq, in.X);
    for (double t : {0.5, 3.0, 20.0}) {
        const double h = 1e-4 * t;
        const Eigen::VectorXd fd =
            (pred.with_time(t + h).predict(Xq) - pred.with_time(t - h).predict(Xq)) / (2 * h);
        const auto p = pred.with_time(t);
        const Eigen::VectorXd rhs = -Kq * (p.train_predictions() - in.y) / 9.0;
        CHECK((fd - rhs).norm() <= 1e-6 * rhs.norm());
    }
}

TEST_CASE("projected prediction agrees with direct prediction")
{
    const auto in = instance(2, 15, 21);
    const auto pred = FlowPredictor::fit(in.k, in.X, in.y, 7.0);
    const auto Xq = sampling::sample(sampling::parse_distribution("ucube", 2, 22), 10);
    CHECK((pred.predict_projected(pred.project(Xq)) - pred.predict(Xq)).norm() < 1e-12 * pred.predict(Xq).norm());
    CHECK((in.k(Xq, in.X) * pred.coefficients() - pred.predict(Xq)).norm() < 1e-12);
    CHECK_THROWS_AS(pred.predict_projected(Eigen::MatrixXd::Zero(3, 4)), std::invalid_argument);
    CHECK(pred.as_function()(Xq) == pred.predict(Xq));
}

TEST_CASE("singular Gram matrices are rejected")
{
    auto in = instance(2, 6, 30);
    in.X.col(5) = in.X.col(1);
    CHECK_THROWS_WITH_AS(FlowPredictor::fit(in.k, in.X, in.y), doctest::Contains("Gram not PD"), NumericalError);
    CHECK_THROWS_AS(FlowPredictor::fit(in.k, in.X, Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("stopping times")
{
    CHECK(optimal_stopping_time(256, 1, 1.0, 1.0) == doctest::Approx(std::pow(256.0, 2.0 / 3.0)));
    CHECK(optimal_stopping_time(256, 1, 1.0, 1.0) == doctest::Approx(40.3175).epsilon(1e-5));
    CHECK(stopping_exponent(1, 2.0) < stopping_exponent(1, 1.0));
    CHECK(risk_exponent(1, 1.0) == doctest::Approx(2.0 / 3.0));
    CHECK_THROWS_WITH(stopping_exponent(2, 0.3), doctest::Contains("smoothness below threshold"));
    CHECK_THROWS_AS(optimal_stopping_time(0.5, 1, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(optimal_stopping_time(10, 1, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("truncation")
{
    CHECK(truncate(5.0, 2.0) == 2.0);
    CHECK(truncate(-0.5, 2.0) == -0.5);
    CHECK(truncate(-7.0, 3.0) == -3.0);
    CHECK_THROWS_AS(truncate(1.0, 0.0), std::invalid_argument);
    Eigen::VectorXd v(3);
    v << 4, -4, 0.25;
    CHECK(truncate(v, 1.0) == Eigen::Vector3d(1, -1, 0.25));
}

TEST_CASE("candidate grid")
{
    CHECK(candidate_grid(1.0) == std::vector<double>{1.0});
    CHECK(candidate_grid(256.0) == std::vector<double>{1, 2, 4, 8, 16, 32, 64, 128, 256});
    CHECK(candidate_grid(100.0, 3.0) == std::vector<double>{1, 3, 9, 27, 81});
    CHECK_THROWS_AS(candidate_grid(10.0, 1.0), std::invalid_argument);
}

TEST_CASE("holdout selection")
{
    // noiseless task: interpolation wins
    auto in = instance(1, 10, 40);
    const auto fstar = [&](const ntk::PointSet& X) { return Eigen::VectorXd(X.row(0).transpose().array().sin()); };
    in.y = fstar(in.X);
    const auto pred = FlowPredictor::fit(in.k, in.X, in.y);
    const auto Xh = sampling::sample(sampling::parse_distribution("ucube", 1, 41), 50);
    const Eigen::VectorXd yh = fstar(Xh);
    const double small = 0.01, huge = 1e6;
    const auto res = cv_select_stopping(pred, {huge, small}, Xh, yh, 10.0);
    const double r_small = (truncate(pred.with_time(small).predict(Xh), 10.0) - yh).squaredNorm() / 50;
    const double r_huge = (truncate(pred.with_time(huge).predict(Xh), 10.0) - yh).squaredNorm() / 50;
    CHECK(r_huge < r_small);
    CHECK(res.t_cv == huge);
    CHECK(res.candidates == std::vector<double>{small, huge});
    CHECK(res.holdout_risk[1] == doctest::Approx(r_huge));
    CHECK(res.predictor.time() == huge);

    CHECK(cv_select_stopping(pred, {3.0}, Xh, yh, 1.0).t_cv == 3.0);

    // predictions below the resolution of the targets tie exactly: the smallest time wins
    const Eigen::VectorXd big = Eigen::VectorXd::Constant(50, 100.0);
    const auto tie = cv_select_stopping(pred, {1e-290, 1e-300, 1e-295}, Xh, big, 10.0);
    CHECK(tie.holdout_risk[0] == tie.holdout_risk[2]);
    CHECK(tie.t_cv == 1e-300);

    CHECK(res.predict(Xh).cwiseAbs().maxCoeff() <= 10.0);
    CHECK_THROWS_AS(cv_select_stopping(pred, {}, Xh, yh, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(cv_select_stopping(pred, {1.0}, Xh, yh, 0.0), std::invalid_argument);
}

TEST_CASE("risk functionals")
{
    const auto X = sampling::sample(sampling::parse_distribution("ucube", 2, 1), 100);
    const BatchFn zero = [](const ntk::PointSet& P) { return Eigen::VectorXd::Zero(P.cols()); };
    const BatchFn one = [](const ntk::PointSet& P) { return Eigen::VectorXd::Ones(P.cols()); };
    CHECK(l2_risk(one, one, X) == 0.0);
    CHECK(sup_risk(one, one, X) == 0.0);
    CHECK(l2_risk(zero, one, X) == 1.0);
    CHECK(l2_risk(zero, one, sampling::parse_distribution("ucube", 2), 64, 5) == 1.0);
    CHECK(sup_risk(zero, one, X) == 1.0);
    CHECK_THROWS_AS(l2_risk(zero, one, ntk::PointSet(2, 0)), std::invalid_argument);
}

TEST_CASE("RKHS targets")
{
    const auto k = cross_kernel(ntk::NtkDescriptor::full(2));
    const auto f = make_rkhs_target(k, sampling::parse_distribution("ucube", 2), 5, 0.5, 999);
    const auto g = make_rkhs_target(k, sampling::parse_distribution("ucube", 2), 5, 0.5, 999);
    CHECK(f.alpha == g.alpha);
    CHECK(f.centers == g.centers);
    const Eigen::MatrixXd Kc = k(f.centers, f.centers);
    CHECK(f.rkhs_norm() == doctest::Approx(std::sqrt(f.alpha.dot(Kc * f.alpha))));
    CHECK((f(f.centers) - Kc * f.alpha).norm() < 1e-12);
    CHECK_THROWS_AS(make_rkhs_target(k, sampling::parse_distribution("ucube", 2), 0, 1.0, 1), std::invalid_argument);
}

TEST_CASE("holdout risk is U-shaped on noisy tasks")
{
    const auto k = cross_kernel(ntk::NtkDescriptor::full(2));
    const auto dist = sampling::parse_distribution("ucube", 1);
    const auto f = make_rkhs_target(k, dist, 5, 0.5, 999);
    std::vector<double> times;
    for (int i = 0; i <= 16; ++i)
        times.push_back(std::pow(10.0, -1.0 + 0.5 * i));
    int interior = 0;
    for (int run = 0; run < 50; ++run) {
        Rng rng = make_rng(77, "u-shape", run);
        const auto X = sampling::sample(dist, 64, rng);
        const auto Xh = sampling::sample(dist, 200, rng);
        std::normal_distribution<double> g(0.0, 0.3);
        Eigen::VectorXd y = f(X), yh = f(Xh);
        for (auto& v : y)
            v += g(rng);
        for (auto& v : yh)
            v += g(rng);
        const auto pred = FlowPredictor::fit(k, X, y);
        const Eigen::MatrixXd KU = pred.project(Xh);
        std::size_t best = 0;
        std::vector<double> risk;
        for (double t : times) {
            risk.push_back((pred.with_time(t).predict_projected(KU) - yh).squaredNorm());
            if (risk.back() < risk[best])
                best = risk.size() - 1;
        }
        interior += best > 0 && best + 1 < times.size();
    }
    CHECK(interior >= 40);
}
