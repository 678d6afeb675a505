#include "ntklab/mirrored_network.hpp"
#include "ntklab/random.hpp"
#include "ntklab/sampling.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace ntklab;
using namespace ntklab::net;

namespace {

ntk::PointSet points(int d, int n, std::uint64_t seed)
{
    return sampling::sample(sampling::parse_distribution("ucube", d, seed), n);
}

Eigen::VectorXd targets(const ntk::PointSet& X)
{
    return (X.colwise().sum().array() * 1.5).sin().transpose();
}

} // namespace

TEST_CASE("mirrored initialization outputs zero")
{
    const auto s = init_network(3, 2, 128, 5);
    const auto X = points(3, 40, 1);
    CHECK(forward(s, X).cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.params[0].W[1] == s.params[1].W[1]);
    CHECK(s.params[0].W[0] == s.init[0].W[0]);
    CHECK(s.layer_sizes() == std::vector<int>{4, 128, 128, 1});
    CHECK(s.parameter_count() == 2 * (128 * 4 + 128 * 128 + 128 + 1));
    CHECK(flatten_parameters(s).size() == static_cast<Eigen::Index>(s.parameter_count()));
    CHECK_THROWS_AS(init_network(3, 2, std::vector<int>{5}, 1), std::invalid_argument);
    CHECK_THROWS_AS(init_network(0, 2, 5, 1), std::invalid_argument);
}

TEST_CASE("initialization is deterministic")
{
    const auto a = init_network(2, 3, 32, 11);
    const auto b = init_network(2, 3, 32, 11);
    const auto c = init_network(2, 3, 32, 12);
    CHECK(flatten_parameters(a) == flatten_parameters(b));
    CHECK(flatten_parameters(a) != flatten_parameters(c));
}

TEST_CASE("Gaussian weight blocks have spectral norm below 3 sqrt(m)")
{
    const int m = 512;
    const auto s = init_network(2, 2, m, 3);
    const Eigen::MatrixXd& W = s.params[0].W[1];
    const double top = Eigen::JacobiSVD<Eigen::MatrixXd>(W).singularValues()(0);
    CHECK(top <= 3.0 * std::sqrt(m));
    CHECK(top >= 1.5 * std::sqrt(m));
}

TEST_CASE("tangent kernel matches the flattened gradient")
{
    const auto s0 = init_network(2, 2, 64, 8);
    auto s = s0;
    const auto X = points(2, 6, 2);
    // move away from the mirrored point so both parities differ
    train(s, X, targets(X), 0.5, 20, {});
    const auto A = points(2, 4, 9);
    const Eigen::MatrixXd K = tangent_kernel(s, A, A);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            const double oracle = flat_gradient(s, A.col(i)).dot(flat_gradient(s, A.col(j)));
            CHECK(K(i, j) == doctest::Approx(oracle).epsilon(1e-10));
            CHECK(K(i, j) == doctest::Approx(K(j, i)).epsilon(1e-12));
        }
    for (int i = 0; i < 4; ++i)
        CHECK(K(i, i) >= 0.0);
    CHECK(tangent_kernel(s, ntk::PointRef(A.col(1)), ntk::PointRef(A.col(2))) == doctest::Approx(K(1, 2)));
}

TEST_CASE("gradient agrees with finite differences")
{
    auto s = init_network(2, 2, 16, 4);
    const auto X = points(2, 5, 3);
    train(s, X, targets(X), 0.3, 10, {});
    const Eigen::VectorXd x = points(2, 1, 7).col(0);
    const Eigen::VectorXd theta = flatten_parameters(s);
    const Eigen::VectorXd g = flat_gradient(s, x);
    Rng rng(5);
    std::uniform_int_distribution<Eigen::Index> pick(0, theta.size() - 1);
    const double h = 1e-6;
    for (int trial = 0; trial < 40; ++trial) {
        const Eigen::Index k = pick(rng);
        auto up = s, down = s;
        Eigen::VectorXd tu = theta, td = theta;
        tu(k) += h;
        td(k) -= h;
        set_parameters(up, tu);
        set_parameters(down, td);
        const double fd = (forward(up, ntk::PointRef(x)) - forward(down, ntk::PointRef(x))) / (2 * h);
        CHECK(std::abs(fd - g(k)) <= 1e-6 * std::max(1.0, std::abs(g(k))));
    }
    CHECK_THROWS_AS(set_parameters(s, Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("small steps descend")
{
    auto s = init_network(1, 2, 256, 21);
    const auto X = points(1, 16, 4);
    const auto y = targets(X);
    const double eta = 0.5 * stable_step_size(s, X);
    ProbeConfig probes;
    probes.log_every = 1;
    const auto trace = train(s, X, y, eta, 200, probes);
    REQUIRE(trace.train_residuals.size() == 201);
    CHECK(trace.train_residuals.front() == doctest::Approx(y.norm()));
    int ok = 0;
    for (std::size_t i = 1; i < trace.train_residuals.size(); ++i)
        ok += trace.train_residuals[i] <= trace.train_residuals[i - 1] * (1 + 1e-12);
    CHECK(ok == 200);
    int descent = 0;
    for (std::size_t i = 1; i < trace.step_losses.size(); ++i)
        descent += trace.step_losses[i] < trace.step_losses[i - 1];
    CHECK(descent >= 0.95 * 200);
    CHECK(trace.times[10] == doctest::Approx(10 * eta));
    CHECK(trace.weight_drifts.front() == std::vector<double>(3, 0.0));
    CHECK(trace.weight_drifts.back()[1] > 0.0);
}

TEST_CASE("kernel and predictor gaps")
{
    const int d = 1;
    auto s = init_network(d, 2, 128, 2);
    const auto X = points(d, 8, 5);
    const auto y = targets(X);
    const auto ntk_flow = flow::FlowPredictor::fit(flow::cross_kernel(ntk::NtkDescriptor::full(2)), X, y);
    ProbeConfig probes;
    probes.grid = probe_grid(d);
    probes.log_every = 5;
    probes.kernel_gap = true;
    probes.ntk_flow = &ntk_flow;
    const double eta = stable_step_size(s, X);
    const auto trace = train(s, X, y, eta, 50, probes);
    REQUIRE(trace.times.size() == 11);
    CHECK(trace.predictor_gaps.front() == 0.0);
    CHECK(trace.kernel_gaps.size() == trace.times.size());
    CHECK(uniform_gap(trace, ntk_flow, probes.grid, {0.0}) == 0.0);
    CHECK(uniform_gap(trace, ntk_flow, probes.grid, {trace.times[4]}) == doctest::Approx(trace.predictor_gaps[4]));
    CHECK_THROWS_WITH_AS(uniform_gap(trace, ntk_flow, probes.grid, {0.37 * eta}), doctest::Contains("time misalignment"),
                         std::invalid_argument);

    std::ostringstream os;
    write_trace_csv(trace, os);
    CHECK(os.str().rfind("t,residual,drift_l0,drift_l1,drift_l2,kernel_gap,predictor_gap\n", 0) == 0);
}

TEST_CASE("probe grid")
{
    CHECK(probe_grid(1).cols() == 5);
    CHECK(probe_grid(2).cols() == 25);
    CHECK(probe_grid(4).cols() == 625);
    CHECK(probe_grid(6).cols() <= 625);
    CHECK(probe_grid(2, 0.5).cwiseAbs().maxCoeff() == 0.5);
    CHECK_THROWS_AS(probe_grid(0), std::invalid_argument);
}

TEST_CASE("oversized steps diverge with a partial trace")
{
    auto s = init_network(2, 2, 64, 1);
    const auto X = points(2, 10, 6);
    const double eta = 50.0 * stable_step_size(s, X);
    try {
        train(s, X, targets(X), eta, 500, {});
        FAIL("expected divergence");
    } catch (const TrainingDiverged& e) {
        CHECK(e.step < 500);
        CHECK(!e.trace.times.empty());
        CHECK(std::string(e.what()).find("training diverged") != std::string::npos);
    }
    CHECK_THROWS_AS(train(s, X, targets(X), 0.0, 10, {}), std::invalid_argument);
}

TEST_CASE("checkpoint round trip")
{
    auto s = init_network(3, 2, std::vector<int>{7, 5}, 17);
    const auto X = points(3, 6, 1);
    train(s, X, targets(X), 0.2, 5, {});
    std::stringstream io;
    write_checkpoint(s, io);
    const auto r = read_checkpoint(io);
    CHECK(r.widths == s.widths);
    CHECK(r.seed == 17);
    CHECK(flatten_parameters(r) == flatten_parameters(s));
    CHECK(r.init[1].W[2] == s.init[1].W[2]);
    CHECK(forward(r, X) == forward(s, X));

    std::istringstream bad("hello world");
    CHECK_THROWS(read_checkpoint(bad));
    std::string text = io.str();
    std::istringstream cut(text.substr(0, text.size() / 2));
    CHECK_THROWS(read_checkpoint(cut));
}
