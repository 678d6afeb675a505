#include "ntklab/mirrored_network.hpp"

#include "ntklab/random.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace ntklab::net {

int NetworkState::min_width() const
{
    return *std::min_element(widths.begin(), widths.end());
}

std::vector<int> NetworkState::layer_sizes() const
{
    std::vector<int> m{d + 1};
    m.insert(m.end(), widths.begin(), widths.end());
    m.push_back(1);
    return m;
}

std::size_t NetworkState::parameter_count() const
{
    std::size_t c = 0;
    for (const auto& W : params[0].W)
        c += static_cast<std::size_t>(W.size());
    return 2 * (c + 1);
}

NetworkState init_network(int d, int layers, const std::vector<int>& widths, std::uint64_t seed)
{
    if (d < 1 || layers < 1)
        throw std::invalid_argument("network needs d >= 1 and L >= 1");
    if (static_cast<int>(widths.size()) != layers)
        throw std::invalid_argument("network needs one width per hidden layer");
    for (int m : widths)
        if (m < 1)
            throw std::invalid_argument("network widths must be >= 1");

    NetworkState s;
    s.d = d;
    s.layers = layers;
    s.widths = widths;
    s.seed = seed;
    const auto m = s.layer_sizes();
    Rng rng = make_rng(seed, "init");
    std::normal_distribution<double> gauss(0.0, 1.0);
    Parity& p = s.params[0];
    for (int l = 0; l <= layers; ++l) {
        Eigen::MatrixXd W(m[static_cast<std::size_t>(l + 1)], m[static_cast<std::size_t>(l)]);
        for (Eigen::Index i = 0; i < W.rows(); ++i)
            for (Eigen::Index j = 0; j < W.cols(); ++j)
                W(i, j) = gauss(rng);
        p.W.push_back(std::move(W));
    }
    p.b = gauss(rng);
    s.params[1] = p;
    s.init = s.params;
    return s;
}

NetworkState init_network(int d, int layers, int width, std::uint64_t seed)
{
    return init_network(d, layers, std::vector<int>(static_cast<std::size_t>(std::max(layers, 0)), width), seed);
}

namespace {

Eigen::MatrixXd lift_columns(const ntk::PointSet& X, int d)
{
    if (X.rows() != d)
        throw std::invalid_argument("network input has the wrong dimension");
    Eigen::MatrixXd A(d + 1, X.cols());
    A.topRows(d) = X;
    A.row(d).setOnes();
    return A;
}

} // namespace

ParityPass forward_parity(const NetworkState& s, int parity, const ntk::PointSet& X, bool with_backward)
{
    const Parity& P = s.params[static_cast<std::size_t>(parity)];
    const int L = s.layers;
    ParityPass pass;
    pass.alpha.resize(static_cast<std::size_t>(L + 1));
    pass.pre.resize(static_cast<std::size_t>(L + 1));
    pass.alpha[0] = lift_columns(X, s.d);
    for (int l = 1; l <= L; ++l) {
        const auto ul = static_cast<std::size_t>(l);
        const double scale = std::sqrt(2.0 / s.widths[ul - 1]);
        pass.pre[ul] = P.W[ul - 1] * pass.alpha[ul - 1];
        pass.alpha[ul] = scale * pass.pre[ul].cwiseMax(0.0);
    }
    pass.g = (P.W[static_cast<std::size_t>(L)] * pass.alpha[static_cast<std::size_t>(L)]).array() + P.b;

    if (with_backward) {
        pass.delta.resize(static_cast<std::size_t>(L + 1));
        // W[L]^T times the unit output sensitivity, one column per sample
        Eigen::MatrixXd up = P.W[static_cast<std::size_t>(L)].transpose().replicate(1, X.cols());
        for (int l = L; l >= 1; --l) {
            const auto ul = static_cast<std::size_t>(l);
            const double scale = std::sqrt(2.0 / s.widths[ul - 1]);
            // relu'(0) is taken as 0
            pass.delta[ul] = scale * (pass.pre[ul].array() > 0.0).cast<double>() * up.array();
            if (l > 1)
                up = P.W[ul - 1].transpose() * pass.delta[ul];
        }
    }
    return pass;
}

Eigen::VectorXd forward(const NetworkState& s, const ntk::PointSet& X)
{
    const ParityPass a = forward_parity(s, 0, X, false);
    const ParityPass b = forward_parity(s, 1, X, false);
    return ((a.g - b.g) / std::numbers::sqrt2).transpose();
}

double forward(const NetworkState& s, ntk::PointRef x)
{
    const ntk::PointSet X = x;
    return forward(s, X)(0);
}

Eigen::MatrixXd tangent_kernel(const NetworkState& s, const ntk::PointSet& A, const ntk::PointSet& B)
{
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(A.cols(), B.cols());
    for (int p = 0; p < 2; ++p) {
        const ParityPass pa = forward_parity(s, p, A, true);
        const ParityPass pb = forward_parity(s, p, B, true);
        Eigen::MatrixXd Kp = Eigen::MatrixXd::Ones(A.cols(), B.cols());
        const auto uL = static_cast<std::size_t>(s.layers);
        Kp += pa.alpha[uL].transpose() * pb.alpha[uL];
        for (std::size_t l = 1; l <= uL; ++l)
            Kp.array() += (pa.delta[l].transpose() * pb.delta[l]).array() *
                          (pa.alpha[l - 1].transpose() * pb.alpha[l - 1]).array();
        K += 0.5 * Kp;
    }
    return K;
}

double tangent_kernel(const NetworkState& s, ntk::PointRef x, ntk::PointRef xp)
{
    const ntk::PointSet A = x;
    const ntk::PointSet B = xp;
    return tangent_kernel(s, A, B)(0, 0);
}

Eigen::VectorXd flatten_parameters(const NetworkState& s)
{
    Eigen::VectorXd theta(static_cast<Eigen::Index>(s.parameter_count()));
    Eigen::Index k = 0;
    for (const Parity& P : s.params) {
        for (const auto& W : P.W) {
            theta.segment(k, W.size()) = W.reshaped();
            k += W.size();
        }
        theta(k++) = P.b;
    }
    return theta;
}

void set_parameters(NetworkState& s, const Eigen::VectorXd& theta)
{
    if (theta.size() != static_cast<Eigen::Index>(s.parameter_count()))
        throw std::invalid_argument("parameter vector has the wrong length");
    Eigen::Index k = 0;
    for (Parity& P : s.params) {
        for (auto& W : P.W) {
            W.reshaped() = theta.segment(k, W.size());
            k += W.size();
        }
        P.b = theta(k++);
    }
}

Eigen::VectorXd flat_gradient(const NetworkState& s, ntk::PointRef x)
{
    const ntk::PointSet X = x;
    Eigen::VectorXd grad(static_cast<Eigen::Index>(s.parameter_count()));
    Eigen::Index k = 0;
    const auto uL = static_cast<std::size_t>(s.layers);
    for (int p = 0; p < 2; ++p) {
        const double sign = (p == 0 ? 1.0 : -1.0) / std::numbers::sqrt2;
        const ParityPass pass = forward_parity(s, p, X, true);
        for (std::size_t l = 0; l <= uL; ++l) {
            const Eigen::MatrixXd G = l < uL ? Eigen::MatrixXd(pass.delta[l + 1] * pass.alpha[l].transpose())
                                             : Eigen::MatrixXd(pass.alpha[uL].transpose());
            grad.segment(k, G.size()) = sign * G.reshaped();
            k += G.size();
        }
        grad(k++) = sign;
    }
    return grad;
}

std::array<std::vector<double>, 2> weight_drift(const NetworkState& s)
{
    std::array<std::vector<double>, 2> out;
    for (std::size_t p = 0; p < 2; ++p)
        for (std::size_t l = 0; l < s.params[p].W.size(); ++l)
            out[p].push_back((s.params[p].W[l] - s.init[p].W[l]).norm());
    return out;
}

double stable_step_size(const NetworkState& s, const ntk::PointSet& X)
{
    const ntk::KernelMatrix K(tangent_kernel(s, X, X));
    return static_cast<double>(X.cols()) / (2.0 * K.lambda_max());
}

namespace {

void log_entry(const NetworkState& s, const ProbeConfig& probes, double t, double residual, TrainTrace& trace)
{
    trace.times.push_back(t);
    trace.train_residuals.push_back(residual);
    const auto drift = weight_drift(s);
    std::vector<double> per_layer(drift[0].size());
    for (std::size_t l = 0; l < per_layer.size(); ++l)
        per_layer[l] = std::max(drift[0][l], drift[1][l]);
    trace.weight_drifts.push_back(std::move(per_layer));
    if (probes.grid.cols() == 0)
        return;
    const Eigen::VectorXd f = forward(s, probes.grid);
    if (probes.kernel_gap) {
        const int L = probes.ntk_layers > 0 ? probes.ntk_layers : s.layers;
        const Eigen::MatrixXd Kt = tangent_kernel(s, probes.grid, probes.grid);
        const Eigen::MatrixXd Knt = ntk::cross_gram(ntk::NtkDescriptor::full(L), probes.grid, probes.grid);
        trace.kernel_gaps.push_back((Kt - Knt).cwiseAbs().maxCoeff());
    }
    if (probes.ntk_flow)
        trace.predictor_gaps.push_back((f - probes.ntk_flow->with_time(t).predict(probes.grid)).cwiseAbs().maxCoeff());
    trace.probe_predictions.push_back(f);
}

} // namespace

TrainTrace train(NetworkState& s, const ntk::PointSet& X, const Eigen::VectorXd& y, double eta, int n_steps,
                 const ProbeConfig& probes)
{
    if (!(eta > 0.0))
        throw std::invalid_argument("step size must be positive");
    if (n_steps < 0)
        throw std::invalid_argument("step count must be nonnegative");
    if (X.cols() < 1 || X.cols() != y.size())
        throw std::invalid_argument("training set must be nonempty and consistent");
    if (probes.log_every < 1)
        throw std::invalid_argument("log_every must be >= 1");

    const double n = static_cast<double>(X.cols());
    const auto uL = static_cast<std::size_t>(s.layers);
    TrainTrace trace;
    std::vector<double> residuals;

    for (int k = 0;; ++k) {
        std::array<ParityPass, 2> pass{forward_parity(s, 0, X, k < n_steps), forward_parity(s, 1, X, k < n_steps)};
        const Eigen::VectorXd r = ((pass[0].g - pass[1].g) / std::numbers::sqrt2).transpose() - y;
        const double res = r.norm();
        residuals.push_back(res);
        trace.step_losses.push_back(r.squaredNorm() / (2.0 * n));
        if (k % probes.log_every == 0 || k == n_steps)
            log_entry(s, probes, k * eta, res, trace);

        const double ref = residuals[static_cast<std::size_t>(std::max(0, k - 100))];
        if (!std::isfinite(res) || res > 10.0 * ref) {
            std::ostringstream os;
            os << std::setprecision(6) << "training diverged at step " << k << " (t = " << k * eta
               << "): residual " << res << " vs " << ref << " 100 steps earlier; step size " << eta;
            if (trace.times.empty() || trace.times.back() != k * eta)
                log_entry(s, probes, k * eta, res, trace);
            throw TrainingDiverged(os.str(), std::move(trace), k);
        }
        if (k == n_steps)
            break;

        for (std::size_t p = 0; p < 2; ++p) {
            const double c = eta * (p == 0 ? 1.0 : -1.0) / (std::numbers::sqrt2 * n);
            Parity& P = s.params[p];
            const ParityPass& a = pass[p];
            for (std::size_t l = 1; l <= uL; ++l)
                P.W[l - 1].noalias() -= c * (a.delta[l] * r.asDiagonal()) * a.alpha[l - 1].transpose();
            P.W[uL].noalias() -= c * (a.alpha[uL] * r).transpose();
            P.b -= c * r.sum();
        }
    }
    return trace;
}

double uniform_gap(const TrainTrace& trace, const flow::FlowPredictor& ntk_flow, const ntk::PointSet& grid,
                   const std::vector<double>& times)
{
    if (trace.probe_predictions.size() != trace.times.size())
        throw std::invalid_argument("trace has no probe predictions");
    double gap = 0.0;
    for (double t : times) {
        std::size_t idx = trace.times.size();
        for (std::size_t i = 0; i < trace.times.size(); ++i)
            if (std::abs(trace.times[i] - t) <= 1e-9 * std::max(1.0, std::abs(t))) {
                idx = i;
                break;
            }
        if (idx == trace.times.size())
            throw std::invalid_argument("time misalignment: t not in the trace");
        const Eigen::VectorXd& f = trace.probe_predictions[idx];
        if (f.size() != grid.cols())
            throw std::invalid_argument("probe grid does not match the trace");
        gap = std::max(gap, (f - ntk_flow.with_time(trace.times[idx]).predict(grid)).cwiseAbs().maxCoeff());
    }
    return gap;
}

ntk::PointSet probe_grid(int d, double radius)
{
    if (d < 1)
        throw std::invalid_argument("probe grid needs d >= 1");
    constexpr long kCap = 625;
    int per_axis = 5;
    while (per_axis > 2 && std::pow(per_axis, d) > kCap)
        --per_axis;
    long total = 1;
    for (int i = 0; i < d && total <= std::numeric_limits<long>::max() / per_axis; ++i)
        total *= per_axis;
    const long count = std::min(total, kCap);
    // spread a capped selection evenly over the full tensor index range
    const double stride = static_cast<double>(total) / static_cast<double>(count);
    ntk::PointSet G(d, count);
    for (long j = 0; j < count; ++j) {
        long idx = static_cast<long>(std::floor(j * stride));
        for (int i = 0; i < d; ++i) {
            const long c = idx % per_axis;
            idx /= per_axis;
            G(i, j) = -radius + 2.0 * radius * static_cast<double>(c) / (per_axis - 1);
        }
    }
    return G;
}

void write_trace_csv(const TrainTrace& trace, std::ostream& os)
{
    const std::size_t layers = trace.weight_drifts.empty() ? 0 : trace.weight_drifts.front().size();
    os << "t,residual";
    for (std::size_t l = 0; l < layers; ++l)
        os << ",drift_l" << l;
    os << ",kernel_gap,predictor_gap\n" << std::setprecision(17);
    for (std::size_t i = 0; i < trace.times.size(); ++i) {
        os << trace.times[i] << ',' << trace.train_residuals[i];
        for (double v : trace.weight_drifts[i])
            os << ',' << v;
        os << ',';
        if (i < trace.kernel_gaps.size())
            os << trace.kernel_gaps[i];
        os << ',';
        if (i < trace.predictor_gaps.size())
            os << trace.predictor_gaps[i];
        os << '\n';
    }
}

namespace {

void write_parity(const Parity& P, std::ostream& os)
{
    for (const auto& W : P.W)
        for (Eigen::Index i = 0; i < W.rows(); ++i) {
            for (Eigen::Index j = 0; j < W.cols(); ++j)
                os << (j ? " " : "") << W(i, j);
            os << '\n';
        }
    os << P.b << '\n';
}

void read_parity(Parity& P, const std::vector<int>& m, std::istream& is)
{
    P.W.clear();
    for (std::size_t l = 0; l + 1 < m.size(); ++l) {
        Eigen::MatrixXd W(m[l + 1], m[l]);
        for (Eigen::Index i = 0; i < W.rows(); ++i)
            for (Eigen::Index j = 0; j < W.cols(); ++j)
                if (!(is >> W(i, j)))
                    throw std::runtime_error("checkpoint truncated");
        P.W.push_back(std::move(W));
    }
    if (!(is >> P.b))
        throw std::runtime_error("checkpoint truncated");
}

} // namespace

void write_checkpoint(const NetworkState& s, std::ostream& os)
{
    os << "ntklab-network " << s.d << ' ' << s.layers << ' ' << s.seed;
    for (int m : s.widths)
        os << ' ' << m;
    os << '\n' << std::setprecision(17);
    for (const Parity& P : s.params)
        write_parity(P, os);
    for (const Parity& P : s.init)
        write_parity(P, os);
}

NetworkState read_checkpoint(std::istream& is)
{
    std::string magic;
    NetworkState s;
    if (!(is >> magic >> s.d >> s.layers >> s.seed) || magic != "ntklab-network")
        throw std::runtime_error("not a network checkpoint");
    if (s.d < 1 || s.layers < 1)
        throw std::runtime_error("checkpoint header is invalid");
    s.widths.resize(static_cast<std::size_t>(s.layers));
    for (int& m : s.widths)
        if (!(is >> m) || m < 1)
            throw std::runtime_error("checkpoint header is invalid");
    const auto sizes = s.layer_sizes();
    for (Parity& P : s.params)
        read_parity(P, sizes, is);
    for (Parity& P : s.init)
        read_parity(P, sizes, is);
    return s;
}

} // namespace ntklab::net
