#pragma once

#include "ntklab/error.hpp"
#include "ntklab/kernel_flow.hpp"
#include "ntklab/ntk_kernels.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

/// Mirrored fully connected ReLU network
///   alpha^(0) = (x, 1),  alpha^(l) = sqrt(2/m_l) relu(W^(l-1) alpha^(l-1)),
///   g^(p) = W^(L,p) alpha^(L,p) + b^(p),  f = (g^(1) - g^(2)) / sqrt(2),
/// trained by full-batch gradient descent on (1/2n) sum (f(x_i) - y_i)^2.
namespace ntklab::net {

struct Parity {
    /// W[l] has shape m_{l+1} x m_l, l = 0..L, with m_0 = d + 1, m_{L+1} = 1.
    std::vector<Eigen::MatrixXd> W;
    double b = 0.0;
};

struct NetworkState {
    int d = 0;
    int layers = 0;
    std::vector<int> widths; ///< m_1..m_L
    std::uint64_t seed = 0;
    std::array<Parity, 2> params;
    std::array<Parity, 2> init; ///< snapshot at t = 0

    int min_width() const;
    /// m_0..m_{L+1}.
    std::vector<int> layer_sizes() const;
    std::size_t parameter_count() const;
};

/// Parity-1 entries i.i.d. N(0, 1), parity 2 an exact copy.
NetworkState init_network(int d, int layers, const std::vector<int>& widths, std::uint64_t seed);
/// Equal widths m_1 = ... = m_L = m.
NetworkState init_network(int d, int layers, int width, std::uint64_t seed);

/// Per-parity activations for a batch (columns are samples).
struct ParityPass {
    std::vector<Eigen::MatrixXd> alpha;   ///< alpha[l], l = 0..L
    std::vector<Eigen::MatrixXd> pre;     ///< pre[l] = W[l-1] alpha[l-1], l = 1..L (pre[0] unused)
    std::vector<Eigen::MatrixXd> delta;   ///< delta[l] = dg / d pre[l], l = 1..L (filled by backward)
    Eigen::RowVectorXd g;
};

ParityPass forward_parity(const NetworkState& s, int parity, const ntk::PointSet& X, bool with_backward);

/// f at every column of X.
Eigen::VectorXd forward(const NetworkState& s, const ntk::PointSet& X);
double forward(const NetworkState& s, ntk::PointRef x);

/// K_t(a_i, b_j) = (K^(1) + K^(2)) / 2 with
/// K^(p) = sum_l (delta_l . delta'_l)(alpha_{l-1} . alpha'_{l-1}) + alpha_L . alpha'_L + 1.
Eigen::MatrixXd tangent_kernel(const NetworkState& s, const ntk::PointSet& A, const ntk::PointSet& B);
double tangent_kernel(const NetworkState& s, ntk::PointRef x, ntk::PointRef xp);

/// grad_theta f(x) flattened in the order of flatten_parameters.
Eigen::VectorXd flat_gradient(const NetworkState& s, ntk::PointRef x);
Eigen::VectorXd flatten_parameters(const NetworkState& s);
void set_parameters(NetworkState& s, const Eigen::VectorXd& theta);

/// ||W^(l,p)_t - W^(l,p)_0||_F, indexed [p][l].
std::array<std::vector<double>, 2> weight_drift(const NetworkState& s);

struct ProbeConfig {
    ntk::PointSet grid;       ///< probe points (may be empty)
    int log_every = 10;       ///< steps between trace entries
    bool kernel_gap = false;  ///< log sup |K_t - K^NT| over the grid
    int ntk_layers = 0;       ///< K^NT depth for kernel_gap (defaults to the network depth)
    const flow::FlowPredictor* ntk_flow = nullptr; ///< log sup |f^NN_t - f^NTK_t| when set
};

struct TrainTrace {
    std::vector<double> times;
    std::vector<double> train_residuals;
    std::vector<std::vector<double>> weight_drifts; ///< per time, max over parities, l = 0..L
    std::vector<double> kernel_gaps;
    std::vector<double> predictor_gaps;
    std::vector<Eigen::VectorXd> probe_predictions; ///< f^NN_t on the grid, per time
    std::vector<double> step_losses;                ///< loss before every step and after the last
};

class TrainingDiverged : public NumericalError {
public:
    TrainingDiverged(const std::string& what, TrainTrace partial, int step)
        : NumericalError(what), trace(std::move(partial)), step(step)
    {
    }
    TrainTrace trace;
    int step;
};

/// Recommended step size n / (2 lambda_max(K_0(X, X))).
double stable_step_size(const NetworkState& s, const ntk::PointSet& X);

/// Explicit Euler on the gradient flow: step k sits at t = k eta. Throws
/// TrainingDiverged when the residual grows 10x over 100 steps or turns
/// non-finite.
TrainTrace train(NetworkState& s, const ntk::PointSet& X, const Eigen::VectorXd& y, double eta, int n_steps,
                 const ProbeConfig& probes);

/// max over the grid and the given times of |f^NN_t - f^NTK_t|, using the
/// probe predictions stored in the trace. Throws std::invalid_argument
/// ("time misalignment") for a time not in the trace.
double uniform_gap(const TrainTrace& trace, const flow::FlowPredictor& ntk_flow, const ntk::PointSet& grid,
                   const std::vector<double>& times);

/// Tensor grid of 5^d points in [-1, 1]^d, capped at 625 points.
ntk::PointSet probe_grid(int d, double radius = 1.0);

/// Header: t,residual,drift_l0..drift_lL,kernel_gap,predictor_gap
void write_trace_csv(const TrainTrace& trace, std::ostream& os);

/// Text checkpoint: "ntklab-network d L seed m_1 .. m_L", then every weight
/// block row-major and the output biases, parameters before the snapshot.
void write_checkpoint(const NetworkState& s, std::ostream& os);
NetworkState read_checkpoint(std::istream& is);

} // namespace ntklab::net
