#pragma once

#include "ntklab/ntk_kernels.hpp"
#include "ntklab/sampling.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

/// Kernel gradient flow d/dt f_t(x) = -(1/n) K(x, X)(f_t(X) - y), f_0 = 0,
/// solved in closed form through the eigendecomposition of K(X, X).
namespace ntklab::flow {

/// K(A, B) for point sets stored as columns.
using CrossKernel = std::function<Eigen::MatrixXd(const ntk::PointSet&, const ntk::PointSet&)>;
/// Values of a function at every column of a point set.
using BatchFn = std::function<Eigen::VectorXd(const ntk::PointSet&)>;

CrossKernel cross_kernel(const ntk::NtkDescriptor& desc);
CrossKernel cross_kernel(ntk::Kernel k);

class FlowPredictor {
public:
    /// Eigendecomposes K(X, X). Throws NumericalError("Gram not PD") when an
    /// eigenvalue is nonpositive or below n * eps * lambda_max.
    static FlowPredictor fit(CrossKernel k, ntk::PointSet X, Eigen::VectorXd y, double t = 0.0);

    /// Same data, different time; the decomposition is shared.
    FlowPredictor with_time(double t) const;

    double time() const noexcept { return t_; }
    Eigen::Index n() const noexcept;
    const ntk::PointSet& inputs() const noexcept;
    const Eigen::VectorXd& targets() const noexcept;
    /// Eigenvalues of K(X, X), descending.
    const Eigen::VectorXd& eigenvalues() const noexcept;
    double lambda_min() const noexcept;

    /// Spectral filter (1 - exp(-lambda t / n)) / lambda.
    double filter(double lambda) const;
    /// c_t = U diag(filter) U^T y, so that f_t(x) = K(x, X) c_t.
    Eigen::VectorXd coefficients() const;
    /// diag(filter) U^T y.
    Eigen::VectorXd spectral_weights() const;

    Eigen::VectorXd predict(const ntk::PointSet& Xq) const;
    /// K(Xq, X) U, reusable across times through predict_projected.
    Eigen::MatrixXd project(const ntk::PointSet& Xq) const;
    Eigen::VectorXd predict_projected(const Eigen::MatrixXd& KU) const;
    double predict(ntk::PointRef x) const;
    /// f_t(X).
    Eigen::VectorXd train_predictions() const;
    /// f_t(X) - y = -exp(-K t / n) y.
    Eigen::VectorXd train_residual_vector() const;
    double train_residual() const;

    BatchFn as_function() const;

private:
    struct Data {
        CrossKernel kernel;
        ntk::PointSet X;
        Eigen::VectorXd y;
        Eigen::MatrixXd U;
        Eigen::VectorXd lambda;
        Eigen::VectorXd Uty;
    };
    FlowPredictor(std::shared_ptr<const Data> data, double t);

    std::shared_ptr<const Data> data_;
    double t_ = 0.0;
};

/// (d + 1) / (s (d + 1) + d). Throws std::invalid_argument("smoothness below
/// threshold") unless s > 1 / (d + 1).
double stopping_exponent(int d, double s);
/// c * n^{stopping_exponent(d, s)}.
double optimal_stopping_time(double n, int d, double s, double c = 1.0);
/// Minimax rate exponent s (d + 1) / (s (d + 1) + d) of the L2 risk.
double risk_exponent(int d, double s);

/// min(|a|, M) sgn(a). Throws std::invalid_argument for M <= 0.
double truncate(double a, double M);
Eigen::VectorXd truncate(const Eigen::VectorXd& a, double M);

/// {1, Q, Q^2, ..., Q^{floor(log_Q n)}}.
std::vector<double> candidate_grid(double n, double Q = 2.0);

struct CvResult {
    double t_cv = 0.0;
    std::size_t index = 0;            ///< position of t_cv in the sorted candidates
    std::vector<double> candidates;   ///< ascending
    std::vector<double> holdout_risk; ///< mean of (L_M f_t(x~_i) - y~_i)^2
    FlowPredictor predictor;
    double M = 1.0;

    /// L_M(f_{t_cv}(x)).
    Eigen::VectorXd predict(const ntk::PointSet& Xq) const;
    BatchFn as_function() const;
};

/// Minimizes the truncated holdout squared error over the candidates. Ties
/// go to the smallest time.
CvResult cv_select_stopping(const FlowPredictor& family, std::vector<double> candidates,
                            const ntk::PointSet& X_holdout, const Eigen::VectorXd& y_holdout, double M);

/// Monte Carlo mean of (f - f*)^2 over n_mc fresh draws from dist (stream
/// derived from seed).
double l2_risk(const BatchFn& f, const BatchFn& f_star, const sampling::SampleDistribution& dist, int n_mc,
               std::uint64_t seed);
/// Same, on a fixed set of evaluation points.
double l2_risk(const BatchFn& f, const BatchFn& f_star, const ntk::PointSet& points);
/// max over the grid of (f - f*)^2.
double sup_risk(const BatchFn& f, const BatchFn& f_star, const ntk::PointSet& grid);

/// f*(x) = sum_j alpha_j K(x, z_j): a target in the RKHS span.
struct RkhsTarget {
    CrossKernel kernel;
    ntk::PointSet centers;
    Eigen::VectorXd alpha;

    Eigen::VectorXd operator()(const ntk::PointSet& X) const;
    double rkhs_norm() const;
    BatchFn as_function() const;
};

/// Centers drawn from dist, coefficients i.i.d. N(0, scale^2).
RkhsTarget make_rkhs_target(CrossKernel k, const sampling::SampleDistribution& dist, int n_centers,
                            double scale, std::uint64_t seed);

struct RiskPoint {
    double t = 0.0;
    double train_residual = 0.0;
    double holdout_risk = 0.0;
    double l2_risk = 0.0;
};

/// Header: t,train_residual,holdout_risk,l2_risk
void write_risk_curve(const std::vector<RiskPoint>& curve, std::ostream& os);

} // namespace ntklab::flow
