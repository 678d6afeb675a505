#include "ntklab/kernel_flow.hpp"

#include "ntklab/error.hpp"
#include "ntklab/random.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace ntklab::flow {

CrossKernel cross_kernel(const ntk::NtkDescriptor& desc)
{
    desc.validate();
    return [desc](const ntk::PointSet& A, const ntk::PointSet& B) { return ntk::cross_gram(desc, A, B); };
}

CrossKernel cross_kernel(ntk::Kernel k)
{
    return [k = std::move(k)](const ntk::PointSet& A, const ntk::PointSet& B) {
        Eigen::MatrixXd K(A.cols(), B.cols());
        for (Eigen::Index j = 0; j < B.cols(); ++j)
            for (Eigen::Index i = 0; i < A.cols(); ++i)
                K(i, j) = k(A.col(i), B.col(j));
        return K;
    };
}

FlowPredictor::FlowPredictor(std::shared_ptr<const Data> data, double t) : data_(std::move(data)), t_(t)
{
}

FlowPredictor FlowPredictor::fit(CrossKernel k, ntk::PointSet X, Eigen::VectorXd y, double t)
{
    if (X.cols() < 1 || X.cols() != y.size())
        throw std::invalid_argument("flow: need len(X) = len(y) >= 1");
    if (!(t >= 0.0))
        throw std::invalid_argument("flow: time must be nonnegative");
    auto data = std::make_shared<Data>();
    const ntk::KernelMatrix K(k(X, X));
    data->lambda = K.eigenvalues();
    data->U = K.eigenvectors();
    // eigenvalues within the eigensolver's rounding floor are not resolved from zero
    const double floor = static_cast<double>(K.size()) * std::numeric_limits<double>::epsilon() *
                         std::abs(data->lambda(0));
    if (!(data->lambda(data->lambda.size() - 1) > floor)) {
        std::ostringstream os;
        os << "Gram not PD (lambda_min = " << data->lambda(data->lambda.size() - 1) << ")";
        throw NumericalError(os.str());
    }
    data->Uty = data->U.transpose() * y;
    data->kernel = std::move(k);
    data->X = std::move(X);
    data->y = std::move(y);
    return FlowPredictor(std::move(data), t);
}

FlowPredictor FlowPredictor::with_time(double t) const
{
    if (!(t >= 0.0))
        throw std::invalid_argument("flow: time must be nonnegative");
    return FlowPredictor(data_, t);
}

Eigen::Index FlowPredictor::n() const noexcept
{
    return data_->X.cols();
}

const ntk::PointSet& FlowPredictor::inputs() const noexcept
{
    return data_->X;
}

const Eigen::VectorXd& FlowPredictor::targets() const noexcept
{
    return data_->y;
}

const Eigen::VectorXd& FlowPredictor::eigenvalues() const noexcept
{
    return data_->lambda;
}

double FlowPredictor::lambda_min() const noexcept
{
    return data_->lambda(data_->lambda.size() - 1);
}

double FlowPredictor::filter(double lambda) const
{
    if (!(lambda > 0.0))
        throw NumericalError("Gram not PD");
    const double n = static_cast<double>(data_->X.cols());
    return -std::expm1(-lambda * t_ / n) / lambda;
}

Eigen::VectorXd FlowPredictor::spectral_weights() const
{
    Eigen::VectorXd w(data_->lambda.size());
    for (Eigen::Index i = 0; i < w.size(); ++i)
        w(i) = filter(data_->lambda(i)) * data_->Uty(i);
    return w;
}

Eigen::VectorXd FlowPredictor::coefficients() const
{
    return data_->U * spectral_weights();
}

Eigen::MatrixXd FlowPredictor::project(const ntk::PointSet& Xq) const
{
    return data_->kernel(Xq, data_->X) * data_->U;
}

Eigen::VectorXd FlowPredictor::predict_projected(const Eigen::MatrixXd& KU) const
{
    if (KU.cols() != data_->U.cols())
        throw std::invalid_argument("flow: projected block has the wrong width");
    return KU * spectral_weights();
}

Eigen::VectorXd FlowPredictor::predict(const ntk::PointSet& Xq) const
{
    if (t_ == 0.0)
        return Eigen::VectorXd::Zero(Xq.cols());
    return data_->kernel(Xq, data_->X) * coefficients();
}

double FlowPredictor::predict(ntk::PointRef x) const
{
    const ntk::PointSet q = x;
    return predict(q)(0);
}

Eigen::VectorXd FlowPredictor::train_predictions() const
{
    Eigen::VectorXd w(data_->lambda.size());
    const double n = static_cast<double>(data_->X.cols());
    for (Eigen::Index i = 0; i < w.size(); ++i)
        w(i) = -std::expm1(-data_->lambda(i) * t_ / n) * data_->Uty(i);
    return data_->U * w;
}

Eigen::VectorXd FlowPredictor::train_residual_vector() const
{
    Eigen::VectorXd w(data_->lambda.size());
    const double n = static_cast<double>(data_->X.cols());
    for (Eigen::Index i = 0; i < w.size(); ++i)
        w(i) = -std::exp(-data_->lambda(i) * t_ / n) * data_->Uty(i);
    return data_->U * w;
}

double FlowPredictor::train_residual() const
{
    return train_residual_vector().norm();
}

BatchFn FlowPredictor::as_function() const
{
    return [self = *this](const ntk::PointSet& X) { return self.predict(X); };
}

double stopping_exponent(int d, double s)
{
    if (d < 1)
        throw std::invalid_argument("stopping time: d must be >= 1");
    if (!(s > 1.0 / (d + 1)))
        throw std::invalid_argument("smoothness below threshold: need s > 1/(d+1)");
    return (d + 1.0) / (s * (d + 1.0) + d);
}

double optimal_stopping_time(double n, int d, double s, double c)
{
    if (!(n >= 1.0))
        throw std::invalid_argument("stopping time: n must be >= 1");
    if (!(c > 0.0))
        throw std::invalid_argument("stopping time: c must be positive");
    return c * std::pow(n, stopping_exponent(d, s));
}

double risk_exponent(int d, double s)
{
    return s * stopping_exponent(d, s);
}

double truncate(double a, double M)
{
    if (!(M > 0.0))
        throw std::invalid_argument("truncation bound must be positive");
    return std::copysign(std::min(std::abs(a), M), a);
}

Eigen::VectorXd truncate(const Eigen::VectorXd& a, double M)
{
    Eigen::VectorXd out(a.size());
    for (Eigen::Index i = 0; i < a.size(); ++i)
        out(i) = truncate(a(i), M);
    return out;
}

std::vector<double> candidate_grid(double n, double Q)
{
    if (!(Q > 1.0))
        throw std::invalid_argument("candidate grid needs Q > 1");
    if (!(n >= 1.0))
        throw std::invalid_argument("candidate grid needs n >= 1");
    std::vector<double> grid{1.0};
    // Q^k <= n, compared with a relative slack so that exact powers survive roundoff
    while (grid.back() * Q <= n * (1.0 + 1e-12))
        grid.push_back(grid.back() * Q);
    return grid;
}

Eigen::VectorXd CvResult::predict(const ntk::PointSet& Xq) const
{
    return truncate(predictor.predict(Xq), M);
}

BatchFn CvResult::as_function() const
{
    return [p = predictor, M = M](const ntk::PointSet& X) { return truncate(p.predict(X), M); };
}

CvResult cv_select_stopping(const FlowPredictor& family, std::vector<double> candidates,
                            const ntk::PointSet& X_holdout, const Eigen::VectorXd& y_holdout, double M)
{
    if (candidates.empty())
        throw std::invalid_argument("cv: candidate list is empty");
    if (X_holdout.cols() < 1 || X_holdout.cols() != y_holdout.size())
        throw std::invalid_argument("cv: holdout must be nonempty and consistent");
    if (!(M > 0.0))
        throw std::invalid_argument("truncation bound must be positive");
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    // K(X~, X) U is shared by all candidate times.
    const Eigen::MatrixXd KU = family.project(X_holdout);

    std::vector<double> risks;
    risks.reserve(candidates.size());
    std::size_t best = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const Eigen::VectorXd pred = truncate(family.with_time(candidates[i]).predict_projected(KU), M);
        const double r = (pred - y_holdout).squaredNorm() / static_cast<double>(y_holdout.size());
        risks.push_back(r);
        if (r < risks[best])
            best = i;
    }
    return CvResult{candidates[best], best, candidates, risks, family.with_time(candidates[best]), M};
}

double l2_risk(const BatchFn& f, const BatchFn& f_star, const ntk::PointSet& points)
{
    if (points.cols() < 1)
        throw std::invalid_argument("risk: need at least one evaluation point");
    return (f(points) - f_star(points)).squaredNorm() / static_cast<double>(points.cols());
}

double l2_risk(const BatchFn& f, const BatchFn& f_star, const sampling::SampleDistribution& dist, int n_mc,
               std::uint64_t seed)
{
    Rng rng = make_rng(seed, "l2_risk");
    return l2_risk(f, f_star, sampling::sample(dist, n_mc, rng));
}

double sup_risk(const BatchFn& f, const BatchFn& f_star, const ntk::PointSet& grid)
{
    if (grid.cols() < 1)
        throw std::invalid_argument("risk: need at least one evaluation point");
    return (f(grid) - f_star(grid)).cwiseAbs2().maxCoeff();
}

Eigen::VectorXd RkhsTarget::operator()(const ntk::PointSet& X) const
{
    return kernel(X, centers) * alpha;
}

double RkhsTarget::rkhs_norm() const
{
    return std::sqrt(std::max(0.0, alpha.dot(kernel(centers, centers) * alpha)));
}

BatchFn RkhsTarget::as_function() const
{
    return [self = *this](const ntk::PointSet& X) { return self(X); };
}

RkhsTarget make_rkhs_target(CrossKernel k, const sampling::SampleDistribution& dist, int n_centers,
                            double scale, std::uint64_t seed)
{
    if (n_centers < 1)
        throw std::invalid_argument("rkhs target needs at least one center");
    Rng rng = make_rng(seed, "rkhs_target");
    RkhsTarget f;
    f.kernel = std::move(k);
    f.centers = sampling::sample(dist, n_centers, rng);
    std::normal_distribution<double> gauss(0.0, scale);
    f.alpha.resize(n_centers);
    for (int j = 0; j < n_centers; ++j)
        f.alpha(j) = gauss(rng);
    return f;
}

void write_risk_curve(const std::vector<RiskPoint>& curve, std::ostream& os)
{
    os << "t,train_residual,holdout_risk,l2_risk\n" << std::setprecision(17);
    for (const auto& p : curve)
        os << p.t << ',' << p.train_residual << ',' << p.holdout_risk << ',' << p.l2_risk << '\n';
}

} // namespace ntklab::flow
