#include "ntklab/ntk_kernels.hpp"

#include "ntklab/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <utility>

namespace ntklab::ntk {

namespace {

constexpr double kEndpointBand = 1e-14;

} // namespace

double clamp_cosine(double u)
{
    if (std::isnan(u) || std::abs(u) > 1.0 + kCosineClampTolerance)
        throw std::domain_error("argument out of range");
    return std::clamp(u, -1.0, 1.0);
}

double kappa0(double u)
{
    u = clamp_cosine(u);
    if (1.0 - u < kEndpointBand)
        return 1.0;
    if (1.0 + u < kEndpointBand)
        return 0.0;
    return (std::numbers::pi - std::acos(u)) / std::numbers::pi;
}

double kappa1(double u)
{
    u = clamp_cosine(u);
    if (1.0 - u < kEndpointBand)
        return 1.0;
    if (1.0 + u < kEndpointBand)
        return 0.0;
    return (std::sqrt(1.0 - u * u) + u * (std::numbers::pi - std::acos(u))) / std::numbers::pi;
}

NtkDescriptor NtkDescriptor::full(int layers, bool include_bias_constant)
{
    NtkDescriptor d{layers, include_bias_constant, Variant::full};
    d.validate();
    return d;
}

NtkDescriptor NtkDescriptor::homogeneous(int layers)
{
    NtkDescriptor d{layers, false, Variant::homogeneous};
    d.validate();
    return d;
}

void NtkDescriptor::validate() const
{
    if (layers < 1)
        throw std::invalid_argument("NTK needs at least one hidden layer");
    if (variant == Variant::homogeneous && include_bias_constant)
        throw std::invalid_argument("homogeneous NTK never includes the bias constant");
}

namespace {

// sin t - t cos t, with a series where the two terms cancel
double sin_minus_t_cos(double t)
{
    if (t < 1e-2) {
        const double t2 = t * t;
        return t * t2 * (1.0 / 3.0 - t2 * (1.0 / 30.0 - t2 / 840.0));
    }
    return std::sin(t) - t * std::cos(t);
}

} // namespace

double homogeneous_profile_angle(int layers, double theta)
{
    if (layers < 1)
        throw std::invalid_argument("NTK needs at least one hidden layer");
    if (!(theta >= 0.0 && theta <= std::numbers::pi))
        throw std::domain_error("argument out of range");
    constexpr double pi = std::numbers::pi;
    // K^{(l+1)} = K^{(l)} k0(k1^{(l)}(u)) + k1^{(l+1)}(u), K^{(0)} = u, carried
    // in angles so that nearly parallel inputs keep their separation
    double value = 0.0;
    double c = std::cos(theta);
    for (int s = 0; s < layers; ++s) {
        value = (value + c) * (pi - theta) / pi;
        const double h = std::sin(theta / 2.0);
        const double one_minus = (2.0 * pi * h * h - sin_minus_t_cos(theta)) / pi;
        c = 1.0 - one_minus;
        theta = 2.0 * std::asin(std::sqrt(std::clamp(one_minus / 2.0, 0.0, 1.0)));
    }
    return value + c;
}

double homogeneous_profile(int layers, double u)
{
    if (layers < 1)
        throw std::invalid_argument("NTK needs at least one hidden layer");
    // a cosine within rounding of +-1 is an endpoint, as in kappa0/kappa1
    u = clamp_cosine(u);
    if (1.0 - u < kEndpointBand)
        return homogeneous_profile_angle(layers, 0.0);
    if (1.0 + u < kEndpointBand)
        return homogeneous_profile_angle(layers, std::numbers::pi);
    return homogeneous_profile_angle(layers, std::acos(u));
}

double unit_angle(PointRef a, PointRef b)
{
    return 2.0 * std::atan2((a - b).norm(), (a + b).norm());
}

double ntk_profile(const NtkDescriptor& desc, double u)
{
    desc.validate();
    if (desc.variant != Variant::homogeneous)
        throw std::invalid_argument("ntk_profile expects a homogeneous descriptor");
    return homogeneous_profile(desc.layers, u);
}

LiftedPoint LiftedPoint::lift(PointRef x)
{
    LiftedPoint p;
    p.x = x;
    p.x_tilde.resize(x.size() + 1);
    p.x_tilde.head(x.size()) = x;
    p.x_tilde(x.size()) = 1.0;
    p.norm_tilde = p.x_tilde.norm();
    p.y = p.x_tilde / p.norm_tilde;
    return p;
}

Point sphere_lift(PointRef x)
{
    return LiftedPoint::lift(x).y;
}

double ntk_eval(const NtkDescriptor& desc, PointRef x, PointRef xp)
{
    desc.validate();
    if (desc.variant != Variant::full)
        throw std::invalid_argument("ntk_eval expects a full descriptor");
    if (x.size() != xp.size())
        throw std::invalid_argument("ntk_eval: dimension mismatch");
    const LiftedPoint a = LiftedPoint::lift(x);
    const LiftedPoint b = LiftedPoint::lift(xp);
    const double k = a.norm_tilde * b.norm_tilde * homogeneous_profile_angle(desc.layers, unit_angle(a.y, b.y));
    return desc.include_bias_constant ? k + 1.0 : k;
}

Kernel make_kernel(const NtkDescriptor& desc)
{
    desc.validate();
    if (desc.variant == Variant::full)
        return [desc](PointRef x, PointRef xp) { return ntk_eval(desc, x, xp); };
    const int L = desc.layers;
    return [L](PointRef y, PointRef yp) { return homogeneous_profile(L, y.dot(yp)); };
}

Kernel scaled_kernel(Kernel k, ScalarField rho)
{
    return [k = std::move(k), rho = std::move(rho)](PointRef x, PointRef xp) {
        return rho(x) * k(x, xp) * rho(xp);
    };
}

Kernel pullback_kernel(Kernel k, PointMap phi)
{
    return [k = std::move(k), phi = std::move(phi)](PointRef x, PointRef xp) {
        const Point a = phi(x);
        const Point b = phi(xp);
        return k(a, b);
    };
}

Kernel sum_kernel(Kernel k1, Kernel k2)
{
    return [k1 = std::move(k1), k2 = std::move(k2)](PointRef x, PointRef xp) {
        return k1(x, xp) + k2(x, xp);
    };
}

KernelMatrix::KernelMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries))
{
    if (entries_.rows() != entries_.cols())
        throw std::invalid_argument("kernel matrix must be square");
    if (entries_.size() > 0) {
        const double scale = entries_.cwiseAbs().maxCoeff();
        const double asym = (entries_ - entries_.transpose()).cwiseAbs().maxCoeff();
        if (asym > 1e-10 * std::max(scale, 1e-300))
            throw std::invalid_argument("kernel matrix is not symmetric");
    }
    entries_ = 0.5 * (entries_ + entries_.transpose());
}

void KernelMatrix::decompose(bool with_vectors) const
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        entries_, with_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw NumericalError("symmetric eigensolve failed");
    const Eigen::Index n = entries_.rows();
    values_ = es.eigenvalues().reverse();
    if (with_vectors) {
        Eigen::MatrixXd v(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            v.col(i) = es.eigenvectors().col(n - 1 - i);
        vectors_ = std::move(v);
    }
}

const Eigen::VectorXd& KernelMatrix::eigenvalues() const
{
    if (!values_)
        decompose(false);
    return *values_;
}

const Eigen::MatrixXd& KernelMatrix::eigenvectors() const
{
    if (!vectors_)
        decompose(true);
    return *vectors_;
}

double KernelMatrix::lambda_min() const
{
    const auto& v = eigenvalues();
    return v(v.size() - 1);
}

double KernelMatrix::lambda_max() const
{
    return eigenvalues()(0);
}

bool KernelMatrix::check_positive_definite() const
{
    pd_ = lambda_min() > 0.0;
    return *pd_;
}

namespace {

void require_finite(const PointSet& X)
{
    if (!X.allFinite())
        throw std::invalid_argument("non-finite input coordinates");
}

// Lifted directions (columns) and their norms.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> lift_all(const PointSet& X)
{
    Eigen::MatrixXd Y(X.rows() + 1, X.cols());
    Y.topRows(X.rows()) = X;
    Y.row(X.rows()).setOnes();
    Eigen::VectorXd norms = Y.colwise().norm().transpose();
    for (Eigen::Index j = 0; j < Y.cols(); ++j)
        Y.col(j) /= norms(j);
    return {std::move(Y), std::move(norms)};
}

Eigen::MatrixXd profile_matrix(const NtkDescriptor& desc, const Eigen::MatrixXd& Ya,
                               const Eigen::VectorXd& na, const Eigen::MatrixXd& Yb,
                               const Eigen::VectorXd& nb)
{
    Eigen::MatrixXd K(Ya.cols(), Yb.cols());
    for (Eigen::Index j = 0; j < K.cols(); ++j)
        for (Eigen::Index i = 0; i < K.rows(); ++i) {
            double v = homogeneous_profile_angle(desc.layers, unit_angle(Ya.col(i), Yb.col(j)));
            if (desc.variant == Variant::full) {
                v *= na(i) * nb(j);
                if (desc.include_bias_constant)
                    v += 1.0;
            }
            K(i, j) = v;
        }
    return K;
}

void require_unit_columns(const PointSet& X)
{
    for (Eigen::Index j = 0; j < X.cols(); ++j)
        if (std::abs(X.col(j).norm() - 1.0) > 1e-9)
            throw std::invalid_argument("homogeneous kernel expects points on the unit sphere");
}

} // namespace

KernelMatrix gram(const NtkDescriptor& desc, const PointSet& X)
{
    desc.validate();
    require_finite(X);
    if (desc.variant == Variant::homogeneous) {
        require_unit_columns(X);
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(X.cols());
        return KernelMatrix(profile_matrix(desc, X, ones, X, ones));
    }
    const auto [Y, norms] = lift_all(X);
    return KernelMatrix(profile_matrix(desc, Y, norms, Y, norms));
}

KernelMatrix gram(const Kernel& k, const PointSet& X)
{
    require_finite(X);
    const Eigen::Index n = X.cols();
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i)
            K(i, j) = k(X.col(i), X.col(j));
    return KernelMatrix(std::move(K));
}

Eigen::MatrixXd cross_gram(const NtkDescriptor& desc, const PointSet& A, const PointSet& B)
{
    desc.validate();
    require_finite(A);
    require_finite(B);
    if (A.rows() != B.rows())
        throw std::invalid_argument("cross_gram: dimension mismatch");
    if (desc.variant == Variant::homogeneous) {
        require_unit_columns(A);
        require_unit_columns(B);
        return profile_matrix(desc, A, Eigen::VectorXd::Ones(A.cols()), B,
                              Eigen::VectorXd::Ones(B.cols()));
    }
    const auto [Ya, na] = lift_all(A);
    const auto [Yb, nb] = lift_all(B);
    return profile_matrix(desc, Ya, na, Yb, nb);
}

void write_gram_csv(const KernelMatrix& K, const GramHeader& header, std::ostream& os)
{
    os << "# d=" << header.d << " L=" << header.layers << " n=" << K.size() << " seed=" << header.seed
       << '\n'
       << std::setprecision(17);
    const auto& E = K.entries();
    for (Eigen::Index i = 0; i < E.rows(); ++i) {
        for (Eigen::Index j = 0; j < E.cols(); ++j) {
            if (j)
                os << ',';
            os << E(i, j);
        }
        os << '\n';
    }
}

} // namespace ntklab::ntk
