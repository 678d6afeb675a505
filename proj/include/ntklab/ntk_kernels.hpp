#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>

namespace ntklab::ntk {

using Point = Eigen::VectorXd;
/// A set of points stored one per column (d x n).
using PointSet = Eigen::MatrixXd;
using PointRef = Eigen::Ref<const Eigen::VectorXd>;

/// Cosine arguments may drift past +-1 by at most this much before we treat
/// them as a logic error rather than roundoff.
inline constexpr double kCosineClampTolerance = 1e-9;

/// Clamp u into [-1, 1]; throws std::domain_error("argument out of range")
/// when |u| > 1 + kCosineClampTolerance or u is NaN.
double clamp_cosine(double u);

/// Arc-cosine kernel of order 0: (pi - arccos u) / pi.
double kappa0(double u);
/// Arc-cosine kernel of order 1: (sqrt(1-u^2) + u (pi - arccos u)) / pi.
double kappa1(double u);

enum class Variant { full, homogeneous };

struct NtkDescriptor {
    int layers = 2;                    ///< number of hidden layers L >= 1
    bool include_bias_constant = true; ///< the "+1" of the full kernel
    Variant variant = Variant::full;

    static NtkDescriptor full(int layers, bool include_bias_constant = true);
    static NtkDescriptor homogeneous(int layers);

    /// Throws std::invalid_argument for L < 1 or a homogeneous descriptor
    /// that includes the bias constant.
    void validate() const;
};

/// Homogeneous profile on the sphere,
/// K0(u) = sum_{r=0}^{L} k1^{(r)}(u) prod_{s=r}^{L-1} k0(k1^{(s)}(u)).
double homogeneous_profile(int layers, double u);
/// Same profile as a function of the angle theta = arccos(u) in [0, pi].
/// Accurate for nearly parallel inputs, where u itself has lost the digits.
double homogeneous_profile_angle(int layers, double theta);
/// Angle between two unit vectors, 2 atan2(|a - b|, |a + b|).
double unit_angle(PointRef a, PointRef b);

/// Profile of a homogeneous descriptor (throws for the full variant).
double ntk_profile(const NtkDescriptor& desc, double u);

/// x -> x_tilde = (x, 1) -> y = x_tilde / |x_tilde| on the upper hemisphere.
struct LiftedPoint {
    Point x;
    Point x_tilde;
    double norm_tilde = 1.0;
    Point y;

    static LiftedPoint lift(PointRef x);
};

/// Full NTK: |x~| |x~'| K0(<y, y'>) + 1 (the constant only if requested).
double ntk_eval(const NtkDescriptor& desc, PointRef x, PointRef xp);

using Kernel = std::function<double(PointRef, PointRef)>;
using ScalarField = std::function<double(PointRef)>;
using PointMap = std::function<Point(PointRef)>;

/// Kernel evaluator for a descriptor. Homogeneous descriptors expect points
/// on the unit sphere and evaluate the profile of their inner product.
Kernel make_kernel(const NtkDescriptor& desc);

/// (rho . k)(x, x') = rho(x) k(x, x') rho(x').
Kernel scaled_kernel(Kernel k, ScalarField rho);
/// (phi^* k)(x, x') = k(phi(x), phi(x')).
Kernel pullback_kernel(Kernel k, PointMap phi);
/// (k1 + k2)(x, x').
Kernel sum_kernel(Kernel k1, Kernel k2);

/// The sphere lift Phi(x) = (x, 1) / |(x, 1)|.
Point sphere_lift(PointRef x);

/// Symmetric Gram matrix with a lazily cached eigendecomposition. The cache
/// is filled on first use and is not synchronized: do not call the
/// eigen accessors concurrently on one object before it is populated.
class KernelMatrix {
public:
    /// Symmetrizes (K + K^T) / 2. Throws std::invalid_argument if the input
    /// asymmetry exceeds 1e-10 relative to max |K_ij|.
    explicit KernelMatrix(Eigen::MatrixXd entries);

    const Eigen::MatrixXd& entries() const noexcept { return entries_; }
    Eigen::Index size() const noexcept { return entries_.rows(); }
    double trace() const { return entries_.trace(); }

    /// Eigenvalues in descending order.
    const Eigen::VectorXd& eigenvalues() const;
    /// Orthonormal eigenvectors; column i belongs to eigenvalues()(i).
    const Eigen::MatrixXd& eigenvectors() const;

    double lambda_min() const;
    double lambda_max() const;
    /// Records and returns lambda_min > 0.
    bool check_positive_definite() const;
    std::optional<bool> positive_definite() const noexcept { return pd_; }

private:
    void decompose(bool with_vectors) const;

    Eigen::MatrixXd entries_;
    mutable std::optional<Eigen::VectorXd> values_;
    mutable std::optional<Eigen::MatrixXd> vectors_;
    mutable std::optional<bool> pd_;
};

/// Gram matrix of the descriptor's kernel on X (columns are points).
/// Throws std::invalid_argument for non-finite coordinates.
KernelMatrix gram(const NtkDescriptor& desc, const PointSet& X);
/// Gram matrix of an arbitrary kernel evaluator.
KernelMatrix gram(const Kernel& k, const PointSet& X);

/// Rectangular kernel matrix K(A, B), rows indexed by the columns of A.
Eigen::MatrixXd cross_gram(const NtkDescriptor& desc, const PointSet& A, const PointSet& B);

struct GramHeader {
    int d = 0;
    int layers = 0;
    std::uint64_t seed = 0;
};

/// Row-major CSV preceded by "# d=<d> L=<L> n=<n> seed=<seed>".
void write_gram_csv(const KernelMatrix& K, const GramHeader& header, std::ostream& os);

} // namespace ntklab::ntk
