#include "ntklab/sampling.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace ntklab::sampling {

SampleDistribution SampleDistribution::uniform_cube(int d, double a, double b, std::uint64_t seed)
{
    SampleDistribution s;
    s.kind = Kind::uniform_cube;
    s.d = d;
    s.a = a;
    s.b = b;
    s.seed = seed;
    s.validate();
    return s;
}

SampleDistribution SampleDistribution::uniform_sphere(int d, std::uint64_t seed)
{
    SampleDistribution s;
    s.kind = Kind::uniform_sphere;
    s.d = d;
    s.seed = seed;
    s.validate();
    return s;
}

SampleDistribution SampleDistribution::triangular(int d, std::uint64_t seed)
{
    SampleDistribution s;
    s.kind = Kind::triangular;
    s.d = d;
    s.seed = seed;
    s.validate();
    return s;
}

SampleDistribution SampleDistribution::clipped_normal(int d, double limit, std::uint64_t seed)
{
    SampleDistribution s;
    s.kind = Kind::clipped_normal;
    s.d = d;
    s.limit = limit;
    s.seed = seed;
    s.validate();
    return s;
}

SampleDistribution SampleDistribution::sphere_cap(int d, double cap_angle, std::uint64_t seed)
{
    SampleDistribution s;
    s.kind = Kind::sphere_cap;
    s.d = d;
    s.cap_angle = cap_angle;
    s.seed = seed;
    s.validate();
    return s;
}

int SampleDistribution::ambient_dim() const noexcept
{
    return (kind == Kind::uniform_sphere || kind == Kind::sphere_cap) ? d + 1 : d;
}

std::string SampleDistribution::name() const
{
    std::ostringstream os;
    switch (kind) {
    case Kind::uniform_cube:
        if (a == -1.0 && b == 1.0)
            os << "ucube";
        else if (a == 0.0 && b == 1.0)
            os << "ucube01";
        else
            os << "ucube(" << a << ',' << b << ')';
        break;
    case Kind::uniform_sphere:
        os << "sphere";
        break;
    case Kind::triangular:
        os << "triangular";
        break;
    case Kind::clipped_normal:
        os << "cnormal";
        break;
    case Kind::sphere_cap:
        os << "cap(" << cap_angle << ')';
        break;
    }
    return os.str();
}

void SampleDistribution::validate() const
{
    if (d < 1)
        throw std::invalid_argument("sample distribution: dimension must be >= 1");
    if (kind == Kind::uniform_cube && !(a < b))
        throw std::invalid_argument("uniform cube needs a < b");
    if (kind == Kind::clipped_normal && !(limit > 0.0))
        throw std::invalid_argument("clipped normal needs a positive limit");
    if (kind == Kind::sphere_cap && !(cap_angle > 0.0 && cap_angle <= std::numbers::pi))
        throw std::invalid_argument("cap angle must lie in (0, pi]");
}

SampleDistribution parse_distribution(std::string_view name, int d, std::uint64_t seed)
{
    if (name == "ucube")
        return SampleDistribution::uniform_cube(d, -1.0, 1.0, seed);
    if (name == "ucube01")
        return SampleDistribution::uniform_cube(d, 0.0, 1.0, seed);
    if (name == "triangular")
        return SampleDistribution::triangular(d, seed);
    if (name == "cnormal")
        return SampleDistribution::clipped_normal(d, 10.0, seed);
    if (name == "sphere")
        return SampleDistribution::uniform_sphere(d, seed);
    throw std::invalid_argument("unknown distribution '" + std::string(name) + "'");
}

ntk::PointSet sample(const SampleDistribution& dist, int n)
{
    Rng rng = make_rng(dist.seed, "sample");
    return sample(dist, n, rng);
}

ntk::PointSet sample(const SampleDistribution& dist, int n, Rng& rng)
{
    dist.validate();
    if (n < 1)
        throw std::invalid_argument("sample: n must be >= 1");
    const int dim = dist.ambient_dim();
    ntk::PointSet X(dim, n);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    auto sphere_point = [&](Eigen::Ref<Eigen::VectorXd> col) {
        double norm = 0.0;
        do {
            for (int i = 0; i < dim; ++i)
                col(i) = gauss(rng);
            norm = col.norm();
        } while (norm == 0.0);
        col /= norm;
    };

    switch (dist.kind) {
    case Kind::uniform_cube: {
        std::uniform_real_distribution<double> u(dist.a, dist.b);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < dim; ++i)
                X(i, j) = u(rng);
        break;
    }
    case Kind::triangular:
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < dim; ++i) {
                // inverse CDF of the symmetric triangle on [-1, 1]
                const double v = unif(rng);
                X(i, j) = v < 0.5 ? std::sqrt(2.0 * v) - 1.0 : 1.0 - std::sqrt(2.0 * (1.0 - v));
            }
        break;
    case Kind::clipped_normal:
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < dim; ++i) {
                double z = 0.0;
                do
                    z = gauss(rng);
                while (!(std::abs(z) < dist.limit));
                X(i, j) = z;
            }
        break;
    case Kind::uniform_sphere:
        for (int j = 0; j < n; ++j)
            sphere_point(X.col(j));
        break;
    case Kind::sphere_cap: {
        const double min_cos = std::cos(dist.cap_angle);
        for (int j = 0; j < n; ++j) {
            if (dist.cap_angle >= std::numbers::pi) {
                sphere_point(X.col(j));
                continue;
            }
            do
                sphere_point(X.col(j));
            while (X(dim - 1, j) < min_cos);
        }
        break;
    }
    }
    return X;
}

} // namespace ntklab::sampling
