#pragma once

#include "ntklab/ntk_kernels.hpp"
#include "ntklab/random.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace ntklab::sampling {

enum class Kind {
    uniform_cube,   ///< coordinates i.i.d. U(a, b)
    uniform_sphere, ///< uniform on S^d in R^{d+1}
    triangular,     ///< coordinates i.i.d. with density 1 - |x| on [-1, 1]
    clipped_normal, ///< coordinates i.i.d. N(0, 1) conditioned on (-limit, limit)
    sphere_cap,     ///< uniform on {y in S^d : angle(y, e_{d+1}) <= cap_angle}
};

struct SampleDistribution {
    Kind kind = Kind::uniform_cube;
    int d = 3; ///< input dimension; sphere kinds sample in R^{d+1}
    double a = -1.0;
    double b = 1.0;
    double limit = 10.0;
    double cap_angle = 3.141592653589793;
    std::uint64_t seed = 0;

    static SampleDistribution uniform_cube(int d, double a, double b, std::uint64_t seed = 0);
    static SampleDistribution uniform_sphere(int d, std::uint64_t seed = 0);
    static SampleDistribution triangular(int d, std::uint64_t seed = 0);
    static SampleDistribution clipped_normal(int d, double limit = 10.0, std::uint64_t seed = 0);
    static SampleDistribution sphere_cap(int d, double cap_angle, std::uint64_t seed = 0);

    /// Coordinates per sample: d, or d + 1 for the sphere kinds.
    int ambient_dim() const noexcept;
    /// Short name: ucube(a,b), sphere, triangular, cnormal, cap(angle).
    std::string name() const;
    void validate() const;
};

/// Parses "ucube" (U(-1,1)), "ucube01" (U(0,1)), "triangular", "cnormal",
/// "sphere". Throws std::invalid_argument("unknown distribution ...").
SampleDistribution parse_distribution(std::string_view name, int d, std::uint64_t seed = 0);

/// n i.i.d. draws as columns, from the stream seeded by dist.seed.
ntk::PointSet sample(const SampleDistribution& dist, int n);
/// n i.i.d. draws from a caller-supplied stream.
ntk::PointSet sample(const SampleDistribution& dist, int n, Rng& rng);

} // namespace ntklab::sampling
