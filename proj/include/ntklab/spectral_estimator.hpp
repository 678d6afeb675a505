#pragma once

#include "ntklab/ntk_kernels.hpp"
#include "ntklab/sampling.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace ntklab::spectral {

/// 1-based inclusive index range [lo, hi].
struct Window {
    int lo = 50;
    int hi = 200;
};

struct EigenEstimate {
    std::vector<double> lambdas; ///< descending, all above the noise floor
    double trace = 0.0;          ///< trace(K) / n
    int dropped = 0;             ///< eigenvalues below the floor 1e-10 * trace
    int negative = 0;            ///< of those, how many were below -1e-10 * trace
};

/// Eigenvalues of Gram / n, descending. Eigenvalues below 1e-10 * trace are
/// treated as numerical noise and removed from the tail.
EigenEstimate empirical_eigenvalues(const ntk::KernelMatrix& K);
EigenEstimate empirical_eigenvalues(const ntk::NtkDescriptor& desc, const ntk::PointSet& X);

struct DecayFit {
    double slope = 0.0;     ///< decay rate r = -(least-squares slope of ln lambda_i on ln i)
    double intercept = 0.0; ///< b in ln lambda_i = -r ln i + b
    double r2 = 0.0;
    Window window;
    int n_samples = 0;
    std::uint64_t seed = 0;
};

/// Throws std::invalid_argument("window exceeds reliable spectrum") when the
/// window runs past the list or hits a nonpositive eigenvalue.
DecayFit fit_decay(const std::vector<double>& lambdas, Window window);

/// (d + 1) / d.
double theoretical_rate(int d);

struct EdrConfig {
    std::vector<std::string> distributions{"ucube", "ucube01", "triangular", "cnormal"};
    std::vector<int> dims{3, 4, 5};
    std::vector<int> layers{2, 3, 4};
    int n = 1000;
    Window window{};
    int seeds = 3;
    std::uint64_t root_seed = 20240601;
    bool include_bias_constant = true;
    int jobs = 1;
};

struct EdrRow {
    std::string distribution;
    int d = 0;
    int layers = 0;
    double r_mean = 0.0;
    double r_std = 0.0; ///< sample standard deviation over seeds (0 for one seed)
    double r_theory = 0.0;
    int n = 0;
    Window window;
    int seeds = 0;
    std::vector<DecayFit> fits;
    std::vector<double> mean_spectrum; ///< lambda_i averaged over seeds

    /// File-name friendly cell id, e.g. "ucube_d3_L2".
    std::string cell_id() const;
};

using Progress = std::function<void(const EdrRow&)>;

/// Runs the grid distributions x dims x layers. Each (cell, replicate) pair
/// draws from its own substream of root_seed, so rows are independent of
/// which other cells are run and of `jobs`.
std::vector<EdrRow> edr_experiment(const EdrConfig& cfg, const Progress& progress = {});

/// One cell of the grid.
EdrRow edr_cell(const EdrConfig& cfg, const std::string& distribution, int d, int layers);

/// Header: distribution,d,L,r_mean,r_std,r_theory,n,window_lo,window_hi,seeds
void write_edr_table(const std::vector<EdrRow>& rows, std::ostream& os);
/// Header: i,lambda_i
void write_spectrum(const std::vector<double>& lambdas, std::ostream& os);
/// Header: log_i,log_lambda (plot-ready pairs).
void write_plot_data(const std::vector<double>& lambdas, std::ostream& os);

/// Decay fit of the homogeneous kernel on n uniform points of the cap
/// {angle(y, e_{d+1}) <= cap_angle} of S^d. cap_angle = pi is the full sphere.
DecayFit restricted_sphere_edr(const ntk::NtkDescriptor& desc, int d, double cap_angle, int n,
                               Window window, std::uint64_t seed);

} // namespace ntklab::spectral
