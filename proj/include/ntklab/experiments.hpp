#pragma once

#include "ntklab/config.hpp"
#include "ntklab/kernel_flow.hpp"
#include "ntklab/mirrored_network.hpp"
#include "ntklab/sampling.hpp"
#include "ntklab/spectral_estimator.hpp"
#include "ntklab/sphere_harmonics.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

/// Experiment drivers shared by the command-line tool and the acceptance
/// suite. Every parameter record has defaults, reads itself from a Config
/// and writes itself back (the resolved config echoed next to the outputs).
namespace ntklab::exp {

using config::Config;

inline constexpr std::uint64_t kDefaultSeed = 2024;

// ---------------------------------------------------------------- tasks

/// Synthetic regression task y = f*(x) + noise with f* in the RKHS span of
/// the full NTK.
struct TaskSpec {
    int d = 1;
    int layers = 2;
    int n = 256;
    std::string dist = "ucube";
    double sigma = 0.3;
    std::string noise = "gaussian"; ///< gaussian, or uniform on [-sqrt(3) sigma, sqrt(3) sigma]
    int target_centers = 5;
    double target_scale = 0.5;
    std::uint64_t target_seed = 999;
    std::uint64_t seed = kDefaultSeed;

    static std::set<std::string> keys();
    void read(const Config& c);
    void write(Config& c) const;
};

struct Task {
    sampling::SampleDistribution dist;
    flow::RkhsTarget f_star;
    ntk::PointSet X;
    Eigen::VectorXd y;
};

flow::RkhsTarget make_target(const TaskSpec& spec);
/// Training data of replicate `run`, drawn from substream ("task", run).
Task make_task(const TaskSpec& spec, std::uint64_t run, int n);
/// Fresh labelled points for holdout use, substream ("holdout", run).
void draw_labelled(const TaskSpec& spec, const flow::RkhsTarget& f_star, std::uint64_t run, int n,
                   std::string_view tag, ntk::PointSet& X, Eigen::VectorXd& y);
/// Bound on |noise|; infinite for Gaussian noise.
double noise_bound(const TaskSpec& spec);

// ---------------------------------------------------------------- edr

struct EdrParams {
    spectral::EdrConfig cfg;
    std::filesystem::path out = "out/edr";
    bool plot_data = false;

    static std::set<std::string> keys();
    static EdrParams from_config(const Config& c);
    Config to_config() const;
};

std::vector<spectral::EdrRow> run_edr(const EdrParams& p, std::ostream* log);

// ---------------------------------------------------------------- sphere modes

struct SphereModesParams {
    std::string profile = "ntk"; ///< ntk, constant, linear, kappa0, kappa1
    int d = 3;
    int layers = 2;
    int n_max = 100;
    int quad_order = 400;
    std::string rule = "angular"; ///< angular or jacobi
    int fit_lo = 10;
    int fit_hi = 60;
    std::filesystem::path out = "out/sphere-modes";
    bool plot_data = false;

    static std::set<std::string> keys();
    static SphereModesParams from_config(const Config& c);
    Config to_config() const;
};

struct SphereModesResult {
    sphere::ModeSpectrum spectrum;
    double slope = 0.0; ///< least-squares slope of ln mu_n on ln n over [fit_lo, fit_hi]
    double r2 = 0.0;
    double profile_at_one = 0.0;
    int truncation = -1;        ///< smallest N with mu_N a_N < 1e-4 f(1), or -1
    double trace_at_truncation = 0.0;
    double trace_full = 0.0;
    int nonzero_modes = 0;      ///< |mu_n| > 1e-12 f(1)
};

sphere::Profile make_profile(const std::string& name, int layers);
SphereModesResult sphere_modes(const SphereModesParams& p);
void run_sphere_modes(const SphereModesParams& p, std::ostream* log);

// ---------------------------------------------------------------- flow

struct FlowParams {
    TaskSpec task;
    int n_holdout = 256;
    double s = 1.0;
    double c = 1.0;
    std::vector<double> times;  ///< empty: n_times log-spaced points in [1e-2, 1e6] t_op
    int n_times = 33;
    int n_mc = 4000;
    std::filesystem::path out = "out/flow";
    bool plot_data = false;

    static std::set<std::string> keys();
    static FlowParams from_config(const Config& c);
    Config to_config() const;
};

struct FlowResult {
    std::vector<flow::RiskPoint> curve;
    double t_op = 0.0;
    double y_norm = 0.0;
};

FlowResult flow_curve(const FlowParams& p);
void run_flow(const FlowParams& p, std::ostream* log);

/// Mean L2 risk at t_op over replicates for each n and the least-squares
/// exponent of risk ~ n^{-e}.
struct RateParams {
    TaskSpec task;
    std::vector<int> ns{128, 256, 512, 1024};
    int reps = 10;
    double s = 1.0;
    double c = 1.0;
    int n_mc = 4000;
};

struct RateResult {
    std::vector<int> ns;
    std::vector<double> mean_risk;
    double fitted_exponent = 0.0;
    double theory_exponent = 0.0;
};

RateResult rate_scaling(const RateParams& p);

/// Risk at t_op against risk at factor * t_op over independent runs.
struct OverfitParams {
    TaskSpec task;
    int runs = 20;
    double factor = 1e6;
    double s = 1.0;
    double c = 1.0;
    int n_mc = 4000;
};

struct OverfitResult {
    std::vector<double> risk_op;
    std::vector<double> risk_late;
    int late_worse = 0;
};

OverfitResult overfit_probe(const OverfitParams& p);

// ---------------------------------------------------------------- cv

struct CvParams {
    TaskSpec task = [] {
        TaskSpec t;
        t.noise = "uniform";
        return t;
    }();
    int n_holdout = 256;
    double Q = 2.0;
    double M = 0.0; ///< 0: sup |f*| on 4096 draws plus the noise bound
    int runs = 50;
    double delta = 0.1;
    int n_mc = 4000;
    std::filesystem::path out = "out/cv";

    static std::set<std::string> keys();
    static CvParams from_config(const Config& c);
    Config to_config() const;
};

struct CvRun {
    int run = 0;
    double t_cv = 0.0;
    double t_best = 0.0;
    double risk_selected = 0.0; ///< || L_M f_{t_cv} - f* ||_{L2}
    double risk_best = 0.0;     ///< min over candidates of || L_M f_t - f* ||_{L2}
    double bound = 0.0;         ///< 2 risk_best + sqrt(160 M^2 ln(2|T|/delta) / n_holdout)
    bool within_bound = false;
};

struct CvSummary {
    std::vector<CvRun> runs;
    std::vector<double> candidates;
    double M = 0.0;
    double pass_fraction = 0.0;
};

CvSummary cv_experiment(const CvParams& p);
void run_cv(const CvParams& p, std::ostream* log);

// ---------------------------------------------------------------- network

struct TrainParams {
    TaskSpec task = [] {
        TaskSpec t;
        t.d = 2;
        t.n = 5;
        t.sigma = 0.0;
        return t;
    }();
    int width = 1024;
    double eta = 0.0; ///< 0: the stability heuristic n / (2 lambda_max(K_0(X, X)))
    int steps = 400;
    int log_every = 10;
    bool kernel_gap = true;
    bool checkpoint = false;
    std::filesystem::path out = "out/train";

    static std::set<std::string> keys();
    static TrainParams from_config(const Config& c);
    Config to_config() const;
};

/// Returns the process exit code (1 on divergence, after writing
/// divergence.txt and the partial trace).
int run_train(const TrainParams& p, std::ostream* log);

struct CompareParams {
    TaskSpec task = [] {
        TaskSpec t;
        t.d = 2;
        t.n = 5;
        t.sigma = 0.0;
        return t;
    }();
    std::vector<int> widths{256, 1024, 4096};
    int seeds = 5;
    double t_final = 20.0;
    double eta = 0.0; ///< 0: n / (2 lambda_max(K^NT(X, X))) per seed
    int log_every = 10;
    std::filesystem::path out = "out/compare";

    static std::set<std::string> keys();
    static CompareParams from_config(const Config& c);
    Config to_config() const;
};

struct LazyRun {
    int width = 0;
    int seed_index = 0;
    double eta = 0.0;
    int steps = 0;
    double init_kernel_gap = 0.0;  ///< sup over the probe grid of |K_0 - K^NT|
    double max_kernel_gap = 0.0;   ///< same, maximized over logged times
    double predictor_gap = 0.0;    ///< sup over grid and logged times of |f^NN - f^NTK|
    double drift_ratio = 0.0;      ///< max over layers and times of ||W_t - W_0||_F / m^{1/4}
    double final_residual = 0.0;
};

struct LazyRow {
    int width = 0;
    double init_kernel_gap = 0.0; ///< medians over seeds
    double predictor_gap = 0.0;
    double drift_ratio = 0.0;
};

struct LazyResult {
    std::vector<LazyRun> runs; ///< seed-major, widths in the given order
    std::vector<LazyRow> rows;
};

using LazyProgress = std::function<void(const LazyRun&)>;
LazyResult lazy_sweep(const CompareParams& p, const LazyProgress& progress = {});
void run_compare(const CompareParams& p, std::ostream* log);

/// Writes config.txt (the resolved config) into dir, creating it.
void echo_config(const Config& c, const std::filesystem::path& dir);

} // namespace ntklab::exp
