#include "ntklab/spectral_estimator.hpp"

#include "ntklab/random.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace ntklab::spectral {

EigenEstimate empirical_eigenvalues(const ntk::KernelMatrix& K)
{
    const auto n = static_cast<double>(K.size());
    if (K.size() == 0)
        throw std::invalid_argument("empirical_eigenvalues: empty sample");
    EigenEstimate est;
    est.trace = K.trace() / n;
    const double floor = 1e-10 * std::abs(est.trace);
    const Eigen::VectorXd& ev = K.eigenvalues();
    est.lambdas.reserve(static_cast<std::size_t>(ev.size()));
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        const double v = ev(i) / n;
        if (v < floor) {
            ++est.dropped;
            if (v < -floor)
                ++est.negative;
            continue;
        }
        est.lambdas.push_back(v);
    }
    return est;
}

EigenEstimate empirical_eigenvalues(const ntk::NtkDescriptor& desc, const ntk::PointSet& X)
{
    if (X.cols() == 0)
        throw std::invalid_argument("empirical_eigenvalues: empty sample");
    return empirical_eigenvalues(ntk::gram(desc, X));
}

DecayFit fit_decay(const std::vector<double>& lambdas, Window window)
{
    if (window.lo < 1 || window.hi <= window.lo)
        throw std::invalid_argument("fit window must satisfy 1 <= lo < hi");
    if (static_cast<std::size_t>(window.hi) > lambdas.size())
        throw std::invalid_argument("window exceeds reliable spectrum");
    const int m = window.hi - window.lo + 1;
    double sx = 0.0, sy = 0.0;
    std::vector<double> xs, ys;
    xs.reserve(static_cast<std::size_t>(m));
    ys.reserve(static_cast<std::size_t>(m));
    for (int i = window.lo; i <= window.hi; ++i) {
        const double v = lambdas[static_cast<std::size_t>(i - 1)];
        if (!(v > 0.0))
            throw std::invalid_argument("window exceeds reliable spectrum");
        xs.push_back(std::log(static_cast<double>(i)));
        ys.push_back(std::log(v));
        sx += xs.back();
        sy += ys.back();
    }
    const double mx = sx / m, my = sy / m;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (int k = 0; k < m; ++k) {
        const double dx = xs[static_cast<std::size_t>(k)] - mx;
        const double dy = ys[static_cast<std::size_t>(k)] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    const double beta = sxy / sxx;
    DecayFit fit;
    fit.slope = -beta;
    fit.intercept = my - beta * mx;
    fit.window = window;
    fit.n_samples = static_cast<int>(lambdas.size());
    if (syy == 0.0) {
        fit.r2 = 1.0;
    } else {
        double ss_res = 0.0;
        for (int k = 0; k < m; ++k) {
            const double e = ys[static_cast<std::size_t>(k)] - (fit.intercept + beta * xs[static_cast<std::size_t>(k)]);
            ss_res += e * e;
        }
        fit.r2 = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
    }
    return fit;
}

double theoretical_rate(int d)
{
    if (d < 1)
        throw std::invalid_argument("theoretical_rate: d must be >= 1");
    return static_cast<double>(d + 1) / d;
}

std::string EdrRow::cell_id() const
{
    return distribution + "_d" + std::to_string(d) + "_L" + std::to_string(layers);
}

namespace {

struct Replicate {
    DecayFit fit;
    std::vector<double> lambdas;
};

Replicate run_replicate(const EdrConfig& cfg, const std::string& distribution, int d, int layers,
                        int replicate)
{
    const std::string tag = "edr/" + distribution + "/d" + std::to_string(d) + "/L" + std::to_string(layers);
    const std::uint64_t seed = derive_seed(cfg.root_seed, tag, static_cast<std::uint64_t>(replicate));
    const auto dist = sampling::parse_distribution(distribution, d, seed);
    const ntk::PointSet X = sampling::sample(dist, cfg.n);
    const auto desc = ntk::NtkDescriptor::full(layers, cfg.include_bias_constant);
    Replicate rep;
    rep.lambdas = empirical_eigenvalues(desc, X).lambdas;
    rep.fit = fit_decay(rep.lambdas, cfg.window);
    rep.fit.seed = seed;
    rep.fit.n_samples = cfg.n;
    return rep;
}

EdrRow assemble(const EdrConfig& cfg, const std::string& distribution, int d, int layers,
                std::vector<Replicate>& reps)
{
    EdrRow row;
    row.distribution = distribution;
    row.d = d;
    row.layers = layers;
    row.r_theory = theoretical_rate(d);
    row.n = cfg.n;
    row.window = cfg.window;
    row.seeds = static_cast<int>(reps.size());
    double s = 0.0;
    for (const auto& r : reps)
        s += r.fit.slope;
    row.r_mean = s / static_cast<double>(reps.size());
    if (reps.size() > 1) {
        double v = 0.0;
        for (const auto& r : reps)
            v += (r.fit.slope - row.r_mean) * (r.fit.slope - row.r_mean);
        row.r_std = std::sqrt(v / static_cast<double>(reps.size() - 1));
    }
    std::size_t len = reps.front().lambdas.size();
    for (const auto& r : reps)
        len = std::min(len, r.lambdas.size());
    row.mean_spectrum.assign(len, 0.0);
    for (const auto& r : reps)
        for (std::size_t i = 0; i < len; ++i)
            row.mean_spectrum[i] += r.lambdas[i] / static_cast<double>(reps.size());
    for (auto& r : reps)
        row.fits.push_back(r.fit);
    return row;
}

void validate(const EdrConfig& cfg)
{
    if (cfg.n < 1 || cfg.seeds < 1)
        throw std::invalid_argument("edr config: n and seeds must be positive");
    if (cfg.window.hi > cfg.n)
        throw std::invalid_argument("edr config: window exceeds sample size");
}

} // namespace

EdrRow edr_cell(const EdrConfig& cfg, const std::string& distribution, int d, int layers)
{
    validate(cfg);
    std::vector<Replicate> reps;
    for (int s = 0; s < cfg.seeds; ++s)
        reps.push_back(run_replicate(cfg, distribution, d, layers, s));
    return assemble(cfg, distribution, d, layers, reps);
}

std::vector<EdrRow> edr_experiment(const EdrConfig& cfg, const Progress& progress)
{
    validate(cfg);
    struct Cell {
        std::string dist;
        int d;
        int layers;
    };
    std::vector<Cell> cells;
    for (const auto& dist : cfg.distributions) {
        sampling::parse_distribution(dist, 1); // reject unknown names before any work
        for (int d : cfg.dims)
            for (int L : cfg.layers)
                cells.push_back({dist, d, L});
    }

    const std::size_t per_cell = static_cast<std::size_t>(cfg.seeds);
    std::vector<Replicate> reps(cells.size() * per_cell);
    std::vector<std::size_t> remaining(cells.size(), per_cell);
    std::vector<EdrRow> rows(cells.size());
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::exception_ptr failure;

    auto worker = [&] {
        for (;;) {
            const std::size_t task = next.fetch_add(1);
            if (task >= reps.size())
                return;
            const std::size_t c = task / per_cell;
            try {
                reps[task] = run_replicate(cfg, cells[c].dist, cells[c].d, cells[c].layers,
                                           static_cast<int>(task % per_cell));
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure)
                    failure = std::current_exception();
                next.store(reps.size());
                return;
            }
            std::lock_guard lock(mu);
            if (--remaining[c] == 0) {
                std::vector<Replicate> mine(reps.begin() + static_cast<std::ptrdiff_t>(c * per_cell),
                                            reps.begin() + static_cast<std::ptrdiff_t>((c + 1) * per_cell));
                rows[c] = assemble(cfg, cells[c].dist, cells[c].d, cells[c].layers, mine);
                if (progress)
                    progress(rows[c]);
            }
        }
    };

    const int jobs = std::max(1, cfg.jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }
    if (failure)
        std::rethrow_exception(failure);
    return rows;
}

void write_edr_table(const std::vector<EdrRow>& rows, std::ostream& os)
{
    os << "distribution,d,L,r_mean,r_std,r_theory,n,window_lo,window_hi,seeds\n";
    os << std::setprecision(17);
    for (const auto& r : rows)
        os << r.distribution << ',' << r.d << ',' << r.layers << ',' << r.r_mean << ',' << r.r_std << ','
           << r.r_theory << ',' << r.n << ',' << r.window.lo << ',' << r.window.hi << ',' << r.seeds << '\n';
}

void write_spectrum(const std::vector<double>& lambdas, std::ostream& os)
{
    os << "i,lambda_i\n" << std::setprecision(17);
    for (std::size_t i = 0; i < lambdas.size(); ++i)
        os << i + 1 << ',' << lambdas[i] << '\n';
}

void write_plot_data(const std::vector<double>& lambdas, std::ostream& os)
{
    os << "log_i,log_lambda\n" << std::setprecision(17);
    for (std::size_t i = 0; i < lambdas.size(); ++i)
        os << std::log(static_cast<double>(i + 1)) << ',' << std::log(lambdas[i]) << '\n';
}

DecayFit restricted_sphere_edr(const ntk::NtkDescriptor& desc, int d, double cap_angle, int n,
                               Window window, std::uint64_t seed)
{
    if (!(cap_angle > 0.0 && cap_angle <= std::numbers::pi))
        throw std::invalid_argument("cap angle must lie in (0, pi]");
    if (desc.variant != ntk::Variant::homogeneous)
        throw std::invalid_argument("restricted_sphere_edr expects a homogeneous descriptor");
    const auto dist = sampling::SampleDistribution::sphere_cap(d, cap_angle, seed);
    const ntk::PointSet Y = sampling::sample(dist, n);
    const auto est = empirical_eigenvalues(desc, Y);
    DecayFit fit = fit_decay(est.lambdas, window);
    fit.seed = seed;
    fit.n_samples = n;
    return fit;
}

} // namespace ntklab::spectral
