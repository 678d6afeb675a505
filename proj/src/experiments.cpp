#include "ntklab/experiments.hpp"

#include "ntklab/error.hpp"
#include "ntklab/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace ntklab::exp {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    return out;
}

std::set<std::string> join(std::set<std::string> a, const std::set<std::string>& b)
{
    a.insert(b.begin(), b.end());
    return a;
}

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size() / 2;
    return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

// Least-squares slope of ln y on ln x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    const auto m = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

ntk::NtkDescriptor task_kernel(const TaskSpec& spec)
{
    return ntk::NtkDescriptor::full(spec.layers);
}

} // namespace

void echo_config(const Config& c, const fs::path& dir)
{
    fs::create_directories(dir);
    c.save(dir / "config.txt");
}

// ---------------------------------------------------------------- tasks

std::set<std::string> TaskSpec::keys()
{
    return {"d", "L", "n", "dist", "sigma", "noise", "target_centers", "target_scale", "target_seed", "seed"};
}

void TaskSpec::read(const Config& c)
{
    d = c.get_int("d", d);
    layers = c.get_int("L", layers);
    n = c.get_int("n", n);
    dist = c.get_string("dist", dist);
    sigma = c.get_double("sigma", sigma);
    noise = c.get_string("noise", noise);
    target_centers = c.get_int("target_centers", target_centers);
    target_scale = c.get_double("target_scale", target_scale);
    target_seed = c.get_u64("target_seed", target_seed);
    seed = c.get_u64("seed", seed);
    if (noise != "gaussian" && noise != "uniform")
        throw config::ConfigError("noise must be 'gaussian' or 'uniform'");
    if (sigma < 0.0)
        throw config::ConfigError("sigma must be nonnegative");
    if (n < 1)
        throw config::ConfigError("n must be positive");
    sampling::parse_distribution(dist, std::max(d, 1));
}

void TaskSpec::write(Config& c) const
{
    c.set("d", d);
    c.set("L", layers);
    c.set("n", n);
    c.set("dist", dist);
    c.set("sigma", sigma);
    c.set("noise", noise);
    c.set("target_centers", target_centers);
    c.set("target_scale", target_scale);
    c.set("target_seed", target_seed);
    c.set("seed", seed);
}

double noise_bound(const TaskSpec& spec)
{
    if (spec.sigma == 0.0)
        return 0.0;
    return spec.noise == "uniform" ? std::sqrt(3.0) * spec.sigma : std::numeric_limits<double>::infinity();
}

flow::RkhsTarget make_target(const TaskSpec& spec)
{
    const auto centers = sampling::parse_distribution(spec.dist, spec.d);
    return flow::make_rkhs_target(flow::cross_kernel(task_kernel(spec)), centers, spec.target_centers,
                                  spec.target_scale, spec.target_seed);
}

namespace {

Eigen::VectorXd draw_noise(const TaskSpec& spec, int n, Rng& rng)
{
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    if (spec.sigma == 0.0)
        return e;
    if (spec.noise == "uniform") {
        const double h = noise_bound(spec);
        std::uniform_real_distribution<double> u(-h, h);
        for (int i = 0; i < n; ++i)
            e(i) = u(rng);
    } else {
        std::normal_distribution<double> g(0.0, spec.sigma);
        for (int i = 0; i < n; ++i)
            e(i) = g(rng);
    }
    return e;
}

} // namespace

void draw_labelled(const TaskSpec& spec, const flow::RkhsTarget& f_star, std::uint64_t run, int n,
                   std::string_view tag, ntk::PointSet& X, Eigen::VectorXd& y)
{
    Rng rng = make_rng(spec.seed, tag, run);
    const auto dist = sampling::parse_distribution(spec.dist, spec.d);
    X = sampling::sample(dist, n, rng);
    y = f_star(X) + draw_noise(spec, n, rng);
}

Task make_task(const TaskSpec& spec, std::uint64_t run, int n)
{
    Task t{sampling::parse_distribution(spec.dist, spec.d), make_target(spec), {}, {}};
    draw_labelled(spec, t.f_star, run, n, "task", t.X, t.y);
    return t;
}

// ---------------------------------------------------------------- edr

std::set<std::string> EdrParams::keys()
{
    return {"dist", "d", "L", "n", "window_lo", "window_hi", "seeds", "seed", "bias", "jobs", "out", "plot_data"};
}

EdrParams EdrParams::from_config(const Config& c)
{
    c.require_known(keys());
    EdrParams p;
    auto& g = p.cfg;
    g.distributions = c.get_string_list("dist", g.distributions);
    g.dims = c.get_int_list("d", g.dims);
    g.layers = c.get_int_list("L", g.layers);
    g.n = c.get_int("n", g.n);
    g.window.lo = c.get_int("window_lo", g.window.lo);
    g.window.hi = c.get_int("window_hi", g.window.hi);
    g.seeds = c.get_int("seeds", g.seeds);
    g.root_seed = c.get_u64("seed", kDefaultSeed);
    g.include_bias_constant = c.get_bool("bias", g.include_bias_constant);
    g.jobs = c.get_int("jobs", g.jobs);
    p.out = c.get_string("out", p.out.string());
    p.plot_data = c.get_bool("plot_data", p.plot_data);
    for (const auto& name : g.distributions)
        sampling::parse_distribution(name, 1);
    if (g.dims.empty() || g.layers.empty() || g.distributions.empty())
        throw config::ConfigError("edr grid must be nonempty");
    for (int d : g.dims)
        if (d < 1)
            throw config::ConfigError("d must be positive");
    for (int L : g.layers)
        if (L < 1)
            throw config::ConfigError("L must be positive");
    return p;
}

Config EdrParams::to_config() const
{
    Config c;
    c.set("dist", cfg.distributions);
    c.set("d", cfg.dims);
    c.set("L", cfg.layers);
    c.set("n", cfg.n);
    c.set("window_lo", cfg.window.lo);
    c.set("window_hi", cfg.window.hi);
    c.set("seeds", cfg.seeds);
    c.set("seed", cfg.root_seed);
    c.set("bias", cfg.include_bias_constant);
    c.set("jobs", cfg.jobs);
    c.set("out", out.string());
    c.set("plot_data", plot_data);
    return c;
}

std::vector<spectral::EdrRow> run_edr(const EdrParams& p, std::ostream* log)
{
    echo_config(p.to_config(), p.out);
    auto rows = spectral::edr_experiment(p.cfg, [&](const spectral::EdrRow& r) {
        if (log)
            *log << std::fixed << std::setprecision(3) << r.cell_id() << ": r = " << r.r_mean << " +- " << r.r_std
                 << " (theory " << r.r_theory << ")\n"
                 << std::defaultfloat;
    });
    auto table = open_out(p.out / "edr_table.csv");
    spectral::write_edr_table(rows, table);
    for (const auto& r : rows) {
        auto spec = open_out(p.out / ("spectrum_" + r.cell_id() + ".csv"));
        spectral::write_spectrum(r.mean_spectrum, spec);
        if (p.plot_data) {
            auto plot = open_out(p.out / ("plot_" + r.cell_id() + ".csv"));
            spectral::write_plot_data(r.mean_spectrum, plot);
        }
    }
    return rows;
}

// ---------------------------------------------------------------- sphere modes

std::set<std::string> SphereModesParams::keys()
{
    return {"profile", "d", "L", "n_max", "quad_order", "rule", "fit_lo", "fit_hi", "out", "plot_data"};
}

SphereModesParams SphereModesParams::from_config(const Config& c)
{
    c.require_known(keys());
    SphereModesParams p;
    p.profile = c.get_string("profile", p.profile);
    p.d = c.get_int("d", p.d);
    p.layers = c.get_int("L", p.layers);
    p.n_max = c.get_int("n_max", p.n_max);
    p.quad_order = c.get_int("quad_order", p.quad_order);
    p.rule = c.get_string("rule", p.rule);
    p.fit_lo = c.get_int("fit_lo", p.fit_lo);
    p.fit_hi = c.get_int("fit_hi", p.fit_hi);
    p.out = c.get_string("out", p.out.string());
    p.plot_data = c.get_bool("plot_data", p.plot_data);
    make_profile(p.profile, std::max(p.layers, 1));
    if (p.rule != "angular" && p.rule != "jacobi")
        throw config::ConfigError("rule must be 'angular' or 'jacobi'");
    return p;
}

Config SphereModesParams::to_config() const
{
    Config c;
    c.set("profile", profile);
    c.set("d", d);
    c.set("L", layers);
    c.set("n_max", n_max);
    c.set("quad_order", quad_order);
    c.set("rule", rule);
    c.set("fit_lo", fit_lo);
    c.set("fit_hi", fit_hi);
    c.set("out", out.string());
    c.set("plot_data", plot_data);
    return c;
}

sphere::Profile make_profile(const std::string& name, int layers)
{
    if (name == "ntk") {
        if (layers < 1)
            throw std::invalid_argument("NTK needs at least one hidden layer");
        return [layers](double u) { return ntk::homogeneous_profile(layers, u); };
    }
    if (name == "constant")
        return [](double) { return 1.0; };
    if (name == "linear")
        return [](double u) { return u; };
    if (name == "kappa0")
        return [](double u) { return ntk::kappa0(u); };
    if (name == "kappa1")
        return [](double u) { return ntk::kappa1(u); };
    throw std::invalid_argument("unknown profile '" + name + "'");
}

SphereModesResult sphere_modes(const SphereModesParams& p)
{
    const auto f = make_profile(p.profile, p.layers);
    const auto g = sphere::SphereGeometry::make(p.d);
    sphere::FunkHeckeOptions opts;
    opts.quad_order = p.quad_order;
    opts.rule = p.rule == "jacobi" ? sphere::QuadratureRule::jacobi : sphere::QuadratureRule::angular;

    SphereModesResult res;
    res.spectrum = sphere::funk_hecke_modes(f, g, p.n_max, opts);
    res.profile_at_one = f(1.0);
    res.trace_full = res.spectrum.trace(p.n_max);
    const double scale = std::abs(res.profile_at_one);
    for (int n = 0; n <= p.n_max; ++n) {
        const double mu = res.spectrum.mu[static_cast<std::size_t>(n)];
        if (std::abs(mu) > 1e-12 * scale)
            ++res.nonzero_modes;
        if (n >= 1 && res.truncation < 0 && mu * res.spectrum.mult[static_cast<std::size_t>(n)] < 1e-4 * scale) {
            res.truncation = n;
            res.trace_at_truncation = res.spectrum.trace(n);
        }
    }
    res.slope = std::numeric_limits<double>::quiet_NaN();
    res.r2 = std::numeric_limits<double>::quiet_NaN();
    if (p.fit_hi <= p.n_max) {
        // mu_1, mu_2, ... as a 1-based list so that the index is the degree
        const std::vector<double> modes(res.spectrum.mu.begin() + 1, res.spectrum.mu.end());
        try {
            const auto fit = spectral::fit_decay(modes, {p.fit_lo, p.fit_hi});
            res.slope = -fit.slope;
            res.r2 = fit.r2;
        } catch (const std::invalid_argument&) {
            // leaves NaN: the profile has vanishing modes inside the window
        }
    }
    return res;
}

void run_sphere_modes(const SphereModesParams& p, std::ostream* log)
{
    const auto res = sphere_modes(p);
    echo_config(p.to_config(), p.out);
    {
        auto out = open_out(p.out / "modes.csv");
        sphere::write_csv(res.spectrum, out);
    }
    auto sum = open_out(p.out / "summary.csv");
    sum << "profile,d,L,n_max,fit_lo,fit_hi,slope,r2,profile_at_one,truncation,trace_at_truncation,trace_full,"
           "nonzero_modes\n"
        << std::setprecision(17) << p.profile << ',' << p.d << ',' << p.layers << ',' << p.n_max << ',' << p.fit_lo
        << ',' << p.fit_hi << ',' << res.slope << ',' << res.r2 << ',' << res.profile_at_one << ','
        << res.truncation << ',' << res.trace_at_truncation << ',' << res.trace_full << ',' << res.nonzero_modes
        << '\n';
    if (p.plot_data) {
        auto plot = open_out(p.out / "plot_modes.csv");
        plot << "log_n,log_mu\n" << std::setprecision(17);
        for (std::size_t n = 1; n < res.spectrum.mu.size(); ++n)
            if (res.spectrum.mu[n] > 0.0)
                plot << std::log(static_cast<double>(n)) << ',' << std::log(res.spectrum.mu[n]) << '\n';
    }
    if (log)
        *log << "slope " << res.slope << " over [" << p.fit_lo << ", " << p.fit_hi << "], trace "
             << res.trace_at_truncation << " at N = " << res.truncation << " vs f(1) = " << res.profile_at_one
             << '\n';
}

// ---------------------------------------------------------------- flow

namespace {

const std::set<std::string> kFlowKeys{"n_holdout", "s", "c", "times", "n_times", "n_mc", "out", "plot_data"};

ntk::PointSet mc_points(const TaskSpec& spec, int n_mc, std::uint64_t run)
{
    Rng rng = make_rng(spec.seed, "mc", run);
    return sampling::sample(sampling::parse_distribution(spec.dist, spec.d), n_mc, rng);
}

} // namespace

std::set<std::string> FlowParams::keys()
{
    return join(TaskSpec::keys(), kFlowKeys);
}

FlowParams FlowParams::from_config(const Config& c)
{
    c.require_known(keys());
    FlowParams p;
    p.task.read(c);
    p.n_holdout = c.get_int("n_holdout", p.n_holdout);
    p.s = c.get_double("s", p.s);
    p.c = c.get_double("c", p.c);
    p.times = c.get_double_list("times", p.times);
    p.n_times = c.get_int("n_times", p.n_times);
    p.n_mc = c.get_int("n_mc", p.n_mc);
    p.out = c.get_string("out", p.out.string());
    p.plot_data = c.get_bool("plot_data", p.plot_data);
    for (double t : p.times)
        if (t < 0.0)
            throw config::ConfigError("times must be nonnegative");
    if (p.n_times < 2 || p.n_mc < 1 || p.n_holdout < 1)
        throw config::ConfigError("n_times >= 2, n_mc >= 1 and n_holdout >= 1 required");
    flow::stopping_exponent(p.task.d, p.s);
    return p;
}

Config FlowParams::to_config() const
{
    Config c;
    task.write(c);
    c.set("n_holdout", n_holdout);
    c.set("s", s);
    c.set("c", this->c);
    c.set("times", times);
    c.set("n_times", n_times);
    c.set("n_mc", n_mc);
    c.set("out", out.string());
    c.set("plot_data", plot_data);
    return c;
}

FlowResult flow_curve(const FlowParams& p)
{
    const Task task = make_task(p.task, 0, p.task.n);
    ntk::PointSet Xh;
    Eigen::VectorXd yh;
    draw_labelled(p.task, task.f_star, 0, p.n_holdout, "holdout", Xh, yh);
    const ntk::PointSet Xmc = mc_points(p.task, p.n_mc, 0);
    const Eigen::VectorXd fmc = task.f_star(Xmc);

    const auto pred = flow::FlowPredictor::fit(flow::cross_kernel(task_kernel(p.task)), task.X, task.y);
    FlowResult res;
    res.t_op = flow::optimal_stopping_time(p.task.n, p.task.d, p.s, p.c);
    res.y_norm = task.y.norm();
    std::vector<double> times = p.times;
    if (times.empty())
        for (int i = 0; i < p.n_times; ++i)
            times.push_back(res.t_op * std::pow(10.0, -2.0 + 8.0 * i / (p.n_times - 1)));

    const Eigen::MatrixXd KUh = pred.project(Xh);
    const Eigen::MatrixXd KUmc = pred.project(Xmc);
    for (double t : times) {
        const auto pt = pred.with_time(t);
        flow::RiskPoint r;
        r.t = t;
        r.train_residual = pt.train_residual();
        r.holdout_risk = (pt.predict_projected(KUh) - yh).squaredNorm() / static_cast<double>(yh.size());
        r.l2_risk = (pt.predict_projected(KUmc) - fmc).squaredNorm() / static_cast<double>(fmc.size());
        res.curve.push_back(r);
    }
    return res;
}

void run_flow(const FlowParams& p, std::ostream* log)
{
    const auto res = flow_curve(p);
    echo_config(p.to_config(), p.out);
    auto out = open_out(p.out / "risk_curve.csv");
    flow::write_risk_curve(res.curve, out);
    if (p.plot_data) {
        auto plot = open_out(p.out / "plot_risk.csv");
        plot << "log_t,log_l2_risk\n" << std::setprecision(17);
        for (const auto& r : res.curve)
            if (r.t > 0.0 && r.l2_risk > 0.0)
                plot << std::log(r.t) << ',' << std::log(r.l2_risk) << '\n';
    }
    if (log) {
        const auto best = std::min_element(res.curve.begin(), res.curve.end(),
                                           [](const auto& a, const auto& b) { return a.l2_risk < b.l2_risk; });
        *log << "t_op = " << res.t_op << "; best l2 risk " << best->l2_risk << " at t = " << best->t
             << "; final train residual " << res.curve.back().train_residual << " (|y| = " << res.y_norm << ")\n";
    }
}

RateResult rate_scaling(const RateParams& p)
{
    if (p.ns.size() < 2 || p.reps < 1)
        throw std::invalid_argument("rate scaling needs two sample sizes and one replicate");
    RateResult res;
    res.ns = p.ns;
    res.theory_exponent = flow::risk_exponent(p.task.d, p.s);
    const auto k = flow::cross_kernel(task_kernel(p.task));
    std::vector<double> xs;
    for (int n : p.ns) {
        const double t_op = flow::optimal_stopping_time(n, p.task.d, p.s, p.c);
        double sum = 0.0;
        for (int r = 0; r < p.reps; ++r) {
            const auto run = static_cast<std::uint64_t>(n) * 1000 + static_cast<std::uint64_t>(r);
            const Task task = make_task(p.task, run, n);
            const auto pred = flow::FlowPredictor::fit(k, task.X, task.y, t_op);
            const ntk::PointSet Xmc = mc_points(p.task, p.n_mc, run);
            sum += flow::l2_risk(pred.as_function(), task.f_star.as_function(), Xmc);
        }
        res.mean_risk.push_back(sum / p.reps);
        xs.push_back(n);
    }
    res.fitted_exponent = -loglog_slope(xs, res.mean_risk);
    return res;
}

OverfitResult overfit_probe(const OverfitParams& p)
{
    OverfitResult res;
    const auto k = flow::cross_kernel(task_kernel(p.task));
    const double t_op = flow::optimal_stopping_time(p.task.n, p.task.d, p.s, p.c);
    for (int r = 0; r < p.runs; ++r) {
        const Task task = make_task(p.task, static_cast<std::uint64_t>(r), p.task.n);
        const auto pred = flow::FlowPredictor::fit(k, task.X, task.y);
        const ntk::PointSet Xmc = mc_points(p.task, p.n_mc, static_cast<std::uint64_t>(r));
        const Eigen::MatrixXd KU = pred.project(Xmc);
        const Eigen::VectorXd fmc = task.f_star(Xmc);
        const double a = (pred.with_time(t_op).predict_projected(KU) - fmc).squaredNorm() / p.n_mc;
        const double b = (pred.with_time(p.factor * t_op).predict_projected(KU) - fmc).squaredNorm() / p.n_mc;
        res.risk_op.push_back(a);
        res.risk_late.push_back(b);
        if (b > a)
            ++res.late_worse;
    }
    return res;
}

// ---------------------------------------------------------------- cv

std::set<std::string> CvParams::keys()
{
    return join(TaskSpec::keys(), {"n_holdout", "Q", "M", "runs", "delta", "n_mc", "out"});
}

CvParams CvParams::from_config(const Config& c)
{
    c.require_known(keys());
    CvParams p;
    p.task.read(c);
    p.n_holdout = c.get_int("n_holdout", p.n_holdout);
    p.Q = c.get_double("Q", p.Q);
    p.M = c.get_double("M", p.M);
    p.runs = c.get_int("runs", p.runs);
    p.delta = c.get_double("delta", p.delta);
    p.n_mc = c.get_int("n_mc", p.n_mc);
    p.out = c.get_string("out", p.out.string());
    if (!(p.Q > 1.0))
        throw config::ConfigError("Q must exceed 1");
    if (p.M < 0.0)
        throw config::ConfigError("M must be nonnegative (0 selects it automatically)");
    if (!(p.delta > 0.0 && p.delta < 1.0))
        throw config::ConfigError("delta must lie in (0, 1)");
    if (p.runs < 1 || p.n_holdout < 1 || p.n_mc < 1)
        throw config::ConfigError("runs, n_holdout and n_mc must be positive");
    return p;
}

Config CvParams::to_config() const
{
    Config c;
    task.write(c);
    c.set("n_holdout", n_holdout);
    c.set("Q", Q);
    c.set("M", M);
    c.set("runs", runs);
    c.set("delta", delta);
    c.set("n_mc", n_mc);
    c.set("out", out.string());
    return c;
}

CvSummary cv_experiment(const CvParams& p)
{
    CvSummary sum;
    const auto f_star = make_target(p.task);
    sum.M = p.M;
    if (sum.M == 0.0) {
        const double nb = noise_bound(p.task);
        if (!std::isfinite(nb))
            throw std::invalid_argument("automatic M needs bounded (uniform) noise");
        Rng rng = make_rng(p.task.seed, "M");
        const auto Z = sampling::sample(sampling::parse_distribution(p.task.dist, p.task.d), 4096, rng);
        sum.M = 1.05 * f_star(Z).cwiseAbs().maxCoeff() + nb;
    }
    sum.candidates = flow::candidate_grid(p.task.n, p.Q);
    const double slack = std::sqrt(160.0 * sum.M * sum.M *
                                   std::log(2.0 * static_cast<double>(sum.candidates.size()) / p.delta) /
                                   p.n_holdout);
    const auto k = flow::cross_kernel(task_kernel(p.task));
    int passed = 0;
    for (int r = 0; r < p.runs; ++r) {
        const auto run = static_cast<std::uint64_t>(r);
        const Task task = make_task(p.task, run, p.task.n);
        ntk::PointSet Xh;
        Eigen::VectorXd yh;
        draw_labelled(p.task, f_star, run, p.n_holdout, "holdout", Xh, yh);
        if (task.y.cwiseAbs().maxCoeff() > sum.M || yh.cwiseAbs().maxCoeff() > sum.M)
            throw std::invalid_argument("targets exceed the truncation bound M");
        const auto pred = flow::FlowPredictor::fit(k, task.X, task.y);
        const auto cv = flow::cv_select_stopping(pred, sum.candidates, Xh, yh, sum.M);

        const ntk::PointSet Xmc = mc_points(p.task, p.n_mc, run);
        const Eigen::VectorXd fmc = f_star(Xmc);
        const Eigen::MatrixXd KU = pred.project(Xmc);
        CvRun out;
        out.run = r;
        out.t_cv = cv.t_cv;
        out.risk_best = std::numeric_limits<double>::infinity();
        for (double t : cv.candidates) {
            const Eigen::VectorXd f = flow::truncate(pred.with_time(t).predict_projected(KU), sum.M);
            const double risk = std::sqrt((f - fmc).squaredNorm() / p.n_mc);
            if (t == cv.t_cv)
                out.risk_selected = risk;
            if (risk < out.risk_best) {
                out.risk_best = risk;
                out.t_best = t;
            }
        }
        out.bound = 2.0 * out.risk_best + slack;
        out.within_bound = out.risk_selected <= out.bound;
        passed += out.within_bound;
        sum.runs.push_back(out);
    }
    sum.pass_fraction = static_cast<double>(passed) / p.runs;
    return sum;
}

void run_cv(const CvParams& p, std::ostream* log)
{
    const auto sum = cv_experiment(p);
    echo_config(p.to_config(), p.out);
    auto out = open_out(p.out / "cv_runs.csv");
    out << "run,t_cv,t_best,risk_selected,risk_best,bound,within_bound\n" << std::setprecision(17);
    for (const auto& r : sum.runs)
        out << r.run << ',' << r.t_cv << ',' << r.t_best << ',' << r.risk_selected << ',' << r.risk_best << ','
            << r.bound << ',' << (r.within_bound ? 1 : 0) << '\n';
    if (log)
        *log << "M = " << sum.M << ", |T_n| = " << sum.candidates.size() << ", within bound in "
             << sum.pass_fraction * 100.0 << "% of " << sum.runs.size() << " runs\n";
}

// ---------------------------------------------------------------- network

std::set<std::string> TrainParams::keys()
{
    return join(TaskSpec::keys(), {"width", "eta", "steps", "log_every", "kernel_gap", "checkpoint", "out"});
}

TrainParams TrainParams::from_config(const Config& c)
{
    c.require_known(keys());
    TrainParams p;
    p.task.read(c);
    p.width = c.get_int("width", p.width);
    p.eta = c.get_double("eta", p.eta);
    p.steps = c.get_int("steps", p.steps);
    p.log_every = c.get_int("log_every", p.log_every);
    p.kernel_gap = c.get_bool("kernel_gap", p.kernel_gap);
    p.checkpoint = c.get_bool("checkpoint", p.checkpoint);
    p.out = c.get_string("out", p.out.string());
    if (p.width < 1 || p.steps < 0 || p.log_every < 1 || p.eta < 0.0)
        throw config::ConfigError("width >= 1, steps >= 0, log_every >= 1 and eta >= 0 required");
    return p;
}

Config TrainParams::to_config() const
{
    Config c;
    task.write(c);
    c.set("width", width);
    c.set("eta", eta);
    c.set("steps", steps);
    c.set("log_every", log_every);
    c.set("kernel_gap", kernel_gap);
    c.set("checkpoint", checkpoint);
    c.set("out", out.string());
    return c;
}

int run_train(const TrainParams& p, std::ostream* log)
{
    echo_config(p.to_config(), p.out);
    const Task task = make_task(p.task, 0, p.task.n);
    auto state = net::init_network(p.task.d, p.task.layers, p.width, derive_seed(p.task.seed, "network"));
    const double eta_stable = net::stable_step_size(state, task.X);
    const double eta = p.eta > 0.0 ? p.eta : eta_stable;
    const auto flow_pred =
        flow::FlowPredictor::fit(flow::cross_kernel(task_kernel(p.task)), task.X, task.y);
    net::ProbeConfig probes;
    probes.grid = net::probe_grid(p.task.d);
    probes.log_every = p.log_every;
    probes.kernel_gap = p.kernel_gap;
    probes.ntk_flow = &flow_pred;
    try {
        const auto trace = net::train(state, task.X, task.y, eta, p.steps, probes);
        auto out = open_out(p.out / "trace.csv");
        net::write_trace_csv(trace, out);
        if (p.checkpoint) {
            auto ck = open_out(p.out / "checkpoint.txt");
            net::write_checkpoint(state, ck);
        }
        if (log)
            *log << "eta = " << eta << ", t = " << trace.times.back() << ", residual "
                 << trace.train_residuals.front() << " -> " << trace.train_residuals.back() << '\n';
        return 0;
    } catch (const net::TrainingDiverged& e) {
        {
            auto out = open_out(p.out / "trace.csv");
            net::write_trace_csv(e.trace, out);
        }
        auto diag = open_out(p.out / "divergence.txt");
        diag << e.what() << '\n' << "step = " << e.step << "\neta = " << config::format_double(eta)
             << "\nstability heuristic eta <= " << config::format_double(eta_stable)
             << "\nlast logged residuals:";
        const auto& r = e.trace.train_residuals;
        for (std::size_t i = r.size() > 5 ? r.size() - 5 : 0; i < r.size(); ++i)
            diag << ' ' << r[i];
        diag << '\n';
        if (log)
            *log << e.what() << '\n';
        return 1;
    }
}

std::set<std::string> CompareParams::keys()
{
    return join(TaskSpec::keys(), {"widths", "seeds", "t_final", "eta", "log_every", "out"});
}

CompareParams CompareParams::from_config(const Config& c)
{
    c.require_known(keys());
    CompareParams p;
    p.task.read(c);
    p.widths = c.get_int_list("widths", p.widths);
    p.seeds = c.get_int("seeds", p.seeds);
    p.t_final = c.get_double("t_final", p.t_final);
    p.eta = c.get_double("eta", p.eta);
    p.log_every = c.get_int("log_every", p.log_every);
    p.out = c.get_string("out", p.out.string());
    if (p.widths.empty() || p.seeds < 1 || !(p.t_final > 0.0) || p.eta < 0.0 || p.log_every < 1)
        throw config::ConfigError("compare needs widths, seeds >= 1, t_final > 0, eta >= 0, log_every >= 1");
    for (int m : p.widths)
        if (m < 1)
            throw config::ConfigError("widths must be positive");
    return p;
}

Config CompareParams::to_config() const
{
    Config c;
    task.write(c);
    c.set("widths", widths);
    c.set("seeds", seeds);
    c.set("t_final", t_final);
    c.set("eta", eta);
    c.set("log_every", log_every);
    c.set("out", out.string());
    return c;
}

LazyResult lazy_sweep(const CompareParams& p, const LazyProgress& progress)
{
    LazyResult res;
    const auto desc = task_kernel(p.task);
    const ntk::PointSet grid = net::probe_grid(p.task.d);
    const Eigen::MatrixXd K_grid = ntk::cross_gram(desc, grid, grid);
    for (int s = 0; s < p.seeds; ++s) {
        const Task task = make_task(p.task, static_cast<std::uint64_t>(s), p.task.n);
        const auto flow_pred = flow::FlowPredictor::fit(flow::cross_kernel(desc), task.X, task.y);
        double eta = p.eta;
        if (eta == 0.0)
            eta = static_cast<double>(task.X.cols()) / (2.0 * flow_pred.eigenvalues()(0));
        const int steps = static_cast<int>(std::ceil(p.t_final / eta - 1e-9));
        eta = p.t_final / steps;

        for (int m : p.widths) {
            auto state = net::init_network(p.task.d, p.task.layers, m,
                                           derive_seed(p.task.seed, "network/m" + std::to_string(m),
                                                       static_cast<std::uint64_t>(s)));
            LazyRun run;
            run.width = m;
            run.seed_index = s;
            run.eta = eta;
            run.steps = steps;
            run.init_kernel_gap = (net::tangent_kernel(state, grid, grid) - K_grid).cwiseAbs().maxCoeff();

            net::ProbeConfig probes;
            probes.grid = grid;
            probes.log_every = p.log_every;
            probes.kernel_gap = true;
            probes.ntk_flow = &flow_pred;
            const auto trace = net::train(state, task.X, task.y, eta, steps, probes);
            run.max_kernel_gap = *std::max_element(trace.kernel_gaps.begin(), trace.kernel_gaps.end());
            run.predictor_gap = net::uniform_gap(trace, flow_pred, grid, trace.times);
            const double root = std::pow(static_cast<double>(m), 0.25);
            for (const auto& drifts : trace.weight_drifts)
                for (double v : drifts)
                    run.drift_ratio = std::max(run.drift_ratio, v / root);
            run.final_residual = trace.train_residuals.back();
            res.runs.push_back(run);
            if (progress)
                progress(run);
        }
    }
    for (int m : p.widths) {
        std::vector<double> a, b, c;
        for (const auto& r : res.runs)
            if (r.width == m) {
                a.push_back(r.init_kernel_gap);
                b.push_back(r.predictor_gap);
                c.push_back(r.drift_ratio);
            }
        res.rows.push_back({m, median(a), median(b), median(c)});
    }
    return res;
}

void run_compare(const CompareParams& p, std::ostream* log)
{
    echo_config(p.to_config(), p.out);
    const auto res = lazy_sweep(p, [&](const LazyRun& r) {
        if (log)
            *log << "seed " << r.seed_index << " m = " << r.width << ": |K0 - K^NT| = " << r.init_kernel_gap
                 << ", gap = " << r.predictor_gap << ", drift/m^(1/4) = " << r.drift_ratio << '\n';
    });
    {
        auto out = open_out(p.out / "compare_runs.csv");
        out << "m,seed,eta,steps,init_kernel_gap,max_kernel_gap,predictor_gap,drift_ratio,final_residual\n"
            << std::setprecision(17);
        for (const auto& r : res.runs)
            out << r.width << ',' << r.seed_index << ',' << r.eta << ',' << r.steps << ',' << r.init_kernel_gap
                << ',' << r.max_kernel_gap << ',' << r.predictor_gap << ',' << r.drift_ratio << ','
                << r.final_residual << '\n';
    }
    auto out = open_out(p.out / "compare.csv");
    out << "m,init_kernel_gap,predictor_gap,drift_ratio\n" << std::setprecision(17);
    for (const auto& r : res.rows)
        out << r.width << ',' << r.init_kernel_gap << ',' << r.predictor_gap << ',' << r.drift_ratio << '\n';
}

} // namespace ntklab::exp
