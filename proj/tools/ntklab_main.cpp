#include "ntklab/error.hpp"
#include "ntklab/experiments.hpp"

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace {

using ntklab::config::Config;
using ntklab::config::ConfigError;

struct Command {
    CLI::App* app = nullptr;
    std::string config_file;
    std::vector<std::string> sets;
    std::map<std::string, std::string> flags;
    std::set<std::string> keys;
    std::function<int(const Config&)> run;
};

Config resolve(const Command& cmd, bool plot_data, std::optional<int> jobs)
{
    Config c;
    if (!cmd.config_file.empty())
        c = Config::load(cmd.config_file);
    for (const auto& kv : cmd.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("--set expects key=value, got '" + kv + "'");
        c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& [k, v] : cmd.flags)
        if (!v.empty())
            c.set(k, v);
    if (plot_data && cmd.keys.count("plot_data"))
        c.set("plot_data", true);
    if (jobs && cmd.keys.count("jobs"))
        c.set("jobs", *jobs);
    return c;
}

void add_command(CLI::App& app, std::vector<Command>& cmds, const std::string& name, const std::string& help,
                 const std::set<std::string>& keys, std::function<int(const Config&)> run)
{
    Command& cmd = cmds.emplace_back();
    cmd.app = app.add_subcommand(name, help);
    cmd.app->add_option("--config", cmd.config_file, "key = value config file")->check(CLI::ExistingFile);
    cmd.app->add_option("--set", cmd.sets, "override a config key (key=value), repeatable");
    for (const auto& key : keys) {
        if (key == "plot_data" || key == "jobs")
            continue;
        cmd.app->add_option("--" + key, cmd.flags[key], "config key " + key);
    }
    cmd.keys = keys;
    cmd.run = std::move(run);
}

} // namespace

int main(int argc, char** argv)
{
    namespace exp = ntklab::exp;

    CLI::App app{"Neural tangent kernel experiments"};
    app.require_subcommand(1);
    app.fallthrough();
    bool plot_data = false;
    std::optional<int> jobs;
    app.add_flag("--plot-data", plot_data, "also write log-log (x, y) pairs for plotting");
    app.add_option("--jobs", jobs, "worker threads for independent cells")->check(CLI::PositiveNumber);

    std::vector<Command> cmds;
    cmds.reserve(6);
    add_command(app, cmds, "edr", "empirical eigenvalue decay rates on a distribution grid",
                exp::EdrParams::keys(), [](const Config& c) {
                    exp::run_edr(exp::EdrParams::from_config(c), &std::cout);
                    return 0;
                });
    add_command(app, cmds, "sphere-modes", "Funk-Hecke modes of a dot-product profile",
                exp::SphereModesParams::keys(), [](const Config& c) {
                    exp::run_sphere_modes(exp::SphereModesParams::from_config(c), &std::cout);
                    return 0;
                });
    add_command(app, cmds, "flow", "risk curve of kernel gradient flow", exp::FlowParams::keys(),
                [](const Config& c) {
                    exp::run_flow(exp::FlowParams::from_config(c), &std::cout);
                    return 0;
                });
    add_command(app, cmds, "train", "gradient descent on a mirrored ReLU network", exp::TrainParams::keys(),
                [](const Config& c) { return exp::run_train(exp::TrainParams::from_config(c), &std::cout); });
    add_command(app, cmds, "compare", "network vs kernel flow across widths", exp::CompareParams::keys(),
                [](const Config& c) {
                    exp::run_compare(exp::CompareParams::from_config(c), &std::cout);
                    return 0;
                });
    add_command(app, cmds, "cv", "holdout selection of the stopping time", exp::CvParams::keys(),
                [](const Config& c) {
                    exp::run_cv(exp::CvParams::from_config(c), &std::cout);
                    return 0;
                });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    for (const auto& cmd : cmds) {
        if (!cmd.app->parsed())
            continue;
        try {
            return cmd.run(resolve(cmd, plot_data, jobs));
        } catch (const std::invalid_argument& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 2;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 1;
        }
    }
    return 2;
}
