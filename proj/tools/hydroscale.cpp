#include "hydroscale/harness.hpp"
#include "hydroscale/parallel.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>

using namespace hydroscale;

int main(int argc, char** argv) {
    CLI::App app{"Small-noise asymptotics lab for stochastic 2D hydrodynamical models"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1, 1);

    std::string config_file;
    unsigned jobs = 0;
    std::vector<std::string> overrides;
    bool dump_paths = false;
    std::size_t dump_limit = 8;
    std::string out_root = "out";

    for (const char* name : {"verify", "clt", "mdp", "rate", "controlled", "modulus", "convergence"}) {
        auto* sub = app.add_subcommand(name, std::string("run the ") + name + " experiment");
        sub->add_option("--config", config_file, "experiment config (JSON)")->required();
        sub->add_option("--jobs", jobs, "worker threads (0 = logical cores)");
        sub->add_option("--set", overrides, "override a field, e.g. grid.steps=2048")->allow_extra_args(false);
        sub->add_flag("--dump-paths", dump_paths, "write per-replica binary paths");
        sub->add_option("--dump-limit", dump_limit, "replicas dumped per noise level");
        sub->add_option("--out", out_root, "output root");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitPass : kExitUsage;
    }
    const std::string kind = app.get_subcommands().front()->get_name();

    ExperimentConfig cfg;
    try {
        cfg = ExperimentConfig::load(config_file);
        for (const auto& s : overrides) cfg.set(s);
        if (to_string(cfg.experiment) != kind) {
            std::cerr << "hydroscale: config experiment '" << to_string(cfg.experiment) << "' replaced by '" << kind
                      << "'\n";
            cfg.set("experiment=\"" + kind + "\"");
        }
        cfg.validate();
    } catch (const ConfigError& e) {
        std::cerr << "hydroscale: config error: " << e.what() << '\n';
        return kExitUsage;
    }

    const std::filesystem::path dir = make_run_directory(out_root, kind);
    RunOptions opt;
    opt.jobs = jobs == 0 ? default_jobs() : jobs;
    opt.dump_limit = dump_limit;
    if (dump_paths) opt.dump_dir = dir / "paths";

    const auto start = std::chrono::steady_clock::now();
    ExperimentReport report;
    try {
        report = run(cfg, opt);
    } catch (const ConfigError& e) {
        std::cerr << "hydroscale: config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::ofstream(dir / "error.txt") << e.what() << '\n';
        std::cerr << "hydroscale: numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_report(report, dir, wall, opt.jobs);

    for (const auto& v : report.verdicts)
        std::cout << (v.pass ? "PASS " : "FAIL ") << v.name << ": " << v.detail << '\n';
    std::cout << "report: " << (dir / "report.json").string() << '\n';
    return report.pass() ? kExitPass : kExitVerdict;
}
