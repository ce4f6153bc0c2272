#pragma once

#include "hydroscale/models.hpp"
#include "hydroscale/stochastics.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hydroscale {

inline constexpr const char* kVersion = "0.1.0";

/// Configuration error carrying the offending field path (exit code 2).
class ConfigError : public std::invalid_argument {
public:
    ConfigError(const std::string& path, const std::string& what)
        : std::invalid_argument(path.empty() ? what : path + ": " + what), path_(path) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

enum class ExperimentKind { Verify, Clt, Mdp, Rate, Controlled, Modulus, Convergence };

std::string to_string(ExperimentKind k);
ExperimentKind parse_kind(const std::string& s);  ///< throws ConfigError

struct OUConfig {
    std::vector<double> drift{1.0};
    std::vector<double> noise{1.0};
    std::vector<std::vector<double>> reaction;  ///< rows of M; empty means zero

    friend bool operator==(const OUConfig&, const OUConfig&) = default;
};

struct ModelConfig {
    std::string name = "shell";  ///< shell | ns2d | ou
    ShellParams shell;
    SpectralNSParams ns;
    OUConfig ou;

    ModelSpec build() const;
    bool operator==(const ModelConfig& o) const;
};

struct CovarianceConfig {
    std::string name = "power_law";  ///< power_law | explicit
    std::size_t modes = 0;           ///< 0 = model dimension
    double exponent = 2.0;
    double scale = 1.0;
    std::vector<double> q;

    CovarianceSpec build(Eigen::Index dimension) const;
    friend bool operator==(const CovarianceConfig&, const CovarianceConfig&) = default;
};

struct InitialConfig {
    std::string preset = "single-mode";  ///< zero | single-mode | random | explicit
    std::size_t mode = 0;
    double amplitude = 1.0;
    std::uint64_t seed = 0;
    std::vector<double> values;

    State build(Eigen::Index dimension) const;
    friend bool operator==(const InitialConfig&, const InitialConfig&) = default;
};

struct GridConfig {
    double T = 1.0;
    std::size_t steps = 1024;
    friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

struct ScalingConfig {
    double a = 0.25;
    std::vector<double> eps_list{1e-2, 1e-3, 1e-4};
    friend bool operator==(const ScalingConfig&, const ScalingConfig&) = default;
};

struct ControlConfig {
    std::size_t mode = 0;
    double value = 0.7;
    double N = 1.0;  ///< radius of the control ball
    friend bool operator==(const ControlConfig&, const ControlConfig&) = default;
};

struct FunctionalConfig {
    std::size_t mode = 0;
    double threshold = 1.0;
    bool importance = true;
    friend bool operator==(const FunctionalConfig&, const FunctionalConfig&) = default;
};

struct VerifyConfig {
    std::size_t samples = 10000;
    std::vector<double> etas{0.05, 0.25, 1.0};
    friend bool operator==(const VerifyConfig&, const VerifyConfig&) = default;
};

struct RateConfig {
    std::vector<double> betas{1e2, 1e3, 1e4};
    double tol = 1e-12;
    int max_iter = 200;
    friend bool operator==(const RateConfig&, const RateConfig&) = default;
};

struct ModulusConfig {
    std::vector<int> n_list{2, 3, 4, 5, 6, 7, 8};
    double epsilon = 1e-3;
    double clip = 1e6;
    friend bool operator==(const ModulusConfig&, const ModulusConfig&) = default;
};

struct ConvergenceConfig {
    std::string solver = "sde";          ///< sde | deterministic
    std::string reference = "finest";    ///< finest | exact
    std::size_t base_steps = 16;
    int levels = 4;
    int reference_factor = 16;
    double epsilon = 1.0;
    friend bool operator==(const ConvergenceConfig&, const ConvergenceConfig&) = default;
};

struct Thresholds {
    double slack = 1.1;
    double antisymmetry_tol = 1e-10;
    double min_coupling_slope = 0.4;
    double zero_distance = 1e-20;
    double first_order_slope = 1.0;
    double first_order_tolerance = 0.2;
    double mdp_tolerance = 0.15;
    double min_ess = 100.0;
    std::optional<double> rate_expected;
    double rate_tolerance = 0.01;
    double max_final_ratio = 0.1;
    double min_modulus_exponent = 0.5;
    double min_order = 0.9;
    friend bool operator==(const Thresholds&, const Thresholds&) = default;
};

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::Verify;
    ModelConfig model;
    CovarianceConfig covariance;
    GridConfig grid;
    InitialConfig initial;
    ScalingConfig scaling;
    std::size_t replicas = 256;
    std::uint64_t seed = 1;
    ControlConfig control;
    FunctionalConfig functional;
    VerifyConfig verify;
    RateConfig rate;
    ModulusConfig modulus;
    ConvergenceConfig convergence;
    Thresholds thresholds;

    /// Strict parse: unknown keys and invalid values raise ConfigError with the field path.
    static ExperimentConfig from_json(const nlohmann::ordered_json& j);
    static ExperimentConfig parse(const std::string& text);
    static ExperimentConfig load(const std::filesystem::path& file);
    /// Full serialization including defaults.
    nlohmann::ordered_json to_json() const;
    std::string dump() const;
    /// Override one field, e.g. "grid.steps=2048" or "scaling.eps_list=[0.1,0.01]".
    /// The value is read as JSON when possible, otherwise as a string.
    void set(const std::string& assignment);
    /// Cross-field validation; every check runs before any computation.
    void validate() const;

    bool operator==(const ExperimentConfig& o) const;
};

struct Table {
    std::string name;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add(const std::vector<double>& row);
};

struct Verdict {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct ExperimentReport {
    std::string experiment;
    nlohmann::ordered_json config;
    nlohmann::ordered_json summary;
    std::vector<Table> tables;
    std::vector<Verdict> verdicts;

    bool pass() const;
    /// Deterministic document: no wall-clock or worker count.
    std::string to_json() const;
};

struct RunOptions {
    unsigned jobs = 1;                               ///< 0 = logical cores
    std::optional<std::filesystem::path> dump_dir;  ///< per-replica binary path dumps
    std::size_t dump_limit = 8;                      ///< replicas dumped per noise level
};

/// Validates, dispatches and returns the report. Numerical failures propagate
/// as IntegrationError / ExperimentFailure.
ExperimentReport run(const ExperimentConfig& config, const RunOptions& options = {});

/// Creates root/<experiment>/<timestamp>/ (with a numeric suffix on collision).
std::filesystem::path make_run_directory(const std::filesystem::path& root, const std::string& experiment);

/// Writes config.json, report.json, one CSV per table and timing.json into
/// `dir` and points the sibling "latest" link at it.
void write_report(const ExperimentReport& report, const std::filesystem::path& dir, double wall_seconds,
                  unsigned jobs);

enum ExitCode : int { kExitPass = 0, kExitVerdict = 1, kExitUsage = 2, kExitNumerical = 3 };

}  // namespace hydroscale
