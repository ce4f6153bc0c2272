#pragma once

#include "hydroscale/model.hpp"
#include "hydroscale/stochastics.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hydroscale {

/// Outcome of one sampled hypothesis check.
struct ConditionRecord {
    std::string name;
    std::size_t samples = 0;
    double max_residual = 0.0;
    double empirical_constant = 0.0;
    std::optional<double> declared_constant;
    bool pass = true;
    std::string note;
};

struct VerifierReport {
    std::string model;
    double slack = 1.1;
    std::vector<ConditionRecord> conditions;

    bool pass() const;
    const ConditionRecord* find(const std::string& name) const;
    void append(const VerifierReport& other);
    /// condition name -> {max_residual, empirical_constant, declared_constant, pass, samples}
    std::string to_json() const;
};

inline constexpr double kDefaultSlack = 1.1;

/// Probe vector number `index` of a stream: standard Gaussian coefficients,
/// rescaled to |v| in {unscaled, 0.1, 1, 10} cyclically by index.
State random_probe(Eigen::Index n, std::uint64_t seed, std::uint64_t index);

/// Residual |(B(u1,u2),u3) + (B(u1,u3),u2)| / (1 + ||u1|| ||u2|| ||u3||),
/// plus the energy consequence and a bilinearity check in both slots.
VerifierReport verify_antisymmetry(const ModelSpec& model, std::size_t n_samples, std::uint64_t seed,
                                   double tol = 1e-10);

/// a0_hat = max ||v||_H^2 / (|v| ||v||).
VerifierReport verify_interpolation(const ModelSpec& model, std::size_t n_samples, std::uint64_t seed,
                                    double slack = kDefaultSlack);

/// Empirical constants for the bilinear bounds: the eta family, its two-constant
/// form, the homogeneous trilinear bound |(B(u1,u2),u3)| <= C ||u1||_H ||u2|| ||u3||_H,
/// and the derived energy-type bounds for B(u,u) and B(u1) - B(u2).
VerifierReport verify_bilinear_bound(const ModelSpec& model, const std::vector<double>& etas, std::size_t n_samples,
                                     std::uint64_t seed, double slack = kDefaultSlack);

/// Growth and Lipschitz bounds of sigma in L_Q, the reaction bounds, the
/// finite-difference consistency of R', Lipschitz continuity of R', and the
/// time-Hoelder bound of sigma.
VerifierReport verify_noise_and_reaction(const ModelSpec& model, const CovarianceSpec& cov, std::size_t n_samples,
                                         std::uint64_t seed, double slack = kDefaultSlack);

/// All four checks with the default eta probes {0.05, 0.25, 1}.
VerifierReport verify_all(const ModelSpec& model, const CovarianceSpec& cov, std::size_t n_samples,
                          std::uint64_t seed, double slack = kDefaultSlack, double tol = 1e-10);

}  // namespace hydroscale
