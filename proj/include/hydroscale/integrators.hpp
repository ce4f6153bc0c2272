#pragma once

#include "hydroscale/core.hpp"
#include "hydroscale/model.hpp"
#include "hydroscale/stochastics.hpp"

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

namespace hydroscale {

struct Provenance {
    std::string equation;
    double epsilon = 0.0;
    double lambda = 1.0;
    std::uint64_t seed = 0;
    std::uint64_t replica = 0;
};

/// States at the steps+1 nodes of a uniform grid.
struct StatePath {
    TimeGrid grid;
    std::vector<State> states;
    Provenance provenance;

    std::size_t nodes() const { return states.size(); }
    const State& operator[](std::size_t k) const { return states[k]; }
    const State& terminal() const { return states.back(); }
};

/// Small-noise parameter and deviation scale, lambda(eps) = eps^{-a}.
struct ScalingSpec {
    double epsilon = 0.0;
    double lambda = 1.0;

    static ScalingSpec clt(double epsilon);
    /// lambda = eps^{-a}, a in (0, 1/2); enforces sqrt(eps) lambda < 1.
    static ScalingSpec moderate(double epsilon, double a);

    double shift() const;  ///< sqrt(eps) * lambda
};

// Semi-implicit Euler-Maruyama, shared by every solver:
//   u_{k+1} = (I + dt A)^{-1} [u_k + dt F(t_k, u_k) + G_k]
// with the drift F and the noise/control term G evaluated at the left node.

/// u^0: deterministic limit (noise-free).
StatePath solve_deterministic(const ModelSpec& model, const State& xi, const TimeGrid& grid);

/// u^eps driven by sqrt(eps) sigma(t,u) dW. Only scaling.epsilon is used.
StatePath solve_sde(const ModelSpec& model, const CovarianceSpec& cov, const State& xi, const TimeGrid& grid,
                    const ScalingSpec& scaling, const WienerIncrements& inc);

/// V^0: linearization around u^0 driven by sigma(t,u^0) dW, V^0(0) = 0.
StatePath solve_linearized(const ModelSpec& model, const CovarianceSpec& cov, const StatePath& u0,
                           const TimeGrid& grid, const WienerIncrements& inc);

/// Z^eps integrated directly (no subtraction of u^eps - u^0).
StatePath solve_moderate(const ModelSpec& model, const CovarianceSpec& cov, const StatePath& u0,
                         const TimeGrid& grid, const ScalingSpec& scaling, const WienerIncrements& inc);

/// X^h: skeleton driven by sigma(t,u^0) h'.
StatePath solve_skeleton(const ModelSpec& model, const CovarianceSpec& cov, const StatePath& u0,
                         const TimeGrid& grid, const ControlPath& h);

/// X^eps: moderate-deviation dynamics with noise lambda^{-1} sigma dW plus control sigma phi'.
StatePath solve_controlled(const ModelSpec& model, const CovarianceSpec& cov, const StatePath& u0,
                           const TimeGrid& grid, const ScalingSpec& scaling, const WienerIncrements& inc,
                           const ControlPath& phi);

/// The common perturbation recursion around u^0 with explicit coefficients:
///   F = -B(X, u0 + s X) - B(u0, X) - s^{-1}[R(u0 + s X) - R(u0)]   (R'(u0) X when s = 0)
///   G = noise_scale sigma(u0 + s X) dW + dt sigma(u0 + s X) sqrt(q) c
/// inc and control may be null.
StatePath solve_perturbation(const ModelSpec& model, const CovarianceSpec& cov, const StatePath& u0,
                             const TimeGrid& grid, double shift, double noise_scale, const WienerIncrements* inc,
                             const ControlPath* control, std::string equation);

/// sup_k |x_k|^2 and sum_{k=1}^{steps} dt ||x_k||^2 of a node-indexed sequence.
struct PathMetric {
    double sup_sq = 0.0;
    double energy = 0.0;
    double total() const { return sup_sq + energy; }
};

template <class NodeFn>
PathMetric path_metric(const ModelSpec& model, const TimeGrid& grid, std::size_t nodes, NodeFn&& node) {
    PathMetric m;
    const double dt = grid.dt();
    for (std::size_t k = 0; k < nodes; ++k) {
        const State x = node(k);
        m.sup_sq = std::max(m.sup_sq, x.squaredNorm());
        if (k > 0) m.energy += dt * model.v_norm_sq(x);
    }
    return m;
}

PathMetric path_metric(const ModelSpec& model, const StatePath& path);
PathMetric path_distance(const ModelSpec& model, const StatePath& a, const StatePath& b);

// ---------------------------------------------------------------------------
// Scheme validation

enum class ConvergenceSolver { Deterministic, Sde };
enum class ConvergenceReference { Exact, Finest };

struct ConvergenceOptions {
    ConvergenceSolver solver = ConvergenceSolver::Sde;
    ConvergenceReference reference = ConvergenceReference::Finest;
    double T = 1.0;
    std::size_t base_steps = 16;
    int levels = 4;              ///< tested grids base_steps * 2^l, l < levels
    int reference_factor = 16;   ///< reference grid = finest tested * factor
    std::size_t replicas = 64;
    std::uint64_t seed = 1;
    double epsilon = 1.0;
};

struct ConvergenceResult {
    std::vector<double> dts;
    std::vector<double> errors;   ///< RMS terminal error per level
    double order = 0.0;           ///< fitted slope of log error vs log dt
    double order_stderr = 0.0;
    bool monotone = true;
};

/// Strong self-convergence. Coarse increments are sums of the fine ones.
/// The exact reference applies to additive-noise diagonal linear models
/// (B = 0, R = 0, constant sigma) and uses the exact exponential transition
/// conditioned on the fine Brownian increments.
ConvergenceResult self_convergence(const ModelSpec& model, const CovarianceSpec& cov, const State& xi,
                                   const ConvergenceOptions& opt);

}  // namespace hydroscale
