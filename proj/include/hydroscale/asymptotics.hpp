#pragma once

#include "hydroscale/integrators.hpp"
#include "hydroscale/stats.hpp"

#include <cstdint>
#include <vector>

namespace hydroscale {

/// Mean-square path distance over replicas at one noise level.
struct ErrorStatistic {
    double epsilon = 0.0;
    double lambda = 1.0;
    std::size_t replicas = 0;  ///< replicas that entered the statistic
    std::size_t excluded = 0;  ///< replicas dropped after blow-up
    MeanSE sup_sq;             ///< sup_t |.|^2
    MeanSE energy;             ///< int ||.||^2 dt
    MeanSE total;              ///< D = mean(sup + energy)

    double D() const { return total.mean; }
};

/// Replica blow-ups beyond this fraction turn into an ExperimentFailure.
inline constexpr double kMaxExcludedFraction = 0.01;

struct CltResult {
    std::vector<ErrorStatistic> coupling;     ///< (u^eps - u^0)/sqrt(eps) against V^0
    std::vector<ErrorStatistic> first_order;  ///< u^eps against u^0
    LinearFit coupling_fit;                   ///< log D vs log eps
    LinearFit first_order_fit;
    bool coupling_decreasing = true;
};

/// Same-noise coupling of u^eps, u^0 and V^0 on a decreasing eps grid.
CltResult clt_experiment(const ModelSpec& model, const CovarianceSpec& cov, const State& xi, const TimeGrid& grid,
                         const std::vector<double>& eps_list, std::size_t n_rep, std::uint64_t seed,
                         unsigned jobs = 1);

// ---------------------------------------------------------------------------
// Skeleton control problem

/// The affine-linear map h -> Phi(X^h) = <e, X^h(T)> of the skeleton
/// recursion together with its exact discrete transpose.
class SkeletonProblem {
public:
    SkeletonProblem(const ModelSpec& model, const CovarianceSpec& cov, StatePath u0, State probe);

    const TimeGrid& grid() const { return u0_.grid; }
    std::size_t modes() const { return cov_.modes(); }

    StatePath trajectory(const ControlPath& h) const;
    /// Phi(X^h)
    double functional(const ControlPath& h) const;
    /// d Phi / d h by the backward (adjoint) sweep; h-independent since the map is linear.
    const ControlPath& functional_gradient() const { return grad_; }

    /// J(h) = action(h) + beta/2 (Phi(X^h) - target)^2
    double objective(const ControlPath& h, double target, double beta) const;
    ControlPath objective_gradient(const ControlPath& h, double target, double beta) const;

private:
    ControlPath adjoint_sweep() const;

    const ModelSpec& model_;
    CovarianceSpec cov_;
    StatePath u0_;
    State probe_;
    ControlPath grad_;
};

struct RateSolution {
    ControlPath h;
    StatePath X;
    double I_hat = 0.0;              ///< action(h*)
    double terminal_residual = 0.0;  ///< |Phi(X*) - target|
    int iterations = 0;
    double gradient_norm = 0.0;
    bool max_iter_reached = false;
    double beta = 0.0;
};

/// Minimizes the penalized objective by conjugate gradients on the control
/// coefficients, with Hessian products through the forward and adjoint sweeps.
RateSolution rate_function(const ModelSpec& model, const CovarianceSpec& cov, const StatePath& u0,
                           const TimeGrid& grid, const State& probe, double target, double beta, double tol = 1e-12,
                           int max_iter = 200);

struct RateSweep {
    std::vector<RateSolution> runs;
    std::vector<double> betas;
    double I_extrapolated = 0.0;  ///< polynomial extrapolation in 1/beta to 1/beta = 0
};

RateSweep rate_function_sweep(const ModelSpec& model, const CovarianceSpec& cov, const StatePath& u0,
                              const TimeGrid& grid, const State& probe, double target,
                              const std::vector<double>& betas = {1e2, 1e3, 1e4}, double tol = 1e-12,
                              int max_iter = 200);

// ---------------------------------------------------------------------------
// Tail probabilities

struct TailEstimate {
    double epsilon = 0.0;
    double lambda = 1.0;
    std::size_t replicas = 0;
    std::size_t excluded = 0;
    std::size_t hits = 0;
    double threshold = 0.0;
    double p_hat = 0.0;
    double p_se = 0.0;
    double decay = 0.0;     ///< -log p_hat / lambda^2; +inf when censored
    bool censored = false;  ///< no hits: p is only known to be below ~1/replicas
    bool importance = false;
    double tilt_action = 0.0;
    double ess = 0.0;  ///< effective sample size of the hit weights (replicas for plain MC hits)
};

/// P(<e, Z^eps(T)> >= c) with lambda = eps^{-a}. With importance sampling the
/// increments are shifted by lambda sqrt(q) h' dt (proposal = controlled
/// dynamics) and reweighted by the exact discrete likelihood ratio. A null
/// tilt is replaced by the optimal skeleton control for target c.
std::vector<TailEstimate> mdp_tail_experiment(const ModelSpec& model, const CovarianceSpec& cov, const State& xi,
                                              const TimeGrid& grid, const State& probe, double c, double a,
                                              const std::vector<double>& eps_list, std::size_t n_rep,
                                              std::uint64_t seed, bool importance, unsigned jobs = 1,
                                              const ControlPath* tilt = nullptr);

// ---------------------------------------------------------------------------
// Controlled processes and time modulus

struct ControlledResult {
    std::vector<ErrorStatistic> distance;  ///< X^eps against X^phi
    bool monotone = true;
    double final_ratio = 0.0;  ///< D(last eps) / D(first eps)
};

ControlledResult controlled_convergence(const ModelSpec& model, const CovarianceSpec& cov, const State& xi,
                                        const TimeGrid& grid, const ControlPath& phi,
                                        const std::vector<double>& eps_list, double a, std::size_t n_rep,
                                        std::uint64_t seed, unsigned jobs = 1);

struct ModulusResult {
    std::vector<int> n;
    std::vector<double> shift;  ///< 2^{-n}
    std::vector<MeanSE> M;      ///< E int |X(psi_n(s)) - X(s)|^2 ds over retained replicas
    std::size_t retained = 0;
    std::size_t clipped = 0;
    LinearFit fit;  ///< log M_n vs log 2^{-n}
};

/// psi_n(s) = min(s + 2^{-n}, T); replicas whose sup |X|^2 + int ||X||^2 exceeds
/// `clip` are left out. States between nodes are linearly interpolated.
ModulusResult increment_modulus(const ModelSpec& model, const CovarianceSpec& cov, const State& xi,
                                const TimeGrid& grid, const ScalingSpec& scaling, const ControlPath& phi,
                                const std::vector<int>& n_list, std::size_t n_rep, std::uint64_t seed,
                                double clip, unsigned jobs = 1);

// ---------------------------------------------------------------------------

struct MomentSummary {
    int p = 1;
    std::size_t paths = 0;
    MeanSE sup_pow;          ///< sup |.|^{2p}
    MeanSE energy;           ///< int ||.||^2
    MeanSE weighted_energy;  ///< int |.|^{2p-2} ||.||^2
    MeanSE interp4;          ///< int ||.||_H^4
};

MomentSummary moment_audit(const ModelSpec& model, const std::vector<StatePath>& paths, int p);

/// Each moment's maximum over the sweep is within `factor` of its value at
/// the first (largest-eps) entry.
bool uniformly_bounded(const std::vector<MomentSummary>& sweep, double factor = 2.0);

}  // namespace hydroscale
