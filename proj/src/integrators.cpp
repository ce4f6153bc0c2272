#include "hydroscale/integrators.hpp"

#include "hydroscale/stats.hpp"

#include <cmath>

namespace hydroscale {

ScalingSpec ScalingSpec::clt(double epsilon) {
    require(std::isfinite(epsilon) && epsilon >= 0.0, "epsilon must be >= 0");
    return {epsilon, 1.0};
}

ScalingSpec ScalingSpec::moderate(double epsilon, double a) {
    require(std::isfinite(epsilon) && epsilon > 0.0 && epsilon < 1.0, "moderate scaling needs 0 < epsilon < 1");
    require(a > 0.0 && a < 0.5, "moderate scaling exponent a must lie in (0, 1/2)");
    return {epsilon, std::pow(epsilon, -a)};
}

double ScalingSpec::shift() const { return std::sqrt(epsilon) * lambda; }

namespace {

Eigen::VectorXd resolvent(const ModelSpec& model, double dt) {
    return (1.0 + dt * model.a_spectrum().array()).inverse().matrix();
}

void check_state(const ModelSpec& model, const State& x, const char* what) {
    require(x.size() == model.dimension(), std::string(what) + ": state dimension does not match the model");
    require(x.allFinite(), std::string(what) + ": state must be finite");
}

void check_increments(const CovarianceSpec& cov, const TimeGrid& grid, const WienerIncrements& inc) {
    require(inc.grid == grid, "increments live on a different grid");
    require(inc.modes == cov.modes(), "increments and covariance disagree on the number of modes");
}

void check_base_path(const StatePath& u0, const TimeGrid& grid, const ModelSpec& model) {
    require(u0.grid == grid && u0.nodes() == grid.steps + 1, "base path u0 lives on a different grid");
    require(u0.states.front().size() == model.dimension(), "base path dimension does not match the model");
}

void guard_finite(const State& x, std::size_t step, const char* equation) {
    if (!x.allFinite()) throw IntegrationError(std::string("non-finite state in ") + equation, step);
}

}  // namespace

StatePath solve_deterministic(const ModelSpec& model, const State& xi, const TimeGrid& grid) {
    check_state(model, xi, "solve_deterministic");
    const double dt = grid.dt();
    const Eigen::VectorXd res = resolvent(model, dt);
    StatePath path;
    path.grid = grid;
    path.provenance.equation = "deterministic";
    path.states.reserve(grid.steps + 1);
    path.states.push_back(xi);
    State b(xi.size()), r(xi.size());
    for (std::size_t k = 0; k < grid.steps; ++k) {
        const State& u = path.states.back();
        const double t = grid.node(k);
        model.bilinear(u, u, b);
        model.reaction(t, u, r);
        State next = (u - dt * (b + r)).cwiseProduct(res);
        guard_finite(next, k + 1, "solve_deterministic");
        path.states.push_back(std::move(next));
    }
    return path;
}

StatePath solve_sde(const ModelSpec& model, const CovarianceSpec& cov, const State& xi, const TimeGrid& grid,
                    const ScalingSpec& scaling, const WienerIncrements& inc) {
    check_state(model, xi, "solve_sde");
    check_compatible(model, cov);
    check_increments(cov, grid, inc);
    require(scaling.epsilon >= 0.0, "epsilon must be >= 0");
    const double dt = grid.dt();
    const double amp = std::sqrt(scaling.epsilon);
    const Eigen::VectorXd res = resolvent(model, dt);
    StatePath path;
    path.grid = grid;
    path.provenance = {"sde", scaling.epsilon, 1.0, inc.key.seed, inc.key.replica};
    path.states.reserve(grid.steps + 1);
    path.states.push_back(xi);
    State b(xi.size()), r(xi.size());
    for (std::size_t k = 0; k < grid.steps; ++k) {
        const State& u = path.states.back();
        const double t = grid.node(k);
        model.bilinear(u, u, b);
        model.reaction(t, u, r);
        State next = u - dt * (b + r);
        if (amp != 0.0) model.noise_add(t, u, inc.step(k), amp, next);
        next = next.cwiseProduct(res);
        guard_finite(next, k + 1, "solve_sde");
        path.states.push_back(std::move(next));
    }
    return path;
}

StatePath solve_perturbation(const ModelSpec& model, const CovarianceSpec& cov, const StatePath& u0,
                             const TimeGrid& grid, double shift, double noise_scale, const WienerIncrements* inc,
                             const ControlPath* control, std::string equation) {
    check_compatible(model, cov);
    check_base_path(u0, grid, model);
    if (inc != nullptr) check_increments(cov, grid, *inc);
    if (control != nullptr) {
        require(control->grid == grid, "control lives on a different grid");
        require(control->modes == cov.modes(), "control and covariance disagree on the number of modes");
    }
    require(std::isfinite(shift) && shift >= 0.0, "shift must be finite and >= 0");

    const Eigen::Index n = model.dimension();
    const double dt = grid.dt();
    const Eigen::VectorXd res = resolvent(model, dt);
    const std::size_t m = cov.modes();
    std::vector<double> sqrt_q(m);
    for (std::size_t j = 0; j < m; ++j) sqrt_q[j] = std::sqrt(cov.q[j]);

    StatePath path;
    path.grid = grid;
    path.provenance.equation = std::move(equation);
    if (inc != nullptr) path.provenance.seed = inc->key.seed, path.provenance.replica = inc->key.replica;
    path.states.reserve(grid.steps + 1);
    path.states.push_back(State::Zero(n));

    State full(n), b1(n), b2(n), r1(n), r0(n), next(n);
    std::vector<double> forcing(m);
    const bool linear_reaction = model.reaction_term().is_linear();
    const bool has_reaction = !model.reaction_term().is_zero();
    for (std::size_t k = 0; k < grid.steps; ++k) {
        const State& x = path.states.back();
        const State& base = u0.states[k];
        const double t = grid.node(k);
        const State* at = &base;
        if (shift != 0.0) {
            full = base + shift * x;
            at = &full;
        }
        model.bilinear(x, *at, b1);
        model.bilinear(base, x, b2);
        next = x - dt * (b1 + b2);
        if (has_reaction) {
            if (shift == 0.0 || linear_reaction) {
                // the difference quotient of a linear R is exactly R'(u0) x
                model.reaction_jvp(t, base, x, r1);
            } else {
                model.reaction(t, full, r1);
                model.reaction(t, base, r0);
                r1 = (r1 - r0) / shift;
            }
            next -= dt * r1;
        }
        if (inc != nullptr && noise_scale != 0.0) model.noise_add(t, *at, inc->step(k), noise_scale, next);
        if (control != nullptr) {
            const auto c = control->step(k);
            for (std::size_t j = 0; j < m; ++j) forcing[j] = sqrt_q[j] * c[j];
            model.noise_add(t, *at, forcing, dt, next);
        }
        next = next.cwiseProduct(res);
        guard_finite(next, k + 1, path.provenance.equation.c_str());
        path.states.push_back(next);
    }
    return path;
}

StatePath solve_linearized(const ModelSpec& model, const CovarianceSpec& cov, const StatePath& u0,
                           const TimeGrid& grid, const WienerIncrements& inc) {
    return solve_perturbation(model, cov, u0, grid, 0.0, 1.0, &inc, nullptr, "linearized");
}

StatePath solve_moderate(const ModelSpec& model, const CovarianceSpec& cov, const StatePath& u0,
                         const TimeGrid& grid, const ScalingSpec& scaling, const WienerIncrements& inc) {
    require(scaling.epsilon > 0.0 && scaling.lambda >= 1.0, "moderate deviations need eps > 0 and lambda >= 1");
    require(scaling.shift() < 1.0, "scaling regime violated: sqrt(eps) * lambda must be < 1");
    auto path = solve_perturbation(model, cov, u0, grid, scaling.shift(), 1.0 / scaling.lambda, &inc, nullptr,
                                   "moderate");
    path.provenance.epsilon = scaling.epsilon;
    path.provenance.lambda = scaling.lambda;
    return path;
}

StatePath solve_skeleton(const ModelSpec& model, const CovarianceSpec& cov, const StatePath& u0,
                         const TimeGrid& grid, const ControlPath& h) {
    return solve_perturbation(model, cov, u0, grid, 0.0, 0.0, nullptr, &h, "skeleton");
}

StatePath solve_controlled(const ModelSpec& model, const CovarianceSpec& cov, const StatePath& u0,
                           const TimeGrid& grid, const ScalingSpec& scaling, const WienerIncrements& inc,
                           const ControlPath& phi) {
    require(scaling.epsilon > 0.0 && scaling.lambda >= 1.0, "moderate deviations need eps > 0 and lambda >= 1");
    require(scaling.shift() < 1.0, "scaling regime violated: sqrt(eps) * lambda must be < 1");
    auto path = solve_perturbation(model, cov, u0, grid, scaling.shift(), 1.0 / scaling.lambda, &inc, &phi,
                                   "controlled");
    path.provenance.epsilon = scaling.epsilon;
    path.provenance.lambda = scaling.lambda;
    return path;
}

PathMetric path_metric(const ModelSpec& model, const StatePath& path) {
    return path_metric(model, path.grid, path.nodes(), [&](std::size_t k) { return path.states[k]; });
}

PathMetric path_distance(const ModelSpec& model, const StatePath& a, const StatePath& b) {
    require(a.grid == b.grid && a.nodes() == b.nodes(), "paths live on different grids");
    return path_metric(model, a.grid, a.nodes(), [&](std::size_t k) { return State(a.states[k] - b.states[k]); });
}

// ---------------------------------------------------------------------------

namespace {

bool is_additive_linear(const ModelSpec& model) {
    return model.bilinear_term().identically_zero() && model.reaction_term().is_zero() &&
           model.noise().theta == 0.0 && !model.noise().time_modulated;
}

State exact_reference(const ModelSpec& model, const State& xi, const WienerIncrements& fine, double epsilon,
                      bool with_noise) {
    const double delta = fine.grid.dt();
    const auto& alpha = model.a_spectrum();
    State x = xi;
    const double amp = std::sqrt(epsilon);
    for (std::size_t k = 0; k < fine.grid.steps; ++k)
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const double decay = std::exp(-alpha[i] * delta);
            x[i] *= decay;
            if (with_noise && static_cast<std::size_t>(i) < fine.modes) {
                // E[int e^{-a(t_{k+1}-r)} dW(r) | Delta W_k] = Delta W_k (1 - e^{-a delta}) / (a delta)
                const double weight = -std::expm1(-alpha[i] * delta) / (alpha[i] * delta);
                x[i] += amp * model.noise().gains[i] * weight * fine.at(k, static_cast<std::size_t>(i));
            }
        }
    return x;
}

}  // namespace

ConvergenceResult self_convergence(const ModelSpec& model, const CovarianceSpec& cov, const State& xi,
                                   const ConvergenceOptions& opt) {
    require(opt.levels >= 3, "self_convergence needs at least 3 refinement levels");
    require(opt.base_steps >= 1 && opt.replicas >= 1 && opt.reference_factor >= 2,
            "self_convergence: invalid options");
    if (opt.reference == ConvergenceReference::Exact)
        require(is_additive_linear(model), "exact reference needs B = 0, R = 0 and additive noise");

    const bool noisy = opt.solver == ConvergenceSolver::Sde;
    const std::size_t finest = opt.base_steps << (opt.levels - 1);
    const std::size_t ref_steps = finest * static_cast<std::size_t>(opt.reference_factor);
    const TimeGrid ref_grid(opt.T, ref_steps);
    const std::size_t replicas = noisy ? opt.replicas : 1;

    std::vector<std::vector<double>> sq_err(static_cast<std::size_t>(opt.levels), std::vector<double>(replicas));
    for (std::size_t r = 0; r < replicas; ++r) {
        const WienerIncrements fine = sample_increments(cov, ref_grid, replica_seed(opt.seed, r));
        State reference;
        if (opt.reference == ConvergenceReference::Exact) {
            reference = exact_reference(model, xi, fine, opt.epsilon, noisy);
        } else if (noisy) {
            reference = solve_sde(model, cov, xi, ref_grid, ScalingSpec::clt(opt.epsilon), fine).terminal();
        } else {
            reference = solve_deterministic(model, xi, ref_grid).terminal();
        }
        for (int l = 0; l < opt.levels; ++l) {
            const std::size_t steps = opt.base_steps << l;
            const TimeGrid grid(opt.T, steps);
            State end;
            if (noisy) {
                const auto inc = coarsen(fine, ref_steps / steps);
                end = solve_sde(model, cov, xi, grid, ScalingSpec::clt(opt.epsilon), inc).terminal();
            } else {
                end = solve_deterministic(model, xi, grid).terminal();
            }
            sq_err[static_cast<std::size_t>(l)][r] = (end - reference).squaredNorm();
        }
    }

    ConvergenceResult out;
    for (int l = 0; l < opt.levels; ++l) {
        out.dts.push_back(opt.T / static_cast<double>(opt.base_steps << l));
        out.errors.push_back(std::sqrt(pairwise_sum(sq_err[static_cast<std::size_t>(l)]) / replicas));
    }
    for (std::size_t l = 1; l < out.errors.size(); ++l)
        if (!(out.errors[l] < out.errors[l - 1])) out.monotone = false;
    const auto fit = loglog_fit(out.dts, out.errors);
    out.order = fit.slope;
    out.order_stderr = fit.slope_se;
    return out;
}

}  // namespace hydroscale
