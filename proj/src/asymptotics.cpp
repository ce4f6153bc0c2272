#include "hydroscale/asymptotics.hpp"

#include "hydroscale/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace hydroscale {

namespace {

using MetricSlots = std::vector<std::optional<PathMetric>>;

ErrorStatistic summarize(double epsilon, double lambda, const MetricSlots& slots) {
    ErrorStatistic s;
    s.epsilon = epsilon;
    s.lambda = lambda;
    std::vector<double> sup, energy, total;
    for (const auto& m : slots) {
        if (!m) {
            ++s.excluded;
            continue;
        }
        sup.push_back(m->sup_sq);
        energy.push_back(m->energy);
        total.push_back(m->total());
    }
    s.replicas = total.size();
    if (static_cast<double>(s.excluded) > kMaxExcludedFraction * static_cast<double>(slots.size()))
        throw ExperimentFailure("eps = " + std::to_string(epsilon) + ": " + std::to_string(s.excluded) + " of " +
                                std::to_string(slots.size()) + " replicas blew up (limit 1%); refine the grid");
    if (s.replicas < 2) throw ExperimentFailure("fewer than two replicas survived");
    s.sup_sq = mean_se(sup);
    s.energy = mean_se(energy);
    s.total = mean_se(total);
    return s;
}

void require_eps_grid(const std::vector<double>& eps_list) {
    require(!eps_list.empty(), "eps list must not be empty");
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        require(std::isfinite(eps_list[i]) && eps_list[i] > 0.0 && eps_list[i] <= 1.0,
                "every eps must lie in (0, 1]");
        if (i > 0) require(eps_list[i] < eps_list[i - 1], "eps list must be strictly decreasing");
    }
}

LinearFit fit_in_eps(const std::vector<ErrorStatistic>& stats) {
    std::vector<double> x, y;
    for (const auto& s : stats) {
        x.push_back(s.epsilon);
        y.push_back(s.D());
    }
    if (x.size() < 2) return {};
    std::size_t positive = 0;
    for (double v : y) positive += v > 0.0 ? 1 : 0;
    if (positive < 2) return {};
    return loglog_fit(x, y);
}

bool strictly_decreasing(const std::vector<ErrorStatistic>& stats) {
    for (std::size_t i = 1; i < stats.size(); ++i)
        if (!(stats[i].D() < stats[i - 1].D())) return false;
    return true;
}

PathMetric difference_metric(const ModelSpec& model, const StatePath& a, const StatePath& b, double scale_a = 1.0) {
    return path_metric(model, a.grid, a.nodes(), [&](std::size_t k) { return State(scale_a * a[k] - b[k]); });
}

}  // namespace

CltResult clt_experiment(const ModelSpec& model, const CovarianceSpec& cov, const State& xi, const TimeGrid& grid,
                         const std::vector<double>& eps_list, std::size_t n_rep, std::uint64_t seed, unsigned jobs) {
    require_eps_grid(eps_list);
    require(n_rep >= 2, "clt_experiment: need at least two replicas");
    const StatePath u0 = solve_deterministic(model, xi, grid);
    const std::size_t ne = eps_list.size();
    std::vector<MetricSlots> coupling(ne, MetricSlots(n_rep)), first(ne, MetricSlots(n_rep));

    parallel_for(n_rep, jobs, [&](std::size_t r) {
        const auto inc = sample_increments(cov, grid, replica_seed(seed, r));
        std::optional<StatePath> v0;
        try {
            v0 = solve_linearized(model, cov, u0, grid, inc);
        } catch (const IntegrationError&) {
            return;
        }
        for (std::size_t i = 0; i < ne; ++i) {
            try {
                const double eps = eps_list[i];
                const StatePath ue = solve_sde(model, cov, xi, grid, ScalingSpec::clt(eps), inc);
                const double inv = 1.0 / std::sqrt(eps);
                coupling[i][r] = path_metric(model, grid, ue.nodes(),
                                             [&](std::size_t k) { return State((ue[k] - u0[k]) * inv - (*v0)[k]); });
                first[i][r] = difference_metric(model, ue, u0);
            } catch (const IntegrationError&) {
            }
        }
    });

    CltResult out;
    for (std::size_t i = 0; i < ne; ++i) {
        out.coupling.push_back(summarize(eps_list[i], 1.0, coupling[i]));
        out.first_order.push_back(summarize(eps_list[i], 1.0, first[i]));
    }
    out.coupling_fit = fit_in_eps(out.coupling);
    out.first_order_fit = fit_in_eps(out.first_order);
    out.coupling_decreasing = strictly_decreasing(out.coupling);
    return out;
}

// ---------------------------------------------------------------------------

SkeletonProblem::SkeletonProblem(const ModelSpec& model, const CovarianceSpec& cov, StatePath u0, State probe)
    : model_(model), cov_(cov), u0_(std::move(u0)), probe_(std::move(probe)) {
    check_compatible(model_, cov_);
    require(probe_.size() == model_.dimension(), "functional probe has the wrong dimension");
    require(u0_.nodes() == u0_.grid.steps + 1, "base path is incomplete");
    grad_ = adjoint_sweep();
}

StatePath SkeletonProblem::trajectory(const ControlPath& h) const {
    return solve_skeleton(model_, cov_, u0_, u0_.grid, h);
}

double SkeletonProblem::functional(const ControlPath& h) const {
    return probe_.dot(trajectory(h).terminal());
}

// Forward step: X_{k+1} = R [X_k - dt L_k X_k + dt sigma_k S c_k], with
// L_k X = B(X, u0_k) + B(u0_k, X) + R'(t_k, u0_k) X and S = diag(sqrt q).
// Backward: y = R p_{k+1}; dPhi/dc_k = dt S sigma_k^T y; p_k = y - dt L_k^T y.
ControlPath SkeletonProblem::adjoint_sweep() const {
    const TimeGrid& g = u0_.grid;
    const double dt = g.dt();
    const Eigen::Index n = model_.dimension();
    const Eigen::VectorXd res = (1.0 + dt * model_.a_spectrum().array()).inverse().matrix();
    const std::size_t m = cov_.modes();
    ControlPath grad(g, m);
    State p = probe_, y(n), t1(n), t2(n), t3(n);
    std::vector<double> sig(m);
    for (std::size_t k = g.steps; k-- > 0;) {
        const double t = g.node(k);
        const State& base = u0_[k];
        y = res.cwiseProduct(p);
        model_.noise_transpose(t, base, y, sig);
        auto gk = grad.step(k);
        for (std::size_t j = 0; j < m; ++j) gk[j] = dt * std::sqrt(cov_.q[j]) * sig[j];
        model_.bilinear_first_transpose(base, y, t1);
        // (B(u0, X), y) = -(B(u0, y), X) by antisymmetry
        model_.bilinear(base, y, t2);
        model_.reaction_vjp(t, base, y, t3);
        p = y - dt * (t1 - t2 + t3);
    }
    return grad;
}

double SkeletonProblem::objective(const ControlPath& h, double target, double beta) const {
    const double r = functional(h) - target;
    return action(h) + 0.5 * beta * r * r;
}

ControlPath SkeletonProblem::objective_gradient(const ControlPath& h, double target, double beta) const {
    const double r = functional(h) - target;
    const double dt = grid().dt();
    ControlPath out = h;
    for (std::size_t i = 0; i < out.coeffs.size(); ++i) out.coeffs[i] = dt * h.coeffs[i] + beta * r * grad_.coeffs[i];
    return out;
}

namespace {

double dot(const ControlPath& a, const ControlPath& b) {
    std::vector<double> prod(a.coeffs.size());
    for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = a.coeffs[i] * b.coeffs[i];
    return pairwise_sum(prod);
}

void axpy(double s, const ControlPath& x, ControlPath& y) {
    for (std::size_t i = 0; i < y.coeffs.size(); ++i) y.coeffs[i] += s * x.coeffs[i];
}

RateSolution solve_rate(const SkeletonProblem& prob, double target, double beta, double tol, int max_iter) {
    require(std::isfinite(beta) && beta > 0.0, "rate_function: beta must be > 0");
    require(std::isfinite(target), "rate_function: target must be finite");
    require(tol > 0.0 && max_iter >= 1, "rate_function: invalid tolerance or iteration cap");
    const double dt = prob.grid().dt();
    const ControlPath& g = prob.functional_gradient();

    // Hessian product H v = dt v + beta <g, v> g, with <g, v> = Phi(X^v) from a forward solve.
    auto hess = [&](const ControlPath& v) {
        const double gv = prob.functional(v);
        ControlPath out = v;
        for (std::size_t i = 0; i < out.coeffs.size(); ++i) out.coeffs[i] = dt * v.coeffs[i] + beta * gv * g.coeffs[i];
        return out;
    };

    RateSolution sol;
    sol.beta = beta;
    ControlPath c(prob.grid(), prob.modes());
    ControlPath r = -1.0 * prob.objective_gradient(c, target, beta);
    const double scale = std::max(1.0, std::sqrt(dot(r, r)));
    ControlPath d = r;
    double rr = dot(r, r);
    int it = 0;
    while (std::sqrt(rr) > tol * scale && it < max_iter) {
        const ControlPath hd = hess(d);
        const double curv = dot(d, hd);
        if (!(curv > 0.0)) break;
        const double alpha = rr / curv;
        axpy(alpha, d, c);
        axpy(-alpha, hd, r);
        const double rr_new = dot(r, r);
        for (std::size_t i = 0; i < d.coeffs.size(); ++i) d.coeffs[i] = r.coeffs[i] + (rr_new / rr) * d.coeffs[i];
        rr = rr_new;
        ++it;
    }
    const ControlPath grad = prob.objective_gradient(c, target, beta);
    sol.gradient_norm = std::sqrt(dot(grad, grad));
    sol.iterations = it;
    sol.max_iter_reached = sol.gradient_norm > tol * scale && it >= max_iter;
    sol.X = prob.trajectory(c);
    sol.X.provenance.equation = "skeleton";
    sol.I_hat = action(c);
    sol.terminal_residual = std::abs(prob.functional(c) - target);
    sol.h = std::move(c);
    return sol;
}

}  // namespace

RateSolution rate_function(const ModelSpec& model, const CovarianceSpec& cov, const StatePath& u0,
                           const TimeGrid& grid, const State& probe, double target, double beta, double tol,
                           int max_iter) {
    require(u0.grid == grid, "rate_function: base path lives on a different grid");
    const SkeletonProblem prob(model, cov, u0, probe);
    return solve_rate(prob, target, beta, tol, max_iter);
}

RateSweep rate_function_sweep(const ModelSpec& model, const CovarianceSpec& cov, const StatePath& u0,
                              const TimeGrid& grid, const State& probe, double target, const std::vector<double>& betas,
                              double tol, int max_iter) {
    require(!betas.empty(), "rate_function_sweep: beta list must not be empty");
    require(u0.grid == grid, "rate_function: base path lives on a different grid");
    const SkeletonProblem prob(model, cov, u0, probe);
    RateSweep sweep;
    sweep.betas = betas;
    std::vector<double> x, y;
    for (double b : betas) {
        sweep.runs.push_back(solve_rate(prob, target, b, tol, max_iter));
        x.push_back(1.0 / b);
        y.push_back(sweep.runs.back().I_hat);
    }
    sweep.I_extrapolated = extrapolate_to_zero(x, y);
    return sweep;
}

// ---------------------------------------------------------------------------

std::vector<TailEstimate> mdp_tail_experiment(const ModelSpec& model, const CovarianceSpec& cov, const State& xi,
                                              const TimeGrid& grid, const State& probe, double c, double a,
                                              const std::vector<double>& eps_list, std::size_t n_rep,
                                              std::uint64_t seed, bool importance, unsigned jobs,
                                              const ControlPath* tilt) {
    require_eps_grid(eps_list);
    require(n_rep >= 1, "mdp_tail_experiment: need at least one replica");
    require(probe.size() == model.dimension(), "functional probe has the wrong dimension");
    require(std::isfinite(c), "threshold must be finite");
    const StatePath u0 = solve_deterministic(model, xi, grid);

    ControlPath h;
    if (importance) {
        if (tilt != nullptr) {
            require(tilt->grid == grid && tilt->modes == cov.modes(), "tilt control does not match grid/covariance");
            h = *tilt;
        } else {
            h = rate_function(model, cov, u0, grid, probe, c, 1e4).h;
        }
        restrict_to_support(h, cov);
    } else {
        h = ControlPath(grid, cov.modes());
    }
    const std::size_t m = cov.modes();

    std::vector<TailEstimate> out;
    for (double eps : eps_list) {
        const ScalingSpec sc = ScalingSpec::moderate(eps, a);
        const double lam = sc.lambda;
        // weight_r = exp(-theta . zeta - |theta|^2 / 2) for hits, 0 otherwise;
        // theta_{k,j} = lambda c_{k,j} sqrt(dt), zeta the standard normal draw.
        std::vector<double> weight(n_rep, 0.0);
        std::vector<char> ok(n_rep, 1);
        const double theta_sq = 2.0 * lam * lam * action(h);
        parallel_for(n_rep, jobs, [&](std::size_t r) {
            const auto inc = sample_increments(cov, grid, replica_seed(seed, r));
            try {
                double phi;
                double logw = 0.0;
                if (importance) {
                    // lambda^{-1} sigma (dW + lambda sqrt(q) h' dt) is the controlled dynamics with control h
                    const StatePath x = solve_controlled(model, cov, u0, grid, sc, inc, h);
                    phi = probe.dot(x.terminal());
                    double cross = 0.0;
                    for (std::size_t k = 0; k < grid.steps; ++k)
                        for (std::size_t j = 0; j < m; ++j)
                            if (cov.q[j] > 0.0) cross += lam * h.at(k, j) * inc.at(k, j) / std::sqrt(cov.q[j]);
                    logw = -cross - 0.5 * theta_sq;
                } else {
                    phi = probe.dot(solve_moderate(model, cov, u0, grid, sc, inc).terminal());
                }
                weight[r] = phi >= c ? std::exp(logw) : 0.0;
            } catch (const IntegrationError&) {
                ok[r] = 0;
            }
        });
        TailEstimate te;
        te.epsilon = eps;
        te.lambda = lam;
        te.threshold = c;
        te.importance = importance;
        te.tilt_action = importance ? action(h) : 0.0;
        std::vector<double> w, w2;
        for (std::size_t r = 0; r < n_rep; ++r) {
            if (!ok[r]) {
                ++te.excluded;
                continue;
            }
            w.push_back(weight[r]);
            if (weight[r] > 0.0) ++te.hits;
            w2.push_back(weight[r] * weight[r]);
        }
        if (static_cast<double>(te.excluded) > kMaxExcludedFraction * static_cast<double>(n_rep))
            throw ExperimentFailure("mdp: too many replicas blew up; refine the grid");
        te.replicas = w.size();
        const auto ms = mean_se(w);
        te.p_hat = ms.mean;
        te.p_se = ms.se;
        const double s1 = pairwise_sum(w), s2 = pairwise_sum(w2);
        te.ess = s2 > 0.0 ? s1 * s1 / s2 : 0.0;
        te.censored = te.hits == 0;
        te.decay = te.censored ? std::numeric_limits<double>::infinity() : -std::log(te.p_hat) / (lam * lam);
        out.push_back(te);
    }
    return out;
}

// ---------------------------------------------------------------------------

ControlledResult controlled_convergence(const ModelSpec& model, const CovarianceSpec& cov, const State& xi,
                                        const TimeGrid& grid, const ControlPath& phi,
                                        const std::vector<double>& eps_list, double a, std::size_t n_rep,
                                        std::uint64_t seed, unsigned jobs) {
    require_eps_grid(eps_list);
    require(n_rep >= 2, "controlled_convergence: need at least two replicas");
    require(phi.grid == grid && phi.modes == cov.modes(), "control does not match grid/covariance");
    const StatePath u0 = solve_deterministic(model, xi, grid);
    const StatePath xphi = solve_skeleton(model, cov, u0, grid, phi);
    const std::size_t ne = eps_list.size();
    std::vector<MetricSlots> slots(ne, MetricSlots(n_rep));
    std::vector<ScalingSpec> scalings;
    for (double e : eps_list) scalings.push_back(ScalingSpec::moderate(e, a));

    parallel_for(n_rep, jobs, [&](std::size_t r) {
        const auto inc = sample_increments(cov, grid, replica_seed(seed, r));
        for (std::size_t i = 0; i < ne; ++i) {
            try {
                const StatePath xe = solve_controlled(model, cov, u0, grid, scalings[i], inc, phi);
                slots[i][r] = difference_metric(model, xe, xphi);
            } catch (const IntegrationError&) {
            }
        }
    });

    ControlledResult out;
    for (std::size_t i = 0; i < ne; ++i) out.distance.push_back(summarize(eps_list[i], scalings[i].lambda, slots[i]));
    out.monotone = strictly_decreasing(out.distance);
    const double d0 = out.distance.front().D();
    out.final_ratio = d0 > 0.0 ? out.distance.back().D() / d0 : 0.0;
    return out;
}

ModulusResult increment_modulus(const ModelSpec& model, const CovarianceSpec& cov, const State& xi,
                                const TimeGrid& grid, const ScalingSpec& scaling, const ControlPath& phi,
                                const std::vector<int>& n_list, std::size_t n_rep, std::uint64_t seed, double clip,
                                unsigned jobs) {
    require(!n_list.empty(), "increment_modulus: n list must not be empty");
    require(n_rep >= 2, "increment_modulus: need at least two replicas");
    require(clip > 0.0, "increment_modulus: clip level must be > 0");
    require(phi.grid == grid && phi.modes == cov.modes(), "control does not match grid/covariance");
    const double dt = grid.dt();
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        require(n_list[i] >= 0, "increment_modulus: n must be >= 0");
        if (i > 0) require(n_list[i] > n_list[i - 1], "increment_modulus: n list must be increasing");
        require(std::ldexp(1.0, -n_list[i]) >= dt * (1.0 - 1e-12),
                "increment_modulus: shift 2^-n is below the time step and cannot be resolved");
    }
    const StatePath u0 = solve_deterministic(model, xi, grid);
    const std::size_t nn = n_list.size();
    std::vector<std::vector<double>> vals(nn, std::vector<double>(n_rep, 0.0));
    std::vector<char> keep(n_rep, 0), blown(n_rep, 0);

    parallel_for(n_rep, jobs, [&](std::size_t r) {
        const auto inc = sample_increments(cov, grid, replica_seed(seed, r));
        StatePath x;
        try {
            x = solve_controlled(model, cov, u0, grid, scaling, inc, phi);
        } catch (const IntegrationError&) {
            blown[r] = 1;
            return;
        }
        if (path_metric(model, x).total() > clip) return;
        keep[r] = 1;
        // state at time s by linear interpolation between nodes
        auto at = [&](double s) {
            const double pos = std::min(s / dt, static_cast<double>(grid.steps));
            const auto k = static_cast<std::size_t>(std::floor(pos));
            if (k >= grid.steps) return State(x.terminal());
            const double w = pos - static_cast<double>(k);
            return State((1.0 - w) * x[k] + w * x[k + 1]);
        };
        for (std::size_t i = 0; i < nn; ++i) {
            const double h = std::ldexp(1.0, -n_list[i]);
            double acc = 0.0;
            for (std::size_t k = 0; k < grid.steps; ++k) {
                const double s = grid.node(k);
                acc += dt * (at(std::min(s + h, grid.T)) - x[k]).squaredNorm();
            }
            vals[i][r] = acc;
        }
    });

    ModulusResult out;
    std::size_t nblown = 0;
    for (std::size_t r = 0; r < n_rep; ++r) {
        out.retained += keep[r] ? 1 : 0;
        nblown += blown[r] ? 1 : 0;
    }
    out.clipped = n_rep - out.retained - nblown;
    if (static_cast<double>(nblown) > kMaxExcludedFraction * static_cast<double>(n_rep))
        throw ExperimentFailure("modulus: too many replicas blew up; refine the grid");
    if (out.retained < 2) throw ExperimentFailure("modulus: fewer than two replicas below the clip level");
    for (std::size_t i = 0; i < nn; ++i) {
        std::vector<double> kept;
        for (std::size_t r = 0; r < n_rep; ++r)
            if (keep[r]) kept.push_back(vals[i][r]);
        out.n.push_back(n_list[i]);
        out.shift.push_back(std::ldexp(1.0, -n_list[i]));
        out.M.push_back(mean_se(kept));
    }
    if (nn >= 2) {
        std::vector<double> y;
        for (const auto& m : out.M) y.push_back(m.mean);
        std::size_t positive = 0;
        for (double v : y) positive += v > 0.0 ? 1 : 0;
        if (positive >= 2) out.fit = loglog_fit(out.shift, y);
    }
    return out;
}

// ---------------------------------------------------------------------------

MomentSummary moment_audit(const ModelSpec& model, const std::vector<StatePath>& paths, int p) {
    require(p == 1 || p == 2, "moment_audit: p must be 1 or 2");
    MomentSummary s;
    s.p = p;
    s.paths = paths.size();
    std::vector<double> sup, en, wen, h4;
    for (const auto& path : paths) {
        const double dt = path.grid.dt();
        double sp = 0.0, e = 0.0, we = 0.0, hh = 0.0;
        for (std::size_t k = 0; k < path.nodes(); ++k) {
            const double h2 = path[k].squaredNorm();
            sp = std::max(sp, std::pow(h2, p));
            if (k == 0) continue;
            const double v2 = model.v_norm_sq(path[k]);
            const double hn = model.interp_norm(path[k]);
            e += dt * v2;
            we += dt * std::pow(h2, p - 1) * v2;
            hh += dt * hn * hn * hn * hn;
        }
        sup.push_back(sp);
        en.push_back(e);
        wen.push_back(we);
        h4.push_back(hh);
    }
    s.sup_pow = mean_se(sup);
    s.energy = mean_se(en);
    s.weighted_energy = mean_se(wen);
    s.interp4 = mean_se(h4);
    return s;
}

bool uniformly_bounded(const std::vector<MomentSummary>& sweep, double factor) {
    if (sweep.empty()) return true;
    auto check = [&](auto field) {
        const double ref = (sweep.front().*field).mean;
        double worst = 0.0;
        for (const auto& s : sweep) worst = std::max(worst, (s.*field).mean);
        return worst <= factor * ref || worst == 0.0;
    };
    return check(&MomentSummary::sup_pow) && check(&MomentSummary::energy) &&
           check(&MomentSummary::weighted_energy) && check(&MomentSummary::interp4);
}

}  // namespace hydroscale
