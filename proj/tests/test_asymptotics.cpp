#include "helpers.hpp"
#include "oracles.hpp"

#include "hydroscale/asymptotics.hpp"

#include <doctest.h>

#include <random>

using namespace hydroscale;
using namespace testing_support;

namespace {

State unit(Eigen::Index n, Eigen::Index i) {
    State e = State::Zero(n);
    e[i] = 1.0;
    return e;
}

ControlPath random_control(const TimeGrid& g, std::size_t modes, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    ControlPath h(g, modes);
    for (double& c : h.coeffs) c = nd(rng);
    return h;
}

// Relative error between the adjoint directional derivative and a central difference.
double gradient_error(const SkeletonProblem& prob, double target, double beta, std::mt19937_64& rng) {
    const ControlPath h = random_control(prob.grid(), prob.modes(), rng);
    const ControlPath dh = random_control(prob.grid(), prob.modes(), rng);
    const ControlPath g = prob.objective_gradient(h, target, beta);
    double analytic = 0.0;
    for (std::size_t i = 0; i < g.coeffs.size(); ++i) analytic += g.coeffs[i] * dh.coeffs[i];
    const double d = 1e-5;
    ControlPath hp = h, hm = h;
    for (std::size_t i = 0; i < h.coeffs.size(); ++i) {
        hp.coeffs[i] += d * dh.coeffs[i];
        hm.coeffs[i] -= d * dh.coeffs[i];
    }
    const double fd = (prob.objective(hp, target, beta) - prob.objective(hm, target, beta)) / (2.0 * d);
    return std::abs(analytic - fd) / std::max(std::abs(fd), 1e-300);
}

}  // namespace

TEST_CASE("coupling statistics") {
    SUBCASE("linear OU coupling is a pathwise identity") {
        const ModelSpec ou = scalar_ou();
        State xi(1);
        xi << 1.0;
        const auto r =
            clt_experiment(ou, CovarianceSpec({1.0}), xi, TimeGrid(1.0, 256), {1e-2, 1e-3, 1e-4, 1e-5}, 64, 1);
        for (const auto& s : r.coupling) CHECK(s.D() <= 1e-20);
    }
    SUBCASE("invalid eps grids are rejected") {
        const ModelSpec ou = scalar_ou();
        State xi(1);
        xi << 1.0;
        CHECK_THROWS_AS(clt_experiment(ou, CovarianceSpec({1.0}), xi, TimeGrid(1.0, 16), {1e-3, 1e-2}, 8, 1),
                        InvalidInput);
        CHECK_THROWS_AS(clt_experiment(ou, CovarianceSpec({1.0}), xi, TimeGrid(1.0, 16), {-1e-2}, 8, 1),
                        InvalidInput);
    }
}

TEST_CASE("skeleton adjoint gradient") {
    std::mt19937_64 rng(2024);
    SUBCASE("OU") {
        const ModelSpec ou = scalar_ou();
        const CovarianceSpec cov({1.0});
        const TimeGrid g(1.0, 128);
        State xi(1);
        xi << 1.0;
        const SkeletonProblem prob(ou, cov, solve_deterministic(ou, xi, g), unit(1, 0));
        for (int i = 0; i < 20; ++i) CHECK(gradient_error(prob, 1.0, 1e3, rng) <= 1e-6);
    }
    SUBCASE("shell linearization") {
        ShellParams p;
        p.reaction_gamma = 0.5;
        const ModelSpec shell = make_shell_model(p);
        const CovarianceSpec cov = CovarianceSpec::power_law(shell.dimension());
        const TimeGrid g(1.0, 128);
        const SkeletonProblem prob(shell, cov, solve_deterministic(shell, shell_xi(shell), g),
                                   unit(shell.dimension(), 2));
        for (int i = 0; i < 20; ++i) CHECK(gradient_error(prob, 0.5, 1e3, rng) <= 1e-6);
    }
}

TEST_CASE("rate function") {
    const ModelSpec ou = scalar_ou();
    const CovarianceSpec cov({1.0});
    const TimeGrid g(1.0, 1024);
    const StatePath u0 = solve_deterministic(ou, State::Zero(1), g);
    const State e = unit(1, 0);

    const auto zero = rate_function(ou, cov, u0, g, e, 0.0, 1e4);
    CHECK(zero.I_hat == 0.0);
    for (double c : zero.h.coeffs) CHECK(c == 0.0);

    const auto r1 = rate_function(ou, cov, u0, g, e, 1.0, 1e4);
    const auto r2 = rate_function(ou, cov, u0, g, e, 2.0, 1e4);
    CHECK(r2.I_hat / r1.I_hat == doctest::Approx(4.0).epsilon(1e-6));

    const auto sweep = rate_function_sweep(ou, cov, u0, g, e, 1.0);
    CHECK(sweep.I_extrapolated == doctest::Approx(oracle::ou_rate(1.0)).epsilon(0.01));
    for (const auto& r : sweep.runs) CHECK_FALSE(r.max_iter_reached);
}

TEST_CASE("tail probabilities") {
    const ModelSpec ou = scalar_ou();
    const CovarianceSpec cov({1.0});
    const TimeGrid g(1.0, 128);
    const State xi = State::Zero(1);
    const State e = unit(1, 0);

    SUBCASE("median event carries no rate") {
        const auto t = mdp_tail_experiment(ou, cov, xi, g, e, 0.0, 0.25, {1e-2, 1e-4}, 4000, 3, false);
        for (const auto& x : t) {
            CHECK(x.p_hat == doctest::Approx(0.5).epsilon(0.05));
            // -log(1/2) / lambda^2 tends to zero
            CHECK(x.decay <= 1.0 / (x.lambda * x.lambda));
        }
        CHECK(t[1].decay < t[0].decay);
    }
    SUBCASE("nested events") {
        double prev = 1.0;
        for (double c : {0.0, 0.25, 0.5, 0.75}) {
            const auto t = mdp_tail_experiment(ou, cov, xi, g, e, c, 0.25, {1e-2}, 4000, 3, false);
            CHECK(t[0].p_hat <= prev);
            prev = t[0].p_hat;
        }
    }
    SUBCASE("importance sampling agrees with the Gaussian tail") {
        // Z(T) is exactly Gaussian with the discrete scheme's variance
        double var = 0.0;
        const double r = 1.0 / (1.0 + g.dt());
        for (std::size_t k = 0; k < g.steps; ++k) var = r * r * (var + g.dt());
        const double eps = 1.0 / 16.0;
        const auto t = mdp_tail_experiment(ou, cov, xi, g, e, 1.0, 0.25, {eps}, 10000, 5, true);
        const double lam = std::pow(eps, -0.25);
        const double exact = oracle::normal_tail(lam / std::sqrt(var));
        CHECK(std::abs(t[0].p_hat - exact) <= 4.0 * t[0].p_se);
        CHECK(t[0].ess >= 100.0);
    }
}

TEST_CASE("controlled convergence and increment modulus") {
    SUBCASE("zero control on OU reduces to the fluctuation variance") {
        const ModelSpec ou = scalar_ou();
        const CovarianceSpec cov({1.0});
        const TimeGrid g(1.0, 128);
        State xi(1);
        xi << 1.0;
        const auto r = controlled_convergence(ou, cov, xi, g, ControlPath(g, 1), {1e-2, 1e-4}, 0.25, 2000, 3);
        // D scales like lambda^{-2}: the ratio is (1e-4 / 1e-2)^{1/2}
        CHECK(r.monotone);
        CHECK(r.final_ratio == doctest::Approx(0.1).epsilon(0.15));
    }
    SUBCASE("frozen path has zero modulus") {
        const ModelSpec ou = scalar_ou(1.0, 0.0);
        const CovarianceSpec cov({1.0});
        const TimeGrid g(1.0, 256);
        State xi(1);
        xi << 1.0;
        const ControlPath phi = ControlPath::constant(g, 1, 0, 0.5);
        const auto r = increment_modulus(ou, cov, xi, g, ScalingSpec::moderate(1e-3, 0.25), phi, {2, 3, 4}, 8, 1,
                                         1e6);
        for (const auto& m : r.M) CHECK(m.mean == 0.0);
    }
    SUBCASE("shell modulus halves when n grows by two") {
        ShellParams p;
        const ModelSpec shell = make_shell_model(p);
        const CovarianceSpec cov = CovarianceSpec::power_law(shell.dimension());
        const TimeGrid g(1.0, 1024);
        const ControlPath phi = ControlPath::constant(g, cov.modes(), 0, 0.7);
        const auto r = increment_modulus(shell, cov, shell_xi(shell), g, ScalingSpec::moderate(1e-3, 0.25), phi,
                                         {2, 4, 6}, 64, 1, 1e6);
        for (std::size_t i = 1; i < r.M.size(); ++i)
            CHECK(r.M[i].mean <= 0.5 * r.M[i - 1].mean + 3.0 * (r.M[i].se + 0.5 * r.M[i - 1].se));
    }
}

TEST_CASE("moment audit") {
    const ModelSpec ou = scalar_ou();
    const TimeGrid g(1.0, 64);
    StatePath z;
    z.grid = g;
    z.states.assign(g.steps + 1, State::Zero(1));
    const auto m = moment_audit(ou, {z, z}, 2);
    CHECK(m.sup_pow.mean == 0.0);
    CHECK(m.energy.mean == 0.0);
    CHECK(m.interp4.mean == 0.0);

    ShellParams p;
    const ModelSpec shell = make_shell_model(p);
    const CovarianceSpec cov = CovarianceSpec::power_law(shell.dimension());
    const TimeGrid gs(1.0, 256);
    std::vector<MomentSummary> sweep;
    for (double eps : {1e-1, 1e-2, 1e-3}) {
        std::vector<StatePath> paths;
        for (std::size_t r = 0; r < 32; ++r)
            paths.push_back(solve_sde(shell, cov, shell_xi(shell), gs, ScalingSpec::clt(eps),
                                      sample_increments(cov, gs, replica_seed(1, r))));
        sweep.push_back(moment_audit(shell, paths, 1));
    }
    CHECK(uniformly_bounded(sweep));
}
