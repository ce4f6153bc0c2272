#include "helpers.hpp"
#include "oracles.hpp"

#include "hydroscale/stats.hpp"

#include <doctest.h>

using namespace hydroscale;
using namespace testing_support;

namespace {

State scalar(double x) {
    State s(1);
    s << x;
    return s;
}

}  // namespace

TEST_CASE("deterministic solver") {
    SUBCASE("rest state") {
        ShellParams p;
        const ModelSpec m = make_shell_model(p);
        const StatePath u = solve_deterministic(m, State::Zero(m.dimension()), TimeGrid(1.0, 64));
        for (const auto& s : u.states) CHECK(s.norm() == 0.0);
    }
    SUBCASE("semi-implicit dissipativity") {
        ShellParams p;
        p.reaction_rho = 0.0;
        const ModelSpec m = make_shell_model(p);
        const State xi = shell_xi(m);
        // B is explicit, so the energy inequality holds up to an O(dt) defect
        double prev = 1e300;
        for (std::size_t steps : {64u, 512u, 4096u}) {
            const TimeGrid g(1.0, steps);
            const StatePath u = solve_deterministic(m, xi, g);
            const double excess = u.terminal().squaredNorm() + 2.0 * path_metric(m, u).energy - xi.squaredNorm();
            CHECK(excess <= 3.0 * g.dt() * xi.squaredNorm());
            CHECK(excess < prev);
            prev = excess;
        }
    }
}

TEST_CASE("small-noise solver") {
    const ModelSpec m = scalar_ou();
    const CovarianceSpec cov({1.0});
    const TimeGrid g(1.0, 128);
    const State xi = scalar(1.0);
    const StatePath u0 = solve_deterministic(m, xi, g);
    const auto inc = sample_increments(cov, g, replica_seed(3, 0));

    SUBCASE("eps = 0 reproduces the deterministic path bit for bit") {
        CHECK(same_path(solve_sde(m, cov, xi, g, ScalingSpec{0.0, 1.0}, inc), u0));
    }
    SUBCASE("determinism") {
        CHECK(same_path(solve_sde(m, cov, xi, g, ScalingSpec::clt(0.1), inc),
                        solve_sde(m, cov, xi, g, ScalingSpec::clt(0.1), inc)));
    }
    SUBCASE("terminal variance") {
        const double eps = 0.01;
        const std::size_t n = 10000;
        std::vector<double> d2;
        for (std::size_t r = 0; r < n; ++r) {
            const auto ir = sample_increments(cov, g, replica_seed(4, r));
            const double d = solve_sde(m, cov, xi, g, ScalingSpec::clt(eps), ir).terminal()[0] - u0.terminal()[0];
            d2.push_back(d * d);
        }
        const auto ms = mean_se(d2);
        CHECK(std::abs(ms.mean - eps * oracle::ou_variance(1.0)) <= 3.0 * ms.se + eps * 2.0 * g.dt());
    }
}

TEST_CASE("linearized fluctuation") {
    ShellParams p;
    const ModelSpec shell = make_shell_model(p);
    const CovarianceSpec cov = CovarianceSpec::power_law(shell.dimension());
    const TimeGrid g(1.0, 128);
    const StatePath u0 = solve_deterministic(shell, shell_xi(shell), g);

    SUBCASE("zero forcing") {
        const StatePath V = solve_linearized(shell, cov, u0, g, zero_increments(g, cov.modes()));
        for (const auto& s : V.states) CHECK(s.norm() == 0.0);
    }
    SUBCASE("superposition") {
        const auto a = sample_increments(cov, g, replica_seed(1, 0));
        const auto b = sample_increments(cov, g, replica_seed(1, 1));
        const StatePath va = solve_linearized(shell, cov, u0, g, a);
        const StatePath vb = solve_linearized(shell, cov, u0, g, b);
        const StatePath vab = solve_linearized(shell, cov, u0, g, a + b);
        for (std::size_t k = 0; k < vab.nodes(); ++k) CHECK((vab[k] - va[k] - vb[k]).norm() <= 1e-10);
    }
    SUBCASE("OU fluctuation equals the rescaled difference") {
        const ModelSpec ou = scalar_ou();
        const CovarianceSpec c1({1.0});
        const State xi = scalar(1.0);
        const StatePath w0 = solve_deterministic(ou, xi, g);
        const auto inc = sample_increments(c1, g, replica_seed(2, 0));
        const StatePath V = solve_linearized(ou, c1, w0, g, inc);
        for (double eps : {1e-1, 1e-3, 1e-5}) {
            const StatePath ue = solve_sde(ou, c1, xi, g, ScalingSpec::clt(eps), inc);
            for (std::size_t k = 0; k < V.nodes(); ++k)
                CHECK(std::abs((ue[k][0] - w0[k][0]) / std::sqrt(eps) - V[k][0]) <= 1e-8);
        }
    }
}

TEST_CASE("moderate deviation process") {
    ShellParams p;
    const ModelSpec shell = make_shell_model(p);
    const CovarianceSpec cov = CovarianceSpec::power_law(shell.dimension());
    const TimeGrid g(1.0, 256);
    const State xi = shell_xi(shell);
    const StatePath u0 = solve_deterministic(shell, xi, g);
    const ScalingSpec sc = ScalingSpec::moderate(1e-3, 0.25);

    SUBCASE("zero increments") {
        const StatePath z = solve_moderate(shell, cov, u0, g, sc, zero_increments(g, cov.modes()));
        for (const auto& s : z.states) CHECK(s.norm() == 0.0);
    }
    SUBCASE("reconstruction of the small-noise path") {
        const auto inc = sample_increments(cov, g, replica_seed(8, 0));
        const StatePath z = solve_moderate(shell, cov, u0, g, sc, inc);
        const StatePath ue = solve_sde(shell, cov, xi, g, ScalingSpec::clt(sc.epsilon), inc);
        for (std::size_t k = 0; k < z.nodes(); ++k)
            CHECK((u0[k] + sc.shift() * z[k] - ue[k]).norm() <= 1e-11 * (1.0 + ue[k].norm()));
    }
    SUBCASE("OU variance") {
        const ModelSpec ou = scalar_ou();
        const CovarianceSpec c1({1.0});
        const StatePath w0 = solve_deterministic(ou, scalar(0.0), g);
        const ScalingSpec s = ScalingSpec::moderate(1e-2, 0.25);
        std::vector<double> z2;
        for (std::size_t r = 0; r < 10000; ++r) {
            const double z = solve_moderate(ou, c1, w0, g, s, sample_increments(c1, g, replica_seed(9, r))).terminal()[0];
            z2.push_back(z * z);
        }
        const auto ms = mean_se(z2);
        const double expected = oracle::ou_variance(1.0) / (s.lambda * s.lambda);
        CHECK(std::abs(ms.mean - expected) <= 3.0 * ms.se + 2.0 * g.dt() * expected);
    }
    SUBCASE("shift must stay below one") {
        CHECK_THROWS_AS(ScalingSpec::moderate(1.0, 0.25), InvalidInput);
        CHECK_THROWS_AS(ScalingSpec::moderate(0.1, 0.5), InvalidInput);
    }
}

TEST_CASE("skeleton") {
    ShellParams p;
    const ModelSpec shell = make_shell_model(p);
    const CovarianceSpec cov = CovarianceSpec::power_law(shell.dimension());
    const TimeGrid g(1.0, 128);
    const StatePath u0 = solve_deterministic(shell, shell_xi(shell), g);

    const StatePath x0 = solve_skeleton(shell, cov, u0, g, ControlPath(g, cov.modes()));
    for (const auto& s : x0.states) CHECK(s.norm() == 0.0);

    ControlPath h(g, cov.modes());
    for (std::size_t k = 0; k < g.steps; ++k) h.at(k, k % cov.modes()) = std::sin(0.1 * static_cast<double>(k));
    const StatePath xh = solve_skeleton(shell, cov, u0, g, h);
    const StatePath x3 = solve_skeleton(shell, cov, u0, g, 3.0 * h);
    for (std::size_t k = 0; k < xh.nodes(); ++k) CHECK((x3[k] - 3.0 * xh[k]).norm() <= 1e-12 * (1.0 + x3[k].norm()));

    const double s = 0.8, q = 0.5;
    const ModelSpec ou = scalar_ou(1.0, s);
    const CovarianceSpec c1({q});
    const TimeGrid fine(1.0, 4096);
    const StatePath w0 = solve_deterministic(ou, scalar(1.0), fine);
    const StatePath X = solve_skeleton(ou, c1, w0, fine, ControlPath::constant(fine, 1, 0, 1.0));
    CHECK(X.terminal()[0] == doctest::Approx(oracle::ou_skeleton_terminal(s, q, 1.0)).epsilon(1e-3));
}

TEST_CASE("controlled process") {
    ShellParams p;
    const ModelSpec shell = make_shell_model(p);
    const CovarianceSpec cov = CovarianceSpec::power_law(shell.dimension());
    const TimeGrid g(1.0, 128);
    const StatePath u0 = solve_deterministic(shell, shell_xi(shell), g);
    const ScalingSpec sc = ScalingSpec::moderate(1e-3, 0.25);
    const auto inc = sample_increments(cov, g, replica_seed(4, 2));

    CHECK(same_path(solve_controlled(shell, cov, u0, g, sc, inc, ControlPath(g, cov.modes())),
                    solve_moderate(shell, cov, u0, g, sc, inc)));

    const ControlPath phi = ControlPath::constant(g, cov.modes(), 0, 0.7);
    const StatePath degenerate =
        solve_perturbation(shell, cov, u0, g, 0.0, 0.0, nullptr, &phi, "skeleton-limit");
    CHECK(max_abs_diff(degenerate, solve_skeleton(shell, cov, u0, g, phi)) <= 1e-13);

    SUBCASE("OU mean follows the skeleton") {
        const ModelSpec ou = scalar_ou();
        const CovarianceSpec c1({1.0});
        const StatePath w0 = solve_deterministic(ou, scalar(1.0), g);
        const ControlPath ph = ControlPath::constant(g, 1, 0, 0.7);
        const double target = solve_skeleton(ou, c1, w0, g, ph).terminal()[0];
        double prev = 1e300;
        for (double eps : {1e-2, 1e-3, 1e-4}) {
            const ScalingSpec s = ScalingSpec::moderate(eps, 0.25);
            std::vector<double> x, sup;
            for (std::size_t r = 0; r < 2000; ++r) {
                const StatePath X = solve_controlled(ou, c1, w0, g, s, sample_increments(c1, g, replica_seed(6, r)), ph);
                x.push_back(X.terminal()[0]);
                const StatePath S = solve_skeleton(ou, c1, w0, g, ph);
                double m = 0.0;
                for (std::size_t k = 0; k < X.nodes(); ++k) m = std::max(m, std::abs(X[k][0] - S[k][0]));
                sup.push_back(m);
            }
            const auto ms = mean_se(x);
            CHECK(std::abs(ms.mean - target) <= 3.0 * ms.se);
            const double d = mean_se(sup).mean;
            CHECK(d < prev);
            prev = d;
        }
    }
}

TEST_CASE("self-convergence") {
    SUBCASE("OU against the exact transition") {
        LinearOUParams p;
        p.dimension = 2;
        p.drift = {1.0, 4.0};
        p.noise = {1.0, 1.0};
        const ModelSpec m = make_linear_ou(p);
        State xi(2);
        xi << 1.0, 1.0;
        ConvergenceOptions o;
        o.reference = ConvergenceReference::Exact;
        o.replicas = 256;
        const auto r = self_convergence(m, CovarianceSpec::power_law(2), xi, o);
        CHECK(r.order >= 0.9);
    }
    SUBCASE("deterministic shell") {
        ShellParams p;
        const ModelSpec m = make_shell_model(p);
        ConvergenceOptions o;
        o.solver = ConvergenceSolver::Deterministic;
        o.base_steps = 64;
        o.replicas = 1;
        const auto r = self_convergence(m, CovarianceSpec::power_law(m.dimension()), shell_xi(m), o);
        CHECK(r.order >= 0.9);
    }
    SUBCASE("exact reference refuses nonlinear models") {
        ShellParams p;
        const ModelSpec m = make_shell_model(p);
        ConvergenceOptions o;
        o.reference = ConvergenceReference::Exact;
        CHECK_THROWS_AS(self_convergence(m, CovarianceSpec::power_law(m.dimension()), shell_xi(m), o), InvalidInput);
    }
}
