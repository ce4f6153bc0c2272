#include "helpers.hpp"
#include "oracles.hpp"

#include "hydroscale/stochastics.hpp"

#include <doctest.h>

using namespace hydroscale;
using namespace testing_support;

TEST_CASE("shell model") {
    SUBCASE("two shells have no complete triad") {
        ShellParams p;
        p.n_shells = 2;
        const ModelSpec m = make_shell_model(p);
        for (std::uint64_t i = 0; i < 20; ++i)
            CHECK(m.bilinear(random_probe(4, 1, i), random_probe(4, 2, i)).norm() == 0.0);
    }
    SUBCASE("trilinear form agrees with the triple-loop expansion") {
        ShellParams p;
        p.n_shells = 16;
        const ModelSpec m = make_shell_model(p);
        for (std::uint64_t i = 0; i < 10; ++i) {
            const State u = random_probe(m.dimension(), 5, 3 * i);
            const State v = random_probe(m.dimension(), 5, 3 * i + 1);
            const State w = random_probe(m.dimension(), 5, 3 * i + 2);
            const double ref = oracle::shell_trilinear(to_vec(u), to_vec(v), to_vec(w), p.k0, p.shell_ratio, p.a,
                                                       p.b, p.c);
            CHECK(m.trilinear(u, v, w) == doctest::Approx(ref).epsilon(1e-12).scale(1.0));
        }
        CHECK(verify_antisymmetry(m, 1000, 8, 1e-12).pass());
    }
    SUBCASE("analytic first-slot transpose matches the basis-probe default") {
        ShellParams p;
        p.n_shells = 8;
        const ModelSpec m = make_shell_model(p);
        const State v = random_probe(m.dimension(), 6, 0);
        const State w = random_probe(m.dimension(), 6, 1);
        State analytic, probed;
        m.bilinear_first_transpose(v, w, analytic);
        m.bilinear_term().BilinearTerm::apply_first_transpose(v, w, probed);
        CHECK((analytic - probed).norm() <= 1e-12 * (1.0 + probed.norm()));
    }
    SUBCASE("energy identity without forcing") {
        ShellParams p;
        p.reaction_rho = 0.0;
        const ModelSpec m = make_shell_model(p);
        const State xi = shell_xi(m);
        const StatePath u = solve_deterministic(m, xi, TimeGrid(1.0, 4096));
        const auto metric = path_metric(m, u);
        const double lhs = u.terminal().squaredNorm() + 2.0 * metric.energy;
        CHECK(lhs == doctest::Approx(xi.squaredNorm()).epsilon(0.01));
    }
    SUBCASE("invalid parameters are rejected") {
        ShellParams p;
        p.viscosity = 0.0;
        CHECK_THROWS_AS(make_shell_model(p), InvalidInput);
    }
}

TEST_CASE("spectral 2D model") {
    SUBCASE("coordinates are orthonormal for the torus mean") {
        SpectralNSParams p;
        p.max_wavenumber = 3;
        const ModelSpec m = make_spectral_ns(p);
        const State u = random_probe(m.dimension(), 1, 0);
        const State v = random_probe(m.dimension(), 1, 1);
        CHECK(u.dot(v) == doctest::Approx(oracle::ns_inner(3, to_vec(u), to_vec(v))).epsilon(1e-12));
    }
    SUBCASE("trilinear form agrees with physical-space quadrature") {
        SpectralNSParams p;
        p.max_wavenumber = 3;
        const ModelSpec m = make_spectral_ns(p);
        for (std::uint64_t i = 0; i < 4; ++i) {
            const State u = random_probe(m.dimension(), 7, 3 * i);
            const State v = random_probe(m.dimension(), 7, 3 * i + 1);
            const State w = random_probe(m.dimension(), 7, 3 * i + 2);
            const double ref = oracle::ns_trilinear(3, to_vec(u), to_vec(v), to_vec(w));
            CHECK(m.trilinear(u, v, w) == doctest::Approx(ref).epsilon(1e-10).scale(1.0));
        }
    }
    SUBCASE("K = 1 self-interaction vanishes") {
        SpectralNSParams p;
        p.max_wavenumber = 1;
        const ModelSpec m = make_spectral_ns(p);
        for (std::uint64_t i = 0; i < 20; ++i) {
            const State u = random_probe(m.dimension(), 2, i);
            CHECK(std::abs(m.trilinear(u, u, u)) <= 1e-13 * (1.0 + u.squaredNorm() * u.norm()));
        }
    }
    SUBCASE("K = 8 antisymmetry") {
        SpectralNSParams p;
        p.max_wavenumber = 8;
        const ModelSpec m = make_spectral_ns(p);
        CHECK(verify_antisymmetry(m, 200, 4, 1e-10).pass());
        const State u = random_probe(m.dimension(), 3, 0);
        const State v = random_probe(m.dimension(), 3, 1);
        const double ref = oracle::ns_trilinear(8, to_vec(u), to_vec(v), to_vec(v));
        CHECK(std::abs(ref) <= 1e-10 * (1.0 + u.norm() * v.squaredNorm()));
    }
    SUBCASE("single-mode vortex decays without self-interaction") {
        SpectralNSParams p;
        p.max_wavenumber = 4;
        p.reaction_rho = 0.0;
        const ModelSpec m = make_spectral_ns(p);
        State xi = State::Zero(m.dimension());
        xi[6] = 1.0;
        xi[7] = -0.5;
        CHECK(m.bilinear(xi, xi).norm() <= 1e-13);
        const double alpha = m.a_spectrum()[6];
        const TimeGrid g(1.0, 1000);
        const StatePath u = solve_deterministic(m, xi, g);
        const double discrete = std::pow(1.0 + g.dt() * alpha, -static_cast<double>(g.steps));
        CHECK((u.terminal() - discrete * xi).norm() <= 1e-13);
        CHECK((u.terminal() - std::exp(-alpha) * xi).norm() <= 2.0 * g.dt() * alpha * alpha);
    }
}

TEST_CASE("linear OU model") {
    const ModelSpec m = scalar_ou();
    State xi(1);
    xi << 1.0;
    const StatePath u0 = solve_deterministic(m, xi, TimeGrid(1.0, 4096));
    CHECK(u0.terminal()[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-3));

    const CovarianceSpec cov({1.0});
    const TimeGrid g(1.0, 256);
    const std::size_t n = 10000;
    double s2 = 0.0, v2 = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const auto inc = sample_increments(cov, g, replica_seed(21, r));
        const StatePath V = solve_linearized(m, cov, solve_deterministic(m, xi, g), g, inc);
        s2 += V.terminal()[0] * V.terminal()[0];
        v2 += std::pow(V.terminal()[0], 4);
    }
    const double mean = s2 / n;
    const double se = std::sqrt((v2 / n - mean * mean) / n);
    CHECK(std::abs(mean - oracle::ou_variance(1.0)) <= 3.0 * se + 2.0 * g.dt());
}

TEST_CASE("every shipped model passes the verifier suite") {
    ShellParams sp;
    const ModelSpec shell = make_shell_model(sp);
    CHECK(verify_all(shell, CovarianceSpec::power_law(shell.dimension()), 2000, 1).pass());
    SpectralNSParams np;
    const ModelSpec ns = make_spectral_ns(np);
    CHECK(verify_all(ns, CovarianceSpec::power_law(ns.dimension()), 1000, 1).pass());
    const ModelSpec ou = scalar_ou();
    CHECK(verify_all(ou, CovarianceSpec({1.0}), 2000, 1).pass());
}
