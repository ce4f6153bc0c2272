#include "helpers.hpp"
#include "oracles.hpp"

#include "hydroscale/rng.hpp"
#include "hydroscale/stats.hpp"

#include <doctest.h>

#include <set>

using namespace hydroscale;
using namespace testing_support;

TEST_CASE("philox matches the published known-answer vectors") {
    for (const auto& v : oracle::kPhiloxVectors) CHECK(philox4x32(v.counter, v.key) == v.expected);
}

TEST_CASE("replica keys are injective and deterministic") {
    std::set<std::pair<std::uint64_t, std::uint64_t>> seen;
    for (std::uint64_t s : {0ull, 1ull, 7ull})
        for (std::uint64_t r = 0; r < 100; ++r) {
            const RngKey k = replica_seed(s, r);
            CHECK(seen.insert({k.seed, k.replica}).second);
            CHECK(k == replica_seed(s, r));
        }
    // integer-only derivation: the key is the pair itself
    static_assert(replica_seed(3, 5).seed == 3 && replica_seed(3, 5).replica == 5);
    CHECK(normal_pair(replica_seed(1, 0), 0, 0) != normal_pair(replica_seed(1, 1), 0, 0));
}

TEST_CASE("uniform draws stay inside the open unit interval") {
    CHECK(to_unit_open(0, 0) > 0.0);
    CHECK(to_unit_open(0xffffffffu, 0xffffffffu) < 1.0);
}

TEST_CASE("norm triple") {
    LinearOUParams p;
    p.dimension = 2;
    p.drift = {1.0, 4.0};
    p.noise = {1.0, 1.0};
    const ModelSpec m = make_linear_ou(p);
    const auto z = norms(m, State::Zero(2));
    CHECK(z.h == 0.0);
    CHECK(z.v == 0.0);
    CHECK(z.interp == 0.0);
    State v(2);
    v << 1.0, 1.0;
    const auto t = norms(m, v);
    CHECK(t.h == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK(t.v == doctest::Approx(std::sqrt(5.0)).epsilon(1e-15));
    CHECK_THROWS_AS(norms(m, State::Zero(3)), InvalidInput);

    LinearOUParams id;
    id.dimension = 3;
    id.drift = {1.0, 1.0, 1.0};
    id.noise = {1.0, 1.0, 1.0};
    const ModelSpec mi = make_linear_ou(id);
    State e = State::Zero(3);
    e[0] = 1.0;
    const auto n = norms(mi, e);
    CHECK(n.h == 1.0);
    CHECK(n.v == 1.0);
    CHECK(n.interp == mi.interp_norm(e));
}

TEST_CASE("antisymmetry verifier") {
    SUBCASE("shell passes at 1e-12") {
        ShellParams p;
        p.n_shells = 16;
        const auto r = verify_antisymmetry(make_shell_model(p), 1000, 3, 1e-12);
        CHECK(r.pass());
        CHECK(r.find("antisymmetry")->max_residual <= 1e-12);
    }
    SUBCASE("zero bilinear term gives exactly zero residual") {
        const auto r = verify_antisymmetry(scalar_ou(), 1000, 3);
        CHECK(r.find("antisymmetry")->max_residual == 0.0);
    }
    SUBCASE("broken coefficients fail and match the brute-force residual") {
        ShellParams p;
        p.n_shells = 6;
        p.a = 1.0;
        p.b = -0.3;
        p.c = -0.5;
        CHECK_THROWS_AS(make_shell_model(p), InvalidInput);
        std::vector<double> k;
        for (int i = 0; i < p.n_shells; ++i) k.push_back(p.k0 * std::pow(p.shell_ratio, i));
        Eigen::VectorXd alpha(2 * p.n_shells);
        for (int i = 0; i < p.n_shells; ++i) alpha[2 * i] = alpha[2 * i + 1] = p.viscosity * k[i] * k[i];
        DiagonalNoise noise;
        noise.gains = Eigen::VectorXd::Ones(2 * p.n_shells);
        const ModelSpec m("broken-shell", alpha, std::make_shared<ShellBilinear>(k, p.a, p.b, p.c, p.viscosity),
                          ReactionTerm{}, noise);
        CHECK_FALSE(verify_antisymmetry(m, 200, 3).pass());
        const State u = random_probe(m.dimension(), 11, 0);
        const State v = random_probe(m.dimension(), 11, 1);
        const double expected = oracle::shell_trilinear(to_vec(u), to_vec(v), to_vec(v), p.k0, p.shell_ratio, p.a,
                                                        p.b, p.c);
        CHECK(std::abs(expected) > 1e-3);
        CHECK(m.trilinear(u, v, v) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("interpolation verifier") {
    SUBCASE("geometric-mean norm gives a0 = 1") {
        ShellParams p;
        const auto r = verify_interpolation(make_shell_model(p), 2000, 5);
        CHECK(r.pass());
        CHECK(r.find("interpolation_a0")->empirical_constant == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("discrete L4 norm on the 2D model gives a finite constant") {
        SpectralNSParams p;
        p.max_wavenumber = 4;
        const auto r = verify_interpolation(make_spectral_ns(p), 2000, 5);
        CHECK(r.pass());
        const double a0 = r.find("interpolation_a0")->empirical_constant;
        CHECK(std::isfinite(a0));
        CHECK(a0 > 0.0);
    }
    SUBCASE("scale invariance of the ratio") {
        SpectralNSParams p;
        p.max_wavenumber = 3;
        const ModelSpec m = make_spectral_ns(p);
        const State v = random_probe(m.dimension(), 2, 0);
        auto ratio = [&](const State& x) {
            const auto n = norms(m, x);
            return n.interp * n.interp / (n.h * n.v);
        };
        CHECK(ratio(v) == doctest::Approx(ratio(2.0 * v)).epsilon(1e-13));
    }
}

TEST_CASE("bilinear bound verifier") {
    SUBCASE("zero bilinear term") {
        const auto r = verify_bilinear_bound(scalar_ou(), {0.25}, 500, 1);
        CHECK(r.pass());
        CHECK(r.find("bilinear_eta[0.25]")->empirical_constant == 0.0);
    }
    SUBCASE("shell constant is stable across seeds") {
        ShellParams p;
        const ModelSpec m = make_shell_model(p);
        const auto r1 = verify_bilinear_bound(m, {0.25}, 10000, 1);
        const auto r2 = verify_bilinear_bound(m, {0.25}, 10000, 2);
        CHECK(r1.pass());
        CHECK(r2.pass());
        const double c1 = r1.find("bilinear_eta[0.25]")->empirical_constant;
        const double c2 = r2.find("bilinear_eta[0.25]")->empirical_constant;
        CHECK(std::isfinite(c1));
        CHECK(std::abs(c1 / c2 - 1.0) <= 0.2);
    }
    SUBCASE("difference bound vanishes for equal arguments") {
        ShellParams p;
        const ModelSpec m = make_shell_model(p);
        const State u = random_probe(m.dimension(), 4, 0);
        const State d = m.bilinear(u, u) - m.bilinear(u, u);
        CHECK(d.norm() == 0.0);
        CHECK(m.bilinear(State::Zero(m.dimension()), u).norm() == 0.0);
    }
}

TEST_CASE("noise and reaction verifier") {
    SUBCASE("constant noise and linear reaction") {
        LinearOUParams p;
        p.dimension = 2;
        p.drift = {1.0, 2.0};
        p.noise = {1.0, 0.5};
        p.reaction = Eigen::MatrixXd{{0.1, 0.2}, {-0.2, 0.3}};
        const ModelSpec m = make_linear_ou(p);
        const auto r = verify_noise_and_reaction(m, CovarianceSpec({1.0, 0.25}), 2000, 3);
        CHECK(r.pass());
        CHECK(r.find("noise_lipschitz_L1")->max_residual == 0.0);
        CHECK(r.find("noise_time_holder")->max_residual == 0.0);
        CHECK(r.find("reaction_derivative_lipschitz")->max_residual == 0.0);
        CHECK(r.find("reaction_derivative_consistency")->pass);
    }
    SUBCASE("multiplicative modulated shell noise stays within the declared constants") {
        ShellParams p;
        p.noise_theta = 0.3;
        p.noise_time_modulated = true;
        p.reaction_gamma = 0.5;
        const ModelSpec m = make_shell_model(p);
        const auto r = verify_noise_and_reaction(m, CovarianceSpec::power_law(m.dimension()), 10000, 9);
        CHECK(r.pass());
        for (const char* name : {"noise_growth_K0", "noise_lipschitz_L1"}) {
            const auto* c = r.find(name);
            REQUIRE(c != nullptr);
            REQUIRE(c->declared_constant);
            CHECK(c->empirical_constant <= 1.1 * *c->declared_constant);
        }
    }
}

TEST_CASE("statistics helpers") {
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
    const auto ms = mean_se(x);
    CHECK(ms.mean == 2.5);
    CHECK(ms.se == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
    const std::vector<double> y{3.0, 5.0, 7.0, 9.0};
    const auto f = linear_fit(x, y);
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(1.0));
    const std::vector<double> xs{0.5, 0.25, 0.125};
    const std::vector<double> ys{1.0 + 0.5 + 0.25, 1.0 + 0.25 + 0.0625, 1.0 + 0.125 + 0.015625};
    CHECK(extrapolate_to_zero(xs, ys) == doctest::Approx(1.0).epsilon(1e-14));
    const std::vector<double> big(1001, 0.1);
    CHECK(pairwise_sum(big) == doctest::Approx(100.1).epsilon(1e-14));
}
