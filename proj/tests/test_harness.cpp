#include "hydroscale/harness.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace hydroscale;

namespace {

ExperimentConfig small(ExperimentKind kind) {
    ExperimentConfig c;
    c.experiment = kind;
    c.grid.steps = 128;
    c.replicas = 16;
    c.verify.samples = 200;
    c.modulus.n_list = {2, 3, 4};
    c.convergence.base_steps = 8;
    c.convergence.levels = 3;
    c.convergence.reference_factor = 4;
    return c;
}

std::string tables_text(const ExperimentReport& r) {
    std::string s;
    for (const auto& t : r.tables)
        for (const auto& row : t.rows)
            for (const auto& cell : row) s += cell + ",";
    return s;
}

}  // namespace

TEST_CASE("config round trip") {
    ExperimentConfig c;
    c.experiment = ExperimentKind::Mdp;
    c.model.name = "ns2d";
    c.model.ns.max_wavenumber = 3;
    c.scaling.eps_list = {0.1, 0.01};
    c.thresholds.rate_expected = 1.5;
    const auto back = ExperimentConfig::parse(c.dump());
    CHECK(back == c);
    CHECK(back.dump() == c.dump());
}

TEST_CASE("strict parsing reports the field path") {
    auto error_path = [](const std::string& text) {
        try {
            ExperimentConfig::parse(text);
        } catch (const ConfigError& e) {
            return e.path();
        }
        return std::string("<none>");
    };
    CHECK(error_path(R"({"grid": {"steps": 10, "dt": 0.1}})") == "grid.dt");
    CHECK(error_path(R"({"scaling": {"eps_list": [0.1, -0.01]}})") == "scaling.eps_list[1]");
    CHECK(error_path(R"({"replicas": "many"})") == "replicas");
    CHECK(error_path(R"({"model": {"name": "shell", "params": {"n_shell": 3}}})") == "model.params.n_shell");
    CHECK(error_path(R"({"experiment": "ldp"})") == "experiment");
    CHECK(error_path(R"({"model": {"name": "shell", "params": {"viscosity": -1}}})") == "model.params");
    CHECK(error_path("{not json") == "");
    CHECK(error_path("{}") == "<none>");
}

TEST_CASE("overrides go through the strict parser") {
    ExperimentConfig c;
    c.set("grid.steps=2048");
    CHECK(c.grid.steps == 2048);
    c.set("scaling.eps_list=[0.1,0.01]");
    CHECK(c.scaling.eps_list == std::vector<double>{0.1, 0.01});
    c.set("model.name=ou");
    CHECK(c.model.name == "ou");
    CHECK_THROWS_AS(c.set("grid.nope=1"), ConfigError);
    CHECK_THROWS_AS(c.set("grid.steps=-4"), ConfigError);
    CHECK_THROWS_AS(c.set("no_equals_sign"), ConfigError);
}

TEST_CASE("verify on shell defaults passes") {
    auto c = small(ExperimentKind::Verify);
    const auto r = run(c);
    CHECK(r.pass());
    CHECK_FALSE(r.verdicts.empty());
}

TEST_CASE("clt on OU has zero coupling distance") {
    auto c = small(ExperimentKind::Clt);
    c.model.name = "ou";
    c.covariance.name = "explicit";
    c.covariance.q = {1.0};
    const auto r = run(c);
    REQUIRE_FALSE(r.verdicts.empty());
    CHECK(r.verdicts.front().name == "coupling");
    CHECK(r.verdicts.front().pass);
}

TEST_CASE("reports are reproducible from the echoed config at any worker count") {
    for (auto kind : {ExperimentKind::Verify, ExperimentKind::Clt, ExperimentKind::Mdp, ExperimentKind::Rate,
                      ExperimentKind::Controlled, ExperimentKind::Modulus, ExperimentKind::Convergence}) {
        auto c = small(kind);
        if (kind == ExperimentKind::Mdp) c.scaling.eps_list = {1e-1, 1e-2};
        CAPTURE(to_string(kind));
        RunOptions one;
        one.jobs = 1;
        RunOptions three;
        three.jobs = 3;
        const auto a = run(c, one);
        const auto echoed = ExperimentConfig::from_json(a.config);
        const auto b = run(echoed, three);
        CHECK(a.to_json() == b.to_json());
        CHECK(tables_text(a) == tables_text(b));
    }
}

TEST_CASE("run directories and report files") {
    const auto root = std::filesystem::temp_directory_path() / "hydroscale_harness_test";
    std::filesystem::remove_all(root);
    auto c = small(ExperimentKind::Rate);
    c.model.name = "ou";
    c.covariance.name = "explicit";
    c.covariance.q = {1.0};
    c.initial.preset = "zero";
    const auto r = run(c);
    const auto d1 = make_run_directory(root, "rate");
    write_report(r, d1, 0.5, 2);
    const auto d2 = make_run_directory(root, "rate");
    CHECK(d1 != d2);
    write_report(r, d2, 0.7, 1);
    for (const char* f : {"config.json", "report.json", "rate.csv", "timing.json"})
        CHECK(std::filesystem::exists(d2 / f));
    CHECK(std::filesystem::read_symlink(root / "rate" / "latest") == d2.filename());
    auto slurp = [](const std::filesystem::path& p) {
        std::ifstream is(p);
        return std::string(std::istreambuf_iterator<char>(is), {});
    };
    CHECK(slurp(d1 / "report.json") == slurp(d2 / "report.json"));
    CHECK(slurp(d1 / "rate.csv").rfind("beta,I_hat", 0) == 0);
    const auto reloaded = ExperimentConfig::load(d2 / "config.json");
    CHECK(reloaded == c);
    std::filesystem::remove_all(root);
}
