#include "hydroscale/harness.hpp"
#include "hydroscale/integrators.hpp"
#include "hydroscale/rng.hpp"
#include "hydroscale/verifier.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace hydroscale;

namespace {

ExperimentConfig parse_with_model(const std::string& model_json) {
    return ExperimentConfig::from_json({{"model", nlohmann::ordered_json::parse(model_json)}});
}

Eigen::MatrixXd to_matrix(const StatePath& p) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(p.nodes()), p.states.front().size());
    for (std::size_t k = 0; k < p.nodes(); ++k) m.row(static_cast<Eigen::Index>(k)) = p.states[k].transpose();
    return m;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Compiled core of hydroscale";

    auto config_error = py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    (void)config_error;
    py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
    py::register_exception<IntegrationError>(m, "IntegrationError", PyExc_ArithmeticError);
    py::register_exception<ExperimentFailure>(m, "ExperimentFailure", PyExc_RuntimeError);

    py::class_<ModelSpec>(m, "Model")
        .def_property_readonly("name", &ModelSpec::name)
        .def_property_readonly("dimension", &ModelSpec::dimension)
        .def_property_readonly("a_spectrum", &ModelSpec::a_spectrum)
        .def("bilinear", [](const ModelSpec& s, const State& u, const State& v) { return State(s.bilinear(u, v)); })
        .def("trilinear", &ModelSpec::trilinear)
        .def("norms", [](const ModelSpec& s, const State& u) {
            const NormTriple n = norms(s, u);
            return py::make_tuple(n.h, n.v, n.interp);
        });

    m.def(
        "build_model", [](const std::string& model_json) { return parse_with_model(model_json).model.build(); },
        py::arg("model_json"), "Build a model from its JSON config section.");

    m.def(
        "solve_deterministic",
        [](const ModelSpec& model, const State& xi, double T, std::size_t steps) {
            return to_matrix(solve_deterministic(model, xi, TimeGrid(T, steps)));
        },
        py::arg("model"), py::arg("xi"), py::arg("T"), py::arg("steps"),
        "Noise-free path, one row per grid node.", py::call_guard<py::gil_scoped_release>());

    m.def(
        "verify",
        [](const ModelSpec& model, std::vector<double> q, std::size_t n_samples, std::uint64_t seed) {
            return verify_all(model, CovarianceSpec(std::move(q)), n_samples, seed).to_json();
        },
        py::arg("model"), py::arg("q"), py::arg("n_samples"), py::arg("seed"),
        py::call_guard<py::gil_scoped_release>());

    m.def(
        "normalize_config", [](const std::string& text) { return ExperimentConfig::parse(text).dump(); },
        py::arg("text"), "Strict parse; returns the full config with defaults.");

    m.def(
        "override_config",
        [](const std::string& text, const std::string& assignment) {
            ExperimentConfig c = ExperimentConfig::parse(text);
            c.set(assignment);
            return c.dump();
        },
        py::arg("text"), py::arg("assignment"));

    m.def(
        "run",
        [](const std::string& text, unsigned jobs) {
            RunOptions opt;
            opt.jobs = jobs;
            return run(ExperimentConfig::parse(text), opt).to_json();
        },
        py::arg("text"), py::arg("jobs") = 1, py::call_guard<py::gil_scoped_release>());

    m.def("philox4x32", &philox4x32, py::arg("counter"), py::arg("key"));
}
