#include "hydroscale/harness.hpp"

#include "hydroscale/asymptotics.hpp"
#include "hydroscale/io.hpp"
#include "hydroscale/verifier.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

namespace hydroscale {

using json = nlohmann::ordered_json;

std::string to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::Verify: return "verify";
        case ExperimentKind::Clt: return "clt";
        case ExperimentKind::Mdp: return "mdp";
        case ExperimentKind::Rate: return "rate";
        case ExperimentKind::Controlled: return "controlled";
        case ExperimentKind::Modulus: return "modulus";
        case ExperimentKind::Convergence: return "convergence";
    }
    return "?";
}

ExperimentKind parse_kind(const std::string& s) {
    for (auto k : {ExperimentKind::Verify, ExperimentKind::Clt, ExperimentKind::Mdp, ExperimentKind::Rate,
                   ExperimentKind::Controlled, ExperimentKind::Modulus, ExperimentKind::Convergence})
        if (to_string(k) == s) return k;
    throw ConfigError("experiment", "unknown experiment kind '" + s + "'");
}

// ---------------------------------------------------------------------------
// Strict JSON reading

namespace {

std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_, "expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    template <class T>
    void get(const std::string& key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        out = convert<T>(j_.at(key), join(path_, key));
    }

    Reader sub(const std::string& key) {
        seen_.insert(key);
        static const json empty = json::object();
        return Reader(j_.contains(key) ? j_.at(key) : empty, join(path_, key));
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(join(path_, it.key()), "unknown key");
    }

    template <class T>
    static T convert(const json& v, const std::string& path) {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(path, "expected a boolean");
            return v.get<bool>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(path, "expected a string");
            return v.get<std::string>();
        } else if constexpr (std::is_same_v<T, double>) {
            if (!v.is_number()) throw ConfigError(path, "expected a number");
            const double d = v.get<double>();
            if (!std::isfinite(d)) throw ConfigError(path, "expected a finite number");
            return d;
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number()) throw ConfigError(path, "expected an integer");
            if (v.is_number_float()) {
                const double d = v.get<double>();
                if (d != std::floor(d)) throw ConfigError(path, "expected an integer");
            }
            if constexpr (std::is_unsigned_v<T>) {
                if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)
                    throw ConfigError(path, "expected a non-negative integer");
                if (v.is_number_float() && v.get<double>() < 0) throw ConfigError(path, "expected a non-negative integer");
            }
            return v.get<T>();
        } else if constexpr (std::is_same_v<T, std::optional<double>>) {
            if (v.is_null()) return std::nullopt;
            return convert<double>(v, path);
        } else {
            // std::vector<...>
            if (!v.is_array()) throw ConfigError(path, "expected an array");
            T out;
            for (std::size_t i = 0; i < v.size(); ++i)
                out.push_back(convert<typename T::value_type>(v[i], path + "[" + std::to_string(i) + "]"));
            return out;
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

json shell_json(const ShellParams& p) {
    json j;
    j["n_shells"] = p.n_shells;
    j["k0"] = p.k0;
    j["shell_ratio"] = p.shell_ratio;
    j["viscosity"] = p.viscosity;
    j["a"] = p.a;
    j["b"] = p.b;
    j["c"] = p.c;
    j["noise_gains"] = p.noise_gains;
    j["noise_theta"] = p.noise_theta;
    j["noise_time_modulated"] = p.noise_time_modulated;
    j["reaction_rho"] = p.reaction_rho;
    j["reaction_gamma"] = p.reaction_gamma;
    return j;
}

void read_shell(Reader r, ShellParams& p) {
    r.get("n_shells", p.n_shells);
    r.get("k0", p.k0);
    r.get("shell_ratio", p.shell_ratio);
    r.get("viscosity", p.viscosity);
    r.get("a", p.a);
    r.get("b", p.b);
    r.get("c", p.c);
    r.get("noise_gains", p.noise_gains);
    r.get("noise_theta", p.noise_theta);
    r.get("noise_time_modulated", p.noise_time_modulated);
    r.get("reaction_rho", p.reaction_rho);
    r.get("reaction_gamma", p.reaction_gamma);
    r.finish();
}

json ns_json(const SpectralNSParams& p) {
    json j;
    j["max_wavenumber"] = p.max_wavenumber;
    j["viscosity"] = p.viscosity;
    j["noise_gains"] = p.noise_gains;
    j["noise_theta"] = p.noise_theta;
    j["noise_time_modulated"] = p.noise_time_modulated;
    j["reaction_rho"] = p.reaction_rho;
    j["reaction_gamma"] = p.reaction_gamma;
    return j;
}

void read_ns(Reader r, SpectralNSParams& p) {
    r.get("max_wavenumber", p.max_wavenumber);
    r.get("viscosity", p.viscosity);
    r.get("noise_gains", p.noise_gains);
    r.get("noise_theta", p.noise_theta);
    r.get("noise_time_modulated", p.noise_time_modulated);
    r.get("reaction_rho", p.reaction_rho);
    r.get("reaction_gamma", p.reaction_gamma);
    r.finish();
}

json ou_json(const OUConfig& p) {
    json j;
    j["drift"] = p.drift;
    j["noise"] = p.noise;
    j["reaction"] = p.reaction;
    return j;
}

void read_ou(Reader r, OUConfig& p) {
    r.get("drift", p.drift);
    r.get("noise", p.noise);
    r.get("reaction", p.reaction);
    r.finish();
}

}  // namespace

ModelSpec ModelConfig::build() const {
    if (name == "shell") return make_shell_model(shell);
    if (name == "ns2d") return make_spectral_ns(ns);
    if (name == "ou") {
        LinearOUParams p;
        p.dimension = static_cast<int>(ou.drift.size());
        p.drift = ou.drift;
        p.noise = ou.noise;
        if (!ou.reaction.empty()) {
            const auto n = static_cast<Eigen::Index>(ou.reaction.size());
            p.reaction.resize(n, n);
            for (Eigen::Index i = 0; i < n; ++i) {
                require(ou.reaction[static_cast<std::size_t>(i)].size() == static_cast<std::size_t>(n),
                        "reaction matrix must be square");
                for (Eigen::Index k = 0; k < n; ++k)
                    p.reaction(i, k) = ou.reaction[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
            }
        }
        return make_linear_ou(p);
    }
    throw ConfigError("model.name", "unknown model '" + name + "' (expected shell, ns2d or ou)");
}

bool ModelConfig::operator==(const ModelConfig& o) const {
    if (name != o.name) return false;
    if (name == "shell") return shell_json(shell) == shell_json(o.shell);
    if (name == "ns2d") return ns_json(ns) == ns_json(o.ns);
    return ou == o.ou;
}

CovarianceSpec CovarianceConfig::build(Eigen::Index dimension) const {
    if (name == "power_law") {
        const std::size_t m = modes == 0 ? static_cast<std::size_t>(dimension) : modes;
        return CovarianceSpec::power_law(m, exponent, scale);
    }
    if (name == "explicit") return CovarianceSpec(q);
    throw ConfigError("covariance.name", "unknown covariance '" + name + "' (expected power_law or explicit)");
}

State InitialConfig::build(Eigen::Index dimension) const {
    if (preset == "zero") return State::Zero(dimension);
    if (preset == "single-mode") {
        if (static_cast<Eigen::Index>(mode) >= dimension) throw ConfigError("initial.mode", "mode out of range");
        State x = State::Zero(dimension);
        x[static_cast<Eigen::Index>(mode)] = amplitude;
        return x;
    }
    if (preset == "random") {
        State x = random_probe(dimension, seed, 0);
        return x * (amplitude / x.norm());
    }
    if (preset == "explicit") {
        if (static_cast<Eigen::Index>(values.size()) != dimension)
            throw ConfigError("initial.values", "expected " + std::to_string(dimension) + " entries");
        return Eigen::Map<const State>(values.data(), dimension);
    }
    throw ConfigError("initial.preset", "unknown preset '" + preset + "' (expected zero, single-mode, random, explicit)");
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c;
    Reader r(j, "");
    std::string kind = to_string(c.experiment);
    r.get("experiment", kind);
    c.experiment = parse_kind(kind);
    {
        Reader m = r.sub("model");
        m.get("name", c.model.name);
        if (c.model.name != "shell" && c.model.name != "ns2d" && c.model.name != "ou")
            throw ConfigError("model.name", "unknown model '" + c.model.name + "' (expected shell, ns2d or ou)");
        Reader p = m.sub("params");
        if (c.model.name == "shell") read_shell(p, c.model.shell);
        if (c.model.name == "ns2d") read_ns(p, c.model.ns);
        if (c.model.name == "ou") read_ou(p, c.model.ou);
        m.finish();
    }
    {
        Reader s = r.sub("covariance");
        s.get("name", c.covariance.name);
        s.get("modes", c.covariance.modes);
        s.get("exponent", c.covariance.exponent);
        s.get("scale", c.covariance.scale);
        s.get("q", c.covariance.q);
        s.finish();
    }
    {
        Reader s = r.sub("grid");
        s.get("T", c.grid.T);
        s.get("steps", c.grid.steps);
        s.finish();
    }
    {
        Reader s = r.sub("initial");
        s.get("preset", c.initial.preset);
        s.get("mode", c.initial.mode);
        s.get("amplitude", c.initial.amplitude);
        s.get("seed", c.initial.seed);
        s.get("values", c.initial.values);
        s.finish();
    }
    {
        Reader s = r.sub("scaling");
        s.get("a", c.scaling.a);
        s.get("eps_list", c.scaling.eps_list);
        s.finish();
    }
    r.get("replicas", c.replicas);
    r.get("seed", c.seed);
    {
        Reader s = r.sub("control");
        s.get("mode", c.control.mode);
        s.get("value", c.control.value);
        s.get("N", c.control.N);
        s.finish();
    }
    {
        Reader s = r.sub("functional");
        s.get("mode", c.functional.mode);
        s.get("threshold", c.functional.threshold);
        s.get("importance", c.functional.importance);
        s.finish();
    }
    {
        Reader s = r.sub("verify");
        s.get("samples", c.verify.samples);
        s.get("etas", c.verify.etas);
        s.finish();
    }
    {
        Reader s = r.sub("rate");
        s.get("betas", c.rate.betas);
        s.get("tol", c.rate.tol);
        s.get("max_iter", c.rate.max_iter);
        s.finish();
    }
    {
        Reader s = r.sub("modulus");
        s.get("n_list", c.modulus.n_list);
        s.get("epsilon", c.modulus.epsilon);
        s.get("clip", c.modulus.clip);
        s.finish();
    }
    {
        Reader s = r.sub("convergence");
        s.get("solver", c.convergence.solver);
        s.get("reference", c.convergence.reference);
        s.get("base_steps", c.convergence.base_steps);
        s.get("levels", c.convergence.levels);
        s.get("reference_factor", c.convergence.reference_factor);
        s.get("epsilon", c.convergence.epsilon);
        s.finish();
    }
    {
        Reader s = r.sub("thresholds");
        auto& t = c.thresholds;
        s.get("slack", t.slack);
        s.get("antisymmetry_tol", t.antisymmetry_tol);
        s.get("min_coupling_slope", t.min_coupling_slope);
        s.get("zero_distance", t.zero_distance);
        s.get("first_order_slope", t.first_order_slope);
        s.get("first_order_tolerance", t.first_order_tolerance);
        s.get("mdp_tolerance", t.mdp_tolerance);
        s.get("min_ess", t.min_ess);
        s.get("rate_expected", t.rate_expected);
        s.get("rate_tolerance", t.rate_tolerance);
        s.get("max_final_ratio", t.max_final_ratio);
        s.get("min_modulus_exponent", t.min_modulus_exponent);
        s.get("min_order", t.min_order);
        s.finish();
    }
    r.finish();
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
    return from_json(j);
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& file) {
    std::ifstream is(file);
    if (!is) throw ConfigError("", "cannot read config file " + file.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse(ss.str());
}

json ExperimentConfig::to_json() const {
    json j;
    j["experiment"] = to_string(experiment);
    json m;
    m["name"] = model.name;
    if (model.name == "shell") m["params"] = shell_json(model.shell);
    else if (model.name == "ns2d") m["params"] = ns_json(model.ns);
    else m["params"] = ou_json(model.ou);
    j["model"] = m;
    j["covariance"] = {{"name", covariance.name},
                       {"modes", covariance.modes},
                       {"exponent", covariance.exponent},
                       {"scale", covariance.scale},
                       {"q", covariance.q}};
    j["grid"] = {{"T", grid.T}, {"steps", grid.steps}};
    j["initial"] = {{"preset", initial.preset},
                    {"mode", initial.mode},
                    {"amplitude", initial.amplitude},
                    {"seed", initial.seed},
                    {"values", initial.values}};
    j["scaling"] = {{"a", scaling.a}, {"eps_list", scaling.eps_list}};
    j["replicas"] = replicas;
    j["seed"] = seed;
    j["control"] = {{"mode", control.mode}, {"value", control.value}, {"N", control.N}};
    j["functional"] = {
        {"mode", functional.mode}, {"threshold", functional.threshold}, {"importance", functional.importance}};
    j["verify"] = {{"samples", verify.samples}, {"etas", verify.etas}};
    j["rate"] = {{"betas", rate.betas}, {"tol", rate.tol}, {"max_iter", rate.max_iter}};
    j["modulus"] = {{"n_list", modulus.n_list}, {"epsilon", modulus.epsilon}, {"clip", modulus.clip}};
    j["convergence"] = {{"solver", convergence.solver},
                        {"reference", convergence.reference},
                        {"base_steps", convergence.base_steps},
                        {"levels", convergence.levels},
                        {"reference_factor", convergence.reference_factor},
                        {"epsilon", convergence.epsilon}};
    const auto& t = thresholds;
    json th;
    th["slack"] = t.slack;
    th["antisymmetry_tol"] = t.antisymmetry_tol;
    th["min_coupling_slope"] = t.min_coupling_slope;
    th["zero_distance"] = t.zero_distance;
    th["first_order_slope"] = t.first_order_slope;
    th["first_order_tolerance"] = t.first_order_tolerance;
    th["mdp_tolerance"] = t.mdp_tolerance;
    th["min_ess"] = t.min_ess;
    th["rate_expected"] = t.rate_expected ? json(*t.rate_expected) : json(nullptr);
    th["rate_tolerance"] = t.rate_tolerance;
    th["max_final_ratio"] = t.max_final_ratio;
    th["min_modulus_exponent"] = t.min_modulus_exponent;
    th["min_order"] = t.min_order;
    j["thresholds"] = th;
    return j;
}

std::string ExperimentConfig::dump() const { return to_json().dump(2); }

bool ExperimentConfig::operator==(const ExperimentConfig& o) const { return to_json() == o.to_json(); }

void ExperimentConfig::set(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("", "--set expects path=value, got '" + assignment + "'");
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    json doc = to_json();
    json* node = &doc;
    std::string walked;
    std::size_t start = 0;
    for (;;) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        walked = join(walked, key);
        if (!node->is_object() || !node->contains(key)) throw ConfigError(walked, "unknown key");
        node = &(*node)[key];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    *node = value;
    // Switching model name resets its parameter block to the new model's defaults.
    if (path == "model.name") doc["model"].erase("params");
    *this = from_json(doc);
}

void ExperimentConfig::validate() const {
    if (grid.T <= 0.0) throw ConfigError("grid.T", "must be > 0");
    if (grid.steps < 1) throw ConfigError("grid.steps", "must be >= 1");
    if (replicas < 2) throw ConfigError("replicas", "must be >= 2");
    std::optional<ModelSpec> built;
    try {
        built.emplace(model.build());
    } catch (const ConfigError&) {
        throw;
    } catch (const InvalidInput& e) {
        throw ConfigError("model.params", e.what());
    }
    const ModelSpec& m = *built;
    CovarianceSpec cov;
    try {
        cov = covariance.build(m.dimension());
    } catch (const ConfigError&) {
        throw;
    } catch (const InvalidInput& e) {
        throw ConfigError("covariance", e.what());
    }
    if (static_cast<Eigen::Index>(cov.modes()) > m.dimension())
        throw ConfigError("covariance.modes", "exceeds the model dimension " + std::to_string(m.dimension()));
    if (cov.modes() == 0) throw ConfigError("covariance", "needs at least one mode");
    (void)initial.build(m.dimension());

    const auto& eps = scaling.eps_list;
    if (eps.empty()) throw ConfigError("scaling.eps_list", "must not be empty");
    for (std::size_t i = 0; i < eps.size(); ++i) {
        const std::string p = "scaling.eps_list[" + std::to_string(i) + "]";
        if (!(eps[i] > 0.0 && eps[i] <= 1.0)) throw ConfigError(p, "must lie in (0, 1]");
        if (i > 0 && !(eps[i] < eps[i - 1])) throw ConfigError(p, "eps list must be strictly decreasing");
    }
    if (!(scaling.a > 0.0 && scaling.a < 0.5)) throw ConfigError("scaling.a", "must lie in (0, 1/2)");
    const bool moderate = experiment == ExperimentKind::Mdp || experiment == ExperimentKind::Controlled;
    if (moderate)
        for (std::size_t i = 0; i < eps.size(); ++i)
            if (!(eps[i] < 1.0))
                throw ConfigError("scaling.eps_list[" + std::to_string(i) + "]",
                                  "moderate scaling needs eps < 1 so that sqrt(eps) lambda < 1");

    if (control.mode >= cov.modes()) throw ConfigError("control.mode", "outside the noise modes");
    if (cov.q[control.mode] == 0.0 && control.value != 0.0)
        throw ConfigError("control.mode", "control on a mode with q = 0");
    if (!(control.N > 0.0)) throw ConfigError("control.N", "must be > 0");
    if (static_cast<Eigen::Index>(functional.mode) >= m.dimension())
        throw ConfigError("functional.mode", "outside the model dimension");
    if (verify.samples < 1) throw ConfigError("verify.samples", "must be >= 1");
    if (verify.etas.empty()) throw ConfigError("verify.etas", "must not be empty");
    for (std::size_t i = 0; i < verify.etas.size(); ++i)
        if (!(verify.etas[i] > 0.0)) throw ConfigError("verify.etas[" + std::to_string(i) + "]", "must be > 0");
    if (rate.betas.empty()) throw ConfigError("rate.betas", "must not be empty");
    for (std::size_t i = 0; i < rate.betas.size(); ++i) {
        if (!(rate.betas[i] > 0.0)) throw ConfigError("rate.betas[" + std::to_string(i) + "]", "must be > 0");
        for (std::size_t k = 0; k < i; ++k)
            if (rate.betas[k] == rate.betas[i])
                throw ConfigError("rate.betas[" + std::to_string(i) + "]", "duplicate beta");
    }
    if (!(rate.tol > 0.0)) throw ConfigError("rate.tol", "must be > 0");
    if (rate.max_iter < 1) throw ConfigError("rate.max_iter", "must be >= 1");

    if (modulus.n_list.empty()) throw ConfigError("modulus.n_list", "must not be empty");
    const double dt = grid.T / static_cast<double>(grid.steps);
    for (std::size_t i = 0; i < modulus.n_list.size(); ++i) {
        const std::string p = "modulus.n_list[" + std::to_string(i) + "]";
        if (modulus.n_list[i] < 0) throw ConfigError(p, "must be >= 0");
        if (i > 0 && modulus.n_list[i] <= modulus.n_list[i - 1]) throw ConfigError(p, "must be increasing");
        if (experiment == ExperimentKind::Modulus && std::ldexp(1.0, -modulus.n_list[i]) < dt * (1.0 - 1e-12))
            throw ConfigError(p, "shift 2^-n is below the time step");
    }
    if (!(modulus.epsilon > 0.0 && modulus.epsilon < 1.0)) throw ConfigError("modulus.epsilon", "must lie in (0, 1)");
    if (!(modulus.clip > 0.0)) throw ConfigError("modulus.clip", "must be > 0");

    if (convergence.solver != "sde" && convergence.solver != "deterministic")
        throw ConfigError("convergence.solver", "expected sde or deterministic");
    if (convergence.reference != "finest" && convergence.reference != "exact")
        throw ConfigError("convergence.reference", "expected finest or exact");
    if (convergence.levels < 3) throw ConfigError("convergence.levels", "need at least 3 refinement levels");
    if (convergence.base_steps < 1) throw ConfigError("convergence.base_steps", "must be >= 1");
    if (convergence.reference_factor < 2) throw ConfigError("convergence.reference_factor", "must be >= 2");
    if (convergence.epsilon < 0.0) throw ConfigError("convergence.epsilon", "must be >= 0");
    if (experiment == ExperimentKind::Convergence && convergence.reference == "exact") {
        const bool additive = m.bilinear_term().identically_zero() && m.reaction_term().is_zero() &&
                              m.noise().theta == 0.0 && !m.noise().time_modulated;
        if (!additive)
            throw ConfigError("convergence.reference", "the exact reference needs B = 0, R = 0 and additive noise");
    }

    const auto& t = thresholds;
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0)) throw ConfigError(std::string("thresholds.") + name, "must be > 0");
    };
    positive(t.slack, "slack");
    positive(t.antisymmetry_tol, "antisymmetry_tol");
    positive(t.zero_distance, "zero_distance");
    positive(t.first_order_tolerance, "first_order_tolerance");
    positive(t.mdp_tolerance, "mdp_tolerance");
    positive(t.rate_tolerance, "rate_tolerance");
    positive(t.max_final_ratio, "max_final_ratio");
    if (t.min_ess < 0.0) throw ConfigError("thresholds.min_ess", "must be >= 0");
}

// ---------------------------------------------------------------------------
// Reports

void Table::add(const std::vector<double>& row) {
    std::vector<std::string> cells;
    cells.reserve(row.size());
    for (double v : row) cells.push_back(format_double(v));
    rows.push_back(std::move(cells));
}

bool ExperimentReport::pass() const {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

std::string ExperimentReport::to_json() const {
    json j;
    j["experiment"] = experiment;
    j["provenance"] = {{"version", kVersion}, {"seed", config.value("seed", std::uint64_t{0})}};
    j["config"] = config;
    j["summary"] = summary;
    json v = json::array();
    for (const auto& x : verdicts) v.push_back({{"name", x.name}, {"pass", x.pass}, {"detail", x.detail}});
    j["verdicts"] = v;
    j["pass"] = pass();
    json t = json::array();
    for (const auto& x : tables) t.push_back(x.name + ".csv");
    j["tables"] = t;
    return j.dump(2);
}

namespace {

json fit_json(const LinearFit& f) {
    return {{"slope", f.slope},
            {"stderr", f.slope_se},
            {"ci95", {f.slope - 1.96 * f.slope_se, f.slope + 1.96 * f.slope_se}},
            {"intercept", f.intercept}};
}

std::string fmt(double x) { return format_double(x); }

std::string label(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

Table error_table(const std::string& name, const std::vector<ErrorStatistic>& stats) {
    Table t{name,
            {"epsilon", "lambda", "replicas", "excluded", "D", "D_se", "sup_mean", "sup_se", "energy_mean",
             "energy_se"},
            {}};
    for (const auto& s : stats)
        t.add({s.epsilon, s.lambda, static_cast<double>(s.replicas), static_cast<double>(s.excluded), s.D(),
               s.total.se, s.sup_sq.mean, s.sup_sq.se, s.energy.mean, s.energy.se});
    return t;
}

State unit_probe(Eigen::Index n, std::size_t mode) {
    State e = State::Zero(n);
    e[static_cast<Eigen::Index>(mode)] = 1.0;
    return e;
}

ControlPath make_control(const ExperimentConfig& c, const TimeGrid& grid, const CovarianceSpec& cov) {
    ControlPath h = ControlPath::constant(grid, cov.modes(), c.control.mode, c.control.value);
    restrict_to_support(h, cov);
    return clip_to_ball(h, c.control.N);
}

struct Context {
    const ExperimentConfig& cfg;
    const RunOptions& opt;
    ModelSpec model;
    CovarianceSpec cov;
    State xi;
    TimeGrid grid;
};

void dump_path(const Context& ctx, const std::string& stem, const StatePath& path) {
    if (!ctx.opt.dump_dir) return;
    std::filesystem::create_directories(*ctx.opt.dump_dir);
    write_path(*ctx.opt.dump_dir / stem, path);
}

std::size_t dump_count(const Context& ctx) {
    return ctx.opt.dump_dir ? std::min(ctx.opt.dump_limit, ctx.cfg.replicas) : 0;
}

std::string stem(const char* what, std::size_t i, std::size_t r) {
    return std::string(what) + "_eps" + std::to_string(i) + "_r" + std::to_string(r);
}

void run_verify(Context& ctx, ExperimentReport& rep) {
    const auto& c = ctx.cfg;
    VerifierReport v = verify_antisymmetry(ctx.model, c.verify.samples, c.seed, c.thresholds.antisymmetry_tol);
    v.slack = c.thresholds.slack;
    v.append(verify_interpolation(ctx.model, c.verify.samples, c.seed, c.thresholds.slack));
    v.append(verify_bilinear_bound(ctx.model, c.verify.etas, c.verify.samples, c.seed, c.thresholds.slack));
    v.append(verify_noise_and_reaction(ctx.model, ctx.cov, c.verify.samples, c.seed, c.thresholds.slack));
    rep.summary["verifier"] = json::parse(v.to_json());
    rep.summary["interp_norm"] = ctx.model.bilinear_term().interp_description();
    Table t{"conditions", {"condition", "samples", "max_residual", "empirical_constant", "declared_constant", "pass"},
            {}};
    for (const auto& rec : v.conditions) {
        t.rows.push_back({rec.name, std::to_string(rec.samples), fmt(rec.max_residual), fmt(rec.empirical_constant),
                          rec.declared_constant ? fmt(*rec.declared_constant) : "", rec.pass ? "1" : "0"});
        std::string detail = "empirical " + fmt(rec.empirical_constant);
        if (rec.declared_constant) detail += " vs declared " + fmt(*rec.declared_constant);
        rep.verdicts.push_back({rec.name, rec.pass, detail});
    }
    rep.tables.push_back(std::move(t));
}

void run_clt(Context& ctx, ExperimentReport& rep) {
    const auto& c = ctx.cfg;
    const auto r = clt_experiment(ctx.model, ctx.cov, ctx.xi, ctx.grid, c.scaling.eps_list, c.replicas, c.seed,
                                  ctx.opt.jobs);
    rep.tables.push_back(error_table("coupling", r.coupling));
    rep.tables.push_back(error_table("first_order", r.first_order));
    rep.summary["tested_form"] = "same-noise coupling, mean-square path metric sup|.|^2 + int ||.||^2";
    rep.summary["coupling_fit"] = fit_json(r.coupling_fit);
    rep.summary["first_order_fit"] = fit_json(r.first_order_fit);
    rep.summary["coupling_decreasing"] = r.coupling_decreasing;

    double worst = 0.0;
    for (const auto& s : r.coupling) worst = std::max(worst, s.D());
    const auto& t = c.thresholds;
    if (worst <= t.zero_distance) {
        rep.verdicts.push_back({"coupling", true, "pathwise identity: max D = " + fmt(worst)});
    } else {
        const bool ok = r.coupling_decreasing && r.coupling_fit.slope >= t.min_coupling_slope;
        rep.verdicts.push_back({"coupling", ok,
                                "slope " + fmt(r.coupling_fit.slope) + " (min " + fmt(t.min_coupling_slope) +
                                    "), strictly decreasing: " + (r.coupling_decreasing ? "yes" : "no")});
    }
    const double fs = r.first_order_fit.slope;
    rep.verdicts.push_back({"first_order_rate", std::abs(fs - t.first_order_slope) <= t.first_order_tolerance,
                            "slope " + fmt(fs) + " (target " + fmt(t.first_order_slope) + " +- " +
                                fmt(t.first_order_tolerance) + ")"});

    const std::size_t nd = dump_count(ctx);
    for (std::size_t rr = 0; rr < nd; ++rr) {
        const auto inc = sample_increments(ctx.cov, ctx.grid, replica_seed(c.seed, rr));
        for (std::size_t i = 0; i < c.scaling.eps_list.size(); ++i)
            dump_path(ctx, stem("u", i, rr),
                      solve_sde(ctx.model, ctx.cov, ctx.xi, ctx.grid, ScalingSpec::clt(c.scaling.eps_list[i]), inc));
    }
}

Table rate_table(const RateSweep& sw) {
    Table t{"rate", {"beta", "I_hat", "terminal_residual", "iterations", "gradient_norm", "max_iter_reached"}, {}};
    for (const auto& r : sw.runs)
        t.add({r.beta, r.I_hat, r.terminal_residual, static_cast<double>(r.iterations), r.gradient_norm,
               r.max_iter_reached ? 1.0 : 0.0});
    return t;
}

RateSweep sweep_for(Context& ctx, const StatePath& u0) {
    const auto& c = ctx.cfg;
    return rate_function_sweep(ctx.model, ctx.cov, u0, ctx.grid, unit_probe(ctx.model.dimension(), c.functional.mode),
                               c.functional.threshold, c.rate.betas, c.rate.tol, c.rate.max_iter);
}

void rate_verdicts(const ExperimentConfig& c, const RateSweep& sw, ExperimentReport& rep) {
    bool converged = true;
    for (const auto& r : sw.runs) converged = converged && !r.max_iter_reached;
    rep.verdicts.push_back({"rate_converged", converged, converged ? "all penalty levels converged"
                                                                   : "max_iter reached at some penalty level"});
    if (c.thresholds.rate_expected) {
        const double ex = *c.thresholds.rate_expected;
        const double rel = std::abs(sw.I_extrapolated / ex - 1.0);
        rep.verdicts.push_back({"rate_value", rel <= c.thresholds.rate_tolerance,
                                "extrapolated " + fmt(sw.I_extrapolated) + " vs expected " + fmt(ex) +
                                    " (relative " + fmt(rel) + ", tolerance " + fmt(c.thresholds.rate_tolerance) +
                                    ")"});
    }
}

void run_rate(Context& ctx, ExperimentReport& rep) {
    const StatePath u0 = solve_deterministic(ctx.model, ctx.xi, ctx.grid);
    const RateSweep sw = sweep_for(ctx, u0);
    rep.tables.push_back(rate_table(sw));
    rep.summary["I_extrapolated"] = sw.I_extrapolated;
    rep.summary["extrapolation"] = "polynomial in 1/beta through every penalty level";
    rate_verdicts(ctx.cfg, sw, rep);
    if (ctx.opt.dump_dir) {
        dump_path(ctx, "skeleton_optimal", sw.runs.back().X);
        write_flat(*ctx.opt.dump_dir / "control_optimal.bin", to_flat(sw.runs.back().h));
    }
}

void run_mdp(Context& ctx, ExperimentReport& rep) {
    const auto& c = ctx.cfg;
    const StatePath u0 = solve_deterministic(ctx.model, ctx.xi, ctx.grid);
    const RateSweep sw = sweep_for(ctx, u0);
    rep.tables.push_back(rate_table(sw));
    const State e = unit_probe(ctx.model.dimension(), c.functional.mode);
    const ControlPath& tilt = sw.runs.back().h;
    const auto est = mdp_tail_experiment(ctx.model, ctx.cov, ctx.xi, ctx.grid, e, c.functional.threshold, c.scaling.a,
                                         c.scaling.eps_list, c.replicas, c.seed, c.functional.importance,
                                         ctx.opt.jobs, &tilt);
    Table t{"tail",
            {"epsilon", "lambda", "lambda_sq", "replicas", "excluded", "hits", "p_hat", "p_se", "decay", "censored",
             "importance", "tilt_action", "ess"},
            {}};
    std::vector<double> l2, nlogp;
    for (const auto& s : est) {
        t.add({s.epsilon, s.lambda, s.lambda * s.lambda, static_cast<double>(s.replicas),
               static_cast<double>(s.excluded), static_cast<double>(s.hits), s.p_hat, s.p_se, s.decay,
               s.censored ? 1.0 : 0.0, s.importance ? 1.0 : 0.0, s.tilt_action, s.ess});
        if (!s.censored) {
            l2.push_back(s.lambda * s.lambda);
            nlogp.push_back(-std::log(s.p_hat));
        }
    }
    rep.tables.push_back(std::move(t));
    const double I = sw.I_extrapolated;
    rep.summary["I_extrapolated"] = I;
    rep.summary["event"] = "<e, Z(T)> >= c with e the unit vector on functional.mode";
    if (l2.size() >= 2) {
        // -log p = I lambda^2 + O(log lambda): the slope in lambda^2 is free of the constant offset.
        const auto fit = linear_fit(l2, nlogp);
        rep.summary["decay_slope_in_lambda_sq"] = fit_json(fit);
        rep.summary["decay_slope_relative_to_rate"] = fit.slope / I - 1.0;
    }
    rate_verdicts(c, sw, rep);
    const auto& th = c.thresholds;
    for (const auto& s : est) {
        const std::string name = "decay[lambda^2=" + label(s.lambda * s.lambda) + "]";
        if (s.censored) {
            rep.verdicts.push_back({name, false, "no hits among " + std::to_string(s.replicas) + " replicas (censored)"});
            continue;
        }
        const double rel = std::abs(s.decay / I - 1.0);
        rep.verdicts.push_back({name, rel <= th.mdp_tolerance,
                                "-log p / lambda^2 = " + fmt(s.decay) + " vs rate " + fmt(I) + " (relative " +
                                    fmt(rel) + ", tolerance " + fmt(th.mdp_tolerance) + ")"});
        if (s.importance)
            rep.verdicts.push_back({"ess[lambda^2=" + label(s.lambda * s.lambda) + "]", s.ess >= th.min_ess,
                                    "effective sample size " + fmt(s.ess) + " (min " + fmt(th.min_ess) + ")"});
    }

    const std::size_t nd = dump_count(ctx);
    for (std::size_t rr = 0; rr < nd; ++rr) {
        const auto inc = sample_increments(ctx.cov, ctx.grid, replica_seed(c.seed, rr));
        for (std::size_t i = 0; i < c.scaling.eps_list.size(); ++i) {
            const auto sc = ScalingSpec::moderate(c.scaling.eps_list[i], c.scaling.a);
            dump_path(ctx, stem("z", i, rr),
                      c.functional.importance ? solve_controlled(ctx.model, ctx.cov, u0, ctx.grid, sc, inc, tilt)
                                              : solve_moderate(ctx.model, ctx.cov, u0, ctx.grid, sc, inc));
        }
    }
}

void run_controlled(Context& ctx, ExperimentReport& rep) {
    const auto& c = ctx.cfg;
    const ControlPath phi = make_control(c, ctx.grid, ctx.cov);
    const auto r = controlled_convergence(ctx.model, ctx.cov, ctx.xi, ctx.grid, phi, c.scaling.eps_list, c.scaling.a,
                                          c.replicas, c.seed, ctx.opt.jobs);
    rep.tables.push_back(error_table("distance", r.distance));
    rep.summary["tested_form"] = "same-noise coupling of the controlled process against the skeleton";
    rep.summary["control_energy"] = 2.0 * action(phi);
    rep.summary["final_ratio"] = r.final_ratio;
    rep.verdicts.push_back({"monotone", r.monotone, r.monotone ? "strictly decreasing" : "not strictly decreasing"});
    rep.verdicts.push_back({"final_ratio", r.final_ratio <= c.thresholds.max_final_ratio,
                            "D(last) / D(first) = " + fmt(r.final_ratio) + " (max " +
                                fmt(c.thresholds.max_final_ratio) + ")"});
    const std::size_t nd = dump_count(ctx);
    if (nd > 0) {
        const StatePath u0 = solve_deterministic(ctx.model, ctx.xi, ctx.grid);
        for (std::size_t rr = 0; rr < nd; ++rr) {
            const auto inc = sample_increments(ctx.cov, ctx.grid, replica_seed(c.seed, rr));
            for (std::size_t i = 0; i < c.scaling.eps_list.size(); ++i)
                dump_path(ctx, stem("x", i, rr),
                          solve_controlled(ctx.model, ctx.cov, u0, ctx.grid,
                                           ScalingSpec::moderate(c.scaling.eps_list[i], c.scaling.a), inc, phi));
        }
    }
}

void run_modulus(Context& ctx, ExperimentReport& rep) {
    const auto& c = ctx.cfg;
    const ControlPath phi = make_control(c, ctx.grid, ctx.cov);
    const ScalingSpec sc = ScalingSpec::moderate(c.modulus.epsilon, c.scaling.a);
    const auto r = increment_modulus(ctx.model, ctx.cov, ctx.xi, ctx.grid, sc, phi, c.modulus.n_list, c.replicas,
                                     c.seed, c.modulus.clip, ctx.opt.jobs);
    Table t{"modulus", {"n", "shift", "M", "M_se"}, {}};
    for (std::size_t i = 0; i < r.n.size(); ++i) t.add({static_cast<double>(r.n[i]), r.shift[i], r.M[i].mean, r.M[i].se});
    rep.tables.push_back(std::move(t));
    rep.summary["fit"] = fit_json(r.fit);
    rep.summary["retained"] = r.retained;
    rep.summary["clipped"] = r.clipped;
    rep.summary["lambda"] = sc.lambda;
    rep.verdicts.push_back({"modulus_exponent", r.fit.slope >= c.thresholds.min_modulus_exponent,
                            "fitted exponent " + fmt(r.fit.slope) + " (min " + fmt(c.thresholds.min_modulus_exponent) +
                                ")"});
    const std::size_t nd = dump_count(ctx);
    if (nd > 0) {
        const StatePath u0 = solve_deterministic(ctx.model, ctx.xi, ctx.grid);
        for (std::size_t rr = 0; rr < nd; ++rr) {
            const auto inc = sample_increments(ctx.cov, ctx.grid, replica_seed(c.seed, rr));
            dump_path(ctx, stem("x", 0, rr), solve_controlled(ctx.model, ctx.cov, u0, ctx.grid, sc, inc, phi));
        }
    }
}

void run_convergence(Context& ctx, ExperimentReport& rep) {
    const auto& c = ctx.cfg;
    ConvergenceOptions o;
    o.solver = c.convergence.solver == "sde" ? ConvergenceSolver::Sde : ConvergenceSolver::Deterministic;
    o.reference = c.convergence.reference == "exact" ? ConvergenceReference::Exact : ConvergenceReference::Finest;
    o.T = c.grid.T;
    o.base_steps = c.convergence.base_steps;
    o.levels = c.convergence.levels;
    o.reference_factor = c.convergence.reference_factor;
    o.replicas = c.replicas;
    o.seed = c.seed;
    o.epsilon = c.convergence.epsilon;
    const auto r = self_convergence(ctx.model, ctx.cov, ctx.xi, o);
    Table t{"convergence", {"dt", "rms_error"}, {}};
    for (std::size_t i = 0; i < r.dts.size(); ++i) t.add({r.dts[i], r.errors[i]});
    rep.tables.push_back(std::move(t));
    rep.summary["order"] = r.order;
    rep.summary["order_stderr"] = r.order_stderr;
    rep.summary["monotone"] = r.monotone;
    if (!r.monotone) rep.summary["warning"] = "errors are not monotone in dt";
    rep.verdicts.push_back({"order", r.order >= c.thresholds.min_order,
                            "fitted order " + fmt(r.order) + " (min " + fmt(c.thresholds.min_order) + ")"});
    if (ctx.opt.dump_dir) {
        const std::size_t finest = o.base_steps << (o.levels - 1);
        const TimeGrid g(o.T, finest);
        for (std::size_t rr = 0; rr < dump_count(ctx); ++rr) {
            const auto inc = sample_increments(ctx.cov, g, replica_seed(c.seed, rr));
            dump_path(ctx, stem("u", 0, rr),
                      o.solver == ConvergenceSolver::Sde
                          ? solve_sde(ctx.model, ctx.cov, ctx.xi, g, ScalingSpec::clt(o.epsilon), inc)
                          : solve_deterministic(ctx.model, ctx.xi, g));
        }
    }
}

}  // namespace

ExperimentReport run(const ExperimentConfig& config, const RunOptions& options) {
    config.validate();
    ModelSpec model = config.model.build();
    CovarianceSpec cov = config.covariance.build(model.dimension());
    State xi = config.initial.build(model.dimension());
    Context ctx{config, options, std::move(model), std::move(cov), std::move(xi),
                TimeGrid(config.grid.T, config.grid.steps)};
    ExperimentReport rep;
    rep.experiment = to_string(config.experiment);
    rep.config = config.to_json();
    rep.summary = json::object();
    rep.summary["model"] = ctx.model.name();
    rep.summary["dimension"] = ctx.model.dimension();
    rep.summary["covariance_trace"] = ctx.cov.trace();
    switch (config.experiment) {
        case ExperimentKind::Verify: run_verify(ctx, rep); break;
        case ExperimentKind::Clt: run_clt(ctx, rep); break;
        case ExperimentKind::Mdp: run_mdp(ctx, rep); break;
        case ExperimentKind::Rate: run_rate(ctx, rep); break;
        case ExperimentKind::Controlled: run_controlled(ctx, rep); break;
        case ExperimentKind::Modulus: run_modulus(ctx, rep); break;
        case ExperimentKind::Convergence: run_convergence(ctx, rep); break;
    }
    return rep;
}

std::filesystem::path make_run_directory(const std::filesystem::path& root, const std::string& experiment) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
    const auto base = root / experiment;
    std::filesystem::create_directories(base);
    auto dir = base / stamp;
    for (int i = 2; std::filesystem::exists(dir); ++i) dir = base / (std::string(stamp) + "-" + std::to_string(i));
    std::filesystem::create_directory(dir);
    return dir;
}

void write_report(const ExperimentReport& report, const std::filesystem::path& dir, double wall_seconds,
                  unsigned jobs) {
    auto write_text = [&](const std::string& name, const std::string& text) {
        std::ofstream os(dir / name, std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
        os << text << '\n';
    };
    write_text("config.json", report.config.dump(2));
    write_text("report.json", report.to_json());
    for (const auto& t : report.tables) {
        std::ofstream os(dir / (t.name + ".csv"), std::ios::trunc);
        for (std::size_t i = 0; i < t.header.size(); ++i) os << (i ? "," : "") << t.header[i];
        os << '\n';
        for (const auto& row : t.rows) {
            for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
            os << '\n';
        }
    }
    json timing;
    timing["wall_seconds"] = wall_seconds;
    timing["jobs"] = jobs;
    write_text("timing.json", timing.dump(2));

    const auto latest = dir.parent_path() / "latest";
    std::error_code ec;
    std::filesystem::remove(latest, ec);
    std::filesystem::create_directory_symlink(dir.filename(), latest, ec);
}

}  // namespace hydroscale
