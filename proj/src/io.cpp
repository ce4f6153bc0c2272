#include "hydroscale/io.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace hydroscale {

static_assert(std::endian::native == std::endian::little, "binary layout assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'H', 'S', 'B', '1'};

template <class T>
void put(std::ofstream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw InvalidInput("binary file truncated");
    return v;
}

std::ofstream open_out(const std::filesystem::path& file, bool binary) {
    std::ofstream os(file, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + file.string() + " for writing");
    return os;
}

}  // namespace

void write_flat(const std::filesystem::path& file, const FlatArray& a) {
    auto os = open_out(file, true);
    os.write(kMagic, 4);
    put(os, a.T);
    put(os, a.steps);
    put(os, a.columns);
    put(os, a.seed);
    put(os, a.replica);
    os.write(reinterpret_cast<const char*>(a.values.data()),
             static_cast<std::streamsize>(a.values.size() * sizeof(double)));
    if (!os) throw std::runtime_error("write failed: " + file.string());
}

FlatArray read_flat(const std::filesystem::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw InvalidInput("cannot open " + file.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) throw InvalidInput("not a hydroscale binary file");
    FlatArray a;
    a.T = get<double>(is);
    a.steps = get<std::uint64_t>(is);
    a.columns = get<std::uint64_t>(is);
    a.seed = get<std::uint64_t>(is);
    a.replica = get<std::uint64_t>(is);
    const auto start = is.tellg();
    is.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::uint64_t>(is.tellg() - start);
    is.seekg(start);
    if (bytes % sizeof(double) != 0 || a.columns == 0 || (bytes / sizeof(double)) % a.columns != 0)
        throw InvalidInput("binary payload does not match the header");
    a.values.resize(bytes / sizeof(double));
    is.read(reinterpret_cast<char*>(a.values.data()), static_cast<std::streamsize>(bytes));
    return a;
}

FlatArray to_flat(const WienerIncrements& inc) {
    return {inc.grid.T, inc.grid.steps, inc.modes, inc.key.seed, inc.key.replica, inc.data};
}

FlatArray to_flat(const ControlPath& h) {
    return {h.grid.T, h.grid.steps, h.modes, 0, 0, h.coeffs};
}

FlatArray to_flat(const StatePath& path) {
    FlatArray a{path.grid.T, path.grid.steps, 0, path.provenance.seed, path.provenance.replica, {}};
    a.columns = path.states.empty() ? 0 : static_cast<std::uint64_t>(path.states.front().size());
    a.values.reserve(path.nodes() * a.columns);
    for (const auto& s : path.states) a.values.insert(a.values.end(), s.data(), s.data() + s.size());
    return a;
}

WienerIncrements increments_from_flat(const FlatArray& a) {
    require(a.values.size() == a.steps * a.columns, "increment file has the wrong number of rows");
    WienerIncrements inc;
    inc.grid = TimeGrid(a.T, a.steps);
    inc.modes = a.columns;
    inc.key = {a.seed, a.replica};
    inc.data = a.values;
    return inc;
}

ControlPath control_from_flat(const FlatArray& a) {
    require(a.values.size() == a.steps * a.columns, "control file has the wrong number of rows");
    ControlPath h(TimeGrid(a.T, a.steps), a.columns);
    h.coeffs = a.values;
    return h;
}

StatePath path_from_flat(const FlatArray& a) {
    require(a.values.size() == (a.steps + 1) * a.columns, "path file has the wrong number of rows");
    StatePath p;
    p.grid = TimeGrid(a.T, a.steps);
    p.provenance.seed = a.seed;
    p.provenance.replica = a.replica;
    const auto n = static_cast<Eigen::Index>(a.columns);
    for (std::uint64_t k = 0; k <= a.steps; ++k) p.states.push_back(Eigen::Map<const State>(a.values.data() + k * a.columns, n));
    return p;
}

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_csv(const std::filesystem::path& file, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    auto os = open_out(file, false);
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << '\n';
    for (const auto& row : rows) {
        require(row.size() == header.size(), "csv row width does not match the header");
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_double(row[i]);
        os << '\n';
    }
}

namespace {

std::vector<std::string> grid_header(std::size_t m, const char* prefix) {
    std::vector<std::string> h{"k", "t"};
    for (std::size_t j = 0; j < m; ++j) h.push_back(prefix + std::to_string(j));
    return h;
}

}  // namespace

void write_csv(const std::filesystem::path& file, const WienerIncrements& inc) {
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < inc.grid.steps; ++k) {
        std::vector<double> r{static_cast<double>(k), inc.grid.node(k)};
        const auto s = inc.step(k);
        r.insert(r.end(), s.begin(), s.end());
        rows.push_back(std::move(r));
    }
    write_csv(file, grid_header(inc.modes, "dW"), rows);
}

void write_csv(const std::filesystem::path& file, const ControlPath& h) {
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < h.grid.steps; ++k) {
        std::vector<double> r{static_cast<double>(k), h.grid.node(k)};
        const auto s = h.step(k);
        r.insert(r.end(), s.begin(), s.end());
        rows.push_back(std::move(r));
    }
    write_csv(file, grid_header(h.modes, "c"), rows);
}

void write_norms_csv(const std::filesystem::path& file, const ModelSpec& model, const StatePath& path) {
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < path.nodes(); ++k) {
        const auto n = norms(model, path[k]);
        rows.push_back({path.grid.node(k), n.h, n.v, n.interp});
    }
    write_csv(file, {"t", "h_norm", "v_norm", "interp_norm"}, rows);
}

std::string provenance_json(const StatePath& path) {
    nlohmann::ordered_json j;
    j["equation"] = path.provenance.equation;
    j["epsilon"] = path.provenance.epsilon;
    j["lambda"] = path.provenance.lambda;
    j["seed"] = path.provenance.seed;
    j["replica"] = path.provenance.replica;
    j["T"] = path.grid.T;
    j["steps"] = path.grid.steps;
    j["dimension"] = path.states.empty() ? 0 : path.states.front().size();
    return j.dump(2);
}

void write_path(const std::filesystem::path& stem, const StatePath& path) {
    auto bin = stem;
    bin += ".bin";
    auto side = stem;
    side += ".json";
    write_flat(bin, to_flat(path));
    auto os = open_out(side, false);
    os << provenance_json(path) << '\n';
}

}  // namespace hydroscale
