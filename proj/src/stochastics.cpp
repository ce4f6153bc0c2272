#include "hydroscale/stochastics.hpp"

#include <cmath>
#include <numeric>

namespace hydroscale {

TimeGrid::TimeGrid(double horizon, std::size_t n_steps) : T(horizon), steps(n_steps) {
    require(std::isfinite(horizon) && horizon > 0.0, "time grid: T must be positive");
    require(n_steps >= 1, "time grid: steps must be >= 1");
    require(n_steps < (std::size_t{1} << 32), "time grid: too many steps");
}

CovarianceSpec::CovarianceSpec(std::vector<double> eigenvalues) : q(std::move(eigenvalues)) {
    for (double v : q) require(std::isfinite(v) && v >= 0.0, "covariance eigenvalues must be finite and >= 0");
}

CovarianceSpec CovarianceSpec::power_law(std::size_t m, double exponent, double scale) {
    require(scale >= 0.0, "covariance scale must be >= 0");
    std::vector<double> q(m);
    for (std::size_t j = 0; j < m; ++j) q[j] = scale * std::pow(static_cast<double>(j + 1), -exponent);
    return CovarianceSpec(std::move(q));
}

double CovarianceSpec::trace() const { return std::accumulate(q.begin(), q.end(), 0.0); }

ControlPath ControlPath::constant(const TimeGrid& g, std::size_t m, std::size_t mode, double value) {
    require(mode < m, "control mode out of range");
    ControlPath h(g, m);
    for (std::size_t k = 0; k < g.steps; ++k) h.at(k, mode) = value;
    return h;
}

WienerIncrements sample_increments(const CovarianceSpec& cov, const TimeGrid& grid, const RngKey& key) {
    for (double v : cov.q) require(v >= 0.0, "covariance eigenvalues must be >= 0");
    WienerIncrements inc;
    inc.grid = grid;
    inc.modes = cov.modes();
    inc.key = key;
    inc.data.assign(grid.steps * inc.modes, 0.0);
    std::vector<double> sd(inc.modes);
    for (std::size_t j = 0; j < inc.modes; ++j) sd[j] = std::sqrt(cov.q[j] * grid.dt());
    for (std::size_t k = 0; k < grid.steps; ++k) {
        double* row = inc.data.data() + k * inc.modes;
        for (std::size_t j = 0; j < inc.modes; j += 2) {
            const auto z = normal_pair(key, k, static_cast<std::uint32_t>(j / 2));
            row[j] = sd[j] * z[0];
            if (j + 1 < inc.modes) row[j + 1] = sd[j + 1] * z[1];
        }
    }
    return inc;
}

WienerIncrements zero_increments(const TimeGrid& grid, std::size_t modes) {
    WienerIncrements inc;
    inc.grid = grid;
    inc.modes = modes;
    inc.data.assign(grid.steps * modes, 0.0);
    return inc;
}

WienerIncrements coarsen(const WienerIncrements& fine, std::size_t factor) {
    require(factor >= 1 && fine.grid.steps % factor == 0, "coarsen: factor must divide the step count");
    WienerIncrements out;
    out.grid = TimeGrid(fine.grid.T, fine.grid.steps / factor);
    out.modes = fine.modes;
    out.key = fine.key;
    out.data.assign(out.grid.steps * out.modes, 0.0);
    for (std::size_t k = 0; k < fine.grid.steps; ++k) {
        const std::size_t kc = k / factor;
        for (std::size_t j = 0; j < fine.modes; ++j) out.data[kc * out.modes + j] += fine.at(k, j);
    }
    return out;
}

WienerIncrements operator+(const WienerIncrements& a, const WienerIncrements& b) {
    require(a.grid == b.grid && a.modes == b.modes, "increments must share grid and modes");
    WienerIncrements out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

double action(const ControlPath& h) {
    double s = 0.0;
    for (double c : h.coeffs) s += c * c;
    return 0.5 * h.grid.dt() * s;
}

ControlPath clip_to_ball(const ControlPath& h, double N) {
    require(N > 0.0, "clip_to_ball: N must be positive");
    const double energy = 2.0 * action(h);
    if (energy <= N) return h;
    return std::sqrt(N / energy) * h;
}

ControlPath operator*(double s, const ControlPath& h) {
    ControlPath out = h;
    for (double& c : out.coeffs) c *= s;
    return out;
}

void restrict_to_support(ControlPath& h, const CovarianceSpec& cov) {
    for (std::size_t j = 0; j < h.modes; ++j)
        if (j >= cov.modes() || cov.q[j] == 0.0)
            for (std::size_t k = 0; k < h.grid.steps; ++k) h.at(k, j) = 0.0;
}

void check_compatible(const ModelSpec& model, const CovarianceSpec& cov) {
    require(static_cast<Eigen::Index>(cov.modes()) <= model.dimension(),
            "covariance has more modes than the model dimension");
}

State apply_noise_operator(const ModelSpec& model, const CovarianceSpec& cov, double t, const State& u,
                           std::span<const double> w) {
    check_compatible(model, cov);
    require(u.size() == model.dimension(), "state dimension does not match the model");
    require(w.size() == cov.modes(), "noise vector must have one entry per covariance mode");
    std::vector<double> phys(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) {
        require(!(cov.q[j] == 0.0 && w[j] != 0.0), "noise coordinate on a mode with q_j = 0");
        phys[j] = std::sqrt(cov.q[j]) * w[j];
    }
    State out = State::Zero(model.dimension());
    model.noise_add(t, u, phys, 1.0, out);
    return out;
}

double lq_norm_sq(const ModelSpec& model, const CovarianceSpec& cov, double t, const State& u) {
    double s = 0.0;
    for (std::size_t j = 0; j < cov.modes(); ++j) {
        const double e = model.noise_entry(t, u, static_cast<Eigen::Index>(j));
        s += cov.q[j] * e * e;
    }
    return s;
}

double lq_distance_sq(const ModelSpec& model, const CovarianceSpec& cov, double t, const State& u, double s,
                      const State& v) {
    double acc = 0.0;
    for (std::size_t j = 0; j < cov.modes(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        const double d = model.noise_entry(t, u, jj) - model.noise_entry(s, v, jj);
        acc += cov.q[j] * d * d;
    }
    return acc;
}

}  // namespace hydroscale
