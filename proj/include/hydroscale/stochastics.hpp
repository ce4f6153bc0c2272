#pragma once

#include "hydroscale/core.hpp"
#include "hydroscale/model.hpp"
#include "hydroscale/rng.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace hydroscale {

/// Uniform grid on [0, T].
struct TimeGrid {
    double T = 1.0;
    std::size_t steps = 1;

    TimeGrid() = default;
    TimeGrid(double horizon, std::size_t n_steps);

    double dt() const { return T / static_cast<double>(steps); }
    double node(std::size_t k) const { return static_cast<double>(k) * dt(); }

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

/// Eigenvalues of the trace-class covariance Q on the first m basis vectors.
struct CovarianceSpec {
    std::vector<double> q;

    CovarianceSpec() = default;
    explicit CovarianceSpec(std::vector<double> eigenvalues);

    /// q_j = scale * j^{-exponent}, j = 1..m.
    static CovarianceSpec power_law(std::size_t m, double exponent = 2.0, double scale = 1.0);

    std::size_t modes() const { return q.size(); }
    double trace() const;

    friend bool operator==(const CovarianceSpec&, const CovarianceSpec&) = default;
};

/// Increments Delta W_{k,j} ~ N(0, q_j dt), stored row-major (steps x modes).
struct WienerIncrements {
    TimeGrid grid;
    std::size_t modes = 0;
    RngKey key;
    std::vector<double> data;

    std::span<const double> step(std::size_t k) const { return {data.data() + k * modes, modes}; }
    std::span<double> step(std::size_t k) { return {data.data() + k * modes, modes}; }
    double at(std::size_t k, std::size_t j) const { return data[k * modes + j]; }
};

/// Piecewise-constant Cameron-Martin control in Q^{1/2}-coordinates:
/// h'(t_k) = sum_j c_{k,j} sqrt(q_j) e_j, so |h'(t_k)|_0^2 = sum_j c_{k,j}^2.
struct ControlPath {
    TimeGrid grid;
    std::size_t modes = 0;
    std::vector<double> coeffs;

    ControlPath() = default;
    ControlPath(TimeGrid g, std::size_t m) : grid(g), modes(m), coeffs(g.steps * m, 0.0) {}

    std::span<const double> step(std::size_t k) const { return {coeffs.data() + k * modes, modes}; }
    std::span<double> step(std::size_t k) { return {coeffs.data() + k * modes, modes}; }
    double& at(std::size_t k, std::size_t j) { return coeffs[k * modes + j]; }
    double at(std::size_t k, std::size_t j) const { return coeffs[k * modes + j]; }

    /// Constant control c on mode j over the whole horizon.
    static ControlPath constant(const TimeGrid& g, std::size_t m, std::size_t mode, double value);
};

WienerIncrements sample_increments(const CovarianceSpec& cov, const TimeGrid& grid, const RngKey& key);
WienerIncrements zero_increments(const TimeGrid& grid, std::size_t modes);

/// Sum blocks of `factor` consecutive fine increments.
WienerIncrements coarsen(const WienerIncrements& fine, std::size_t factor);

/// Elementwise sum of increments on the same grid.
WienerIncrements operator+(const WienerIncrements& a, const WienerIncrements& b);

/// 1/2 sum_k dt sum_j c_{k,j}^2.
double action(const ControlPath& h);

/// Radial projection onto S_N = { int |h'|_0^2 <= N }.
ControlPath clip_to_ball(const ControlPath& h, double N);

ControlPath operator*(double s, const ControlPath& h);

/// Zero out coefficients on modes with q_j = 0.
void restrict_to_support(ControlPath& h, const CovarianceSpec& cov);

/// sigma(t,u) applied to sum_j w_j sqrt(q_j) e_j.
State apply_noise_operator(const ModelSpec& model, const CovarianceSpec& cov, double t, const State& u,
                           std::span<const double> w);

/// |sigma(t,u)|_{L_Q}^2 = sum_j q_j |sigma(t,u) e_j|^2.
double lq_norm_sq(const ModelSpec& model, const CovarianceSpec& cov, double t, const State& u);

/// |sigma(t,u) - sigma(t',v)|_{L_Q}^2.
double lq_distance_sq(const ModelSpec& model, const CovarianceSpec& cov, double t, const State& u, double s,
                      const State& v);

void check_compatible(const ModelSpec& model, const CovarianceSpec& cov);

}  // namespace hydroscale
