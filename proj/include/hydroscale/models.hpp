#pragma once

#include "hydroscale/model.hpp"

#include <Eigen/Core>

#include <array>
#include <complex>
#include <vector>

namespace hydroscale {

// ---------------------------------------------------------------------------
// Shell model

struct ShellParams {
    int n_shells = 12;
    double k0 = 1.0;
    double shell_ratio = 2.0;
    double viscosity = 1e-2;
    double a = 1.0;
    double b = -0.5;
    double c = -0.5;
    std::vector<double> noise_gains;  ///< per shell; empty means 1 everywhere
    double noise_theta = 0.5;
    bool noise_time_modulated = false;
    double reaction_rho = 1e-2;
    double reaction_gamma = 0.0;
};

/// Sabra-type shell interaction on complex shells stored as (re, im) pairs:
///   B(u,v)_n = i [ a k_{n+1} conj(u_{n+1}) v_{n+2} + b k_n conj(u_{n-1}) v_{n+1}
///                + a k_{n-1} u_{n-1} v_{n-2} - (a + c) k_{n-1} u_{n-2} v_{n-1} ].
/// B(u,u) is the Sabra nonlinearity for any (a,b,c); the trilinear form is
/// antisymmetric in its last two slots iff a + b + c = 0. This class does not
/// check the constraint so that broken coefficients can be studied.
class ShellBilinear final : public BilinearTerm {
public:
    ShellBilinear(std::vector<double> wavenumbers, double a, double b, double c, double viscosity);

    void apply(const State& u, const State& v, State& out) const override;
    void apply_first_transpose(const State& v, const State& w, State& out) const override;
    double trilinear_constant() const override { return trilinear_; }

    int n_shells() const { return static_cast<int>(k_.size()); }

private:
    std::vector<double> k_;
    double a_, b_, c_;
    double trilinear_;
};

ModelSpec make_shell_model(const ShellParams& p);

// ---------------------------------------------------------------------------
// Spectral 2D Navier-Stokes on the 2*pi periodic torus

struct SpectralNSParams {
    int max_wavenumber = 4;           ///< modes 0 < |k|_inf <= K
    double viscosity = 5e-2;
    std::vector<double> noise_gains;  ///< per retained half-plane mode; empty means 1
    double noise_theta = 0.5;
    bool noise_time_modulated = false;
    double reaction_rho = 1e-2;
    double reaction_gamma = 0.0;
};

/// Galerkin truncation of P[(u.grad) v] over divergence-free modes.
///
/// Each retained wavevector k in the half plane (k_x > 0, or k_x = 0 and
/// k_y > 0) carries a complex amplitude a_k along e_k = k_perp/|k|; the
/// velocity coefficient is u_hat(k) = a_k e_k and u_hat(-k) = conj(u_hat(k)).
/// Real coordinates are sqrt(2)(Re a_k, Im a_k), so the Euclidean inner
/// product of coordinates equals the mean of u.v over the torus.
class SpectralNSBilinear final : public BilinearTerm {
public:
    SpectralNSBilinear(int max_wavenumber, double viscosity);

    void apply(const State& u, const State& v, State& out) const override;
    /// Discrete L4 norm (mean of |u|^4)^(1/4) on a (4K+1)^2 collocation grid,
    /// exact for the truncated field.
    double interp_norm(const State& v, const Eigen::VectorXd& alpha) const override;
    double interp_constant() const override { return a0_; }
    double trilinear_constant() const override { return trilinear_; }
    std::string interp_description() const override { return "discrete L4 on the collocation grid"; }

    int max_wavenumber() const { return K_; }
    std::size_t n_modes() const { return modes_.size(); }
    const std::vector<std::array<int, 2>>& modes() const { return modes_; }
    int grid_size() const { return N_; }

    /// Velocity components on the collocation grid, row-major [ix * N + iy].
    void velocity_on_grid(const State& v, std::vector<double>& ux, std::vector<double>& uy) const;
    /// max_k |k . u_hat(k)| over every retained mode and its mirror.
    double divergence_residual(const State& v) const;
    /// Reconstruct u_hat(k) for an arbitrary k with 0 < |k|_inf <= K.
    std::array<std::complex<double>, 2> velocity_coefficient(const State& v, int kx, int ky) const;

private:
    struct Triad {
        int out;  ///< half-plane index of k
        int p;    ///< full index of p
        int q;    ///< full index of q = k - p
        double coef;
    };

    void full_amplitudes(const State& v, std::vector<std::complex<double>>& full) const;
    int full_index(int kx, int ky) const { return (kx + K_) * (2 * K_ + 1) + (ky + K_); }

    int K_;
    int N_;
    double a0_;
    double trilinear_;
    std::vector<std::array<int, 2>> modes_;  ///< half-plane wavevectors
    std::vector<int> half_of_full_;          ///< full index -> half index (or -1 for k = 0)
    std::vector<bool> mirrored_;             ///< full index lies in the negative half plane
    std::vector<Triad> triads_;
    std::vector<std::complex<double>> phase_;  ///< exp(i m x_j), m in [-K, K], j in [0, N)
};

ModelSpec make_spectral_ns(const SpectralNSParams& p);

// ---------------------------------------------------------------------------
// Linear Ornstein-Uhlenbeck diagnostic model

struct LinearOUParams {
    int dimension = 1;
    std::vector<double> drift{1.0};   ///< a_i > 0
    std::vector<double> noise{1.0};   ///< s_i
    Eigen::MatrixXd reaction;         ///< M (empty means zero)
};

/// B = 0, R(t,u) = M u, sigma(t,u) = diag(s) independent of (t,u).
ModelSpec make_linear_ou(const LinearOUParams& p);

}  // namespace hydroscale
