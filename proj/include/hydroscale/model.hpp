#pragma once

#include "hydroscale/core.hpp"

#include <Eigen/Core>

#include <memory>
#include <span>
#include <string>

namespace hydroscale {

/// Declared nominal values of the hypothesis constants. All strictly positive.
struct ModelConstants {
    double a0 = 1.0;              ///< interpolation: ||v||_H^2 <= a0 |v| ||v||
    double trilinear = 0.0;       ///< |(B(u1,u2),u3)| <= c ||u1||_H ||u2|| ||u3||_H
    double K0 = 0.0;              ///< |sigma(t,u)|_LQ^2 <= K0 + K1 |u|^2
    double K1 = 0.0;
    double L1 = 0.0;              ///< |sigma(t,u) - sigma(t,v)|_LQ^2 <= L1 |u-v|^2
    double R0 = 0.0;              ///< |R(t,0)| <= R0
    double R1 = 0.0;              ///< R Lipschitz
    double Rp0 = 0.0;             ///< |R'(t,u)| <= Rp0 |u| + Rp1
    double Rp1 = 0.0;
    double Rp_lipschitz = 0.0;    ///< |R'(t,u1) - R'(t,u2)| <= C |u1 - u2|
    double kappa = 1.0;           ///< time-Hoelder exponent of sigma
    double holder = 0.0;          ///< |sigma(t1,u)-sigma(t2,u)|_LQ <= C (1+||u||) |t1-t2|^kappa
};

/// Floor used for constants whose true value is zero but which must be declared positive.
inline constexpr double kVanishingConstant = 1e-12;

struct NormTriple {
    double h = 0.0;       ///< |v|
    double v = 0.0;       ///< ||v|| = |A^{1/2} v|
    double interp = 0.0;  ///< ||v||_H
};

/// The bilinear operator B together with the interpolation space it is
/// bounded against. Implementations must be thread-safe for const use.
class BilinearTerm {
public:
    virtual ~BilinearTerm() = default;

    virtual void apply(const State& u, const State& v, State& out) const = 0;

    /// y such that (y, x) = (B(x, v), w) for all x. The default probes the
    /// basis, which costs n evaluations of B.
    virtual void apply_first_transpose(const State& v, const State& w, State& out) const;

    /// ||v||_H. Default: the geometric-mean norm (|v| ||v||)^{1/2}.
    virtual double interp_norm(const State& v, const Eigen::VectorXd& alpha) const;

    virtual double interp_constant() const { return 1.0; }
    virtual double trilinear_constant() const = 0;
    virtual bool identically_zero() const { return false; }
    virtual std::string interp_description() const { return "geometric-mean (|v| ||v||)^(1/2)"; }
};

class ZeroBilinear final : public BilinearTerm {
public:
    void apply(const State& u, const State&, State& out) const override { out.setZero(u.size()); }
    void apply_first_transpose(const State& v, const State&, State& out) const override {
        out.setZero(v.size());
    }
    double trilinear_constant() const override { return 0.0; }
    bool identically_zero() const override { return true; }
};

/// R(t,u) = M u + rho u + gamma * f(u), f_i(u) = u_i^3 / (1 + u_i^2).
/// f is globally Lipschitz with sup|f'| = 9/8 and sup|f''| < 1.4572, so the
/// reaction satisfies (C3)-(C5) with explicit constants.
struct ReactionTerm {
    double rho = 0.0;
    double gamma = 0.0;
    Eigen::MatrixXd matrix;  ///< optional; empty means absent

    void apply(double t, const State& u, State& out) const;
    void jvp(double t, const State& u, const State& w, State& out) const;
    void vjp(double t, const State& u, const State& y, State& out) const;
    bool is_linear() const { return gamma == 0.0; }
    bool is_zero() const { return rho == 0.0 && gamma == 0.0 && matrix.size() == 0; }

    static constexpr double kSaturatingSlope = 1.125;
    static constexpr double kSaturatingCurvature = 1.4572;
};

/// sigma(t,u) e_j = g_j m(t) (1 + theta tanh(u_j)) e_j, for the first m noise
/// coordinates; m(t) = (1 + sin t)/2 when time-modulated, else 1.
struct DiagonalNoise {
    Eigen::VectorXd gains;
    double theta = 0.0;
    bool time_modulated = false;

    double entry(double t, const State& u, Eigen::Index j) const;
};

/// Immutable description of a truncated hydrodynamical-type system
///   du + A u dt + B(u,u) dt + R(t,u) dt = sigma(t,u) dW.
/// A is diagonal in the model basis with spectrum alpha.
class ModelSpec {
public:
    ModelSpec(std::string name, Eigen::VectorXd a_spectrum, std::shared_ptr<const BilinearTerm> bilinear,
              ReactionTerm reaction, DiagonalNoise noise);

    const std::string& name() const { return name_; }
    Eigen::Index dimension() const { return alpha_.size(); }
    const Eigen::VectorXd& a_spectrum() const { return alpha_; }
    double alpha_min() const { return alpha_min_; }

    void bilinear(const State& u, const State& v, State& out) const { b_->apply(u, v, out); }
    State bilinear(const State& u, const State& v) const;
    /// (B(u,v), w)
    double trilinear(const State& u, const State& v, const State& w) const;
    void bilinear_first_transpose(const State& v, const State& w, State& out) const {
        b_->apply_first_transpose(v, w, out);
    }
    const BilinearTerm& bilinear_term() const { return *b_; }

    void reaction(double t, const State& u, State& out) const { reaction_.apply(t, u, out); }
    void reaction_jvp(double t, const State& u, const State& w, State& out) const { reaction_.jvp(t, u, w, out); }
    void reaction_vjp(double t, const State& u, const State& y, State& out) const { reaction_.vjp(t, u, y, out); }
    const ReactionTerm& reaction_term() const { return reaction_; }

    /// out += scale * sigma(t,u) w, with w in physical noise coordinates (w.size() <= n).
    void noise_add(double t, const State& u, std::span<const double> w, double scale, State& out) const;
    /// out = sigma(t,u)^T y restricted to the first out.size() noise coordinates.
    void noise_transpose(double t, const State& u, const State& y, std::span<double> out) const;
    double noise_entry(double t, const State& u, Eigen::Index j) const { return noise_.entry(t, u, j); }
    const DiagonalNoise& noise() const { return noise_; }

    double interp_norm(const State& v) const { return b_->interp_norm(v, alpha_); }
    double v_norm_sq(const State& v) const;

    ModelConstants constants(std::span<const double> q) const;

private:
    std::string name_;
    Eigen::VectorXd alpha_;
    double alpha_min_;
    std::shared_ptr<const BilinearTerm> b_;
    ReactionTerm reaction_;
    DiagonalNoise noise_;
};

/// (|v|, ||v||, ||v||_H). Throws InvalidInput on dimension mismatch.
NormTriple norms(const ModelSpec& model, const State& v);

}  // namespace hydroscale
