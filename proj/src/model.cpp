#include "hydroscale/model.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace hydroscale {

void BilinearTerm::apply_first_transpose(const State& v, const State& w, State& out) const {
    const Eigen::Index n = v.size();
    out.resize(n);
    State e = State::Zero(n);
    State b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        e[i] = 1.0;
        apply(e, v, b);
        out[i] = b.dot(w);
        e[i] = 0.0;
    }
}

double BilinearTerm::interp_norm(const State& v, const Eigen::VectorXd& alpha) const {
    const double h = v.norm();
    const double vn = std::sqrt((alpha.array() * v.array().square()).sum());
    return std::sqrt(h * vn);
}

namespace {

double saturating(double x) { return x * x * x / (1.0 + x * x); }

double saturating_slope(double x) {
    const double s = x * x;
    return (3.0 * s + s * s) / ((1.0 + s) * (1.0 + s));
}

}  // namespace

void ReactionTerm::apply(double, const State& u, State& out) const {
    out.resize(u.size());
    if (matrix.size() != 0)
        out.noalias() = matrix * u;
    else
        out.setZero();
    if (rho != 0.0) out += rho * u;
    if (gamma != 0.0)
        for (Eigen::Index i = 0; i < u.size(); ++i) out[i] += gamma * saturating(u[i]);
}

void ReactionTerm::jvp(double, const State& u, const State& w, State& out) const {
    out.resize(u.size());
    if (matrix.size() != 0)
        out.noalias() = matrix * w;
    else
        out.setZero();
    if (rho != 0.0) out += rho * w;
    if (gamma != 0.0)
        for (Eigen::Index i = 0; i < u.size(); ++i) out[i] += gamma * saturating_slope(u[i]) * w[i];
}

void ReactionTerm::vjp(double, const State& u, const State& y, State& out) const {
    out.resize(u.size());
    if (matrix.size() != 0)
        out.noalias() = matrix.transpose() * y;
    else
        out.setZero();
    if (rho != 0.0) out += rho * y;
    if (gamma != 0.0)
        for (Eigen::Index i = 0; i < u.size(); ++i) out[i] += gamma * saturating_slope(u[i]) * y[i];
}

double DiagonalNoise::entry(double t, const State& u, Eigen::Index j) const {
    double g = gains[j];
    if (theta != 0.0) g *= 1.0 + theta * std::tanh(u[j]);
    if (time_modulated) g *= 0.5 * (1.0 + std::sin(t));
    return g;
}

ModelSpec::ModelSpec(std::string name, Eigen::VectorXd a_spectrum, std::shared_ptr<const BilinearTerm> bilinear,
                     ReactionTerm reaction, DiagonalNoise noise)
    : name_(std::move(name)),
      alpha_(std::move(a_spectrum)),
      b_(std::move(bilinear)),
      reaction_(std::move(reaction)),
      noise_(std::move(noise)) {
    require(alpha_.size() > 0, "model dimension must be positive");
    require(alpha_.allFinite() && (alpha_.array() > 0.0).all(), "A-spectrum must be strictly positive");
    require(b_ != nullptr, "bilinear term is required");
    require(noise_.gains.size() == alpha_.size(), "noise gains must have the model dimension");
    require((noise_.gains.array() >= 0.0).all(), "noise gains must be nonnegative");
    require(noise_.theta >= 0.0 && noise_.theta < 1.0, "noise theta must lie in [0, 1)");
    if (reaction_.matrix.size() != 0)
        require(reaction_.matrix.rows() == alpha_.size() && reaction_.matrix.cols() == alpha_.size(),
                "reaction matrix must be n x n");
    alpha_min_ = alpha_.minCoeff();
}

State ModelSpec::bilinear(const State& u, const State& v) const {
    State out(u.size());
    b_->apply(u, v, out);
    return out;
}

double ModelSpec::trilinear(const State& u, const State& v, const State& w) const {
    State b(u.size());
    b_->apply(u, v, b);
    return b.dot(w);
}

void ModelSpec::noise_add(double t, const State& u, std::span<const double> w, double scale, State& out) const {
    const auto m = static_cast<Eigen::Index>(w.size());
    for (Eigen::Index j = 0; j < m; ++j) {
        if (w[j] == 0.0) continue;
        out[j] += scale * noise_.entry(t, u, j) * w[j];
    }
}

void ModelSpec::noise_transpose(double t, const State& u, const State& y, std::span<double> out) const {
    const auto m = static_cast<Eigen::Index>(out.size());
    for (Eigen::Index j = 0; j < m; ++j) out[j] = noise_.entry(t, u, j) * y[j];
}

double ModelSpec::v_norm_sq(const State& v) const {
    return (alpha_.array() * v.array().square()).sum();
}

ModelConstants ModelSpec::constants(std::span<const double> q) const {
    require(static_cast<Eigen::Index>(q.size()) <= dimension(), "covariance has more modes than the model");
    ModelConstants c;
    c.a0 = b_->interp_constant();
    c.trilinear = std::max(b_->trilinear_constant(), kVanishingConstant);

    double sum_qg2 = 0.0;
    double max_qg2 = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) {
        const double qg2 = q[j] * noise_.gains[static_cast<Eigen::Index>(j)] * noise_.gains[static_cast<Eigen::Index>(j)];
        sum_qg2 += qg2;
        max_qg2 = std::max(max_qg2, qg2);
    }
    const double amp = 1.0 + noise_.theta;
    c.K0 = std::max(amp * amp * sum_qg2, kVanishingConstant);
    c.K1 = kVanishingConstant;
    c.L1 = std::max(noise_.theta * noise_.theta * max_qg2, kVanishingConstant);
    c.kappa = 1.0;
    c.holder = noise_.time_modulated ? std::max(0.5 * amp * std::sqrt(sum_qg2), kVanishingConstant)
                                     : kVanishingConstant;

    double mnorm = 0.0;
    if (reaction_.matrix.size() != 0) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(reaction_.matrix);
        mnorm = svd.singularValues()(0);
    }
    const double lip = mnorm + std::abs(reaction_.rho) + ReactionTerm::kSaturatingSlope * std::abs(reaction_.gamma);
    c.R0 = kVanishingConstant;
    c.R1 = std::max(lip, kVanishingConstant);
    c.Rp0 = kVanishingConstant;
    c.Rp1 = c.R1;
    c.Rp_lipschitz = std::max(ReactionTerm::kSaturatingCurvature * std::abs(reaction_.gamma), kVanishingConstant);
    return c;
}

NormTriple norms(const ModelSpec& model, const State& v) {
    require(v.size() == model.dimension(), "state dimension does not match the model");
    NormTriple out;
    out.h = v.norm();
    out.v = std::sqrt(model.v_norm_sq(v));
    out.interp = model.interp_norm(v);
    return out;
}

}  // namespace hydroscale
