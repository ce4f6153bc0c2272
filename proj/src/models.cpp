#include "hydroscale/models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hydroscale {

using cplx = std::complex<double>;

// ---------------------------------------------------------------------------
// Shell model

namespace {

cplx shell_at(const State& x, int m, int n) {
    if (m < 0 || m >= n) return {0.0, 0.0};
    return {x[2 * m], x[2 * m + 1]};
}

}  // namespace

ShellBilinear::ShellBilinear(std::vector<double> wavenumbers, double a, double b, double c, double viscosity)
    : k_(std::move(wavenumbers)), a_(a), b_(b), c_(c) {
    require(!k_.empty(), "shell model needs at least one shell");
    require(viscosity > 0.0, "viscosity must be positive");
    double ratio = 1.0;
    for (std::size_t m = 1; m < k_.size(); ++m) ratio = std::max(ratio, k_[m] / k_[m - 1]);
    const double weight = std::abs(a) * (1.0 + ratio) + std::abs(b) + std::abs(a + c);
    // |(B(u,v),w)| <= weight/sqrt(nu) |u| |w| ||v|| and |u| <= ||u||_H alpha_min^{-1/4}
    trilinear_ = weight / (viscosity * k_.front());
}

void ShellBilinear::apply(const State& u, const State& v, State& out) const {
    const int n = n_shells();
    out.resize(2 * n);
    const cplx I{0.0, 1.0};
    const double ac = -a_ - c_;
    for (int m = 0; m < n; ++m) {
        const double k_next = m + 1 < n ? k_[m + 1] : 0.0;
        const double k_prev = m >= 1 ? k_[m - 1] : 0.0;
        cplx s = a_ * k_next * std::conj(shell_at(u, m + 1, n)) * shell_at(v, m + 2, n)
               + b_ * k_[m] * std::conj(shell_at(u, m - 1, n)) * shell_at(v, m + 1, n)
               + a_ * k_prev * shell_at(u, m - 1, n) * shell_at(v, m - 2, n)
               + ac * k_prev * shell_at(u, m - 2, n) * shell_at(v, m - 1, n);
        s *= I;
        out[2 * m] = s.real();
        out[2 * m + 1] = s.imag();
    }
}

void ShellBilinear::apply_first_transpose(const State& v, const State& w, State& out) const {
    const int n = n_shells();
    out.resize(2 * n);
    const cplx I{0.0, 1.0};
    const double ac = -a_ - c_;
    for (int m = 0; m < n; ++m) {
        const double k_m = k_[m];
        const double k_next = m + 1 < n ? k_[m + 1] : 0.0;
        // slots entering B as conj(x) keep v and conjugate w; the others conjugate v
        const cplx anti = a_ * k_m * shell_at(v, m + 1, n) * std::conj(shell_at(w, m - 1, n))
                        + b_ * k_next * shell_at(v, m + 2, n) * std::conj(shell_at(w, m + 1, n));
        const cplx holo = a_ * k_m * std::conj(shell_at(v, m - 1, n)) * shell_at(w, m + 1, n)
                        + ac * k_next * std::conj(shell_at(v, m + 1, n)) * shell_at(w, m + 2, n);
        const cplx s = I * (anti - holo);
        out[2 * m] = s.real();
        out[2 * m + 1] = s.imag();
    }
}

ModelSpec make_shell_model(const ShellParams& p) {
    require(p.n_shells >= 1, "shell: n_shells must be >= 1");
    require(p.k0 > 0.0, "shell: k0 must be positive");
    require(p.shell_ratio > 1.0, "shell: shell_ratio must exceed 1");
    require(p.viscosity > 0.0, "shell: viscosity must be positive");
    const double scale = std::abs(p.a) + std::abs(p.b) + std::abs(p.c);
    require(std::abs(p.a + p.b + p.c) <= 1e-12 * std::max(scale, 1.0),
            "shell: coefficients must satisfy a + b + c = 0");
    require(p.noise_gains.empty() || static_cast<int>(p.noise_gains.size()) == p.n_shells,
            "shell: noise_gains must have one entry per shell");

    std::vector<double> k(static_cast<std::size_t>(p.n_shells));
    for (int m = 0; m < p.n_shells; ++m) k[m] = p.k0 * std::pow(p.shell_ratio, m);

    Eigen::VectorXd alpha(2 * p.n_shells);
    DiagonalNoise noise;
    noise.gains.resize(2 * p.n_shells);
    for (int m = 0; m < p.n_shells; ++m) {
        alpha[2 * m] = alpha[2 * m + 1] = p.viscosity * k[m] * k[m];
        const double g = p.noise_gains.empty() ? 1.0 : p.noise_gains[m];
        noise.gains[2 * m] = noise.gains[2 * m + 1] = g;
    }
    noise.theta = p.noise_theta;
    noise.time_modulated = p.noise_time_modulated;

    ReactionTerm reaction;
    reaction.rho = p.reaction_rho;
    reaction.gamma = p.reaction_gamma;

    auto b = std::make_shared<ShellBilinear>(std::move(k), p.a, p.b, p.c, p.viscosity);
    return ModelSpec("shell", std::move(alpha), std::move(b), std::move(reaction), std::move(noise));
}

// ---------------------------------------------------------------------------
// Spectral Navier-Stokes

namespace {

std::array<double, 2> perp_unit(int kx, int ky) {
    const double r = std::hypot(static_cast<double>(kx), static_cast<double>(ky));
    return {-ky / r, kx / r};
}

bool in_half_plane(int kx, int ky) { return kx > 0 || (kx == 0 && ky > 0); }

}  // namespace

SpectralNSBilinear::SpectralNSBilinear(int max_wavenumber, double viscosity)
    : K_(max_wavenumber), N_(4 * max_wavenumber + 1) {
    require(K_ >= 1, "ns2d: max_wavenumber must be >= 1");
    require(viscosity > 0.0, "ns2d: viscosity must be positive");
    const int side = 2 * K_ + 1;
    half_of_full_.assign(static_cast<std::size_t>(side * side), -1);
    mirrored_.assign(static_cast<std::size_t>(side * side), false);
    for (int kx = 0; kx <= K_; ++kx)
        for (int ky = -K_; ky <= K_; ++ky)
            if (in_half_plane(kx, ky)) {
                const int h = static_cast<int>(modes_.size());
                modes_.push_back({kx, ky});
                half_of_full_[full_index(kx, ky)] = h;
                half_of_full_[full_index(-kx, -ky)] = h;
                mirrored_[full_index(-kx, -ky)] = true;
            }

    double inverse_sq_sum = 0.0;
    for (int kx = -K_; kx <= K_; ++kx)
        for (int ky = -K_; ky <= K_; ++ky)
            if (kx != 0 || ky != 0) inverse_sq_sum += 1.0 / (kx * kx + ky * ky);
    // |u|_inf <= sum |u_hat| <= sqrt(S_K / nu) ||u||, and |u|_4^2 <= |u|_inf |u|
    a0_ = std::sqrt(inverse_sq_sum / viscosity);
    // |(B(u1,u2),u3)| = |((u1.grad)u3, u2)| <= |u1|_4 |grad u3|_2 |u2|_4
    trilinear_ = 1.0 / std::sqrt(viscosity);

    for (int h = 0; h < static_cast<int>(modes_.size()); ++h) {
        const auto [kx, ky] = modes_[h];
        const auto ek = perp_unit(kx, ky);
        for (int px = -K_; px <= K_; ++px)
            for (int py = -K_; py <= K_; ++py) {
                if (px == 0 && py == 0) continue;
                const int qx = kx - px, qy = ky - py;
                if (std::abs(qx) > K_ || std::abs(qy) > K_ || (qx == 0 && qy == 0)) continue;
                const auto ep = perp_unit(px, py);
                const auto eq = perp_unit(qx, qy);
                const double coef = (ep[0] * qx + ep[1] * qy) * (eq[0] * ek[0] + eq[1] * ek[1]);
                if (coef == 0.0) continue;
                triads_.push_back({h, full_index(px, py), full_index(qx, qy), coef});
            }
    }

    phase_.resize(static_cast<std::size_t>(side * N_));
    for (int m = -K_; m <= K_; ++m)
        for (int j = 0; j < N_; ++j) {
            const double x = 2.0 * std::numbers::pi * j / N_;
            phase_[static_cast<std::size_t>((m + K_) * N_ + j)] = std::polar(1.0, m * x);
        }
}

void SpectralNSBilinear::full_amplitudes(const State& v, std::vector<cplx>& full) const {
    const int side = 2 * K_ + 1;
    full.assign(static_cast<std::size_t>(side * side), cplx{0.0, 0.0});
    const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    for (std::size_t f = 0; f < full.size(); ++f) {
        const int h = half_of_full_[f];
        if (h < 0) continue;
        const cplx a{v[2 * h] * inv_sqrt2, v[2 * h + 1] * inv_sqrt2};
        full[f] = mirrored_[f] ? -std::conj(a) : a;
    }
}

void SpectralNSBilinear::apply(const State& u, const State& v, State& out) const {
    thread_local std::vector<cplx> fu, fv, acc;
    full_amplitudes(u, fu);
    full_amplitudes(v, fv);
    acc.assign(modes_.size(), cplx{0.0, 0.0});
    // Written out in real arithmetic: std::complex products take a slow NaN-recovery path.
    for (const Triad& t : triads_) {
        const cplx x = fu[static_cast<std::size_t>(t.p)];
        const cplx y = fv[static_cast<std::size_t>(t.q)];
        const double re = x.real() * y.real() - x.imag() * y.imag();
        const double im = x.real() * y.imag() + x.imag() * y.real();
        cplx& a = acc[static_cast<std::size_t>(t.out)];
        a = {a.real() + t.coef * re, a.imag() + t.coef * im};
    }
    out.resize(static_cast<Eigen::Index>(2 * modes_.size()));
    // c_k = i * acc; coordinates are sqrt(2) (Re c_k, Im c_k)
    for (std::size_t h = 0; h < modes_.size(); ++h) {
        out[2 * h] = -std::numbers::sqrt2 * acc[h].imag();
        out[2 * h + 1] = std::numbers::sqrt2 * acc[h].real();
    }
}

void SpectralNSBilinear::velocity_on_grid(const State& v, std::vector<double>& ux, std::vector<double>& uy) const {
    thread_local std::vector<cplx> full;
    thread_local std::vector<cplx> partial;
    full_amplitudes(v, full);
    const int side = 2 * K_ + 1;
    const std::size_t cells = static_cast<std::size_t>(N_) * N_;
    ux.assign(cells, 0.0);
    uy.assign(cells, 0.0);
    for (int comp = 0; comp < 2; ++comp) {
        // partial[kx][iy] = sum_ky a(kx,ky) e_comp(k) exp(i ky y)
        partial.assign(static_cast<std::size_t>(side * N_), cplx{0.0, 0.0});
        for (int kx = -K_; kx <= K_; ++kx)
            for (int ky = -K_; ky <= K_; ++ky) {
                if (kx == 0 && ky == 0) continue;
                const double e = perp_unit(kx, ky)[comp];
                const cplx c = full[full_index(kx, ky)] * e;
                const cplx* ph = &phase_[static_cast<std::size_t>((ky + K_) * N_)];
                cplx* row = &partial[static_cast<std::size_t>((kx + K_) * N_)];
                for (int j = 0; j < N_; ++j)
                    row[j] = {row[j].real() + c.real() * ph[j].real() - c.imag() * ph[j].imag(),
                              row[j].imag() + c.real() * ph[j].imag() + c.imag() * ph[j].real()};
            }
        std::vector<double>& dst = comp == 0 ? ux : uy;
        for (int kx = -K_; kx <= K_; ++kx) {
            const cplx* ph = &phase_[static_cast<std::size_t>((kx + K_) * N_)];
            const cplx* row = &partial[static_cast<std::size_t>((kx + K_) * N_)];
            for (int i = 0; i < N_; ++i) {
                const double pr = ph[i].real(), pi = ph[i].imag();
                double* out = &dst[static_cast<std::size_t>(i * N_)];
                for (int j = 0; j < N_; ++j) out[j] += pr * row[j].real() - pi * row[j].imag();
            }
        }
    }
}

double SpectralNSBilinear::interp_norm(const State& v, const Eigen::VectorXd&) const {
    thread_local std::vector<double> ux, uy;
    velocity_on_grid(v, ux, uy);
    double s = 0.0;
    for (std::size_t i = 0; i < ux.size(); ++i) {
        const double m2 = ux[i] * ux[i] + uy[i] * uy[i];
        s += m2 * m2;
    }
    return std::pow(s / static_cast<double>(ux.size()), 0.25);
}

std::array<cplx, 2> SpectralNSBilinear::velocity_coefficient(const State& v, int kx, int ky) const {
    require(std::abs(kx) <= K_ && std::abs(ky) <= K_ && (kx != 0 || ky != 0), "ns2d: wavevector not retained");
    const int f = full_index(kx, ky);
    const int h = half_of_full_[f];
    cplx a{v[2 * h] / std::numbers::sqrt2, v[2 * h + 1] / std::numbers::sqrt2};
    if (mirrored_[f]) a = -std::conj(a);
    const auto e = perp_unit(kx, ky);
    return {a * e[0], a * e[1]};
}

double SpectralNSBilinear::divergence_residual(const State& v) const {
    double worst = 0.0;
    for (int kx = -K_; kx <= K_; ++kx)
        for (int ky = -K_; ky <= K_; ++ky) {
            if (kx == 0 && ky == 0) continue;
            const auto c = velocity_coefficient(v, kx, ky);
            worst = std::max(worst, std::abs(static_cast<double>(kx) * c[0] + static_cast<double>(ky) * c[1]));
        }
    return worst;
}

ModelSpec make_spectral_ns(const SpectralNSParams& p) {
    auto b = std::make_shared<SpectralNSBilinear>(p.max_wavenumber, p.viscosity);
    const auto& modes = b->modes();
    require(p.noise_gains.empty() || p.noise_gains.size() == modes.size(),
            "ns2d: noise_gains must have one entry per half-plane mode");
    const auto n = static_cast<Eigen::Index>(2 * modes.size());
    Eigen::VectorXd alpha(n);
    DiagonalNoise noise;
    noise.gains.resize(n);
    for (std::size_t h = 0; h < modes.size(); ++h) {
        const double k2 = modes[h][0] * modes[h][0] + modes[h][1] * modes[h][1];
        alpha[2 * h] = alpha[2 * h + 1] = p.viscosity * k2;
        const double g = p.noise_gains.empty() ? 1.0 : p.noise_gains[h];
        noise.gains[2 * h] = noise.gains[2 * h + 1] = g;
    }
    noise.theta = p.noise_theta;
    noise.time_modulated = p.noise_time_modulated;
    ReactionTerm reaction;
    reaction.rho = p.reaction_rho;
    reaction.gamma = p.reaction_gamma;
    return ModelSpec("ns2d", std::move(alpha), std::move(b), std::move(reaction), std::move(noise));
}

// ---------------------------------------------------------------------------
// Linear OU

ModelSpec make_linear_ou(const LinearOUParams& p) {
    require(p.dimension >= 1, "ou: dimension must be >= 1");
    const auto n = static_cast<std::size_t>(p.dimension);
    require(p.drift.size() == n, "ou: drift must have one entry per coordinate");
    require(p.noise.size() == n, "ou: noise must have one entry per coordinate");
    Eigen::VectorXd alpha(p.dimension);
    DiagonalNoise noise;
    noise.gains.resize(p.dimension);
    for (std::size_t i = 0; i < n; ++i) {
        require(p.drift[i] > 0.0, "ou: drift rates must be positive");
        alpha[static_cast<Eigen::Index>(i)] = p.drift[i];
        noise.gains[static_cast<Eigen::Index>(i)] = std::abs(p.noise[i]);
    }
    ReactionTerm reaction;
    if (p.reaction.size() != 0) {
        require(p.reaction.rows() == p.dimension && p.reaction.cols() == p.dimension, "ou: reaction must be n x n");
        if (!p.reaction.isZero(0.0)) reaction.matrix = p.reaction;
    }
    return ModelSpec("ou", std::move(alpha), std::make_shared<ZeroBilinear>(), std::move(reaction), std::move(noise));
}

}  // namespace hydroscale
