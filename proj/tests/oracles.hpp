#pragma once

// Reference computations used by the tests. None of these call into the
// library's operator code; they rebuild each quantity from its definition.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

namespace oracle {

// Random123 known-answer vectors for Philox4x32-10.
struct PhiloxVector {
    std::array<std::uint32_t, 4> counter;
    std::array<std::uint32_t, 2> key;
    std::array<std::uint32_t, 4> expected;
};

inline const std::array<PhiloxVector, 3> kPhiloxVectors{{
    {{0u, 0u, 0u, 0u}, {0u, 0u}, {0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}},
    {{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
     {0xffffffffu, 0xffffffffu},
     {0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}},
    {{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
     {0xa4093822u, 0x299f31d0u},
     {0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}},
}};

// Scalar OU du = -u dt + dW, q = s = 1.
inline double ou_variance(double t) { return -std::expm1(-2.0 * t) / 2.0; }
// Minimal control energy to reach c at T = 1 (controllability Gramian).
inline double ou_rate(double c) { return c * c / (2.0 * ou_variance(1.0)); }
// X^h(T) for constant h' = 1, noise s, covariance q.
inline double ou_skeleton_terminal(double s, double q, double T) { return s * std::sqrt(q) * -std::expm1(-T); }

// Shell trilinear form by triple loop over (i, j, m) with the interaction
// selected by index differences. u, v, w hold (re, im) pairs per shell.
inline double shell_trilinear(const std::vector<double>& u, const std::vector<double>& v,
                              const std::vector<double>& w, double k0, double ratio, double a, double b, double c) {
    using cd = std::complex<double>;
    const int n = static_cast<int>(u.size() / 2);
    auto z = [](const std::vector<double>& x, int i) { return cd(x[2 * i], x[2 * i + 1]); };
    auto k = [&](int i) { return k0 * std::pow(ratio, i); };
    double total = 0.0;
    for (int m = 0; m < n; ++m)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                cd term = 0.0;
                if (i == m + 1 && j == m + 2) term += a * k(m + 1) * std::conj(z(u, i)) * z(v, j);
                if (i == m - 1 && j == m + 1) term += b * k(m) * std::conj(z(u, i)) * z(v, j);
                if (i == m - 1 && j == m - 2) term += a * k(m - 1) * z(u, i) * z(v, j);
                if (i == m - 2 && j == m - 1) term -= (a + c) * k(m - 1) * z(u, i) * z(v, j);
                if (term == cd(0.0)) continue;
                // real inner product of the (re, im) pair with i * term
                total += std::real(std::conj(z(w, m)) * cd(0.0, 1.0) * term);
            }
    return total;
}

// Velocity field of a truncated 2D state. Half-plane wavevectors (k_x > 0,
// or k_x = 0 and k_y > 0) with |k|_inf <= K, enumerated k_x-major then k_y
// ascending. Coordinates sqrt(2)(Re a, Im a) along e_k = (-k_y, k_x)/|k|.
struct Field2D {
    int K;
    std::vector<std::array<int, 2>> modes;
    std::vector<std::complex<double>> amp;

    Field2D(int max_k, const std::vector<double>& x) : K(max_k) {
        for (int kx = 0; kx <= K; ++kx)
            for (int ky = -K; ky <= K; ++ky)
                if (kx > 0 || (kx == 0 && ky > 0)) modes.push_back({kx, ky});
        for (std::size_t i = 0; i < modes.size(); ++i)
            amp.emplace_back(x[2 * i] / std::sqrt(2.0), x[2 * i + 1] / std::sqrt(2.0));
    }

    // velocity and its gradient at (x, y): {u_x, u_y, du_x/dx, du_x/dy, du_y/dx, du_y/dy}
    std::array<double, 6> at(double x, double y) const {
        std::array<double, 6> out{};
        for (std::size_t i = 0; i < modes.size(); ++i) {
            const double kx = modes[i][0], ky = modes[i][1];
            const double r = std::hypot(kx, ky);
            const double ex = -ky / r, ey = kx / r;
            const std::complex<double> ph = amp[i] * std::polar(1.0, kx * x + ky * y);
            const std::complex<double> dph = std::complex<double>(0.0, 1.0) * ph;
            // field = 2 Re(a e_k exp(i k.x))
            out[0] += 2.0 * ex * ph.real();
            out[1] += 2.0 * ey * ph.real();
            out[2] += 2.0 * ex * kx * dph.real();
            out[3] += 2.0 * ex * ky * dph.real();
            out[4] += 2.0 * ey * kx * dph.real();
            out[5] += 2.0 * ey * ky * dph.real();
        }
        return out;
    }
};

// mean over the torus of ((u . grad) v) . w, exact on a (3K+2)^2 grid since
// the integrand is a trigonometric polynomial of degree 3K.
inline double ns_trilinear(int K, const std::vector<double>& u, const std::vector<double>& v,
                           const std::vector<double>& w) {
    const Field2D fu(K, u), fv(K, v), fw(K, w);
    const int N = 3 * K + 2;
    const double h = 2.0 * M_PI / N;
    double s = 0.0;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            const auto a = fu.at(i * h, j * h);
            const auto b = fv.at(i * h, j * h);
            const auto c = fw.at(i * h, j * h);
            const double adv_x = a[0] * b[2] + a[1] * b[3];
            const double adv_y = a[0] * b[4] + a[1] * b[5];
            s += adv_x * c[0] + adv_y * c[1];
        }
    return s / (N * N);
}

// mean over the torus of u . v on the same grid (degree 2K).
inline double ns_inner(int K, const std::vector<double>& u, const std::vector<double>& v) {
    const Field2D fu(K, u), fv(K, v);
    const int N = 2 * K + 2;
    const double h = 2.0 * M_PI / N;
    double s = 0.0;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            const auto a = fu.at(i * h, j * h);
            const auto b = fv.at(i * h, j * h);
            s += a[0] * b[0] + a[1] * b[1];
        }
    return s / (N * N);
}

// Upper Gaussian tail P(N(0,1) >= x).
inline double normal_tail(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

}  // namespace oracle
