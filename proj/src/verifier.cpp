#include "hydroscale/verifier.hpp"

#include "hydroscale/rng.hpp"
#include "hydroscale/stats.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <cstdio>
#include <functional>

namespace hydroscale {

bool VerifierReport::pass() const {
    return std::all_of(conditions.begin(), conditions.end(), [](const ConditionRecord& c) { return c.pass; });
}

const ConditionRecord* VerifierReport::find(const std::string& name) const {
    for (const auto& c : conditions)
        if (c.name == name) return &c;
    return nullptr;
}

void VerifierReport::append(const VerifierReport& other) {
    conditions.insert(conditions.end(), other.conditions.begin(), other.conditions.end());
}

std::string VerifierReport::to_json() const {
    nlohmann::ordered_json j;
    j["model"] = model;
    j["slack"] = slack;
    j["pass"] = pass();
    auto& conds = j["conditions"];
    conds = nlohmann::ordered_json::object();
    for (const auto& c : conditions) {
        nlohmann::ordered_json r;
        r["max_residual"] = c.max_residual;
        r["empirical_constant"] = c.empirical_constant;
        r["declared_constant"] = c.declared_constant ? nlohmann::ordered_json(*c.declared_constant)
                                                     : nlohmann::ordered_json(nullptr);
        r["pass"] = c.pass;
        r["samples"] = c.samples;
        if (!c.note.empty()) r["note"] = c.note;
        conds[c.name] = std::move(r);
    }
    return j.dump(2);
}

State random_probe(Eigen::Index n, std::uint64_t seed, std::uint64_t index) {
    State v(n);
    const RngKey key = replica_seed(seed, index);
    for (Eigen::Index i = 0; i < n; i += 2) {
        const auto z = normal_pair(key, 0, static_cast<std::uint32_t>(i / 2));
        v[i] = z[0];
        if (i + 1 < n) v[i + 1] = z[1];
    }
    static constexpr std::array<double, 4> radii{0.0, 0.1, 1.0, 10.0};
    const double r = radii[index % radii.size()];
    const double len = v.norm();
    if (r > 0.0 && len > 0.0) v *= r / len;
    return v;
}

namespace {

// Streams used by the different checks; disjoint so that probe sets never
// coincide between checks run with the same seed.
constexpr std::uint64_t kStreams = 8;

State probe(const ModelSpec& model, std::uint64_t seed, std::size_t sample, std::uint64_t slot) {
    // The low two bits pick the rescale radius, cycling with the sample number.
    const auto s = static_cast<std::uint64_t>(sample);
    return random_probe(model.dimension(), seed, (s * kStreams + slot) * 4 + s % 4);
}

double uniform01(std::uint64_t seed, std::uint64_t index) {
    const auto r = philox4x32({static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x7fu, 0u},
                              {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
    return to_unit_open(r[0], r[1]);
}

ConditionRecord bound_record(std::string name, std::size_t samples, double empirical, double declared,
                             double slack) {
    ConditionRecord c;
    c.name = std::move(name);
    c.samples = samples;
    c.empirical_constant = empirical;
    c.declared_constant = declared;
    c.max_residual = std::max(0.0, empirical - declared);
    c.pass = std::isfinite(empirical) && empirical <= declared * slack;
    return c;
}

using LinearMap = std::function<void(const State&, State&)>;

/// Largest singular value of J by power iteration on J^T J.
double operator_norm(Eigen::Index n, const LinearMap& J, const LinearMap& Jt, std::uint64_t seed,
                     std::uint64_t index) {
    State x = random_probe(n, ~seed, index * 4 + 2);
    const double x0 = x.norm();
    if (x0 == 0.0) return 0.0;
    x /= x0;
    State y(n), z(n);
    double est = 0.0;
    for (int it = 0; it < 40; ++it) {
        J(x, y);
        est = std::max(est, y.norm());
        Jt(y, z);
        const double zn = z.norm();
        if (zn == 0.0) break;
        x = z / zn;
    }
    return est;
}

}  // namespace

VerifierReport verify_antisymmetry(const ModelSpec& model, std::size_t n_samples, std::uint64_t seed, double tol) {
    require(n_samples >= 1, "verify_antisymmetry: n_samples must be >= 1");
    VerifierReport rep;
    rep.model = model.name();
    double anti = 0.0, energy = 0.0, lin1 = 0.0, lin2 = 0.0;
    const Eigen::Index n = model.dimension();
    State b1(n), b2(n), b3(n);
    for (std::size_t s = 0; s < n_samples; ++s) {
        const State u1 = probe(model, seed, s, 0);
        const State u2 = probe(model, seed, s, 1);
        const State u3 = probe(model, seed, s, 2);
        const double n1 = std::sqrt(model.v_norm_sq(u1));
        const double n2 = std::sqrt(model.v_norm_sq(u2));
        const double n3 = std::sqrt(model.v_norm_sq(u3));
        const double t123 = model.trilinear(u1, u2, u3);
        const double t132 = model.trilinear(u1, u3, u2);
        anti = std::max(anti, std::abs(t123 + t132) / (1.0 + n1 * n2 * n3));
        energy = std::max(energy, std::abs(model.trilinear(u1, u1, u1)) / (1.0 + n1 * n1 * n1));

        const double a = 0.75 - 1.5 * uniform01(seed, 2 * s);
        const double b = 0.75 - 1.5 * uniform01(seed, 2 * s + 1);
        model.bilinear(State(a * u1 + b * u3), u2, b1);
        model.bilinear(u1, u2, b2);
        model.bilinear(u3, u2, b3);
        const double scale1 = std::abs(a) * b2.norm() + std::abs(b) * b3.norm();
        lin1 = std::max(lin1, (b1 - a * b2 - b * b3).norm() / std::max(scale1, 1e-300));
        model.bilinear(u2, State(a * u1 + b * u3), b1);
        model.bilinear(u2, u1, b2);
        model.bilinear(u2, u3, b3);
        const double scale2 = std::abs(a) * b2.norm() + std::abs(b) * b3.norm();
        lin2 = std::max(lin2, (b1 - a * b2 - b * b3).norm() / std::max(scale2, 1e-300));
    }
    auto rec = [&](const char* name, double r) {
        ConditionRecord c;
        c.name = name;
        c.samples = n_samples;
        c.max_residual = r;
        c.empirical_constant = r;
        c.declared_constant = tol;
        c.pass = std::isfinite(r) && r <= tol;
        rep.conditions.push_back(c);
    };
    rec("antisymmetry", anti);
    rec("energy_cancellation", energy);
    rec("bilinear_first_slot", lin1);
    rec("bilinear_second_slot", lin2);
    return rep;
}

VerifierReport verify_interpolation(const ModelSpec& model, std::size_t n_samples, std::uint64_t seed, double slack) {
    require(n_samples >= 1, "verify_interpolation: n_samples must be >= 1");
    VerifierReport rep;
    rep.model = model.name();
    rep.slack = slack;
    double a0_hat = 0.0;
    std::size_t used = 0;
    for (std::size_t s = 0; s < n_samples; ++s) {
        const auto nt = norms(model, probe(model, seed, s, 3));
        const double den = nt.h * nt.v;
        if (den < 1e-300) continue;
        a0_hat = std::max(a0_hat, nt.interp * nt.interp / den);
        ++used;
    }
    auto c = bound_record("interpolation_a0", used, a0_hat, model.bilinear_term().interp_constant(), slack);
    c.note = model.bilinear_term().interp_description();
    rep.conditions.push_back(c);
    return rep;
}

VerifierReport verify_bilinear_bound(const ModelSpec& model, const std::vector<double>& etas, std::size_t n_samples,
                                     std::uint64_t seed, double slack) {
    require(!etas.empty(), "verify_bilinear_bound: eta list must not be empty");
    for (double e : etas) require(std::isfinite(e) && e > 0.0, "verify_bilinear_bound: every eta must be > 0");
    require(n_samples >= 1, "verify_bilinear_bound: n_samples must be >= 1");
    VerifierReport rep;
    rep.model = model.name();
    rep.slack = slack;

    const double cb = std::max(model.bilinear_term().trilinear_constant(), kVanishingConstant);
    const double a0 = model.bilinear_term().interp_constant();
    const std::size_t ne = etas.size();
    std::vector<double> c24(ne, 0.0), c27(ne, 0.0), c28(ne, 0.0);
    double c25 = 0.0, c26 = 0.0, diff_identity = 0.0;
    std::size_t used24 = 0, used26 = 0, used27 = 0, used28 = 0;

    const Eigen::Index n = model.dimension();
    State bw(n), b1(n), b2(n);

    // With u3 optimal, the eta bound reduces to S(u1,u2) / (4 eta) where
    // S = (B, A^{-1} B) / (||u1||_H^2 ||u2||_H^2).
    auto best_ratio = [&](const State& x, const State& y) {
        const double nx = model.interp_norm(x), ny = model.interp_norm(y);
        const double den = nx * nx * ny * ny;
        if (!(den > 1e-300)) return 0.0;
        State b(n);
        model.bilinear(x, y, b);
        return b.cwiseAbs2().cwiseQuotient(model.a_spectrum()).sum() / den;
    };
    struct Pair {
        double ratio;
        State u1, u2;
    };
    constexpr std::size_t kStarts = 4;
    std::vector<Pair> best;
    auto offer = [&](double r, const State& x, const State& y) {
        if (best.size() < kStarts || r > best.back().ratio) {
            if (best.size() == kStarts) best.pop_back();
            best.push_back({r, x, y});
            std::stable_sort(best.begin(), best.end(), [](const Pair& a, const Pair& b) { return a.ratio > b.ratio; });
        }
    };

    for (std::size_t s = 0; s < n_samples; ++s) {
        const State u1 = probe(model, seed, s, 4);
        const State u2 = probe(model, seed, s, 5);
        const State u3 = probe(model, seed, s, 6);
        const auto n1 = norms(model, u1), n2 = norms(model, u2), n3 = norms(model, u3);
        const double t = std::abs(model.trilinear(u1, u2, u3));

        const double den24 = n1.interp * n1.interp * n2.interp * n2.interp;
        if (den24 > 1e-300) {
            ++used24;
            for (std::size_t i = 0; i < ne; ++i)
                c24[i] = std::max(c24[i], std::max(0.0, t - etas[i] * n3.v * n3.v) / den24);
            c25 = std::max(c25, std::max(0.0, t - n3.v * n3.v) / den24);
            // Companion sample u3 = A^{-1} B(u1,u2) / (2 eta) attains the sup over u3
            // for this pair; random u3 alone undersamples it badly.
            model.bilinear(u1, u2, bw);
            const State dir = bw.cwiseQuotient(model.a_spectrum());
            for (std::size_t i = 0; i < ne; ++i) {
                const State u3s = dir / (2.0 * etas[i]);
                const double ts = std::abs(bw.dot(u3s));
                c24[i] = std::max(c24[i], std::max(0.0, ts - etas[i] * model.v_norm_sq(u3s)) / den24);
            }
            const State u3s = dir / 2.0;
            c25 = std::max(c25, std::max(0.0, std::abs(bw.dot(u3s)) - model.v_norm_sq(u3s)) / den24);
            offer(bw.dot(dir) / den24, u1, u2);
        }
        const double den26 = n1.interp * n2.v * n3.interp;
        if (den26 > 1e-300) {
            ++used26;
            c26 = std::max(c26, t / den26);
        }

        // |(B(u1,u1),u2)| against eta ||u1||^2 + C |u1|^2 ||u2||_H^4
        const double t7 = std::abs(model.trilinear(u1, u1, u2));
        const double den27 = n1.h * n1.h * std::pow(n2.interp, 4);
        if (den27 > 1e-300) {
            ++used27;
            for (std::size_t i = 0; i < ne; ++i)
                c27[i] = std::max(c27[i], std::max(0.0, t7 - etas[i] * n1.v * n1.v) / den27);
        }

        // |(B(u1,u1) - B(u3,u3), w)| with w = u1 - u3, against eta ||w||^2 + C |w|^2 ||u3||_H^4
        const State w = u1 - u3;
        model.bilinear(u1, u1, b1);
        model.bilinear(u3, u3, b2);
        const double lhs = std::abs((b1 - b2).dot(w));
        const auto nw = norms(model, w);
        model.bilinear(w, w, bw);
        const double reduced = std::abs(bw.dot(u3));
        diff_identity = std::max(diff_identity, std::abs(lhs - reduced) / (1.0 + nw.v * nw.v * n3.v));
        const double den28 = nw.h * nw.h * std::pow(n3.interp, 4);
        if (den28 > 1e-300) {
            ++used28;
            for (std::size_t i = 0; i < ne; ++i)
                c28[i] = std::max(c28[i], std::max(0.0, lhs - etas[i] * nw.v * nw.v) / den28);
        }
    }

    // Block ascent from the best sampled pairs; random pairs rarely come close
    // to the sup, so the raw maximum drifts with the seed. For one slot fixed,
    // (B, A^{-1} B) = x^T M x and |x| ||x|| <= (t |x|^2 + ||x||^2 / t) / 2, so
    // the top eigenvector of M against diag(t + alpha / t) is a monotone proposal
    // for the geometric-mean norm and a heuristic one otherwise.
    const Eigen::VectorXd& alpha = model.a_spectrum();
    auto propose = [&](const State& x, const State& fixed, bool first) {
        Eigen::MatrixXd cols(n, n);
        State e = State::Zero(n), b(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            e[j] = 1.0;
            if (first) model.bilinear(e, fixed, b);
            else model.bilinear(fixed, e, b);
            cols.col(j) = b;
            e[j] = 0.0;
        }
        const double t = std::sqrt(std::max(model.v_norm_sq(x), 1e-300) / std::max(x.squaredNorm(), 1e-300));
        const Eigen::VectorXd dinv = (t + alpha.array() / t).rsqrt().matrix();
        const Eigen::MatrixXd scaled = cols * dinv.asDiagonal();
        const Eigen::MatrixXd m = scaled.transpose() * alpha.cwiseInverse().asDiagonal() * scaled;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
        return State(dinv.cwiseProduct(es.eigenvectors().col(n - 1)));
    };
    // Random pairs supported on windows of neighbouring scales seed every
    // scale, so the ascent does not hinge on the seed.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index i, Eigen::Index j) { return model.a_spectrum()[i] < model.a_spectrum()[j]; });
    constexpr Eigen::Index kWindow = 6, kStride = 2, kDraws = 4;
    std::uint64_t draw = 0;
    for (Eigen::Index lo = 0; lo < n; lo += kStride)
        for (Eigen::Index d = 0; d < kDraws; ++d) {
            const State rx = random_probe(n, seed, ((n_samples + draw++) * kStreams + 7) * 4);
            const State ry = random_probe(n, seed, ((n_samples + draw++) * kStreams + 7) * 4);
            State x = State::Zero(n), y = State::Zero(n);
            for (Eigen::Index k = lo; k < std::min(n, lo + kWindow); ++k) {
                x[order[k]] = rx[order[k]];
                y[order[k]] = ry[order[k]];
            }
            offer(best_ratio(x, y), x, y);
        }
    constexpr std::size_t kRounds = 12;
    for (Pair& p : best) {
        for (std::size_t it = 0; it < kRounds; ++it) {
            const bool first = it % 2 == 0;
            State x = first ? p.u1 : p.u2;
            const State y = first ? p.u2 : p.u1;
            x = propose(x, y, first);
            const double r = first ? best_ratio(x, y) : best_ratio(y, x);
            if (!(r > p.ratio)) continue;
            p.ratio = r;
            (first ? p.u1 : p.u2) = std::move(x);
        }
        for (std::size_t i = 0; i < ne; ++i) c24[i] = std::max(c24[i], p.ratio / (4.0 * etas[i]));
        c25 = std::max(c25, p.ratio / 4.0);
    }

    auto eta_tag = [](double e) {
        char buf[48];
        std::snprintf(buf, sizeof buf, "%.6g", e);
        return std::string(buf);
    };
    for (std::size_t i = 0; i < ne; ++i)
        rep.conditions.push_back(
            bound_record("bilinear_eta[" + eta_tag(etas[i]) + "]", used24, c24[i], cb * cb / (4.0 * etas[i]), slack));
    rep.conditions.push_back(bound_record("bilinear_two_constant", used24, c25, cb * cb / 4.0, slack));
    rep.conditions.push_back(bound_record("trilinear_homogeneous", used26, c26, cb, slack));
    const double young = 27.0 * std::pow(cb, 4) * a0 * a0 / 256.0;
    for (std::size_t i = 0; i < ne; ++i)
        rep.conditions.push_back(bound_record("self_interaction_eta[" + eta_tag(etas[i]) + "]", used27, c27[i],
                                              young / std::pow(etas[i], 3), slack));
    for (std::size_t i = 0; i < ne; ++i)
        rep.conditions.push_back(bound_record("monotonicity_eta[" + eta_tag(etas[i]) + "]", used28, c28[i],
                                              young / std::pow(etas[i], 3), slack));
    ConditionRecord id;
    id.name = "difference_identity";
    id.samples = n_samples;
    id.max_residual = diff_identity;
    id.empirical_constant = diff_identity;
    id.declared_constant = 1e-10;
    id.pass = diff_identity <= 1e-10;
    rep.conditions.push_back(id);
    return rep;
}

VerifierReport verify_noise_and_reaction(const ModelSpec& model, const CovarianceSpec& cov, std::size_t n_samples,
                                         std::uint64_t seed, double slack) {
    check_compatible(model, cov);
    require(n_samples >= 1, "verify_noise_and_reaction: n_samples must be >= 1");
    VerifierReport rep;
    rep.model = model.name();
    rep.slack = slack;
    const ModelConstants k = model.constants(cov.q);
    const Eigen::Index n = model.dimension();
    constexpr double kTimeSpan = 10.0;

    double k0_hat = 0.0, l1_hat = 0.0, r0_hat = 0.0, r1_hat = 0.0, rp1_hat = 0.0, rplip_hat = 0.0, holder_hat = 0.0;
    static constexpr std::array<double, 3> deltas{1e-3, 1e-4, 1e-5};
    std::array<double, 3> fd_sum{0.0, 0.0, 0.0};
    std::size_t fd_exact = 0, fd_curved = 0;
    double fd_exact_worst = 0.0;

    State r(n), rv(n), jw(n), rd(n), tmp(n);
    const State zero = State::Zero(n);
    for (std::size_t s = 0; s < n_samples; ++s) {
        const double t = kTimeSpan * uniform01(seed, 4 * s);
        const double t2 = kTimeSpan * uniform01(seed, 4 * s + 1);
        const State u = probe(model, seed, s, 0);
        const State v = probe(model, seed, s, 1);
        const State w = probe(model, seed, s, 2);
        const double hu = u.norm();
        const double duv = (u - v).norm();

        k0_hat = std::max(k0_hat, lq_norm_sq(model, cov, t, u) - k.K1 * hu * hu);
        if (duv > 1e-300) l1_hat = std::max(l1_hat, lq_distance_sq(model, cov, t, u, t, v) / (duv * duv));

        model.reaction(t, zero, r);
        r0_hat = std::max(r0_hat, r.norm());
        model.reaction(t, u, r);
        model.reaction(t, v, rv);
        if (duv > 1e-300) r1_hat = std::max(r1_hat, (r - rv).norm() / duv);

        const std::uint64_t pi = static_cast<std::uint64_t>(s) * kStreams + 7;
        const double jnorm = operator_norm(
            n, [&](const State& x, State& y) { model.reaction_jvp(t, u, x, y); },
            [&](const State& y, State& x) { model.reaction_vjp(t, u, y, x); }, seed, pi);
        rp1_hat = std::max(rp1_hat, jnorm - k.Rp0 * hu);

        if (duv > 1e-300) {
            State y1(n), y2(n);
            const double dnorm = operator_norm(
                n,
                [&](const State& x, State& y) {
                    model.reaction_jvp(t, u, x, y1);
                    model.reaction_jvp(t, v, x, y2);
                    y = y1 - y2;
                },
                [&](const State& y, State& x) {
                    model.reaction_vjp(t, u, y, y1);
                    model.reaction_vjp(t, v, y, y2);
                    x = y1 - y2;
                },
                seed, pi + 1);
            rplip_hat = std::max(rplip_hat, dnorm / duv);
        }

        const double dt = std::abs(t - t2);
        if (dt > 1e-300) {
            const double num = std::sqrt(lq_distance_sq(model, cov, t, u, t2, u));
            holder_hat = std::max(holder_hat, num / ((1.0 + norms(model, u).v) * std::pow(dt, k.kappa)));
        }

        // Directional derivative consistency.
        model.reaction_jvp(t, u, w, jw);
        std::array<double, 3> err{};
        for (std::size_t i = 0; i < deltas.size(); ++i) {
            model.reaction(t, State(u + deltas[i] * w), rd);
            err[i] = ((rd - r) / deltas[i] - jw).norm();
        }
        const double scale = 1.0 + jw.norm() + r.norm();
        if (*std::max_element(err.begin(), err.end()) <= 1e-7 * scale) {
            ++fd_exact;
            fd_exact_worst = std::max(fd_exact_worst, *std::max_element(err.begin(), err.end()) / scale);
        } else {
            ++fd_curved;
            for (std::size_t i = 0; i < deltas.size(); ++i) fd_sum[i] += err[i];
        }
    }

    rep.conditions.push_back(bound_record("noise_growth_K0", n_samples, k0_hat, k.K0, slack));
    rep.conditions.push_back(bound_record("noise_lipschitz_L1", n_samples, l1_hat, k.L1, slack));
    rep.conditions.push_back(bound_record("reaction_at_zero_R0", n_samples, r0_hat, k.R0, slack));
    rep.conditions.push_back(bound_record("reaction_lipschitz_R1", n_samples, r1_hat, k.R1, slack));
    rep.conditions.push_back(bound_record("reaction_derivative_growth", n_samples, rp1_hat, k.Rp1, slack));
    rep.conditions.push_back(bound_record("reaction_derivative_lipschitz", n_samples, rplip_hat, k.Rp_lipschitz, slack));
    auto hold = bound_record("noise_time_holder", n_samples, holder_hat, k.holder, slack);
    hold.note = "kappa = " + std::to_string(k.kappa);
    rep.conditions.push_back(hold);

    ConditionRecord fd;
    fd.name = "reaction_derivative_consistency";
    fd.samples = n_samples;
    if (fd_curved == 0) {
        fd.max_residual = fd_exact_worst;
        fd.empirical_constant = 1.0;
        fd.pass = true;
        fd.note = "exact to round-off on every sample";
    } else {
        std::vector<double> dx(deltas.begin(), deltas.end());
        std::vector<double> ey(fd_sum.begin(), fd_sum.end());
        const auto fit = loglog_fit(dx, ey);
        fd.empirical_constant = fit.slope;
        fd.max_residual = fd_sum.back() / static_cast<double>(fd_curved);
        fd.declared_constant = 1.0;
        fd.pass = std::isfinite(fit.slope) && fit.slope >= 0.9 && fit.slope <= 1.1;
        fd.note = "fitted order of the finite-difference error over " + std::to_string(fd_curved) +
                  " curved samples (" + std::to_string(fd_exact) + " exact)";
        if (!fd.pass) fd.note += "; finite-difference ratio did not converge at first order";
    }
    rep.conditions.push_back(fd);
    return rep;
}

VerifierReport verify_all(const ModelSpec& model, const CovarianceSpec& cov, std::size_t n_samples,
                          std::uint64_t seed, double slack, double tol) {
    VerifierReport rep = verify_antisymmetry(model, n_samples, seed, tol);
    rep.slack = slack;
    rep.append(verify_interpolation(model, n_samples, seed, slack));
    rep.append(verify_bilinear_bound(model, {0.05, 0.25, 1.0}, n_samples, seed, slack));
    rep.append(verify_noise_and_reaction(model, cov, n_samples, seed, slack));
    return rep;
}

}  // namespace hydroscale
