#include "ustm/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>

#include "ustm/pairwise.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ustm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double sq_norm(const std::vector<double> &v) {
    double s = 0.0;
    for (double x : v)
        s += x * x;
    return s;
}

// log-sum-exp over a fixed-order term list.
double lse(const std::vector<double> &terms) {
    double mx = kNegInf;
    for (double t : terms)
        mx = std::max(mx, t);
    if (mx == kNegInf)
        return kNegInf;
    double s = 0.0;
    for (double t : terms)
        s += std::exp(t - mx);
    return mx + std::log(s);
}

struct GradAccumulator {
    // d ln P_bit / d parameter, assembled as a softmax-weighted average of
    // per-pair relative gradients; weights never leave log space.
    std::vector<std::vector<double>> dlambda, dB_phi, dB_theta, dA_phi, dA_theta;

    explicit GradAccumulator(const Constellation &c) {
        const size_t nb = static_cast<size_t>(c.blocks());
        const size_t np = static_cast<size_t>(c.M) * (c.M - 1) / 2;
        dlambda.assign(nb, std::vector<double>(c.M, 0.0));
        dB_phi.assign(nb, std::vector<double>(np, 0.0));
        dB_theta.assign(nb, std::vector<double>(c.M, 0.0));
        dA_phi.assign(nb, std::vector<double>(np, 0.0));
        dA_theta.assign(nb, std::vector<double>(c.M, 0.0));
    }

    void axpy_angles(std::vector<double> &phi_dst, std::vector<double> &theta_dst, double w,
                     const PairGradient &g) {
        for (size_t i = 0; i < g.dphi.size(); ++i)
            phi_dst[i] += w * g.dphi[i];
        for (size_t i = 0; i < g.dtheta.size(); ++i)
            theta_dst[i] += w * g.dtheta[i];
    }
};

// d ln P_bit / d(params) at one SNR, direct pairwise sum, any structure.
GradAccumulator dlog_pbit_direct(const Constellation &c, double rho, int n_rx) {
    const long long n = c.size();
    const int L = c.L;
    std::vector<CMatrix> v(static_cast<size_t>(n));
    for (int q = 0; q < c.blocks(); ++q)
        for (int l = 0; l < L; ++l)
            v[static_cast<size_t>(q) * L + l] = signal_matrix(c, q, l);

    // Pass 1: canonical per-pair log terms.
    std::vector<double> terms;
    terms.reserve(static_cast<size_t>(n * (n - 1) / 2));
    for (long long i = 0; i < n - 1; ++i)
        for (long long j = i + 1; j < n; ++j)
            terms.push_back(std::log(static_cast<double>(hamming_distance(i, j))) +
                            bound_pair_log(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)],
                                           rho, n_rx));
    const double z = lse(terms);

    // Pass 2: softmax-weighted relative gradients; each parameter block
    // moves the pair through its own invariance identification and resolvent.
    GradAccumulator acc(c);
    size_t t = 0;
    for (long long i = 0; i < n - 1; ++i) {
        const int p = static_cast<int>(i / L), lp = static_cast<int>(i % L);
        for (long long j = i + 1; j < n; ++j, ++t) {
            const int q = static_cast<int>(j / L), lq = static_cast<int>(j % L);
            const double w = std::exp(terms[t] - z);
            if (w == 0.0)
                continue;
            if (p == q) {
                // Same block: only the shared exponents of this block move;
                // the frame unitaries cancel. Net diagonal power is lq - lp.
                const long long k = lq - lp;
                const BoundContext ctx = bound_identity(diagonal_power(c, p, -k), rho, n_rx);
                const PairGradient g = grad_at_identity_relative(ctx, L);
                for (int m = 1; m < c.M; ++m)
                    acc.dlambda[p][m] += w * k * g.dlambda_scale[m];
                continue;
            }
            const CMatrix &vi = v[static_cast<size_t>(i)];
            const CMatrix &vj = v[static_cast<size_t>(j)];
            // B_p (right-multiplied update of the first slot).
            const CMatrix phi_bp = vi.adjoint() * vj;
            {
                const PairGradient g =
                    grad_at_identity_relative(bound_identity(phi_bp, rho, n_rx), L);
                acc.axpy_angles(acc.dB_phi[p], acc.dB_theta[p], w, g);
            }
            // B_q: symmetric role.
            {
                const PairGradient g =
                    grad_at_identity_relative(bound_identity(phi_bp.adjoint(), rho, n_rx), L);
                acc.axpy_angles(acc.dB_phi[q], acc.dB_theta[q], w, g);
            }
            // A_p: A_p <- A_p U(...): Phi = A_p^H V_j (Lambda_p^l B_p)^H.
            {
                const CMatrix phi =
                    c.A[p].adjoint() * vj * c.B[p].adjoint() * diagonal_power(c, p, -lp);
                const PairGradient g =
                    grad_at_identity_relative(bound_identity(phi, rho, n_rx), L);
                acc.axpy_angles(acc.dA_phi[p], acc.dA_theta[p], w, g);
            }
            // A_q.
            {
                const CMatrix phi =
                    c.A[q].adjoint() * vi * c.B[q].adjoint() * diagonal_power(c, q, -lq);
                const PairGradient g =
                    grad_at_identity_relative(bound_identity(phi, rho, n_rx), L);
                acc.axpy_angles(acc.dA_phi[q], acc.dA_theta[q], w, g);
            }
            // lambda_p: multiplicative diagonal perturbation with power lp.
            if (lp != 0) {
                const CMatrix phi =
                    diagonal_power(c, p, -lp) * (c.A[p].adjoint() * vj) * c.B[p].adjoint();
                const PairGradient g =
                    grad_at_identity_relative(bound_identity(phi, rho, n_rx), L);
                for (int m = 1; m < c.M; ++m)
                    acc.dlambda[p][m] += w * lp * g.dlambda_scale[m];
            }
            // lambda_q, power lq.
            if (lq != 0) {
                const CMatrix phi =
                    diagonal_power(c, q, -lq) * (c.A[q].adjoint() * vi) * c.B[q].adjoint();
                const PairGradient g =
                    grad_at_identity_relative(bound_identity(phi, rho, n_rx), L);
                for (int m = 1; m < c.M; ++m)
                    acc.dlambda[q][m] += w * lq * g.dlambda_scale[m];
            }
        }
    }
    return acc;
}

struct FastGradAccumulator {
    std::vector<double> dlambda;
    std::vector<std::vector<double>> dB_phi, dB_theta;
};

FastGradAccumulator dlog_pbit_fast(const Constellation &c, double rho, int n_rx) {
    const int L = c.L, nb = c.blocks();
    const WeightTable wt = weight_table(L);

    struct CrossTerm {
        int p, q;
        long long k;
    };
    std::vector<CrossTerm> cross;
    for (int p = 0; p < nb - 1; ++p)
        for (int q = p + 1; q < nb; ++q)
            for (long long k = -(L - 1); k <= L - 1; ++k)
                cross.push_back({p, q, k});

    std::vector<double> terms;
    terms.reserve(static_cast<size_t>(L - 1) + cross.size());
    for (int k = 1; k < L; ++k)
        terms.push_back(std::log(static_cast<double>(nb) * wt.w[k]) +
                        bound_identity_log(diagonal_power(c, 0, k), rho, n_rx));
    for (const CrossTerm &ct : cross) {
        const long long mult =
            wt.w[std::llabs(ct.k)] + (L - std::llabs(ct.k)) * hamming_distance(ct.p, ct.q);
        terms.push_back(std::log(static_cast<double>(mult)) +
                        bound_pair_log(c.B[ct.p], diagonal_power(c, 0, ct.k) * c.B[ct.q], rho,
                                       n_rx));
    }
    const double z = lse(terms);

    FastGradAccumulator acc;
    acc.dlambda.assign(c.M, 0.0);
    acc.dB_phi.assign(nb, std::vector<double>(static_cast<size_t>(c.M) * (c.M - 1) / 2, 0.0));
    acc.dB_theta.assign(nb, std::vector<double>(c.M, 0.0));

    for (int k = 1; k < L; ++k) {
        const double w = std::exp(terms[static_cast<size_t>(k - 1)] - z);
        if (w == 0.0)
            continue;
        const BoundContext ctx = bound_identity(diagonal_power(c, 0, -k), rho, n_rx);
        const PairGradient g = grad_at_identity_relative(ctx, L);
        for (int m = 1; m < c.M; ++m)
            acc.dlambda[m] += w * k * g.dlambda_scale[m];
    }
    for (size_t t = 0; t < cross.size(); ++t) {
        const double w = std::exp(terms[static_cast<size_t>(L - 1) + t] - z);
        if (w == 0.0)
            continue;
        const auto [p, q, k] = cross[t];
        const CMatrix phi = c.B[p].adjoint() * diagonal_power(c, 0, k) * c.B[q];
        {
            const PairGradient g = grad_at_identity_relative(bound_identity(phi, rho, n_rx), L);
            for (size_t i = 0; i < g.dphi.size(); ++i)
                acc.dB_phi[p][i] += w * g.dphi[i];
            for (int i = 0; i < c.M; ++i)
                acc.dB_theta[p][i] += w * g.dtheta[i];
        }
        {
            const PairGradient g =
                grad_at_identity_relative(bound_identity(phi.adjoint(), rho, n_rx), L);
            for (size_t i = 0; i < g.dphi.size(); ++i)
                acc.dB_phi[q][i] += w * g.dphi[i];
            for (int i = 0; i < c.M; ++i)
                acc.dB_theta[q][i] += w * g.dtheta[i];
        }
        {
            const CMatrix psi = c.B[p] * c.B[q].adjoint() * diagonal_power(c, 0, -k);
            const PairGradient g = grad_at_identity_relative(bound_identity(psi, rho, n_rx), L);
            for (int m = 1; m < c.M; ++m)
                acc.dlambda[m] += w * k * g.dlambda_scale[m];
        }
    }
    return acc;
}

double zeta_chain_factor(const SnrWindow &w) {
    // zeta = (log10 P2 + log10 P1) * dlog10(rho); each log10 P contributes
    // dlogP/ln(10) to the derivative.
    return (std::log10(w.rho2) - std::log10(w.rho1)) / std::numbers::ln10;
}

} // namespace

double ZetaGradient::norm() const {
    double s = 0.0;
    for (const auto &v : dlambda)
        s += sq_norm(v);
    for (const auto &v : dB_phi)
        s += sq_norm(v);
    for (const auto &v : dB_theta)
        s += sq_norm(v);
    for (const auto &v : dA_phi)
        s += sq_norm(v);
    for (const auto &v : dA_theta)
        s += sq_norm(v);
    return std::sqrt(s);
}

double FastZetaGradient::norm() const {
    double s = sq_norm(dlambda);
    for (const auto &v : dB_phi)
        s += sq_norm(v);
    for (const auto &v : dB_theta)
        s += sq_norm(v);
    return std::sqrt(s);
}

ZetaGradient grad_zeta(const Constellation &c, const SnrWindow &window, int n_rx) {
    const double f = zeta_chain_factor(window);
    ZetaGradient g;
    g.M = c.M;
    const GradAccumulator a1 = dlog_pbit_direct(c, window.rho1, n_rx);
    const GradAccumulator a2 = dlog_pbit_direct(c, window.rho2, n_rx);
    auto combine = [&](const std::vector<std::vector<double>> &x,
                       const std::vector<std::vector<double>> &y) {
        std::vector<std::vector<double>> r = x;
        for (size_t i = 0; i < r.size(); ++i)
            for (size_t j = 0; j < r[i].size(); ++j)
                r[i][j] = f * (x[i][j] + y[i][j]);
        return r;
    };
    g.dlambda = combine(a1.dlambda, a2.dlambda);
    g.dB_phi = combine(a1.dB_phi, a2.dB_phi);
    g.dB_theta = combine(a1.dB_theta, a2.dB_theta);
    g.dA_phi = combine(a1.dA_phi, a2.dA_phi);
    g.dA_theta = combine(a1.dA_theta, a2.dA_theta);
    // Block 0 frame matrices are pinned to the identity.
    std::fill(g.dB_phi[0].begin(), g.dB_phi[0].end(), 0.0);
    std::fill(g.dB_theta[0].begin(), g.dB_theta[0].end(), 0.0);
    std::fill(g.dA_phi[0].begin(), g.dA_phi[0].end(), 0.0);
    std::fill(g.dA_theta[0].begin(), g.dA_theta[0].end(), 0.0);
    return g;
}

FastZetaGradient grad_zeta_fast(const Constellation &c, const SnrWindow &window, int n_rx) {
    if (!c.common_diagonal())
        throw StructureViolation("grad_zeta_fast: requires the common-diagonal structure");
    const double f = zeta_chain_factor(window);
    const FastGradAccumulator a1 = dlog_pbit_fast(c, window.rho1, n_rx);
    const FastGradAccumulator a2 = dlog_pbit_fast(c, window.rho2, n_rx);
    FastZetaGradient g;
    g.M = c.M;
    g.dlambda.assign(c.M, 0.0);
    for (int m = 0; m < c.M; ++m)
        g.dlambda[m] = f * (a1.dlambda[m] + a2.dlambda[m]);
    g.dB_phi.assign(c.blocks(), {});
    g.dB_theta.assign(c.blocks(), {});
    for (int q = 0; q < c.blocks(); ++q) {
        g.dB_phi[q].assign(a1.dB_phi[q].size(), 0.0);
        g.dB_theta[q].assign(a1.dB_theta[q].size(), 0.0);
        if (q == 0)
            continue;
        for (size_t i = 0; i < g.dB_phi[q].size(); ++i)
            g.dB_phi[q][i] = f * (a1.dB_phi[q][i] + a2.dB_phi[q][i]);
        for (size_t i = 0; i < g.dB_theta[q].size(); ++i)
            g.dB_theta[q][i] = f * (a1.dB_theta[q][i] + a2.dB_theta[q][i]);
    }
    return g;
}

void DesignTrace::write_csv(std::ostream &out) const {
    out << "stage,iter,zeta,grad_norm,step\n";
    char line[160];
    for (const TraceRow &r : rows) {
        std::snprintf(line, sizeof(line), "%c,%d,%.17g,%.17g,%.17g\n", r.stage, r.iter, r.zeta,
                      r.grad_norm, r.step);
        out << line;
    }
}

namespace {

double wrap_lambda(double x, double L) {
    double r = std::fmod(x, L);
    if (r < 0.0)
        r += L;
    return r;
}

CMatrix angle_step(int M, const std::vector<double> &dphi, const std::vector<double> &dtheta,
                   double eta) {
    UnitaryParams p(M);
    for (size_t i = 0; i < p.phi.size(); ++i)
        p.phi[i] = -eta * dphi[i];
    for (int k = 0; k < M; ++k)
        p.theta[k] = -eta * dtheta[k];
    return build_unitary(p);
}

// The two gradient flavors behind one interface so descend() is written once.
struct GradView {
    bool fast = false;
    FastZetaGradient fg;
    ZetaGradient gg;
    double norm(const ParamMask &mask) const {
        double s = 0.0;
        if (fast) {
            if (mask.lambda)
                s += sq_norm(fg.dlambda);
            if (mask.B)
                for (size_t q = 0; q < fg.dB_phi.size(); ++q)
                    s += sq_norm(fg.dB_phi[q]) + sq_norm(fg.dB_theta[q]);
        } else {
            if (mask.lambda)
                for (const auto &v : gg.dlambda)
                    s += sq_norm(v);
            if (mask.B)
                for (size_t q = 0; q < gg.dB_phi.size(); ++q)
                    s += sq_norm(gg.dB_phi[q]) + sq_norm(gg.dB_theta[q]);
            if (mask.A)
                for (size_t q = 0; q < gg.dA_phi.size(); ++q)
                    s += sq_norm(gg.dA_phi[q]) + sq_norm(gg.dA_theta[q]);
        }
        return std::sqrt(s);
    }
};

Constellation apply_step(const Constellation &c, const GradView &g, const ParamMask &mask,
                         double eta) {
    Constellation out = c;
    if (g.fast) {
        if (mask.lambda) {
            std::vector<double> row = c.lambda[0];
            for (int m = 1; m < c.M; ++m)
                row[m] = wrap_lambda(row[m] - eta * g.fg.dlambda[m], c.L);
            for (auto &r : out.lambda)
                r = row;
        }
        if (mask.B)
            for (int q = 1; q < c.blocks(); ++q)
                out.B[q] = c.B[q] * angle_step(c.M, g.fg.dB_phi[q], g.fg.dB_theta[q], eta);
        return out;
    }
    if (mask.lambda)
        for (int q = 0; q < c.blocks(); ++q)
            for (int m = 1; m < c.M; ++m)
                out.lambda[q][m] = wrap_lambda(c.lambda[q][m] - eta * g.gg.dlambda[q][m], c.L);
    if (mask.B)
        for (int q = 1; q < c.blocks(); ++q)
            out.B[q] = c.B[q] * angle_step(c.M, g.gg.dB_phi[q], g.gg.dB_theta[q], eta);
    if (mask.A)
        for (int q = 1; q < c.blocks(); ++q)
            out.A[q] = c.A[q] * angle_step(c.M, g.gg.dA_phi[q], g.gg.dA_theta[q], eta);
    return out;
}

void reorthonormalize(Constellation &c) {
    for (int q = 1; q < c.blocks(); ++q) {
        c.A[q] = polar_unitary(c.A[q]);
        c.B[q] = polar_unitary(c.B[q]);
    }
}

} // namespace

DescendResult descend(const Constellation &c0, const DesignConfig &cfg, ParamMask mask,
                      char stage, DesignTrace &trace) {
    const bool fast = c0.common_diagonal() && !mask.A;
    Constellation cur = c0;
    double zeta_cur = zeta(cur, cfg.window, cfg.N);
    DescendResult best;
    best.code = cur;
    best.zeta_value = zeta_cur;
    best.reason = StopReason::MaxIters;

    double step_cur = cfg.step;
    const double min_step = cfg.step * 1e-12;
    int accepted_steps = 0;

    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        GradView g;
        g.fast = fast;
        if (fast)
            g.fg = grad_zeta_fast(cur, cfg.window, cfg.N);
        else
            g.gg = grad_zeta(cur, cfg.window, cfg.N);
        const double gn = g.norm(mask);
        trace.rows.push_back({stage, iter, zeta_cur, gn, step_cur});
        if (gn <= cfg.tol) {
            best.reason = StopReason::Converged;
            break;
        }
        double eta = step_cur;
        bool accepted = false;
        while (eta >= min_step) {
            Constellation cand = apply_step(cur, g, mask, eta);
            const double zc = zeta(cand, cfg.window, cfg.N);
            if (zc <= zeta_cur - 1e-4 * eta * gn * gn) {
                cur = std::move(cand);
                zeta_cur = zc;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if (!accepted) {
            best.reason = StopReason::Stalled;
            break;
        }
        if (zeta_cur < best.zeta_value) {
            best.zeta_value = zeta_cur;
            best.code = cur;
        }
        if (++accepted_steps % 50 == 0) {
            reorthonormalize(cur);
            zeta_cur = zeta(cur, cfg.window, cfg.N);
        }
        step_cur = std::min(cfg.step, eta * 2.0);
    }
    reorthonormalize(best.code);
    best.zeta_value = zeta(best.code, cfg.window, cfg.N);
    return best;
}

DesignResult design(const DesignConfig &cfg) {
    if (cfg.restarts < 1 || cfg.step <= 0.0 || cfg.tol <= 0.0)
        throw InvalidParams("design: restarts >= 1, step > 0, tol > 0 required");
    const int M = cfg.M, L = cfg.L;

    // Stage (a): random search screens a pool of diagonal exponents, the
    // `restarts` best seed the descents.
    const int pool = cfg.restarts * 25;
    std::vector<std::vector<double>> pool_u(static_cast<size_t>(pool));
    std::vector<double> pool_zeta(static_cast<size_t>(pool));
#pragma omp parallel for schedule(dynamic, 4)
    for (int i = 0; i < pool; ++i) {
        Rng rng(cfg.seed, 0xA0000000ULL + static_cast<uint64_t>(i));
        std::vector<double> u(static_cast<size_t>(M), 1.0);
        for (int m = 1; m < M; ++m)
            u[static_cast<size_t>(m)] = rng.uniform(0.0, static_cast<double>(L));
        pool_zeta[static_cast<size_t>(i)] =
            zeta(continuous_diagonal_code(u, L), cfg.window, cfg.N);
        pool_u[static_cast<size_t>(i)] = std::move(u);
    }
    std::vector<int> order(static_cast<size_t>(pool));
    for (int i = 0; i < pool; ++i)
        order[static_cast<size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return pool_zeta[static_cast<size_t>(a)] < pool_zeta[static_cast<size_t>(b)];
    });

    std::vector<DescendResult> stage_a(static_cast<size_t>(cfg.restarts));
    std::vector<DesignTrace> traces_a(static_cast<size_t>(cfg.restarts));
#pragma omp parallel for schedule(dynamic, 1)
    for (int r = 0; r < cfg.restarts; ++r) {
        const Constellation c0 =
            continuous_diagonal_code(pool_u[static_cast<size_t>(order[static_cast<size_t>(r)])],
                                     L);
        stage_a[static_cast<size_t>(r)] =
            descend(c0, cfg, ParamMask{.lambda = true}, 'a', traces_a[static_cast<size_t>(r)]);
    }
    int best_r = 0;
    for (int r = 1; r < cfg.restarts; ++r)
        if (stage_a[static_cast<size_t>(r)].zeta_value <
            stage_a[static_cast<size_t>(best_r)].zeta_value)
            best_r = r;

    DesignResult res;
    res.trace = traces_a[static_cast<size_t>(best_r)];
    if (cfg.b == 0) {
        res.code = stage_a[static_cast<size_t>(best_r)].code;
        res.zeta_value = stage_a[static_cast<size_t>(best_r)].zeta_value;
        return res;
    }

    // Stage (b): random B_q on the fixed diagonal, descend the angles.
    const int nb = 1 << cfg.b;
    std::vector<std::vector<double>> lambda(static_cast<size_t>(nb),
                                            stage_a[static_cast<size_t>(best_r)].code.lambda[0]);
    std::vector<CMatrix> A(static_cast<size_t>(nb), CMatrix::identity(M));
    std::vector<CMatrix> B(static_cast<size_t>(nb), CMatrix::identity(M));
    for (int q = 1; q < nb; ++q) {
        Rng rng(cfg.seed, 0xB0000000ULL + static_cast<uint64_t>(q));
        B[static_cast<size_t>(q)] = build_unitary(random_unitary_params(M, rng));
    }
    const Constellation c1 =
        make_constellation(M, L, cfg.b, std::move(lambda), std::move(A), std::move(B));
    DescendResult stage_b = descend(c1, cfg, ParamMask{.B = true}, 'b', res.trace);
    res.code = stage_b.code;
    res.zeta_value = stage_b.zeta_value;

    // Stage (c): optional joint search over A_q, B_q and per-block
    // exponents, starting from the stage (b) code with random A_q.
    if (cfg.joint) {
        Constellation c2 = stage_b.code;
        for (int q = 1; q < nb; ++q) {
            Rng rng(cfg.seed, 0xC0000000ULL + static_cast<uint64_t>(q));
            c2.A[static_cast<size_t>(q)] = build_unitary(random_unitary_params(M, rng));
        }
        DescendResult stage_c =
            descend(c2, cfg, ParamMask{.lambda = true, .B = true, .A = true}, 'c', res.trace);
        if (stage_c.zeta_value < res.zeta_value) {
            res.code = stage_c.code;
            res.zeta_value = stage_c.zeta_value;
        }
    }
    return res;
}

} // namespace ustm
