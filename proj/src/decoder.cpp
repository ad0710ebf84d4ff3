#include "ustm/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ustm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

long long floor_div(long long a, long long b) {
    long long q = a / b, r = a % b;
    return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}

// Zigzag offset sequence 0, (dup), +1, -1, +2, -2, ...; index 1 revisits the
// center and is skipped by every consumer.
long long zig_offset(long long k) { return (k % 2 == 0) ? k / 2 : -(k / 2); }

bool in_window(long long y1, const ReducedProblem &rp) {
    const double y = static_cast<double>(y1);
    return y >= -0.5 * rp.L + rp.psi[0] && y < 0.5 * rp.L + rp.psi[0];
}

// Largest zigzag index worth visiting at radius gamma. Covers offsets
// -d..+d with d = ceil(min(gamma/C1, L/2)); the extra odd slot keeps the
// negative side symmetric.
long long zig_kmax(double gamma, double c1, int L) {
    const double reach = c1 > 0.0 ? gamma / c1 : kInf;
    const double d = std::ceil(std::min(reach, 0.5 * L));
    return 2 * static_cast<long long>(d) + 1;
}

int y1_to_l(long long y1, int L) {
    return static_cast<int>(y1 - floor_div(y1, L) * static_cast<long long>(L));
}

} // namespace

double mod_star(double a, double x) {
    if (!(x > 0.0))
        throw InvalidParams("mod_star: modulus must be positive");
    double r = a - x * std::floor(a / x + 0.5);
    if (r < -0.5 * x)
        r += x;
    if (r >= 0.5 * x)
        r -= x;
    return r;
}

ReducedProblem reduce_problem(const CMatrix &x_now, const CMatrix &x_prev, const Constellation &c,
                              int q) {
    if (q < 0 || q >= c.blocks())
        throw IndexOutOfRange("reduce_problem: block index out of range");
    if (x_now.rows() != c.M || x_prev.rows() != c.M || x_now.cols() != x_prev.cols())
        throw InvalidParams("reduce_problem: frame shapes must be M x N");
    const int M = c.M, N = x_now.cols();
    const CMatrix t = c.A[q].adjoint() * x_now;
    const CMatrix p = c.B[q] * x_prev;

    ReducedProblem rp;
    rp.L = c.L;
    rp.q = q;
    double abs_diff2 = 0.0;
    for (int n = 0; n < N; ++n) {
        for (int m = 0; m < M; ++m) {
            const cplx a = t(m, n), b = p(m, n);
            const double ca = std::abs(a), cb = std::abs(b);
            abs_diff2 += (ca - cb) * (ca - cb);
            const double amp = std::sqrt(ca * cb);
            const bool anchor = (n == 0 && m == 0);
            if (amp == 0.0 && !anchor) {
                ++rp.dropped;
                continue;
            }
            rp.C.push_back(amp);
            rp.psi.push_back(amp > 0.0
                                 ? std::arg(a * std::conj(b)) * c.L / (2.0 * M_PI)
                                 : 0.0);
            rp.beta.push_back(c.lambda[q][m]);
        }
    }
    rp.D = static_cast<int>(rp.C.size());
    rp.delta = static_cast<double>(c.L) * c.L * abs_diff2 / (4.0 * M_PI * M_PI);
    return rp;
}

std::vector<double> lift_y(long long y1, const ReducedProblem &rp) {
    if (!in_window(y1, rp))
        throw OutOfRange("lift_y: y1 outside [-L/2 + psi1, L/2 + psi1)");
    const long long q1 = floor_div(y1, rp.L);
    const double frac = static_cast<double>(y1 - q1 * rp.L) / rp.L;
    std::vector<double> y(static_cast<size_t>(rp.D));
    y[0] = static_cast<double>(y1);
    for (int k = 1; k < rp.D; ++k)
        y[static_cast<size_t>(k)] =
            std::ceil(rp.psi[k] / rp.L - frac * rp.beta[k] - 0.5) - q1 * rp.beta[k];
    return y;
}

MetricCheck metric_prefix(long long y1, const ReducedProblem &rp, double gamma2) {
    MetricCheck mc;
    const long long q1 = floor_div(y1, rp.L);
    const double frac = static_cast<double>(y1 - q1 * rp.L) / rp.L;
    const double t1 = rp.C[0] * (static_cast<double>(y1) - rp.psi[0]);
    double mu = t1 * t1;
    if (mu >= gamma2) {
        mc.fail_depth = 1;
        return mc;
    }
    for (int k = 1; k < rp.D; ++k) {
        const double yk = std::ceil(rp.psi[k] / rp.L - frac * rp.beta[k] - 0.5) - q1 * rp.beta[k];
        const double tk = rp.C[k] * (rp.L * yk + rp.beta[k] * y1 - rp.psi[k]);
        mu += tk * tk;
        if (mu >= gamma2) {
            mc.fail_depth = k + 1;
            return mc;
        }
    }
    mc.pass = true;
    mc.cost = mu;
    return mc;
}

double metric_full(long long y1, const ReducedProblem &rp) {
    return metric_prefix(y1, rp, kInf).cost;
}

double default_gamma_init(const ReducedProblem &rp) {
    long long babai = round_half_up(rp.psi[0]);
    while (!in_window(babai, rp))
        babai += (static_cast<double>(babai) < rp.psi[0]) ? rp.L : -rp.L;
    return std::sqrt(metric_full(babai, rp)) + 1e-9;
}

BlockDecodeResult sphere_decode_block(const ReducedProblem &rp, double gamma_init,
                                      BlockDecodeAudit *audit) {
    if (gamma_init <= 0.0)
        gamma_init = default_gamma_init(rp);
    const long long center = round_half_up(rp.psi[0]);
    double gamma2 = gamma_init * gamma_init;
    long long k = 0;
    bool pass_found = false;
    BlockDecodeResult res;
    res.cost = kInf;

    while (true) {
        const long long kmax = zig_kmax(std::sqrt(gamma2), rp.C[0], rp.L);
        if (k > kmax) {
            if (pass_found)
                break;
            if (res.cost < gamma2) {
                // A remembered full evaluation already beats this radius;
                // declare it instead of re-testing anything.
                pass_found = true;
                gamma2 = res.cost;
                continue;
            }
            gamma2 *= 16.0 / 9.0;
            ++res.growth_rounds;
            continue;
        }
        const long long kk = k++;
        if (kk == 1)
            continue;
        const long long y1 = center + zig_offset(kk);
        if (!in_window(y1, rp))
            continue;
        if (!pass_found) {
            const double cost = metric_full(y1, rp);
            ++res.evaluations;
            if (audit)
                audit->visited.push_back(y1);
            if (cost < res.cost) {
                res.cost = cost;
                res.y1_hat = y1;
            }
            if (cost < gamma2) {
                pass_found = true;
                gamma2 = cost;
            }
        } else {
            const MetricCheck mc = metric_prefix(y1, rp, gamma2);
            ++res.evaluations;
            if (audit)
                audit->visited.push_back(y1);
            if (mc.pass) {
                res.cost = mc.cost;
                res.y1_hat = y1;
                gamma2 = mc.cost;
            }
        }
    }
    if (audit) {
        audit->final_gamma2 = gamma2;
        audit->final_kmax = zig_kmax(std::sqrt(gamma2), rp.C[0], rp.L);
    }
    res.l_hat = y1_to_l(res.y1_hat, rp.L);
    return res;
}

BruteForceResult euclid_bruteforce(const ReducedProblem &rp) {
    BruteForceResult best;
    best.cost = kInf;
    for (int l = 0; l < rp.L; ++l) {
        double cost = 0.0;
        for (int k = 0; k < rp.D; ++k) {
            if (rp.C[k] == 0.0)
                continue;
            const double r = rp.C[k] * mod_star(rp.beta[k] * l - rp.psi[k], rp.L);
            cost += r * r;
        }
        if (cost < best.cost) {
            best.cost = cost;
            best.l_hat = l;
        }
    }
    return best;
}

DecodeResult parallel_decode(const CMatrix &x_now, const CMatrix &x_prev, const Constellation &c,
                             double gamma_init, ParallelDecodeAudit *audit) {
    struct BlockState {
        ReducedProblem rp;
        long long center = 0;
        long long k = 0;
        bool done = false;
    };
    const int nb = c.blocks();
    std::vector<BlockState> st(static_cast<size_t>(nb));
    if (audit)
        audit->visited.assign(static_cast<size_t>(nb), {});
    for (int q = 0; q < nb; ++q) {
        st[q].rp = reduce_problem(x_now, x_prev, c, q);
        st[q].center = round_half_up(st[q].rp.psi[0]);
    }

    double gamma2 = gamma_init > 0.0 ? gamma_init * gamma_init : 1e-18;
    bool pass_found = false;
    double best_total = kInf;
    int best_q = 0;
    long long best_y1 = 0;
    long long evals = 0;

    while (true) {
        bool progressed = false;
        bool any_alive = false;
        for (int q = 0; q < nb; ++q) {
            BlockState &s = st[q];
            if (s.done)
                continue;
            any_alive = true;
            const double g2q = gamma2 - s.rp.delta;
            if (g2q <= 0.0) {
                if (pass_found)
                    s.done = true; // delta alone already reaches the radius
                continue;
            }
            const long long kmax = zig_kmax(std::sqrt(g2q), s.rp.C[0], s.rp.L);
            if (s.k > kmax) {
                if (pass_found)
                    s.done = true;
                continue;
            }
            const long long kk = s.k++;
            progressed = true;
            if (kk == 1)
                continue;
            const long long y1 = s.center + zig_offset(kk);
            if (!in_window(y1, s.rp))
                continue;
            if (!pass_found) {
                const double total = metric_full(y1, s.rp) + s.rp.delta;
                ++evals;
                if (audit)
                    audit->visited[static_cast<size_t>(q)].push_back(y1);
                if (total < best_total) {
                    best_total = total;
                    best_q = q;
                    best_y1 = y1;
                }
                if (total < gamma2) {
                    pass_found = true;
                    gamma2 = total;
                    if (audit)
                        audit->gamma2_after_pass.push_back(gamma2);
                }
            } else {
                const MetricCheck mc = metric_prefix(y1, s.rp, g2q);
                ++evals;
                if (audit)
                    audit->visited[static_cast<size_t>(q)].push_back(y1);
                if (mc.pass) {
                    best_total = mc.cost + s.rp.delta;
                    best_q = q;
                    best_y1 = y1;
                    gamma2 = best_total;
                    if (audit)
                        audit->gamma2_after_pass.push_back(gamma2);
                }
            }
        }
        if (!any_alive)
            break;
        if (!progressed) {
            if (pass_found)
                break; // every live block is outside its shrunken window
            gamma2 *= 16.0 / 9.0;
            if (audit)
                ++audit->growth_rounds;
            if (best_total < gamma2) {
                pass_found = true;
                gamma2 = best_total;
                if (audit)
                    audit->gamma2_after_pass.push_back(gamma2);
            }
        }
    }
    DecodeResult r;
    r.q_hat = best_q;
    r.l_hat = y1_to_l(best_y1, c.L);
    r.cost = best_total;
    r.evaluations = evals;
    return r;
}

DecodeResult ml_bruteforce(const CMatrix &x_now, const CMatrix &x_prev, const Constellation &c) {
    const int M = c.M, N = x_now.cols();
    DecodeResult best;
    best.cost = kInf;
    for (int q = 0; q < c.blocks(); ++q) {
        // ||x_now - A_q Lambda^l B_q x_prev|| = ||A_q^H x_now - Lambda^l B_q x_prev||
        const CMatrix t = c.A[q].adjoint() * x_now;
        const CMatrix p = c.B[q] * x_prev;
        for (int l = 0; l < c.L; ++l) {
            double cost = 0.0;
            for (int m = 0; m < M; ++m) {
                const cplx ph =
                    std::polar(1.0, 2.0 * M_PI * c.lambda[q][m] * static_cast<double>(l) / c.L);
                for (int n = 0; n < N; ++n)
                    cost += std::norm(t(m, n) - ph * p(m, n));
            }
            ++best.evaluations;
            if (cost < best.cost) {
                best.cost = cost;
                best.q_hat = q;
                best.l_hat = l;
            }
        }
    }
    return best;
}

} // namespace ustm
