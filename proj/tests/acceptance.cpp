// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. argv: <cli-binary> <codes-dir>.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "ustm/decoder.hpp"
#include "ustm/optimizer.hpp"
#include "ustm/perfindex.hpp"
#include "ustm/simulator.hpp"

using namespace ustm;

namespace {

std::string g_cli;
std::string g_codes;
int g_failures = 0;

void report(int criterion, bool pass, const std::string &what) {
    std::printf("%s  criterion %2d: %s\n", pass ? "PASS" : "FAIL", criterion, what.c_str());
    std::fflush(stdout);
    if (!pass)
        ++g_failures;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12});
}

CMatrix random_unitary(int M, Rng &rng) { return build_unitary(random_unitary_params(M, rng)); }

Constellation random_fast_code(int M, int L, int b, Rng &rng) {
    const int nb = 1 << b;
    std::vector<double> row(static_cast<size_t>(M), 1.0);
    for (int m = 1; m < M; ++m)
        row[static_cast<size_t>(m)] = rng.uniform(0.0, L);
    std::vector<std::vector<double>> lambda(static_cast<size_t>(nb), row);
    std::vector<CMatrix> A(static_cast<size_t>(nb), CMatrix::identity(M));
    std::vector<CMatrix> B(static_cast<size_t>(nb), CMatrix::identity(M));
    for (int q = 1; q < nb; ++q)
        B[static_cast<size_t>(q)] = build_unitary(random_unitary_params(M, rng));
    return make_constellation(M, L, b, lambda, A, B);
}

// ---------------------------------------------------------------- 1
void criterion_gradients() {
    const double h = 1e-6;
    double worst_pair = 0.0;
    Rng rng(1001, 0);
    for (int trial = 0; trial < 100; ++trial) {
        const int M = 2 + trial % 3;
        const int n_rx = 1 + static_cast<int>(rng.below(2));
        const double rho = std::exp(rng.uniform(std::log(1.0), std::log(100.0)));
        const CMatrix phi = random_unitary(M, rng);
        const BoundContext ctx = bound_identity(phi, rho, n_rx);
        const double L = 16.0;
        const PairGradient g = grad_at_identity(ctx, L);

        auto fd_angle = [&](int which, int index) {
            auto eval = [&](double x) {
                UnitaryParams p(M);
                (which == 0 ? p.phi : which == 1 ? p.nu : p.theta)[static_cast<size_t>(index)] =
                    x;
                return bound_svd(build_unitary(p), phi, rho, n_rx);
            };
            return (eval(h) - eval(-h)) / (2.0 * h);
        };
        for (int p = 0; p < M - 1; ++p) {
            for (int q = p + 1; q < M; ++q) {
                const int idx = UnitaryParams::pair_index(M, p, q);
                worst_pair = std::max(
                    worst_pair, rel_err(g.dphi[static_cast<size_t>(idx)], fd_angle(0, idx)));
                worst_pair = std::max(worst_pair,
                                      std::abs(fd_angle(1, idx))); // nu: identically zero
            }
        }
        for (int k = 0; k < M; ++k)
            worst_pair =
                std::max(worst_pair, rel_err(g.dtheta[static_cast<size_t>(k)], fd_angle(2, k)));
        const long long ell = 1 + static_cast<long long>(rng.below(3));
        for (int m = 0; m < M; ++m) {
            auto eval = [&](double x) {
                std::vector<cplx> d(static_cast<size_t>(M), cplx{1.0});
                d[static_cast<size_t>(m)] =
                    std::polar(1.0, 2.0 * M_PI * x * static_cast<double>(ell) / L);
                return bound_svd(CMatrix::diag(d), phi, rho, n_rx);
            };
            const double fd = (eval(h) - eval(-h)) / (2.0 * h);
            worst_pair = std::max(
                worst_pair,
                rel_err(static_cast<double>(ell) * g.dlambda_scale[static_cast<size_t>(m)], fd));
        }
    }

    // End-to-end: grad_zeta vs finite differences of zeta on small codes.
    double worst_zeta = 0.0;
    const SnrWindow w{10.0, 100.0};
    for (int trial = 0; trial < 5; ++trial) {
        Rng crng(2001 + trial, 0);
        Constellation c = random_fast_code(2, 4, 1, crng);
        c.lambda[1][1] = crng.uniform(0.0, 4.0); // general per-block exponents
        c.A[1] = random_unitary(2, crng);
        const int n_rx = 1 + trial % 2;
        const ZetaGradient g = grad_zeta(c, w, n_rx);
        for (int q = 0; q < c.blocks(); ++q) {
            auto eval_l = [&](double x) {
                Constellation cc = c;
                cc.lambda[static_cast<size_t>(q)][1] += x;
                return zeta(cc, w, n_rx);
            };
            worst_zeta =
                std::max(worst_zeta, rel_err(g.dlambda[static_cast<size_t>(q)][1],
                                             (eval_l(h) - eval_l(-h)) / (2 * h)));
        }
        for (int q = 1; q < c.blocks(); ++q) {
            for (int which = 0; which < 4; ++which) {
                auto eval = [&](double x) {
                    UnitaryParams p(2);
                    (which % 2 == 0 ? p.phi : p.theta)[0] = x;
                    Constellation cc = c;
                    auto &target = (which < 2 ? cc.B : cc.A)[static_cast<size_t>(q)];
                    target = target * build_unitary(p);
                    return zeta(cc, w, n_rx);
                };
                const double fd = (eval(h) - eval(-h)) / (2 * h);
                const double analytic =
                    which == 0 ? g.dB_phi[static_cast<size_t>(q)][0]
                    : which == 1 ? g.dB_theta[static_cast<size_t>(q)][0]
                    : which == 2 ? g.dA_phi[static_cast<size_t>(q)][0]
                                 : g.dA_theta[static_cast<size_t>(q)][0];
                worst_zeta = std::max(worst_zeta, rel_err(analytic, fd));
            }
        }
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "analytic gradients vs finite differences (pairwise %.2e <= 1e-5, "
                  "zeta %.2e <= 1e-4)",
                  worst_pair, worst_zeta);
    report(1, worst_pair <= 1e-5 && worst_zeta <= 1e-4, buf);
}

// ---------------------------------------------------------------- 2
void criterion_bound_consistency() {
    Rng rng(1002, 0);
    double worst_svd = 0.0, worst_inv = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const int M = 2 + static_cast<int>(rng.below(3));
        const int n_rx = 1 + static_cast<int>(rng.below(3));
        const double rho = std::exp(rng.uniform(std::log(0.5), std::log(200.0)));
        const CMatrix x = random_unitary(M, rng), y = random_unitary(M, rng);
        worst_svd = std::max(
            worst_svd, rel_err(bound_pair(x, y, rho, n_rx).p, bound_svd(x, y, rho, n_rx)));
        const CMatrix ul = random_unitary(M, rng), ur = random_unitary(M, rng);
        worst_inv = std::max(
            worst_inv,
            rel_err(bound_pair(ul * x * ur, y, rho, n_rx).p,
                    bound_pair(x, ul.adjoint() * y * ur.adjoint(), rho, n_rx).p));
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "determinant form vs Eq-oracle (%.2e <= 1e-10), invariance (%.2e <= 1e-12)",
                  worst_svd, worst_inv);
    report(2, worst_svd <= 1e-10 && worst_inv <= 1e-12, buf);
}

// ---------------------------------------------------------------- 3
void criterion_fast_bound() {
    Rng rng(1003, 0);
    double worst = 0.0;
    bool counts_ok = true;
    for (int b = 0; b <= 3; ++b) {
        for (int L : {2, 4, 8, 16}) {
            for (int t = 0; t < 50; ++t) {
                const int M = 2 + static_cast<int>(rng.below(2));
                const Constellation c = random_fast_code(M, L, b, rng);
                const double rho = std::exp(rng.uniform(std::log(1.0), std::log(100.0)));
                const int n_rx = 1 + static_cast<int>(rng.below(2));
                const UnionBound fast = union_bound_fast(c, rho, n_rx);
                const UnionBound direct = union_bound_direct(c, rho, n_rx);
                worst = std::max(worst, std::abs(std::exp((fast.log10_pbit - direct.log10_pbit) *
                                                          std::numbers::ln10) -
                                                 1.0));
                const long long nb = 1LL << b;
                counts_ok = counts_ok &&
                            fast.pair_evals == (L - 1) + nb / 2 * (nb - 1) * (2LL * L - 1);
            }
        }
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "reduced bound == direct sum (%.2e <= 1e-12), distinct-bound counts %s",
                  worst, counts_ok ? "exact" : "WRONG");
    report(3, worst <= 1e-12 && counts_ok, buf);
}

// ---------------------------------------------------------------- 4
void criterion_reduction() {
    Rng rng(1004, 0);
    double worst = 0.0;
    bool argmin_ok = true;
    for (int t = 0; t < 1000; ++t) {
        const int D = 2 + static_cast<int>(rng.below(7));
        const int L = 4 << rng.below(5);
        ReducedProblem rp;
        rp.D = D;
        rp.L = L;
        rp.C.resize(static_cast<size_t>(D));
        rp.psi.resize(static_cast<size_t>(D));
        rp.beta.resize(static_cast<size_t>(D));
        for (int k = 0; k < D; ++k) {
            rp.C[static_cast<size_t>(k)] = rng.uniform(0.2, 2.0);
            rp.psi[static_cast<size_t>(k)] = rng.uniform(-L / 2.0, L / 2.0);
            rp.beta[static_cast<size_t>(k)] = (k == 0) ? 1.0 : rng.uniform(0.0, L);
        }
        const BruteForceResult bf = euclid_bruteforce(rp);
        // 1-D reduction: explicit minimum over the candidate set.
        double set_min = 1e300;
        const long long lo = static_cast<long long>(std::ceil(-L / 2.0 + rp.psi[0]));
        for (long long y1 = lo; static_cast<double>(y1) < L / 2.0 + rp.psi[0]; ++y1)
            set_min = std::min(set_min, metric_full(y1, rp));
        worst = std::max(worst, std::abs(set_min - bf.cost));
        const BlockDecodeResult sd = sphere_decode_block(rp, default_gamma_init(rp));
        if (sd.l_hat != bf.l_hat && std::abs(sd.cost - bf.cost) > 1e-9)
            argmin_ok = false;
        if (std::abs(sd.cost - bf.cost) > 1e-9 * std::max(1.0, bf.cost))
            argmin_ok = false;
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "1-D reduction == brute force over l (|diff| %.2e <= 1e-9), sphere argmin %s",
                  worst, argmin_ok ? "matches" : "MISMATCH");
    report(4, worst <= 1e-9 && argmin_ok, buf);
}

// ---------------------------------------------------------------- 5
void criterion_diversity() {
    const double d1 = diversity_product(cyclic_code({1, 1731}, 4096));
    const double d2 = diversity_product(cyclic_code({1, 301, 1561, 1829}, 4096));
    const double d3 = diversity_product(load(g_codes + "/block_m2_b2_L1024.json"));
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "diversity products %.6f (0.0265 +- 5e-4), %.6f (0.1035 +- 5e-4), %.2e (< 1e-6)",
                  d1, d2, d3);
    report(5, std::abs(d1 - 0.0265) <= 5e-4 && std::abs(d2 - 0.1035) <= 5e-4 && d3 < 1e-6, buf);
}

// ---------------------------------------------------------------- 6
void criterion_fixtures() {
    struct Expect {
        const char *name;
        int M, L, b;
        double R;
    };
    const Expect expect[] = {
        {"block_m2_b2_L1024.json", 2, 1024, 2, 6.0}, {"block_m2_b3_L512.json", 2, 512, 3, 6.0},
        {"block_m2_b4_L256.json", 2, 256, 4, 6.0},   {"block_m3_b4_L256.json", 3, 256, 4, 4.0},
        {"block_m4_b2_L64.json", 4, 64, 2, 2.0},     {"block_m4_b4_L256.json", 4, 256, 4, 3.0},
        {"diag_m2_r1_L4.json", 2, 4, 0, 1.0},        {"diag_m3_r1_L8.json", 3, 8, 0, 1.0},
        {"diag_m4_r1_L16.json", 4, 16, 0, 1.0},      {"diag_m5_r1_L32.json", 5, 32, 0, 1.0},
        {"diag_m6_r1_L64.json", 6, 64, 0, 1.0},      {"diag_m7_r1_L128.json", 7, 128, 0, 1.0},
        {"diag_m2_r2_L16.json", 2, 16, 0, 2.0},      {"diag_m3_r2_L64.json", 3, 64, 0, 2.0},
        {"diag_m4_r2_L256.json", 4, 256, 0, 2.0},    {"diag_m5_r2_L1024.json", 5, 1024, 0, 2.0},
        {"diag_m6_r2_L4096.json", 6, 4096, 0, 2.0},  {"diag_m7_r2_L16384.json", 7, 16384, 0, 2.0},
    };
    bool ok = true;
    std::string first_bad;
    for (const Expect &e : expect) {
        try {
            const Constellation c = load(g_codes + "/" + e.name);
            double resid = 0.0;
            for (int q = 0; q < c.blocks(); ++q) {
                resid = std::max(resid, frobenius_distance(c.A[static_cast<size_t>(q)].adjoint() *
                                                               c.A[static_cast<size_t>(q)],
                                                           CMatrix::identity(c.M)));
                resid = std::max(resid, frobenius_distance(c.B[static_cast<size_t>(q)].adjoint() *
                                                               c.B[static_cast<size_t>(q)],
                                                           CMatrix::identity(c.M)));
            }
            if (c.M != e.M || c.L != e.L || c.b != e.b || resid > 1e-3 ||
                std::abs(spectral_efficiency(c) - e.R) > 1e-12) {
                ok = false;
                if (first_bad.empty())
                    first_bad = e.name;
            }
        } catch (const std::exception &ex) {
            ok = false;
            if (first_bad.empty())
                first_bad = std::string(e.name) + " (" + ex.what() + ")";
        }
    }
    report(6, ok,
           ok ? "all 18 bundled codes load, unitary within 1e-3, rates as published"
              : "fixture problem: " + first_bad);
}

// ---------------------------------------------------------------- 7
void criterion_decoder_agreement() {
    const Constellation c = load(g_codes + "/block_m2_b2_L1024.json");
    const double rho = std::pow(10.0, 2.0);
    const long long frames = 10000;
    long long agree = 0;
#pragma omp parallel for schedule(dynamic, 16) reduction(+ : agree)
    for (long long t = 0; t < frames; ++t) {
        Rng rng(4242, static_cast<uint64_t>(t));
        const long long prev = static_cast<long long>(rng.below(c.size()));
        const long long msg = static_cast<long long>(rng.below(c.size()));
        const CMatrix h = sample_cn01_matrix(rng, 2, 2);
        const CMatrix w0 = sample_cn01_matrix(rng, 2, 2);
        const CMatrix w1 = sample_cn01_matrix(rng, 2, 2);
        const CMatrix s_prev =
            signal_matrix(c, static_cast<int>(prev / c.L), static_cast<int>(prev % c.L));
        const CMatrix v =
            signal_matrix(c, static_cast<int>(msg / c.L), static_cast<int>(msg % c.L));
        const CMatrix x_prev = (s_prev * h) * std::sqrt(rho) + w0;
        const CMatrix x_now = ((v * s_prev) * h) * std::sqrt(rho) + w1;
        const DecodeResult a = parallel_decode(x_now, x_prev, c);
        const DecodeResult b = ml_bruteforce(x_now, x_prev, c);
        agree += (a.q_hat == b.q_hat && a.l_hat == b.l_hat);
    }
    const double frac = static_cast<double>(agree) / frames;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "sphere vs exact ML agreement %.4f >= 0.99 (10^4 frames, 20 dB, R=6 code)",
                  frac);
    report(7, frac >= 0.99, buf);
}

// ---------------------------------------------------------------- 8
void criterion_union_dominance() {
    struct Case {
        const char *file;
        int n_rx;
    };
    const Case cases[] = {{"diag_m2_r2_L16.json", 2}, {"block_m2_b2_L1024.json", 2}};
    bool ok = true;
    std::string detail;
    for (const Case &cs : cases) {
        const Constellation c = load(g_codes + "/" + cs.file);
        int used = 0;
        for (double db = 12.0; db <= 30.0 && used < 2; db += 2.0) {
            const double rho = std::pow(10.0, db / 10.0);
            const double bound = std::pow(10.0, union_bound_log10(c, rho, cs.n_rx));
            if (bound > 0.1)
                continue;
            ++used;
            SimConfig cfg;
            cfg.n_rx = cs.n_rx;
            cfg.snr_db = {db};
            cfg.frames = 100000;
            cfg.seed = 777;
            const SimResult r = run_monte_carlo(c, cfg);
            const double sigma = std::sqrt(bound * (1.0 - bound) / cfg.frames);
            char buf[120];
            std::snprintf(buf, sizeof(buf), " [%s @%.0fdB ber %.3e bound %.3e]", cs.file, db,
                          r.points[0].ber, bound);
            detail += buf;
            if (r.points[0].ber > bound + 3.0 * sigma)
                ok = false;
        }
    }
    report(8, ok, "Monte Carlo BER below the union bound (3 sigma)" + detail);
}

// ---------------------------------------------------------------- 9
void criterion_ordering() {
    const Constellation b4 = load(g_codes + "/block_m2_b4_L256.json");
    const Constellation b2 = load(g_codes + "/block_m2_b2_L1024.json");
    const Constellation cy = cyclic_code({1, 1731}, 4096);
    const long long frames = 100000;
    auto bler_at_20db = [&](const Constellation &c) {
        SimConfig cfg;
        cfg.n_rx = 2;
        cfg.snr_db = {20.0};
        cfg.frames = frames;
        cfg.seed = 20202;
        return run_monte_carlo(c, cfg).points[0].bler;
    };
    const double p4 = bler_at_20db(b4);
    const double p2 = bler_at_20db(b2);
    const double pc = bler_at_20db(cy);
    auto sig = [&](double p) { return std::sqrt(std::max(p * (1 - p), 1e-12) / frames); };
    const bool ok = (p4 + 3 * sig(p4) < p2 - 3 * sig(p2)) &&
                    (p2 + 3 * sig(p2) < pc - 3 * sig(pc));
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "BLER ordering at 20 dB: 16-block %.4f < 4-block %.4f < cyclic %.4f "
                  "(3 sigma separated)",
                  p4, p2, pc);
    report(9, ok, buf);
}

// ---------------------------------------------------------------- 10
void criterion_slope() {
    const Constellation c = cyclic_code({1, 3}, 8);
    const int n_rx = 2;
    const double l3 = union_bound_log10(c, 1e3, n_rx);
    const double l4 = union_bound_log10(c, 1e4, n_rx);
    const double slope = l4 - l3;
    const double target = -static_cast<double>(c.M) * n_rx;
    char buf[120];
    std::snprintf(buf, sizeof(buf), "union-bound slope %.4f within 2%% of %g", slope, target);
    report(10, std::abs(slope - target) <= 0.02 * std::abs(target), buf);
}

// ---------------------------------------------------------------- 11
std::string slurp(const std::string &p) {
    std::ifstream f(p);
    return {std::istreambuf_iterator<char>(f), {}};
}

int shell(const std::string &cmd) {
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void criterion_determinism() {
    bool ok = true;
    std::string detail = "design + simulate outputs byte-identical at 1 and 2 threads";
    const std::string design_flags =
        " design --M 2 --L 8 --blocks 1 --seed 11 --restarts 3 --max-iters 25";
    ok = ok && shell("OMP_NUM_THREADS=1 " + g_cli + design_flags +
                     " --out acc_d1.json --trace acc_t1.csv > /dev/null 2>&1") == 0;
    ok = ok && shell("OMP_NUM_THREADS=2 " + g_cli + design_flags +
                     " --out acc_d2.json --trace acc_t2.csv > /dev/null 2>&1") == 0;
    ok = ok && !slurp("acc_d1.json").empty() && slurp("acc_d1.json") == slurp("acc_d2.json");
    ok = ok && slurp("acc_t1.csv") == slurp("acc_t2.csv");

    const std::string sim_flags = " simulate --code " + g_codes +
                                  "/diag_m2_r2_L16.json --N 2 --snr-db 10:21:5 --frames 3000 "
                                  "--seed 3 --decoder sphere";
    ok = ok && shell("OMP_NUM_THREADS=1 " + g_cli + sim_flags +
                     " --out acc_s1.csv > /dev/null 2>&1") == 0;
    ok = ok && shell("OMP_NUM_THREADS=2 " + g_cli + sim_flags +
                     " --out acc_s2.csv > /dev/null 2>&1") == 0;
    ok = ok && !slurp("acc_s1.csv").empty() && slurp("acc_s1.csv") == slurp("acc_s2.csv");
    for (const char *f : {"acc_d1.json", "acc_d2.json", "acc_t1.csv", "acc_t2.csv",
                          "acc_s1.csv", "acc_s2.csv"})
        std::remove(f);
    report(11, ok, detail);
}

} // namespace

int main(int argc, char **argv) {
    if (argc < 3) {
        std::fprintf(stderr, "usage: acceptance <cli-binary> <codes-dir>\n");
        return 2;
    }
    g_cli = argv[1];
    g_codes = argv[2];

    criterion_gradients();
    criterion_bound_consistency();
    criterion_fast_bound();
    criterion_reduction();
    criterion_diversity();
    criterion_fixtures();
    criterion_decoder_agreement();
    criterion_union_dominance();
    criterion_ordering();
    criterion_slope();
    criterion_determinism();

    if (g_failures == 0)
        std::printf("all criteria passed\n");
    else
        std::printf("%d criterion(s) failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
