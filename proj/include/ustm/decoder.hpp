#pragma once

#include "ustm/constellation.hpp"
#include "ustm/numerics.hpp"

namespace ustm {

/// Symmetric modulus: a - x floor(a/x + 1/2), range exactly [-x/2, x/2).
/// Half-integer arguments round up, matching the round-to-nearest used by
/// the candidate enumeration.
double mod_star(double a, double x);

/// Nearest integer with halves rounding up.
inline long long round_half_up(double x) { return static_cast<long long>(std::floor(x + 0.5)); }

/// One block's decoding instance after the Euclidean-norm reduction of the
/// differential metric: minimize over l in [0, L)
///   sum_k [ C_k (beta_k l - psi_k) mod* C_k L ]^2  (+ delta offset),
/// which the candidate-set construction turns into a one-dimensional
/// closest point problem over the integer y_1.
struct ReducedProblem {
    int D = 0; ///< live coordinates (M N minus dropped zero-amplitude ones)
    int L = 0;
    int q = 0;           ///< originating block
    double delta = 0.0;  ///< constant metric offset for this block
    std::vector<double> C;    ///< amplitudes, C[0] may be 0 (kept as anchor)
    std::vector<double> psi;  ///< phase targets in [-L/2, L/2)
    std::vector<double> beta; ///< diagonal exponents per coordinate, beta[0] = 1
    int dropped = 0;          ///< zero-amplitude coordinates removed (k >= 2)
};

/// Build the reduced problem for block q from a received frame pair.
/// Coordinates are flattened column-major: k = (n, m) -> n*M + m, so
/// beta_k = lambda_{q, m(k)}. Zero-amplitude coordinates contribute nothing
/// and are dropped (except the k = 1 window anchor, kept with psi = 0).
ReducedProblem reduce_problem(const CMatrix &x_now, const CMatrix &x_prev,
                              const Constellation &c, int q);

/// The unique member of the candidate set S with first coordinate y1
/// (y[0] = y1, y[k] from the ceiling formula). Throws OutOfRange when y1 is
/// outside [-L/2 + psi1, L/2 + psi1).
std::vector<double> lift_y(long long y1, const ReducedProblem &rp);

/// Prefix metric test: mu_1 = [C_1 (y1 - psi_1)]^2,
/// mu_k = mu_{k-1} + [C_k (L y_k + beta_k y1 - psi_k)]^2, early exit as soon
/// as some mu_k >= gamma2.
struct MetricCheck {
    bool pass = false;
    double cost = 0.0; ///< mu_D when pass
    int fail_depth = 0; ///< first k (1-based) with mu_k >= gamma2, when !pass
};
MetricCheck metric_prefix(long long y1, const ReducedProblem &rp, double gamma2);

/// Full metric, no early exit.
double metric_full(long long y1, const ReducedProblem &rp);

/// Zigzag enumeration over the y1 window with a growing-then-shrinking
/// radius. Every candidate is evaluated at most once (the cursor k is the
/// resume point across radius changes); before the first radius pass the
/// full metric is evaluated and remembered, so the returned minimizer equals
/// the exhaustive one even when gamma_init is far too small.
struct BlockDecodeResult {
    int l_hat = 0;
    long long y1_hat = 0;
    double cost = 0.0;
    long long evaluations = 0;
    int growth_rounds = 0;
};

/// Optional instrumentation: every y1 evaluated, in order, plus the final
/// radius and zigzag horizon at termination.
struct BlockDecodeAudit {
    std::vector<long long> visited;
    double final_gamma2 = 0.0;
    long long final_kmax = 0;
};

BlockDecodeResult sphere_decode_block(const ReducedProblem &rp, double gamma_init,
                                      BlockDecodeAudit *audit = nullptr);

/// The radius policy used when none is supplied: metric of the rounded
/// first-coordinate (Babai-like) candidate, plus a hair so the first sphere
/// is never empty.
double default_gamma_init(const ReducedProblem &rp);

/// Exhaustive scan of l = 0..L-1 on the reduced metric; ties to smallest l.
struct BruteForceResult {
    int l_hat = 0;
    double cost = 0.0;
};
BruteForceResult euclid_bruteforce(const ReducedProblem &rp);

/// Joint decode over all blocks.
struct DecodeResult {
    int q_hat = 0;
    int l_hat = 0;
    double cost = 0.0; ///< reduced metric + delta for sphere; Frobenius^2 for ML
    long long evaluations = 0;
};

/// Round-robin instrumentation: per-block evaluated y1 lists and the global
/// squared radius after every pass.
struct ParallelDecodeAudit {
    std::vector<std::vector<long long>> visited; ///< per block, in order
    std::vector<double> gamma2_after_pass;
    int growth_rounds = 0;
};

/// Round-robin parallel sphere decoding over the 2^b per-block candidate
/// sets under one shared radius gamma: a pass in block q shrinks gamma^2 to
/// mu_D + delta_q, blocks with delta_q >= gamma^2 are skipped until gamma
/// grows, and no y1 is ever evaluated twice (per-block resume cursors).
/// Strictly sequential within one frame. gamma_init <= 0 selects the
/// automatic policy.
DecodeResult parallel_decode(const CMatrix &x_now, const CMatrix &x_prev, const Constellation &c,
                             double gamma_init = 0.0, ParallelDecodeAudit *audit = nullptr);

/// Exact ML rule: argmin over all signal matrices of
/// ||x_now - V x_prev||_F^2, ties to the smallest (q, l).
DecodeResult ml_bruteforce(const CMatrix &x_now, const CMatrix &x_prev, const Constellation &c);

} // namespace ustm
