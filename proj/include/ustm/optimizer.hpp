#pragma once

#include <iosfwd>

#include "ustm/constellation.hpp"
#include "ustm/perfindex.hpp"

namespace ustm {

/// Gradient of the trapezoid index over the general parameterization:
/// per-block diagonal exponents (entry 0 pinned at 1, gradient 0) and the
/// multiplicative update angles of every A_q, B_q (q >= 1; the nu angles are
/// omitted, their derivative vanishes identically).
struct ZetaGradient {
    int M = 0;
    std::vector<std::vector<double>> dlambda; // [blocks][M], [q][0] always 0
    std::vector<std::vector<double>> dB_phi;  // [blocks][M(M-1)/2], [0] zeros
    std::vector<std::vector<double>> dB_theta; // [blocks][M]
    std::vector<std::vector<double>> dA_phi;
    std::vector<std::vector<double>> dA_theta;
    double norm() const;
};

/// Same gradient specialized to the common-diagonal structure: one shared
/// exponent row and the B_q angles. Cheap (reuses the reduced bound sum).
struct FastZetaGradient {
    int M = 0;
    std::vector<double> dlambda;               // [M], [0] always 0
    std::vector<std::vector<double>> dB_phi;   // [blocks][M(M-1)/2]
    std::vector<std::vector<double>> dB_theta; // [blocks][M]
    double norm() const;
};

/// Direct-sum gradient; valid for any constellation. O(size^2) pairwise
/// resolvent solves, so meant for small codes and oracle checks.
ZetaGradient grad_zeta(const Constellation &c, const SnrWindow &window, int n_rx);

/// Reduced-sum gradient; requires common_diagonal().
FastZetaGradient grad_zeta_fast(const Constellation &c, const SnrWindow &window, int n_rx);

struct DesignConfig {
    int M = 2;
    int N = 1;
    int L = 16;
    int b = 0;
    SnrWindow window{10.0, 100.0};
    int restarts = 20;    ///< stage (a) random initializations
    int max_iters = 150;  ///< per descent
    double step = 0.5;    ///< initial line-search step
    double tol = 1e-5;    ///< gradient-norm stop
    uint64_t seed = 0;
    bool joint = false;   ///< enable the stage (c) joint search over A, B, Lambda
};

struct TraceRow {
    char stage;
    int iter;
    double zeta;
    double grad_norm;
    double step;
};

struct DesignTrace {
    std::vector<TraceRow> rows;
    void write_csv(std::ostream &out) const;
};

enum class StopReason { Converged, MaxIters, Stalled };

/// Which parameter groups a descent may move.
struct ParamMask {
    bool lambda = false;
    bool B = false;
    bool A = false;
};

struct DescendResult {
    Constellation code;
    double zeta_value = 0.0;
    StopReason reason = StopReason::MaxIters;
};

/// Steepest descent with Armijo backtracking (factor 0.5, sufficient
/// decrease 1e-4). Diagonal exponents wrap periodically into [0, L);
/// unitary factors move multiplicatively, X <- X U(-eta g), and are
/// re-projected onto the unitary manifold every 50 accepted steps.
/// Returns the best iterate seen; never throws on stall.
DescendResult descend(const Constellation &c0, const DesignConfig &cfg, ParamMask mask,
                      char stage, DesignTrace &trace);

struct DesignResult {
    Constellation code;
    double zeta_value = 0.0;
    DesignTrace trace;
};

/// Full search strategy: (a) `restarts` random diagonal codes, each
/// descended over the exponents alone, keep the best; (b) attach randomly
/// drawn B_q and descend those with the diagonal fixed; (c, optional) joint
/// descent over A_q, B_q and per-block exponents. Deterministic for a fixed
/// seed at any thread count.
DesignResult design(const DesignConfig &cfg);

} // namespace ustm
