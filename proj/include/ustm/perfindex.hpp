#pragma once

#include "ustm/constellation.hpp"
#include "ustm/pairwise.hpp"

namespace ustm {

/// Popcount of p XOR q: Hamming distance of binary labels.
int hamming_distance(long long p, long long q);

/// w(k) = sum_{l=0}^{L-k-1} d_H(l+k, l); the multiplicity table that powers
/// the reduced union bound. w(0) = 0.
struct WeightTable {
    int L = 0;
    std::vector<long long> w;
};
WeightTable weight_table(int L);

/// SNR window of practical interest, linear scale, rho1 <= rho2.
struct SnrWindow {
    double rho1 = 0.0;
    double rho2 = 0.0;
};

/// A union-bound evaluation: log10 of the bound plus the number of distinct
/// pairwise bounds that were evaluated to produce it.
struct UnionBound {
    double log10_pbit = 0.0;
    long long pair_evals = 0;
};

/// Full double sum over all label pairs with binary-to-decimal bit labels
/// (first b bits the block index, the rest the diagonal index). Works for
/// any constellation. OpenMP-parallel with a fixed reduction order, so the
/// result is identical at any thread count.
UnionBound union_bound_direct(const Constellation &c, double rho, int n_rx);

/// Plain serial double loop; reference implementation for the parallel sum.
UnionBound union_bound_direct_serial(const Constellation &c, double rho, int n_rx);

/// Reduced sum for the common-diagonal structure (Lambda_q = Lambda,
/// A_q = I): evaluates exactly (L-1) + 2^{b-1} (2^b - 1)(2L - 1) distinct
/// pairwise bounds, with the cross-block multiplicity
/// w(|k|) + (L-|k|) d_H(p,q). Throws StructureViolation off-structure.
UnionBound union_bound_fast(const Constellation &c, double rho, int n_rx);

/// log10 P_bit via union_bound_fast when the structure admits it, else the
/// direct sum.
double union_bound_log10(const Constellation &c, double rho, int n_rx);

/// Trapezoid index
/// [log10 P_bit(rho2) + log10 P_bit(rho1)] [log10 rho2 - log10 rho1];
/// more negative is better.
double zeta(const Constellation &c, const SnrWindow &window, int n_rx);

/// Solve P_bit(rho1) = target1 and P_bit(rho2) = target2 (relative 1e-6) by
/// bracket doubling plus bisection on the strictly decreasing bound.
/// Throws NoConvergence after 200 iterations per endpoint.
SnrWindow calibrate_snr(const Constellation &c, int n_rx, double target1 = 1e-3,
                        double target2 = 1e-5);

/// High-SNR power-law approximation of the union bound,
/// log10 P_bit ~ -MN log10 rho + const(pairwise determinants).
/// Throws ZeroDeterminant when some pair is singular (non-full-diversity).
double asymptotic_bound_log10(const Constellation &c, double rho, int n_rx);

} // namespace ustm
