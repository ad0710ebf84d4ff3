#pragma once

#include <string>
#include <vector>

#include "ustm/numerics.hpp"

namespace ustm {

/// Angles parameterizing an M x M unitary matrix: M(M-1)/2 rotation angles
/// phi_pq, the matching phases nu_pq, and M diagonal phases theta_k.
/// Pairs (p, q), p < q, are stored in row-major order of the upper triangle.
struct UnitaryParams {
    int M = 0;
    std::vector<double> phi;   // size M(M-1)/2
    std::vector<double> nu;    // size M(M-1)/2
    std::vector<double> theta; // size M

    explicit UnitaryParams(int m)
        : M(m), phi(static_cast<size_t>(m) * (m - 1) / 2), nu(phi.size()), theta(m) {}

    /// Index of the (p, q) pair, 0 <= p < q < M.
    static int pair_index(int M, int p, int q) { return p * (2 * M - p - 1) / 2 + (q - p - 1); }

    int count() const { return M * M; }
};

/// U(Theta): product of Givens-like factors U^{p,q}(phi, nu) and diagonal
/// phase factors, covering all of U(M). U(0) = I.
CMatrix build_unitary(const UnitaryParams &params);

/// Uniform draw of every angle within its box.
UnitaryParams random_unitary_params(int M, Rng &rng);

/// A block-form constellation: 2^b blocks, each the L powers of a diagonal
/// generator framed by unitaries, V = A_q Lambda_q^l B_q. Immutable once
/// built; freely shareable across threads.
struct Constellation {
    int M = 0; // transmit antennas
    int L = 0; // diagonal cycle length, power of 2
    int b = 0; // block exponent, 2^b blocks
    std::vector<std::vector<double>> lambda; // [2^b][M], lambda[q][0] == 1
    std::vector<CMatrix> A, B;               // 2^b unitary M x M each, A[0] = B[0] = I

    int blocks() const { return 1 << b; }
    long long size() const { return static_cast<long long>(blocks()) * L; }
    int log2_size() const;
    int log2_L() const;

    /// True when Lambda_q is shared across blocks and every A_q = I
    /// (the structure the fast union bound requires).
    bool common_diagonal() const;
};

/// Validate and assemble; tol is the unitarity tolerance (use 1e-10 for
/// generated codes, 1e-3 for rounded external data). Throws InvalidParams /
/// InvariantViolation with the offending matrix named.
Constellation make_constellation(int M, int L, int b, std::vector<std::vector<double>> lambda,
                                 std::vector<CMatrix> A, std::vector<CMatrix> B,
                                 double tol = 1e-10);

/// Single-block code with integer diagonal exponents u (u[0] = 1). The
/// classic cyclic group code; group closure holds exactly.
Constellation cyclic_code(const std::vector<long long> &u, int L);

/// Single-block code with real diagonal exponents (u[0] = 1).
Constellation continuous_diagonal_code(const std::vector<double> &u, int L);

/// A_q diag(exp(i 2 pi lambda_qm l / L)) B_q. Throws IndexOutOfRange.
CMatrix signal_matrix(const Constellation &c, int q, int l);

/// Diagonal factor alone, diag(exp(i 2 pi lambda_qm l / L)); l may be any
/// integer (negative powers arise in the pairwise reductions).
CMatrix diagonal_power(const Constellation &c, int q, long long l);

/// (b + log2 L) / M bits per channel use.
double spectral_efficiency(const Constellation &c);

/// (1/2) min over distinct code pairs of |det(V - V')|^(1/M).
double diversity_product(const Constellation &c);

/// JSON round trip. load() revalidates every invariant with the loose
/// unitarity tolerance (1e-3) so externally rounded data is accepted.
void save(const Constellation &c, const std::string &path);
Constellation load(const std::string &path);

} // namespace ustm
