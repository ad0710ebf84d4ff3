#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "ustm/errors.hpp"

namespace ustm {

using cplx = std::complex<double>;

/// Dense complex matrix, row-major, double precision. Sized for the small
/// (M, N <= 16) blocks this library works with; not a general linear algebra
/// package.
class CMatrix {
  public:
    CMatrix() = default;
    CMatrix(int rows, int cols) : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows) * cols) {}

    static CMatrix identity(int n);
    static CMatrix diag(const std::vector<cplx> &d);

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    cplx &operator()(int r, int c) { return a_[static_cast<size_t>(r) * cols_ + c]; }
    const cplx &operator()(int r, int c) const { return a_[static_cast<size_t>(r) * cols_ + c]; }

    const std::vector<cplx> &data() const { return a_; }
    std::vector<cplx> &data() { return a_; }

    CMatrix adjoint() const;
    CMatrix transpose() const;

    CMatrix operator*(const CMatrix &rhs) const;
    CMatrix operator+(const CMatrix &rhs) const;
    CMatrix operator-(const CMatrix &rhs) const;
    CMatrix operator*(cplx s) const;

    /// Scale column c by s in place (A <- A diag(..., s at c, ...)).
    void scale_col(int c, cplx s);

    double frobenius_norm() const;
    double max_abs() const;

    bool same_shape(const CMatrix &o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  private:
    int rows_ = 0, cols_ = 0;
    std::vector<cplx> a_;
};

/// ||a - b||_F
double frobenius_distance(const CMatrix &a, const CMatrix &b);

/// Determinant by LU with partial pivoting. Singular input yields 0.
cplx det(const CMatrix &m);

/// Inverse by Gauss-Jordan with partial pivoting.
/// Throws SingularMatrix when a pivot underflows (|pivot| <= 1e-14 * scale).
CMatrix inverse(const CMatrix &m);

/// Singular values in descending order, via cyclic Jacobi on the Hermitian
/// Gram matrix (robust and plenty fast at these sizes).
std::vector<double> singular_values(const CMatrix &m);

/// Eigenvalues of a Hermitian matrix (ascending), cyclic Jacobi.
std::vector<double> hermitian_eigenvalues(CMatrix h);

/// log(det(h)) for a Hermitian positive definite h, via LU.
double log_det_hpd(const CMatrix &h);

/// Nearest unitary factor of the polar decomposition, m (m^H m)^{-1/2}.
CMatrix polar_unitary(const CMatrix &m);

/// Counter-based deterministic random source. A given (seed, stream) pair
/// yields the same sequence on every run and platform, and streams are
/// independent, so concurrent tasks can each own one without coordination.
class Rng {
  public:
    Rng(uint64_t seed, uint64_t stream) : seed_(seed), stream_(stream) {}

    uint64_t next_u64() {
        uint64_t z = mix(counter_++ + 0x9e3779b97f4a7c15ULL);
        z = mix(z ^ stream_);
        z = mix(z ^ seed_);
        return z;
    }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n), n >= 1.
    uint64_t below(uint64_t n) {
        return static_cast<uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

  private:
    static uint64_t mix(uint64_t x) {
        x ^= x >> 33;
        x *= 0xff51afd7ed558ccdULL;
        x ^= x >> 33;
        x *= 0xc4ceb9fe1a85ec53ULL;
        x ^= x >> 33;
        return x;
    }

    uint64_t seed_ = 0, stream_ = 0, counter_ = 0;
};

/// One CN(0,1) draw: real and imaginary parts independent N(0, 1/2)
/// (Box-Muller in polar form, |z|^2 ~ Exp(1)).
cplx sample_cn01(Rng &rng);

/// M x N matrix of independent CN(0,1) entries.
CMatrix sample_cn01_matrix(Rng &rng, int rows, int cols);

} // namespace ustm
