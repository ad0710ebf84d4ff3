#include "ustm/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace ustm {

CMatrix CMatrix::identity(int n) {
    CMatrix m(n, n);
    for (int i = 0; i < n; ++i)
        m(i, i) = 1.0;
    return m;
}

CMatrix CMatrix::diag(const std::vector<cplx> &d) {
    CMatrix m(static_cast<int>(d.size()), static_cast<int>(d.size()));
    for (size_t i = 0; i < d.size(); ++i)
        m(static_cast<int>(i), static_cast<int>(i)) = d[i];
    return m;
}

CMatrix CMatrix::adjoint() const {
    CMatrix r(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j)
            r(j, i) = std::conj((*this)(i, j));
    return r;
}

CMatrix CMatrix::transpose() const {
    CMatrix r(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j)
            r(j, i) = (*this)(i, j);
    return r;
}

CMatrix CMatrix::operator*(const CMatrix &rhs) const {
    CMatrix r(rows_, rhs.cols_);
    for (int i = 0; i < rows_; ++i) {
        for (int k = 0; k < cols_; ++k) {
            const cplx aik = (*this)(i, k);
            if (aik == cplx{})
                continue;
            for (int j = 0; j < rhs.cols_; ++j)
                r(i, j) += aik * rhs(k, j);
        }
    }
    return r;
}

CMatrix CMatrix::operator+(const CMatrix &rhs) const {
    CMatrix r = *this;
    for (size_t i = 0; i < a_.size(); ++i)
        r.a_[i] += rhs.a_[i];
    return r;
}

CMatrix CMatrix::operator-(const CMatrix &rhs) const {
    CMatrix r = *this;
    for (size_t i = 0; i < a_.size(); ++i)
        r.a_[i] -= rhs.a_[i];
    return r;
}

CMatrix CMatrix::operator*(cplx s) const {
    CMatrix r = *this;
    for (auto &v : r.a_)
        v *= s;
    return r;
}

void CMatrix::scale_col(int c, cplx s) {
    for (int i = 0; i < rows_; ++i)
        (*this)(i, c) *= s;
}

double CMatrix::frobenius_norm() const {
    double s = 0.0;
    for (const auto &v : a_)
        s += std::norm(v);
    return std::sqrt(s);
}

double CMatrix::max_abs() const {
    double s = 0.0;
    for (const auto &v : a_)
        s = std::max(s, std::abs(v));
    return s;
}

double frobenius_distance(const CMatrix &a, const CMatrix &b) { return (a - b).frobenius_norm(); }

namespace {

// LU with partial pivoting in place; returns the permutation sign, or 0 when
// a pivot column is exactly empty (singular).
int lu_decompose(CMatrix &m, std::vector<int> *perm = nullptr) {
    const int n = m.rows();
    int sign = 1;
    for (int k = 0; k < n; ++k) {
        int piv = k;
        double best = std::abs(m(k, k));
        for (int i = k + 1; i < n; ++i) {
            const double v = std::abs(m(i, k));
            if (v > best) {
                best = v;
                piv = i;
            }
        }
        if (best == 0.0)
            return 0;
        if (piv != k) {
            for (int j = 0; j < n; ++j)
                std::swap(m(k, j), m(piv, j));
            sign = -sign;
        }
        if (perm)
            (*perm)[k] = piv;
        for (int i = k + 1; i < n; ++i) {
            const cplx f = m(i, k) / m(k, k);
            m(i, k) = f;
            for (int j = k + 1; j < n; ++j)
                m(i, j) -= f * m(k, j);
        }
    }
    return sign;
}

} // namespace

cplx det(const CMatrix &m) {
    if (m.rows() != m.cols())
        throw InvalidParams("det: matrix must be square");
    CMatrix lu = m;
    const int sign = lu_decompose(lu);
    if (sign == 0)
        return 0.0;
    cplx d = static_cast<double>(sign);
    for (int i = 0; i < lu.rows(); ++i)
        d *= lu(i, i);
    return d;
}

CMatrix inverse(const CMatrix &m) {
    if (m.rows() != m.cols())
        throw InvalidParams("inverse: matrix must be square");
    const int n = m.rows();
    const double tol = 1e-14 * std::max(1.0, m.max_abs());
    CMatrix a = m;
    CMatrix inv = CMatrix::identity(n);
    for (int k = 0; k < n; ++k) {
        int piv = k;
        double best = std::abs(a(k, k));
        for (int i = k + 1; i < n; ++i) {
            const double v = std::abs(a(i, k));
            if (v > best) {
                best = v;
                piv = i;
            }
        }
        if (best <= tol)
            throw SingularMatrix("inverse: pivot underflow at column " + std::to_string(k));
        if (piv != k) {
            for (int j = 0; j < n; ++j) {
                std::swap(a(k, j), a(piv, j));
                std::swap(inv(k, j), inv(piv, j));
            }
        }
        const cplx p = a(k, k);
        for (int j = 0; j < n; ++j) {
            a(k, j) /= p;
            inv(k, j) /= p;
        }
        for (int i = 0; i < n; ++i) {
            if (i == k)
                continue;
            const cplx f = a(i, k);
            if (f == cplx{})
                continue;
            for (int j = 0; j < n; ++j) {
                a(i, j) -= f * a(k, j);
                inv(i, j) -= f * inv(k, j);
            }
        }
    }
    return inv;
}

namespace {

// Cyclic Jacobi diagonalization of a Hermitian matrix. Accumulates the
// eigenvector matrix into *vecs when given. Rotation on coords (p, q):
// J = [[c, s], [-s e^{-i phi}, c e^{-i phi}]] with phi the phase of h_pq
// and theta chosen to annihilate the rotated off-diagonal entry.
void jacobi_hermitian(CMatrix &h, CMatrix *vecs) {
    const int n = h.rows();
    if (n != h.cols())
        throw InvalidParams("jacobi_hermitian: matrix must be square");
    const double scale = std::max(h.frobenius_norm(), 1e-300);
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n - 1; ++p)
            for (int q = p + 1; q < n; ++q)
                off += 2.0 * std::norm(h(p, q));
        if (std::sqrt(off) <= 1e-15 * scale)
            break;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const cplx hpq = h(p, q);
                const double r = std::abs(hpq);
                if (r <= 1e-18 * scale)
                    continue;
                const double phi = std::arg(hpq);
                const double theta =
                    0.5 * std::atan2(2.0 * r, h(q, q).real() - h(p, p).real());
                const double c = std::cos(theta);
                const double s = std::sin(theta);
                const cplx eiphi = std::polar(1.0, phi);
                for (int i = 0; i < n; ++i) {
                    const cplx bip = h(i, p), biq = h(i, q);
                    h(i, p) = bip * c - biq * s * std::conj(eiphi);
                    h(i, q) = bip * s + biq * c * std::conj(eiphi);
                    if (vecs) {
                        const cplx vip = (*vecs)(i, p), viq = (*vecs)(i, q);
                        (*vecs)(i, p) = vip * c - viq * s * std::conj(eiphi);
                        (*vecs)(i, q) = vip * s + viq * c * std::conj(eiphi);
                    }
                }
                for (int j = 0; j < n; ++j) {
                    const cplx bpj = h(p, j), bqj = h(q, j);
                    h(p, j) = c * bpj - s * eiphi * bqj;
                    h(q, j) = s * bpj + c * eiphi * bqj;
                }
            }
        }
    }
}

} // namespace

std::vector<double> hermitian_eigenvalues(CMatrix h) {
    jacobi_hermitian(h, nullptr);
    std::vector<double> eig(h.rows());
    for (int i = 0; i < h.rows(); ++i)
        eig[static_cast<size_t>(i)] = h(i, i).real();
    std::sort(eig.begin(), eig.end());
    return eig;
}

std::vector<double> singular_values(const CMatrix &m) {
    const bool wide = m.cols() > m.rows();
    const CMatrix gram = wide ? m * m.adjoint() : m.adjoint() * m;
    std::vector<double> eig = hermitian_eigenvalues(gram);
    std::vector<double> sv(eig.size());
    for (size_t i = 0; i < eig.size(); ++i)
        sv[i] = std::sqrt(std::max(0.0, eig[eig.size() - 1 - i]));
    return sv;
}

double log_det_hpd(const CMatrix &h) {
    CMatrix lu = h;
    const int sign = lu_decompose(lu);
    if (sign == 0)
        throw SingularMatrix("log_det_hpd: singular matrix");
    double ld = 0.0;
    for (int i = 0; i < lu.rows(); ++i)
        ld += std::log(std::abs(lu(i, i)));
    return ld;
}

CMatrix polar_unitary(const CMatrix &m) {
    // m (m^H m)^{-1/2} via the Jacobi eigendecomposition of the Gram matrix.
    const int n = m.cols();
    CMatrix h = m.adjoint() * m;
    CMatrix v = CMatrix::identity(n);
    jacobi_hermitian(h, &v);
    CMatrix inv_sqrt(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            cplx acc = 0.0;
            for (int k = 0; k < n; ++k) {
                const double ev = std::max(h(k, k).real(), 1e-300);
                acc += v(i, k) * std::conj(v(j, k)) / std::sqrt(ev);
            }
            inv_sqrt(i, j) = acc;
        }
    return m * inv_sqrt;
}

cplx sample_cn01(Rng &rng) {
    const double u1 = rng.uniform01();
    const double u2 = rng.uniform01();
    const double r = std::sqrt(-std::log1p(-u1));
    const double th = 2.0 * M_PI * u2;
    return {r * std::cos(th), r * std::sin(th)};
}

CMatrix sample_cn01_matrix(Rng &rng, int rows, int cols) {
    CMatrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            m(i, j) = sample_cn01(rng);
    return m;
}

} // namespace ustm
