#include "ustm/perfindex.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ustm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Running log-sum-exp accumulator that can be merged; merging in a fixed
// order keeps parallel reductions bit-reproducible.
struct LogSum {
    double mx = kNegInf;
    double s = 0.0;

    void add(double lt) {
        if (lt == kNegInf)
            return;
        if (lt <= mx) {
            s += std::exp(lt - mx);
        } else {
            s = s * std::exp(mx - lt) + 1.0;
            mx = lt;
        }
    }
    void merge(const LogSum &o) {
        if (o.mx == kNegInf)
            return;
        if (o.mx <= mx) {
            s += o.s * std::exp(o.mx - mx);
        } else {
            s = s * std::exp(mx - o.mx) + o.s;
            mx = o.mx;
        }
    }
    double value() const { return mx == kNegInf ? kNegInf : mx + std::log(s); }
};

// Log-sum-exp of a flat term vector, fixed index order.
double lse_ordered(const std::vector<double> &terms) {
    LogSum acc;
    for (double t : terms)
        acc.add(t);
    return acc.value();
}

std::vector<CMatrix> all_signal_matrices(const Constellation &c) {
    std::vector<CMatrix> v(static_cast<size_t>(c.size()));
    for (int q = 0; q < c.blocks(); ++q)
        for (int l = 0; l < c.L; ++l)
            v[static_cast<size_t>(q) * c.L + l] = signal_matrix(c, q, l);
    return v;
}

} // namespace

int hamming_distance(long long p, long long q) {
    if (p < 0 || q < 0)
        throw InvalidParams("hamming_distance: labels must be nonnegative");
    return std::popcount(static_cast<unsigned long long>(p ^ q));
}

WeightTable weight_table(int L) {
    if (L < 2 || (L & (L - 1)) != 0)
        throw InvalidParams("weight_table: L must be a power of 2, L >= 2");
    WeightTable t;
    t.L = L;
    t.w.assign(L, 0);
#pragma omp parallel for schedule(static)
    for (int k = 0; k < L; ++k) {
        long long acc = 0;
        for (int l = 0; l + k < L; ++l)
            acc += hamming_distance(l + k, l);
        t.w[k] = acc;
    }
    return t;
}

UnionBound union_bound_direct(const Constellation &c, double rho, int n_rx) {
    const std::vector<CMatrix> v = all_signal_matrices(c);
    const long long n = c.size();
    const double log2L_total = c.log2_size();
    // One LogSum per leading index; each row is accumulated by one thread in
    // index order and rows are merged in index order afterwards.
    std::vector<LogSum> rows(static_cast<size_t>(std::max<long long>(n - 1, 0)));
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < n - 1; ++i) {
        LogSum acc;
        for (long long j = i + 1; j < n; ++j) {
            const double lt = std::log(static_cast<double>(hamming_distance(i, j))) +
                              bound_pair_log(v[static_cast<size_t>(i)],
                                             v[static_cast<size_t>(j)], rho, n_rx);
            acc.add(lt);
        }
        rows[static_cast<size_t>(i)] = acc;
    }
    LogSum total;
    for (const LogSum &r : rows)
        total.merge(r);
    const double ln_pbit =
        total.value() + std::log(2.0) - std::log(static_cast<double>(n)) - std::log(log2L_total);
    return {ln_pbit / std::numbers::ln10, n * (n - 1) / 2};
}

UnionBound union_bound_direct_serial(const Constellation &c, double rho, int n_rx) {
    const std::vector<CMatrix> v = all_signal_matrices(c);
    const long long n = c.size();
    LogSum total;
    for (long long i = 0; i < n - 1; ++i)
        for (long long j = i + 1; j < n; ++j)
            total.add(std::log(static_cast<double>(hamming_distance(i, j))) +
                      bound_pair_log(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)], rho,
                                     n_rx));
    const double ln_pbit = total.value() + std::log(2.0) -
                           std::log(static_cast<double>(n)) - std::log(c.log2_size());
    return {ln_pbit / std::numbers::ln10, n * (n - 1) / 2};
}

UnionBound union_bound_fast(const Constellation &c, double rho, int n_rx) {
    if (!c.common_diagonal())
        throw StructureViolation(
            "union_bound_fast: requires Lambda_q = Lambda and A_q = I for all q");
    const int L = c.L;
    const int nb = c.blocks();
    const WeightTable wt = weight_table(L);

    const long long n_same = L - 1;
    const long long n_cross = static_cast<long long>(nb) * (nb - 1) / 2 * (2LL * L - 1);
    std::vector<double> terms(static_cast<size_t>(n_same + n_cross), kNegInf);

#pragma omp parallel for schedule(dynamic, 64)
    for (int k = 1; k < L; ++k) {
        terms[static_cast<size_t>(k - 1)] =
            std::log(static_cast<double>(nb) * wt.w[k]) +
            bound_identity_log(diagonal_power(c, 0, k), rho, n_rx);
    }

    if (nb > 1) {
        // Enumerate (p, q) pairs once so cross terms land in fixed slots.
        std::vector<std::pair<int, int>> pq;
        for (int p = 0; p < nb - 1; ++p)
            for (int q = p + 1; q < nb; ++q)
                pq.emplace_back(p, q);
        const long long stride = 2LL * L - 1;
#pragma omp parallel for schedule(dynamic, 1)
        for (size_t t = 0; t < pq.size(); ++t) {
            const auto [p, q] = pq[t];
            const int dpq = hamming_distance(p, q);
            for (long long k = -(L - 1); k <= L - 1; ++k) {
                const long long mult = wt.w[std::llabs(k)] + (L - std::llabs(k)) * dpq;
                const double lt =
                    std::log(static_cast<double>(mult)) +
                    bound_pair_log(c.B[p], diagonal_power(c, 0, k) * c.B[q], rho, n_rx);
                terms[static_cast<size_t>(n_same + t * stride + (k + L - 1))] = lt;
            }
        }
    }

    const double ln_pbit = lse_ordered(terms) + std::log(2.0) - std::log(static_cast<double>(nb)) -
                           std::log(static_cast<double>(L)) - std::log(c.log2_size());
    return {ln_pbit / std::numbers::ln10, n_same + n_cross};
}

double union_bound_log10(const Constellation &c, double rho, int n_rx) {
    return c.common_diagonal() ? union_bound_fast(c, rho, n_rx).log10_pbit
                               : union_bound_direct(c, rho, n_rx).log10_pbit;
}

double zeta(const Constellation &c, const SnrWindow &window, int n_rx) {
    if (!(window.rho1 > 0.0) || !(window.rho2 >= window.rho1))
        throw InvalidParams("zeta: need 0 < rho1 <= rho2");
    if (window.rho1 == window.rho2)
        return 0.0;
    const double lp1 = union_bound_log10(c, window.rho1, n_rx);
    const double lp2 = union_bound_log10(c, window.rho2, n_rx);
    return (lp2 + lp1) * (std::log10(window.rho2) - std::log10(window.rho1));
}

namespace {

double solve_snr_for_target(const Constellation &c, int n_rx, double target) {
    const double lt = std::log10(target);
    int iters = 0;
    auto f = [&](double rho) { return union_bound_log10(c, rho, n_rx) - lt; };
    double lo = 1.0, hi = 1.0;
    double flo = f(1.0);
    if (flo > 0.0) {
        // Bound above target at rho = 1; walk up.
        hi = 1.0;
        double fhi = flo;
        while (fhi > 0.0) {
            lo = hi;
            hi *= 4.0;
            fhi = f(hi);
            if (++iters > 200)
                throw NoConvergence("calibrate_snr: bracketing failed (target too small?)");
        }
    } else {
        lo = 1.0;
        while (flo <= 0.0) {
            hi = lo;
            lo /= 4.0;
            flo = f(lo);
            if (++iters > 200)
                throw NoConvergence("calibrate_snr: bracketing failed (target too large?)");
        }
    }
    // Bisection on log rho; the bound is strictly decreasing in rho.
    double lrho_lo = std::log(lo), lrho_hi = std::log(hi);
    while (true) {
        const double mid = 0.5 * (lrho_lo + lrho_hi);
        const double rho = std::exp(mid);
        const double fm = f(rho);
        if (std::abs(std::exp(std::numbers::ln10 * fm) - 1.0) <= 1e-6)
            return rho;
        (fm > 0.0 ? lrho_lo : lrho_hi) = mid;
        if (++iters > 200)
            throw NoConvergence("calibrate_snr: bisection did not reach tolerance");
    }
}

} // namespace

SnrWindow calibrate_snr(const Constellation &c, int n_rx, double target1, double target2) {
    if (!(target1 > target2) || !(target2 > 0.0))
        throw InvalidParams("calibrate_snr: need target1 > target2 > 0");
    SnrWindow w;
    w.rho1 = solve_snr_for_target(c, n_rx, target1);
    w.rho2 = solve_snr_for_target(c, n_rx, target2);
    return w;
}

double asymptotic_bound_log10(const Constellation &c, double rho, int n_rx) {
    const int M = c.M;
    const double mn = static_cast<double>(M) * n_rx;
    const double ln8 = std::log(8.0);
    const double det_floor = 1e-12;
    LogSum acc;
    if (c.common_diagonal()) {
        const WeightTable wt = weight_table(c.L);
        const CMatrix eye = CMatrix::identity(M);
        for (int k = 1; k < c.L; ++k) {
            const double ad = std::abs(det(diagonal_power(c, 0, k) - eye));
            if (ad < det_floor)
                throw ZeroDeterminant("asymptotic_bound: singular pair at diagonal offset " +
                                      std::to_string(k));
            acc.add(std::log(static_cast<double>(c.blocks()) * wt.w[k]) + mn * ln8 -
                    2.0 * n_rx * std::log(ad));
        }
        for (int p = 0; p < c.blocks() - 1; ++p) {
            for (int q = p + 1; q < c.blocks(); ++q) {
                const int dpq = hamming_distance(p, q);
                for (long long k = -(c.L - 1); k <= c.L - 1; ++k) {
                    const long long mult = wt.w[std::llabs(k)] + (c.L - std::llabs(k)) * dpq;
                    const double ad = std::abs(det(c.B[p] - diagonal_power(c, 0, k) * c.B[q]));
                    if (ad < det_floor)
                        throw ZeroDeterminant("asymptotic_bound: singular cross-block pair");
                    acc.add(std::log(static_cast<double>(mult)) + mn * ln8 -
                            2.0 * n_rx * std::log(ad));
                }
            }
        }
        const double ln_pbit = -mn * std::log(rho) + acc.value() -
                               std::log(static_cast<double>(c.blocks())) -
                               std::log(static_cast<double>(c.L)) - std::log(c.log2_size());
        return ln_pbit / std::numbers::ln10;
    }
    const std::vector<CMatrix> v = all_signal_matrices(c);
    const long long n = c.size();
    for (long long i = 0; i < n - 1; ++i) {
        for (long long j = i + 1; j < n; ++j) {
            const double ad =
                std::abs(det(v[static_cast<size_t>(i)] - v[static_cast<size_t>(j)]));
            if (ad < det_floor)
                throw ZeroDeterminant("asymptotic_bound: singular pair (" + std::to_string(i) +
                                      ", " + std::to_string(j) + ")");
            acc.add(std::log(static_cast<double>(hamming_distance(i, j))) + mn * ln8 -
                    2.0 * n_rx * std::log(ad));
        }
    }
    const double ln_pbit = -mn * std::log(rho) + acc.value() -
                           std::log(static_cast<double>(n)) - std::log(c.log2_size());
    return ln_pbit / std::numbers::ln10;
}

} // namespace ustm
