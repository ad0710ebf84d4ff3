#include "ustm/constellation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ustm {

namespace {

bool is_pow2(int x) { return x >= 1 && (x & (x - 1)) == 0; }

// Givens-like factor acting on coordinates (p, q), embedded in M dims.
CMatrix givens_factor(int M, int p, int q, double phi, double nu) {
    CMatrix u = CMatrix::identity(M);
    const double c = std::cos(phi), s = std::sin(phi);
    u(p, p) = c;
    u(q, q) = c;
    u(p, q) = -s * std::polar(1.0, -nu);
    u(q, p) = s * std::polar(1.0, nu);
    return u;
}

} // namespace

CMatrix build_unitary(const UnitaryParams &params) {
    const int M = params.M;
    if (M < 1)
        throw InvalidParams("build_unitary: M must be >= 1");
    if (M == 1)
        return CMatrix::diag({std::polar(1.0, params.theta[0])});

    auto factor_row = [&](int r) { // product U^{r,r+1} ... U^{r,M-1} (0-based row r)
        CMatrix f = CMatrix::identity(M);
        for (int q = r + 1; q < M; ++q) {
            const int idx = UnitaryParams::pair_index(M, r, q);
            f = f * givens_factor(M, r, q, params.phi[idx], params.nu[idx]);
        }
        return f;
    };

    // W starts as the 2 x 2 phase block on the last two coordinates and is
    // grown upward one coordinate at a time.
    CMatrix w = CMatrix::identity(M);
    w(M - 2, M - 2) = std::polar(1.0, params.theta[M - 2]);
    w(M - 1, M - 1) = std::polar(1.0, params.theta[M - 1]);
    for (int k = 1; k <= M - 2; ++k) {
        const int top = M - k - 2; // 0-based coordinate gaining its phase
        CMatrix d = CMatrix::identity(M);
        d(top, top) = std::polar(1.0, params.theta[top]);
        w = d * (w * factor_row(M - k - 1));
    }
    return w * factor_row(0);
}

UnitaryParams random_unitary_params(int M, Rng &rng) {
    UnitaryParams p(M);
    for (int i = 0; i < M - 1; ++i) {
        for (int j = i + 1; j < M; ++j) {
            const int idx = UnitaryParams::pair_index(M, i, j);
            p.phi[idx] = (j == M - 1) ? rng.uniform(-M_PI, M_PI) : rng.uniform(-M_PI / 2, M_PI / 2);
            p.nu[idx] = rng.uniform(-M_PI / 2, M_PI / 2);
        }
    }
    for (int k = 0; k < M; ++k)
        p.theta[k] = (k == M - 1) ? rng.uniform(-M_PI, M_PI) : rng.uniform(-M_PI / 2, M_PI / 2);
    return p;
}

int Constellation::log2_size() const { return b + log2_L(); }
int Constellation::log2_L() const { return std::countr_zero(static_cast<unsigned>(L)); }

bool Constellation::common_diagonal() const {
    for (int q = 1; q < blocks(); ++q) {
        if (lambda[q] != lambda[0])
            return false;
    }
    for (int q = 0; q < blocks(); ++q) {
        for (int i = 0; i < M; ++i)
            for (int j = 0; j < M; ++j)
                if (A[q](i, j) != (i == j ? cplx{1.0} : cplx{}))
                    return false;
    }
    return true;
}

Constellation make_constellation(int M, int L, int b, std::vector<std::vector<double>> lambda,
                                 std::vector<CMatrix> A, std::vector<CMatrix> B, double tol) {
    if (M < 1)
        throw InvalidParams("constellation: M must be >= 1");
    if (!is_pow2(L) || L < 2)
        throw InvalidParams("constellation: L must be a power of 2, L >= 2");
    if (b < 0)
        throw InvalidParams("constellation: b must be >= 0");
    const size_t nb = size_t{1} << b;
    if (lambda.size() != nb || A.size() != nb || B.size() != nb)
        throw InvalidParams("constellation: lambda/A/B must have 2^b entries");
    for (size_t q = 0; q < nb; ++q) {
        if (lambda[q].size() != static_cast<size_t>(M))
            throw InvalidParams("constellation: lambda row " + std::to_string(q) +
                                " must have M entries");
        if (lambda[q][0] != 1.0)
            throw InvariantViolation("constellation: lambda[" + std::to_string(q) +
                                     "][1] must be exactly 1");
        for (int m = 0; m < M; ++m)
            if (!(lambda[q][m] >= 0.0 && lambda[q][m] < static_cast<double>(L)))
                throw InvariantViolation("constellation: lambda[" + std::to_string(q) + "][" +
                                         std::to_string(m + 1) + "] outside [0, L)");
        auto check_unitary = [&](const CMatrix &u, const char *name) {
            if (u.rows() != M || u.cols() != M)
                throw InvalidParams(std::string("constellation: ") + name + "_" +
                                    std::to_string(q) + " must be M x M");
            const double resid = frobenius_distance(u.adjoint() * u, CMatrix::identity(M));
            if (resid > tol)
                throw InvariantViolation(std::string("constellation: ") + name + "_" +
                                         std::to_string(q) + " unitarity residual " +
                                         std::to_string(resid) + " exceeds tolerance " +
                                         std::to_string(tol));
        };
        check_unitary(A[q], "A");
        check_unitary(B[q], "B");
        if (q == 0) {
            if (frobenius_distance(A[0], CMatrix::identity(M)) > tol ||
                frobenius_distance(B[0], CMatrix::identity(M)) > tol)
                throw InvariantViolation("constellation: A_0 and B_0 must be the identity");
        }
    }
    Constellation c;
    c.M = M;
    c.L = L;
    c.b = b;
    c.lambda = std::move(lambda);
    c.A = std::move(A);
    c.B = std::move(B);
    return c;
}

Constellation cyclic_code(const std::vector<long long> &u, int L) {
    std::vector<double> ud(u.size());
    for (size_t i = 0; i < u.size(); ++i) {
        if (u[i] < 0 || u[i] >= L)
            throw InvalidParams("cyclic_code: exponents must lie in [0, L)");
        ud[i] = static_cast<double>(u[i]);
    }
    return continuous_diagonal_code(ud, L);
}

Constellation continuous_diagonal_code(const std::vector<double> &u, int L) {
    const int M = static_cast<int>(u.size());
    if (M < 1)
        throw InvalidParams("diagonal code: need at least one exponent");
    if (u[0] != 1.0)
        throw InvalidParams("diagonal code: first exponent must be 1");
    return make_constellation(M, L, 0, {u}, {CMatrix::identity(M)}, {CMatrix::identity(M)});
}

CMatrix diagonal_power(const Constellation &c, int q, long long l) {
    std::vector<cplx> d(c.M);
    for (int m = 0; m < c.M; ++m)
        d[m] = std::polar(1.0, 2.0 * M_PI * c.lambda[q][m] * static_cast<double>(l) / c.L);
    return CMatrix::diag(d);
}

CMatrix signal_matrix(const Constellation &c, int q, int l) {
    if (q < 0 || q >= c.blocks() || l < 0 || l >= c.L)
        throw IndexOutOfRange("signal_matrix: (q, l) = (" + std::to_string(q) + ", " +
                              std::to_string(l) + ") outside constellation");
    CMatrix av = c.A[q];
    for (int m = 0; m < c.M; ++m)
        av.scale_col(m, std::polar(1.0, 2.0 * M_PI * c.lambda[q][m] * l / c.L));
    return av * c.B[q];
}

double spectral_efficiency(const Constellation &c) {
    return static_cast<double>(c.b + c.log2_L()) / c.M;
}

double diversity_product(const Constellation &c) {
    if (c.size() < 2)
        throw InvalidParams("diversity_product: constellation must have at least 2 matrices");
    double min_abs_det = std::numeric_limits<double>::infinity();
    if (c.b == 0) {
        // V_l - V_l' = Lambda^l' (Lambda^(l-l') - I), so only the L-1 power
        // differences matter.
        const CMatrix eye = CMatrix::identity(c.M);
        for (int k = 1; k < c.L; ++k) {
            const double v = std::abs(det(diagonal_power(c, 0, k) - eye));
            min_abs_det = std::min(min_abs_det, v);
        }
    } else {
        std::vector<CMatrix> v(static_cast<size_t>(c.size()));
        for (int q = 0; q < c.blocks(); ++q)
            for (int l = 0; l < c.L; ++l)
                v[static_cast<size_t>(q) * c.L + l] = signal_matrix(c, q, l);
        const long long n = c.size();
#pragma omp parallel for schedule(dynamic, 16) reduction(min : min_abs_det)
        for (long long i = 0; i < n; ++i) {
            for (long long j = i + 1; j < n; ++j) {
                const double d = std::abs(det(v[i] - v[j]));
                min_abs_det = std::min(min_abs_det, d);
            }
        }
    }
    return 0.5 * std::pow(min_abs_det, 1.0 / c.M);
}

namespace {

nlohmann::json matrix_to_json(const CMatrix &m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < m.cols(); ++j)
            row.push_back({m(i, j).real(), m(i, j).imag()});
        rows.push_back(std::move(row));
    }
    return rows;
}

CMatrix matrix_from_json(const nlohmann::json &j) {
    if (!j.is_array() || j.empty())
        throw ParseError("constellation file: matrix must be a non-empty array of rows");
    const int rows = static_cast<int>(j.size());
    const int cols = static_cast<int>(j[0].size());
    CMatrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        if (static_cast<int>(j[i].size()) != cols)
            throw ParseError("constellation file: ragged matrix rows");
        for (int c = 0; c < cols; ++c) {
            const auto &e = j[i][c];
            if (!e.is_array() || e.size() != 2)
                throw ParseError("constellation file: entries must be [re, im] pairs");
            m(i, c) = cplx(e[0].get<double>(), e[1].get<double>());
        }
    }
    return m;
}

} // namespace

void save(const Constellation &c, const std::string &path) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["M"] = c.M;
    j["L"] = c.L;
    j["b"] = c.b;
    j["lambda"] = c.lambda;
    nlohmann::json a = nlohmann::json::array(), bm = nlohmann::json::array();
    for (int q = 0; q < c.blocks(); ++q) {
        a.push_back(matrix_to_json(c.A[q]));
        bm.push_back(matrix_to_json(c.B[q]));
    }
    j["A"] = std::move(a);
    j["B"] = std::move(bm);
    std::ofstream out(path);
    if (!out)
        throw Error("save: cannot open " + path);
    out << j.dump(1) << "\n";
}

Constellation load(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("load: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(std::string("load: invalid JSON: ") + e.what());
    }
    try {
        const int M = j.at("M").get<int>();
        const int L = j.at("L").get<int>();
        const int b = j.at("b").get<int>();
        auto lambda = j.at("lambda").get<std::vector<std::vector<double>>>();
        std::vector<CMatrix> A, B;
        for (const auto &m : j.at("A"))
            A.push_back(matrix_from_json(m));
        for (const auto &m : j.at("B"))
            B.push_back(matrix_from_json(m));
        // Rounded external data: accept unitarity up to 1e-3.
        return make_constellation(M, L, b, std::move(lambda), std::move(A), std::move(B), 1e-3);
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(std::string("load: missing or malformed field: ") + e.what());
    }
}

} // namespace ustm
