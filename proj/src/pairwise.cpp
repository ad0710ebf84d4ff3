#include "ustm/pairwise.hpp"

#include <cmath>

namespace ustm {

double pairwise_alpha(double rho) {
    if (!(rho > 0.0))
        throw InvalidParams("pairwise_alpha: rho must be positive");
    return 4.0 * (1.0 + 2.0 * rho) / (rho * rho);
}

BoundContext bound_identity(const CMatrix &phi, double rho, int n_rx) {
    const int M = phi.rows();
    BoundContext ctx;
    ctx.rho = rho;
    ctx.alpha = pairwise_alpha(rho);
    ctx.n_rx = n_rx;
    ctx.phi = phi;

    CMatrix h = phi.adjoint() * (-1.0) - phi;
    for (int i = 0; i < M; ++i)
        h(i, i) += ctx.alpha + 2.0;
    // h is Hermitian with eigenvalues alpha + s_m^2 >= alpha > 0.
    const double log_det = log_det_hpd(h);
    ctx.log_p = M * n_rx * std::log(ctx.alpha) - n_rx * log_det - std::log(2.0);
    ctx.p = std::exp(ctx.log_p);
    ctx.q_mat = inverse(h) * phi;
    return ctx;
}

BoundContext bound_pair(const CMatrix &x, const CMatrix &y, double rho, int n_rx) {
    return bound_identity(x.adjoint() * y, rho, n_rx);
}

double bound_identity_log(const CMatrix &phi, double rho, int n_rx) {
    const int M = phi.rows();
    const double alpha = pairwise_alpha(rho);
    CMatrix h = phi.adjoint() * (-1.0) - phi;
    for (int i = 0; i < M; ++i)
        h(i, i) += alpha + 2.0;
    return M * n_rx * std::log(alpha) - n_rx * log_det_hpd(h) - std::log(2.0);
}

double bound_pair_log(const CMatrix &x, const CMatrix &y, double rho, int n_rx) {
    return bound_identity_log(x.adjoint() * y, rho, n_rx);
}

double bound_svd(const CMatrix &x, const CMatrix &y, double rho, int n_rx) {
    const std::vector<double> s = singular_values(x - y);
    const double denom = 4.0 * (1.0 + 2.0 * rho);
    double p = 0.5;
    for (double sm : s)
        p *= std::pow(1.0 + rho * rho * sm * sm / denom, -n_rx);
    return p;
}

namespace {

PairGradient grad_core(const BoundContext &ctx, double L, double scale) {
    const int M = ctx.phi.rows();
    const double n = static_cast<double>(ctx.n_rx);
    PairGradient g;
    g.M = M;
    g.dphi.assign(static_cast<size_t>(M) * (M - 1) / 2, 0.0);
    g.dnu.assign(g.dphi.size(), 0.0);
    g.dtheta.assign(M, 0.0);
    g.dlambda_scale.assign(M, 0.0);
    for (int p = 0; p < M - 1; ++p)
        for (int q = p + 1; q < M; ++q)
            g.dphi[UnitaryParams::pair_index(M, p, q)] =
                scale * 2.0 * n * (ctx.q_mat(q, p) - ctx.q_mat(p, q)).real();
    for (int k = 0; k < M; ++k) {
        g.dtheta[k] = scale * 2.0 * n * ctx.q_mat(k, k).imag();
        g.dlambda_scale[k] = scale * 4.0 * M_PI * n / L * ctx.q_mat(k, k).imag();
    }
    return g;
}

} // namespace

PairGradient grad_at_identity(const BoundContext &ctx, double L) {
    return grad_core(ctx, L, ctx.p);
}

PairGradient grad_at_identity_relative(const BoundContext &ctx, double L) {
    return grad_core(ctx, L, 1.0);
}

} // namespace ustm
