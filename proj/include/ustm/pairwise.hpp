#pragma once

#include "ustm/constellation.hpp"
#include "ustm/numerics.hpp"

namespace ustm {

/// alpha = 4 (1 + 2 rho) / rho^2, rho the linear SNR.
double pairwise_alpha(double rho);

/// Everything cached for one (Phi, rho, N) bound evaluation: the resolvent
/// matrix Q = [(alpha + 2) I - Phi - Phi^H]^{-1} Phi and the bound itself,
/// kept in log space so high-SNR products cannot underflow.
struct BoundContext {
    double rho = 0.0;
    double alpha = 0.0;
    int n_rx = 0;
    CMatrix phi;
    CMatrix q_mat;
    double log_p = 0.0; // natural log of the bound
    double p = 0.0;     // exp(log_p); may underflow to 0 at extreme SNR
};

/// Chernoff bound of mistaking I for the unitary Phi, in closed determinant
/// form: P = alpha^{MN} / (2 det[(alpha+2) I - Phi - Phi^H]^N).
BoundContext bound_identity(const CMatrix &phi, double rho, int n_rx);

/// P(x, y) = P(I, x^H y); the bound is invariant under unitary transforms.
BoundContext bound_pair(const CMatrix &x, const CMatrix &y, double rho, int n_rx);

/// Independent evaluation of the same bound straight from the singular
/// values of x - y: P = 1/2 prod_m [1 + rho^2 s_m^2 / (4(1+2rho))]^{-N}.
/// Kept as the oracle for bound_identity and the invariance property.
double bound_svd(const CMatrix &x, const CMatrix &y, double rho, int n_rx);

/// log P only, skipping the resolvent solve; the workhorse of the union
/// bound sums.
double bound_identity_log(const CMatrix &phi, double rho, int n_rx);
double bound_pair_log(const CMatrix &x, const CMatrix &y, double rho, int n_rx);

/// Analytic partial derivatives of P(U(Theta), Phi) at Theta = 0, plus the
/// per-unit-l derivative of P(Lambda^l, Phi) at Lambda = I. The nu
/// derivatives vanish identically; they are carried so callers can treat the
/// record as a full M^2-angle gradient.
struct PairGradient {
    int M = 0;
    std::vector<double> dphi;          // pair-indexed, see UnitaryParams
    std::vector<double> dnu;           // identically zero
    std::vector<double> dtheta;        // size M
    std::vector<double> dlambda_scale; // size M; multiply by l for P(Lambda^l, Phi)
};

/// Gradient scaled by the bound value P (absolute derivatives).
/// `L` enters only the dlambda_scale factor 4 pi N / L.
PairGradient grad_at_identity(const BoundContext &ctx, double L = 1.0);

/// Same derivatives divided by P (d log P); safe at any SNR since it never
/// touches the linear-scale bound. Used by the design gradient assembly.
PairGradient grad_at_identity_relative(const BoundContext &ctx, double L = 1.0);

} // namespace ustm
