#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stochabound/errors.hpp"
#include "stochabound/kernel.hpp"
#include "stochabound/linalg.hpp"

namespace stochabound {

// Stochastic-boundedness certificates for dX = A X dt + g(X, t) dW with a
// Hurwitz A and a kernel satisfying the Lipschitz/origin/growth
// assumptions. The certificate condition is
//     gamma^2 * lambda_bar(P) < lambda_min(Q)
// with P the solution of A^T P + P A = -Q; under it the expected state
// norm admits a limiting bound, a supremum bound, and a sup-exceedance
// tail bound, all computed here in closed form.

struct LyapunovCertificate {
    Matrix p;
    Matrix q;
    double lambda_bar_p = 0.0;  // largest |eigenvalue| of P
    double lambda_lo_p = 0.0;   // smallest |eigenvalue| of P
    double lambda_lo_q = 0.0;   // smallest |eigenvalue| of Q
    double condition_margin = 0.0;  // lambda_lo_q - gamma^2 * lambda_bar_p
    bool condition_holds = false;   // margin strictly positive
};

/// Sup-exceedance tail bound at one threshold. Two forms of the prefactor
/// circulate for this bound and they disagree, so both are computed:
/// `p_paper` is the published form (product of the extreme eigenvalues of
/// P), `p_derived` the form obtained by actually carrying the threshold
/// substitution through the supermartingale inequality (their ratio).
/// Values are raw; clamp to [0, 1] when reporting them as probabilities.
struct TailBound {
    double epsilon = 0.0;
    double p_paper = 0.0;    // (1/eps) * lambda_lo_p * lambda_bar_p * E||X0||
    double p_derived = 0.0;  // (1/eps) * (lambda_bar_p / lambda_lo_p) * E||X0||
};

struct QuadraticRoots {
    double root_pos = 0.0;
    double root_neg = 0.0;
    double discriminant = 0.0;
};

/// Everything the bound machinery produces for one certified instance.
struct BoundReport {
    double b_limit = 0.0;   // limiting bound on E||X(t)||
    double b_sup = 0.0;     // max(E||X0||, b_limit)
    double b_min = 0.0;     // bound evaluated with the trivial pair Q = I
    double kappa = 0.0;     // lambda_bar_p / lambda_lo_q
    double discriminant = 0.0;
    double root_pos = 0.0;  // positive root of the drift quadratic (= b_limit)
    double root_neg = 0.0;  // negative companion root
    double e_x0 = 0.0;      // E||X0||
};

/// Builds the Lyapunov certificate for (A, Q) against the kernel's
/// Lipschitz constant. Throws AssumptionError when A is not Hurwitz.
inline LyapunovCertificate certify(const Matrix& a, const Matrix& q,
                                   const KernelConstants& constants) {
    const HurwitzResult stab = is_hurwitz(a);
    if (!stab.hurwitz) {
        std::ostringstream os;
        os << "certify: assumption 1.1 violated; drift matrix is not Hurwitz "
           << "(spectral abscissa " << stab.abscissa << ")";
        throw AssumptionError(os.str());
    }
    if (!is_spd(q)) {
        throw InputError("certify: Q must be symmetric positive definite");
    }
    LyapunovCertificate cert;
    cert.p = solve_lyapunov(a, q);
    cert.q = q;
    const SpectralExtrema p_ext = spectral_extrema_sym(cert.p);
    const SpectralExtrema q_ext = spectral_extrema_sym(q);
    cert.lambda_bar_p = p_ext.lambda_max;
    cert.lambda_lo_p = p_ext.lambda_min;
    cert.lambda_lo_q = q_ext.lambda_min;
    cert.condition_margin =
        cert.lambda_lo_q - constants.gamma * constants.gamma * cert.lambda_bar_p;
    cert.condition_holds = cert.condition_margin > 0.0;
    return cert;
}

inline void require_condition(const LyapunovCertificate& cert, const char* who) {
    if (!cert.condition_holds) {
        std::ostringstream os;
        os << who << ": certificate condition fails (margin " << cert.condition_margin
           << "); the bound is undefined and diverges at the condition boundary";
        throw BoundUndefinedError(os.str());
    }
}

/// Limiting bound on E||X(t)|| as t -> infinity:
///   b = (-c gamma lb_P - sqrt(c^2 lb_P lq_Q)) / (gamma^2 lb_P - lq_Q),
/// equivalently (c gamma kappa + c sqrt(kappa)) / (1 - gamma^2 kappa).
inline double limit_bound(const LyapunovCertificate& cert, const KernelConstants& constants) {
    require_condition(cert, "limit_bound");
    const double lb = cert.lambda_bar_p;
    const double lq = cert.lambda_lo_q;
    const double c = constants.c;
    const double g = constants.gamma;
    return (-c * g * lb - std::sqrt(c * c * lb * lq)) / (g * g * lb - lq);
}

/// Supremum bound on E||X(t)|| over all time: max(E||X0||, b).
inline double sup_bound(const LyapunovCertificate& cert, const KernelConstants& constants,
                        double e_x0) {
    if (!(e_x0 >= 0.0) || !std::isfinite(e_x0)) {
        throw InputError("sup_bound: E||X0|| must be finite and nonnegative");
    }
    return std::max(e_x0, limit_bound(cert, constants));
}

/// Both roots of the expected-drift quadratic
///   (gamma^2 lb_P - lq_Q)/2 * z^2 + c gamma lb_P * z + c^2 lb_P / 2 = 0
/// in z = E||X||, plus its discriminant c^2 lb_P lq_Q. The positive root
/// coincides with limit_bound.
inline QuadraticRoots quadratic_roots(const LyapunovCertificate& cert,
                                      const KernelConstants& constants) {
    require_condition(cert, "quadratic_roots");
    if (constants.c == 0.0) {
        throw DegenerateQuadraticError(
            "quadratic_roots: c = 0 degenerates the quadratic (roots 0 and 0)");
    }
    const double lb = cert.lambda_bar_p;
    const double lq = cert.lambda_lo_q;
    const double c = constants.c;
    const double g = constants.gamma;
    const double lead = g * g * lb - lq;  // negative under the condition
    const double disc = c * c * lb * lq;
    const double sqrt_disc = std::sqrt(disc);
    QuadraticRoots roots;
    roots.discriminant = disc;
    roots.root_pos = (-c * g * lb - sqrt_disc) / lead;
    roots.root_neg = (-c * g * lb + sqrt_disc) / lead;
    return roots;
}

/// Tail bound on P(sup_t ||X|| > epsilon); see TailBound for the two forms.
inline TailBound tail_bound(const LyapunovCertificate& cert, double e_x0, double epsilon) {
    require_condition(cert, "tail_bound");
    if (!(epsilon > 0.0)) {
        throw InputError("tail_bound: epsilon must be positive");
    }
    if (!(e_x0 >= 0.0) || !std::isfinite(e_x0)) {
        throw InputError("tail_bound: E||X0|| must be finite and nonnegative");
    }
    TailBound tb;
    tb.epsilon = epsilon;
    tb.p_paper = cert.lambda_lo_p * cert.lambda_bar_p * e_x0 / epsilon;
    tb.p_derived = (cert.lambda_bar_p / cert.lambda_lo_p) * e_x0 / epsilon;
    return tb;
}

/// The limiting bound evaluated with the trivial pair Q = I, which
/// minimizes kappa = lambda_bar_p / lambda_lo_q and hence the bound:
///   b_min = (c gamma lb + c sqrt(lb)) / (1 - gamma^2 lb),  lb = lambda_bar(P_I).
inline std::pair<double, LyapunovCertificate> minimal_bound(const Matrix& a,
                                                            const KernelConstants& constants) {
    require_square(a, "A");
    const LyapunovCertificate trivial =
        certify(a, Matrix::Identity(a.rows(), a.cols()), constants);
    if (!trivial.condition_holds) {
        std::ostringstream os;
        os << "minimal_bound: gamma^2 * lambda_bar(P_I) = "
           << constants.gamma * constants.gamma * trivial.lambda_bar_p
           << " >= 1; no admissible pair exists for this Lipschitz constant";
        throw BoundUndefinedError(os.str());
    }
    const double lb = trivial.lambda_bar_p;
    const double c = constants.c;
    const double g = constants.gamma;
    const double b_min = (c * g * lb + c * std::sqrt(lb)) / (1.0 - g * g * lb);
    return {b_min, trivial};
}

/// Sensitivity of the bound to kappa = lambda_bar_p / lambda_lo_q:
///   d b / d kappa = c sqrt(kappa) (gamma + kappa^{-1/2})^2
///                   / (2 (gamma^2 kappa - 1)^2),
/// strictly positive on the admissible domain gamma^2 kappa < 1.
inline double kappa_derivative(const KernelConstants& constants, double kappa) {
    if (!(kappa > 0.0) || !std::isfinite(kappa)) {
        throw InputError("kappa_derivative: kappa must be finite and positive");
    }
    if (!(constants.c > 0.0)) {
        throw InputError("kappa_derivative: requires c > 0");
    }
    const double g = constants.gamma;
    if (g * g * kappa >= 1.0) {
        throw OutsideDomainError("kappa_derivative: gamma^2 * kappa >= 1 is outside the domain");
    }
    const double slope = g + 1.0 / std::sqrt(kappa);
    const double denom = g * g * kappa - 1.0;
    return constants.c * std::sqrt(kappa) * slope * slope / (2.0 * denom * denom);
}

/// Assembles the full bound report for a certified instance. With c = 0
/// the quadratic degenerates; the bound is 0 and the root fields collapse
/// to 0 by convention.
inline BoundReport make_bound_report(const Matrix& a, const LyapunovCertificate& cert,
                                     const KernelConstants& constants, double e_x0) {
    require_condition(cert, "make_bound_report");
    BoundReport report;
    report.e_x0 = e_x0;
    report.kappa = cert.lambda_bar_p / cert.lambda_lo_q;
    report.b_limit = limit_bound(cert, constants);
    report.b_sup = sup_bound(cert, constants, e_x0);
    report.b_min = minimal_bound(a, constants).first;
    if (constants.c > 0.0) {
        const QuadraticRoots roots = quadratic_roots(cert, constants);
        report.discriminant = roots.discriminant;
        report.root_pos = roots.root_pos;
        report.root_neg = roots.root_neg;
    }
    return report;
}

}  // namespace stochabound
