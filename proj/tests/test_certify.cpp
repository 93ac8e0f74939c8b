#include <catch2/catch.hpp>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "stochabound/certify.hpp"

using namespace stochabound;

namespace {

// The scalar case study: dx = -x dt + 0.25 cos(4x) dW, certified with Q = 1.
const Matrix kDriftA = Matrix::Constant(1, 1, -1.0);
const Matrix kUnitQ = Matrix::Identity(1, 1);
const KernelConstants kStudyConstants{1.0, 0.25, 0.0625};

/// Expected-drift quadratic in z = E||X||, evaluated from the certificate.
double drift_quadratic(const LyapunovCertificate& cert, const KernelConstants& kc, double z) {
    const double lead = 0.5 * (kc.gamma * kc.gamma * cert.lambda_bar_p - cert.lambda_lo_q);
    return lead * z * z + kc.c * kc.gamma * cert.lambda_bar_p * z +
           0.5 * kc.c * kc.c * cert.lambda_bar_p;
}

}  // namespace

TEST_CASE("certificate for the scalar case study") {
    const LyapunovCertificate cert = certify(kDriftA, kUnitQ, kStudyConstants);
    CHECK(cert.p(0, 0) == Approx(0.5).margin(1e-12));
    CHECK(cert.lambda_bar_p == Approx(0.5).margin(1e-12));
    CHECK(cert.lambda_lo_p == Approx(0.5).margin(1e-12));
    CHECK(cert.lambda_lo_q == Approx(1.0).margin(1e-12));
    CHECK(cert.condition_margin == Approx(0.5).margin(1e-12));
    CHECK(cert.condition_holds);
}

TEST_CASE("certification condition across Lipschitz constants") {
    auto rng = oracles::make_rng(9001);
    const Matrix a = oracles::random_hurwitz(3, rng);
    const Matrix q = oracles::random_spd(3, rng);

    const LyapunovCertificate lipschitz_free = certify(a, q, KernelConstants{0.0, 1.0, 2.0});
    CHECK(lipschitz_free.condition_holds);
    CHECK(lipschitz_free.condition_margin == Approx(lipschitz_free.lambda_lo_q));

    const LyapunovCertificate too_rough = certify(kDriftA, kUnitQ, KernelConstants{2.0, 0.25, 1.0});
    CHECK_FALSE(too_rough.condition_holds);
    CHECK(too_rough.condition_margin == Approx(-1.0).margin(1e-12));
}

TEST_CASE("certification requires a Hurwitz drift") {
    CHECK_THROWS_AS(certify(Matrix::Constant(1, 1, 1.0), kUnitQ, kStudyConstants),
                    AssumptionError);
    CHECK_THROWS_WITH(certify(Matrix::Constant(1, 1, 1.0), kUnitQ, kStudyConstants),
                      Catch::Contains("assumption 1.1 violated"));
}

TEST_CASE("limiting bound for the case study against a root-solve oracle") {
    const LyapunovCertificate cert = certify(kDriftA, kUnitQ, kStudyConstants);
    const double b = limit_bound(cert, kStudyConstants);
    CHECK(b == Approx(0.603553390593273762).margin(1e-12));

    const double oracle_root = oracles::bisect(
        [&](double z) { return drift_quadratic(cert, kStudyConstants, z); }, 0.0, 10.0);
    CHECK(b == Approx(oracle_root).margin(1e-9));
}

TEST_CASE("limiting bound degenerate and reduced cases") {
    const LyapunovCertificate cert = certify(kDriftA, kUnitQ, kStudyConstants);

    const KernelConstants vanishing{1.0, 0.0, 0.0625};
    CHECK(limit_bound(cert, vanishing) == 0.0);

    // gamma = 0 reduces the bound to c * sqrt(kappa).
    const KernelConstants no_slope{0.0, 1.0, 1.0};
    const double b = limit_bound(cert, no_slope);
    CHECK(b == Approx(std::sqrt(0.5)).margin(1e-12));
    const double oracle_root = oracles::bisect(
        [&](double z) { return drift_quadratic(cert, no_slope, z); }, 0.0, 10.0);
    CHECK(b == Approx(oracle_root).margin(1e-9));
}

TEST_CASE("limiting bound is undefined when the condition fails") {
    const LyapunovCertificate failing = certify(kDriftA, kUnitQ, KernelConstants{2.0, 0.25, 1.0});
    CHECK_THROWS_AS(limit_bound(failing, KernelConstants{2.0, 0.25, 1.0}), BoundUndefinedError);
}

TEST_CASE("supremum bound is the max of start and limit") {
    const LyapunovCertificate cert = certify(kDriftA, kUnitQ, kStudyConstants);
    const double b = limit_bound(cert, kStudyConstants);
    CHECK(sup_bound(cert, kStudyConstants, 0.0) == Approx(b));
    CHECK(sup_bound(cert, kStudyConstants, 10.0) == Approx(10.0));
    CHECK(sup_bound(cert, kStudyConstants, b) == Approx(b));
    CHECK_THROWS_AS(sup_bound(cert, kStudyConstants, -1.0), InputError);
}

TEST_CASE("quadratic roots of the case study") {
    const LyapunovCertificate cert = certify(kDriftA, kUnitQ, kStudyConstants);
    const QuadraticRoots roots = quadratic_roots(cert, kStudyConstants);
    CHECK(roots.root_pos == Approx(0.603553390593273762).margin(1e-9));
    CHECK(roots.root_neg == Approx(-0.103553390593273762).margin(1e-9));
    CHECK(roots.discriminant == Approx(0.03125).margin(1e-15));
    CHECK(roots.root_pos ==
          Approx(limit_bound(cert, kStudyConstants)).epsilon(1e-12));

    const double scale = 0.5 * kStudyConstants.c * kStudyConstants.c * cert.lambda_bar_p;
    CHECK(std::abs(drift_quadratic(cert, kStudyConstants, roots.root_pos)) <= 1e-12 * scale);
    CHECK(std::abs(drift_quadratic(cert, kStudyConstants, roots.root_neg)) <= 1e-12 * scale);
}

TEST_CASE("roots have the expected signs on random certified systems") {
    auto rng = oracles::make_rng(9002);
    int tested = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 5);
        const Matrix a = oracles::random_hurwitz(n, rng);
        const Matrix q = oracles::random_spd(n, rng);
        const KernelConstants kc{0.2, 0.4, 1.0};
        const LyapunovCertificate cert = certify(a, q, kc);
        if (!cert.condition_holds) continue;
        ++tested;
        const QuadraticRoots roots = quadratic_roots(cert, kc);
        CHECK(roots.root_pos > 0.0);
        CHECK(roots.root_neg < 0.0);
        CHECK(roots.discriminant > 0.0);
        CHECK(roots.root_pos == Approx(limit_bound(cert, kc)).epsilon(1e-12));
        const double scale = 0.5 * kc.c * kc.c * cert.lambda_bar_p;
        CHECK(std::abs(drift_quadratic(cert, kc, roots.root_pos)) <= 1e-11 * scale);
    }
    CHECK(tested > 5);
}

TEST_CASE("roots collapse when c = 0") {
    const LyapunovCertificate cert = certify(kDriftA, kUnitQ, kStudyConstants);
    CHECK_THROWS_AS(quadratic_roots(cert, KernelConstants{1.0, 0.0, 1.0}),
                    DegenerateQuadraticError);
}

TEST_CASE("bound is invariant under joint scaling of P and Q") {
    auto rng = oracles::make_rng(9003);
    const Matrix a = oracles::random_hurwitz(4, rng);
    const Matrix q = oracles::random_spd(4, rng);
    const KernelConstants kc{0.15, 0.4, 1.0};
    const LyapunovCertificate base = certify(a, q, kc);
    REQUIRE(base.condition_holds);
    const double b = limit_bound(base, kc);
    for (const double alpha : {0.1, 2.0, 30.0}) {
        const LyapunovCertificate scaled = certify(a, alpha * q, kc);
        CHECK(limit_bound(scaled, kc) == Approx(b).epsilon(1e-10));
        const QuadraticRoots roots = quadratic_roots(scaled, kc);
        CHECK(roots.root_pos == Approx(b).epsilon(1e-10));
    }
}

TEST_CASE("tail bound values and scaling") {
    const LyapunovCertificate cert = certify(kDriftA, kUnitQ, kStudyConstants);

    const TailBound tb = tail_bound(cert, 0.5, 1.0);
    CHECK(tb.p_paper == Approx(0.125).margin(1e-15));
    CHECK(tb.p_derived == Approx(0.5).margin(1e-15));

    const TailBound zero_start = tail_bound(cert, 0.0, 1.0);
    CHECK(zero_start.p_paper == 0.0);
    CHECK(zero_start.p_derived == 0.0);

    const TailBound wider = tail_bound(cert, 0.5, 10.0);
    CHECK(wider.p_paper == Approx(tb.p_paper / 10.0).epsilon(1e-15));
    CHECK(wider.p_derived == Approx(tb.p_derived / 10.0).epsilon(1e-15));

    CHECK_THROWS_AS(tail_bound(cert, 0.5, 0.0), InputError);
}

TEST_CASE("minimal bound for the case study") {
    const auto [b_min, trivial] = minimal_bound(kDriftA, kStudyConstants);
    CHECK(b_min == Approx(0.603553390593273762).margin(1e-12));
    CHECK(trivial.condition_holds);
    CHECK(b_min == Approx(limit_bound(trivial, kStudyConstants)).epsilon(1e-12));

    const auto [b_zero, cert_zero] = minimal_bound(kDriftA, KernelConstants{1.0, 0.0, 1.0});
    CHECK(b_zero == 0.0);
    CHECK(cert_zero.condition_holds);
}

TEST_CASE("minimal bound fails when no admissible pair exists") {
    CHECK_THROWS_AS(minimal_bound(kDriftA, KernelConstants{2.0, 0.25, 1.0}),
                    BoundUndefinedError);
}

TEST_CASE("trivial pair minimizes the bound over random Q") {
    auto rng = oracles::make_rng(9004);
    const KernelConstants kc{0.1, 0.3, 1.0};
    int compared = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 5);
        const Matrix a = oracles::random_hurwitz(n, rng);
        double b_min = 0.0;
        try {
            b_min = minimal_bound(a, kc).first;
        } catch (const BoundUndefinedError&) {
            continue;
        }
        for (int inner = 0; inner < 20; ++inner) {
            const Matrix q = oracles::random_spd(n, rng);
            const LyapunovCertificate cert = certify(a, q, kc);
            if (!cert.condition_holds) continue;
            ++compared;
            CHECK(b_min <= limit_bound(cert, kc) + 1e-10);
        }
    }
    CHECK(compared > 50);
}

TEST_CASE("kappa ratio is minimized by the identity Q") {
    auto rng = oracles::make_rng(9005);
    const KernelConstants kc{0.1, 0.3, 1.0};
    const Matrix a = oracles::random_hurwitz(4, rng);
    const LyapunovCertificate trivial = certify(a, Matrix::Identity(4, 4), kc);
    const double kappa_trivial = trivial.lambda_bar_p / trivial.lambda_lo_q;
    for (int trial = 0; trial < 25; ++trial) {
        Matrix q = oracles::random_spd(4, rng);
        q /= spectral_extrema_sym(q).lambda_min;  // normalize lambda_min(Q) = 1
        const LyapunovCertificate cert = certify(a, q, kc);
        const double kappa = cert.lambda_bar_p / cert.lambda_lo_q;
        CHECK(kappa >= kappa_trivial - 1e-10);
    }
}

TEST_CASE("kappa derivative matches central finite differences") {
    auto bound_of_kappa = [](const KernelConstants& kc, double kappa) {
        return (kc.c * kc.gamma * kappa + kc.c * std::sqrt(kappa)) /
               (1.0 - kc.gamma * kc.gamma * kappa);
    };

    const std::vector<KernelConstants> cases = {
        {1.0, 0.25, 1.0}, {0.5, 1.0, 1.0}, {0.0, 1.0, 1.0}, {0.3, 0.05, 1.0}};
    for (const KernelConstants& kc : cases) {
        for (const double kappa : {0.2, 0.5, 0.9}) {
            if (kc.gamma * kc.gamma * kappa >= 1.0) continue;
            const double analytic = kappa_derivative(kc, kappa);
            CHECK(analytic > 0.0);
            const double numeric = oracles::central_diff(
                [&](double k) { return bound_of_kappa(kc, k); }, kappa, 1e-6 * kappa);
            CHECK(analytic == Approx(numeric).epsilon(1e-6));
        }
    }

    CHECK(kappa_derivative(KernelConstants{0.0, 1.0, 1.0}, 1.0) == Approx(0.5).margin(1e-14));
}

TEST_CASE("kappa derivative domain errors") {
    CHECK_THROWS_AS(kappa_derivative(KernelConstants{1.0, 0.25, 1.0}, 1.0),
                    OutsideDomainError);
    CHECK_THROWS_AS(kappa_derivative(KernelConstants{1.0, 0.0, 1.0}, 0.5), InputError);
    CHECK_THROWS_AS(kappa_derivative(KernelConstants{1.0, 0.25, 1.0}, 0.0), InputError);
}

TEST_CASE("bound is strictly increasing in c, gamma, and kappa") {
    auto bound_of = [](double c, double gamma, double kappa) {
        return (c * gamma * kappa + c * std::sqrt(kappa)) / (1.0 - gamma * gamma * kappa);
    };
    double previous = 0.0;
    for (const double c : {0.1, 0.2, 0.4, 0.8}) {
        const double b = bound_of(c, 1.0, 0.5);
        CHECK(b > previous);
        previous = b;
    }
    previous = 0.0;
    for (const double gamma : {0.0, 0.3, 0.7, 1.2}) {
        const double b = bound_of(0.25, gamma, 0.5);
        CHECK(b > previous);
        previous = b;
    }
    previous = 0.0;
    for (const double kappa : {0.1, 0.3, 0.6, 0.9}) {
        const double b = bound_of(0.25, 1.0, kappa);
        CHECK(b > previous);
        previous = b;
    }
}

TEST_CASE("bound report assembles all certified quantities") {
    const LyapunovCertificate cert = certify(kDriftA, kUnitQ, kStudyConstants);
    const BoundReport report = make_bound_report(kDriftA, cert, kStudyConstants, 0.5);
    CHECK(report.b_limit == Approx(0.603553390593273762).margin(1e-12));
    CHECK(report.b_sup == Approx(report.b_limit));
    CHECK(report.b_min == Approx(report.b_limit).epsilon(1e-12));
    CHECK(report.kappa == Approx(0.5).margin(1e-14));
    CHECK(report.discriminant == Approx(0.03125).margin(1e-15));
    CHECK(report.root_pos == Approx(report.b_limit).epsilon(1e-12));
    CHECK(report.root_neg < 0.0);
    CHECK(report.e_x0 == 0.5);

    const BoundReport degenerate =
        make_bound_report(kDriftA, cert, KernelConstants{1.0, 0.0, 1.0}, 0.0);
    CHECK(degenerate.b_limit == 0.0);
    CHECK(degenerate.root_pos == 0.0);
    CHECK(degenerate.root_neg == 0.0);
    CHECK(degenerate.discriminant == 0.0);
}
