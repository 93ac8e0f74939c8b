#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>
#include <string>

#include "stochabound/errors.hpp"

namespace stochabound {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Relative tolerance for accepting a matrix as symmetric
/// (max-abs-entry norm of M - M^T against that of M).
inline constexpr double kSymmetryTol = 1e-10;

/// Relative Frobenius tolerance on the Lyapunov residual A^T P + P A + Q.
inline constexpr double kLyapunovResidualTol = 1e-9;

/// Strictness margin for the Hurwitz test: the spectral abscissa must lie
/// below -kHurwitzStrictness; exactly marginal matrices are rejected.
inline constexpr double kHurwitzStrictness = 1e-12;

/// Smallest and largest absolute eigenvalues of a symmetric matrix.
struct SpectralExtrema {
    double lambda_min = 0.0;
    double lambda_max = 0.0;
};

struct HurwitzResult {
    bool hurwitz = false;
    double abscissa = 0.0;  // max over eigenvalues of Re(lambda)
};

inline void require_finite(const Matrix& m, const std::string& name) {
    if (!m.allFinite()) {
        throw InputError(name + ": entries must be finite");
    }
}

inline void require_square(const Matrix& m, const std::string& name) {
    if (m.rows() != m.cols()) {
        std::ostringstream os;
        os << name << ": expected square matrix, got " << m.rows() << "x" << m.cols();
        throw DimensionError(os.str());
    }
}

inline bool is_symmetric(const Matrix& m) {
    if (m.rows() != m.cols()) return false;
    const double scale = m.cwiseAbs().maxCoeff();
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    return asym <= kSymmetryTol * scale;
}

inline void require_symmetric(const Matrix& m, const std::string& name) {
    require_square(m, name);
    require_finite(m, name);
    if (!is_symmetric(m)) {
        throw SymmetryError(name + ": matrix is not symmetric within tolerance");
    }
}

/// Stability test for the drift matrix: true iff every eigenvalue has
/// strictly negative real part. Also reports the spectral abscissa.
inline HurwitzResult is_hurwitz(const Matrix& a) {
    require_square(a, "A");
    require_finite(a, "A");
    Eigen::EigenSolver<Matrix> solver(a, /*computeEigenvectors=*/false);
    const double abscissa = solver.eigenvalues().real().maxCoeff();
    return {abscissa < -kHurwitzStrictness, abscissa};
}

/// Extrema of |eigenvalue| for a symmetric matrix.
inline SpectralExtrema spectral_extrema_sym(const Matrix& m) {
    require_symmetric(m, "M");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(m, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("spectral_extrema_sym: eigensolver failed to converge");
    }
    const Vector abs_eigs = solver.eigenvalues().cwiseAbs();
    return {abs_eigs.minCoeff(), abs_eigs.maxCoeff()};
}

/// True iff M is symmetric positive definite (smallest eigenvalue > 0).
inline bool is_spd(const Matrix& m) {
    require_symmetric(m, "M");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(m, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("is_spd: eigensolver failed to converge");
    }
    return solver.eigenvalues().minCoeff() > 0.0;
}

/// Solves A^T P + P A = -Q for the unique symmetric P, where A is Hurwitz
/// and Q is SPD. Vectorizes through the Kronecker identity
/// (I (x) A^T + A^T (x) I) vec(P) = -vec(Q) and solves the dense n^2 x n^2
/// system; the result is symmetrized and its residual checked against
/// kLyapunovResidualTol before being returned.
inline Matrix solve_lyapunov(const Matrix& a, const Matrix& q) {
    require_square(a, "A");
    require_finite(a, "A");
    if (q.rows() != a.rows() || q.cols() != a.cols()) {
        throw DimensionError("solve_lyapunov: A and Q dimensions disagree");
    }
    if (!is_spd(q)) {
        throw InputError("solve_lyapunov: Q must be symmetric positive definite");
    }
    const HurwitzResult stab = is_hurwitz(a);
    if (!stab.hurwitz) {
        std::ostringstream os;
        os << "solve_lyapunov: A is not Hurwitz (spectral abscissa " << stab.abscissa
           << "); the equation has no unique stabilizing solution";
        throw AssumptionError(os.str());
    }

    const Eigen::Index n = a.rows();
    const Matrix at = a.transpose();
    Matrix system = Matrix::Zero(n * n, n * n);
    // I (x) A^T  +  A^T (x) I, with column-major vec().
    for (Eigen::Index block = 0; block < n; ++block) {
        system.block(block * n, block * n, n, n) += at;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            system.block(i * n, j * n, n, n) += at(i, j) * Matrix::Identity(n, n);
        }
    }

    const Eigen::Map<const Vector> q_vec(q.data(), n * n);
    Eigen::PartialPivLU<Matrix> lu(system);
    const Vector p_vec = lu.solve(-q_vec);
    if (!p_vec.allFinite()) {
        throw NumericalError("solve_lyapunov: vectorized system is singular");
    }

    Matrix p = Eigen::Map<const Matrix>(p_vec.data(), n, n);
    p = 0.5 * (p + p.transpose()).eval();

    const double residual = (at * p + p * a + q).norm();
    if (residual > kLyapunovResidualTol * q.norm()) {
        std::ostringstream os;
        os << "solve_lyapunov: residual " << residual << " exceeds tolerance";
        throw NumericalError(os.str());
    }
    return p;
}

}  // namespace stochabound
