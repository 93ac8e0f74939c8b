#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "stochabound/errors.hpp"
#include "stochabound/linalg.hpp"

namespace stochabound {

// Catalog of perturbation kernels g(x, t), the matrix-valued factor that
// multiplies the Wiener increment. Every family here is time-invariant,
// which keeps the Lipschitz/origin/growth constants exact in closed form.

/// g(x, t) = G0.
struct ConstantKernel {
    Matrix g0;
};

/// Scalar kernel g(x, t) = amplitude * cos(frequency * x); n = m = 1.
struct CosineScalarKernel {
    double amplitude = 0.0;
    double frequency = 0.0;
};

/// g(x, t) = G0 + (gamma * ||x|| / sqrt(n m)) * J with J the all-ones
/// matrix. A synthetic family that realizes a prescribed (c, gamma) pair.
struct AffineNormKernel {
    Matrix g0;
    double gamma = 0.0;
};

/// g(x, t) = sum_i x_i * G_i + G0; vanishing at the origin iff G0 = 0.
struct LinearMatrixKernel {
    Matrix g0;
    std::vector<Matrix> coeffs;  // one n x m block per state coordinate
};

struct KernelSpec {
    int state_dim = 0;  // n
    int noise_dim = 0;  // m
    std::variant<ConstantKernel, CosineScalarKernel, AffineNormKernel, LinearMatrixKernel>
        family;
};

/// The Lipschitz / origin / growth constants of a kernel:
///   ||g(x,t) - g(y,t)|| <= gamma ||x - y||
///   sup_t ||g(0,t)||     = c
///   ||g(x,t)||^2        <= gamma_g (1 + ||x||^2)
struct KernelConstants {
    double gamma = 0.0;
    double c = 0.0;
    double gamma_g = 0.0;
};

inline const char* family_name(const KernelSpec& spec) {
    struct Visitor {
        const char* operator()(const ConstantKernel&) const { return "Constant"; }
        const char* operator()(const CosineScalarKernel&) const { return "CosineScalar"; }
        const char* operator()(const AffineNormKernel&) const { return "AffineNorm"; }
        const char* operator()(const LinearMatrixKernel&) const { return "LinearMatrix"; }
    };
    return std::visit(Visitor{}, spec.family);
}

inline KernelSpec make_constant_kernel(Matrix g0) {
    require_finite(g0, "G0");
    if (g0.rows() < 1 || g0.cols() < 1) {
        throw DimensionError("Constant kernel: G0 must be nonempty");
    }
    KernelSpec spec;
    spec.state_dim = static_cast<int>(g0.rows());
    spec.noise_dim = static_cast<int>(g0.cols());
    spec.family = ConstantKernel{std::move(g0)};
    return spec;
}

inline KernelSpec make_cosine_scalar_kernel(double amplitude, double frequency) {
    if (!(amplitude > 0.0) || !(frequency > 0.0) || !std::isfinite(amplitude) ||
        !std::isfinite(frequency)) {
        throw InputError("CosineScalar kernel: amplitude and frequency must be positive");
    }
    KernelSpec spec;
    spec.state_dim = 1;
    spec.noise_dim = 1;
    spec.family = CosineScalarKernel{amplitude, frequency};
    return spec;
}

inline KernelSpec make_affine_norm_kernel(Matrix g0, double gamma) {
    require_finite(g0, "G0");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
        throw InputError("AffineNorm kernel: gamma must be finite and >= 0");
    }
    KernelSpec spec;
    spec.state_dim = static_cast<int>(g0.rows());
    spec.noise_dim = static_cast<int>(g0.cols());
    spec.family = AffineNormKernel{std::move(g0), gamma};
    return spec;
}

inline KernelSpec make_linear_matrix_kernel(Matrix g0, std::vector<Matrix> coeffs) {
    require_finite(g0, "G0");
    const auto n = g0.rows();
    const auto m = g0.cols();
    if (static_cast<Eigen::Index>(coeffs.size()) != n) {
        throw DimensionError("LinearMatrix kernel: need one coefficient block per state coordinate");
    }
    for (const Matrix& gi : coeffs) {
        require_finite(gi, "G_i");
        if (gi.rows() != n || gi.cols() != m) {
            throw DimensionError("LinearMatrix kernel: coefficient block dimensions disagree with G0");
        }
    }
    KernelSpec spec;
    spec.state_dim = static_cast<int>(n);
    spec.noise_dim = static_cast<int>(m);
    spec.family = LinearMatrixKernel{std::move(g0), std::move(coeffs)};
    return spec;
}

/// Evaluates g(x, t) into a preallocated n x m buffer (hot path of the
/// integrator; avoids per-step allocation).
inline void eval_kernel_into(const KernelSpec& spec, const Vector& x, double t, Matrix& out) {
    if (x.size() != spec.state_dim) {
        std::ostringstream os;
        os << "eval_kernel: state has dimension " << x.size() << ", kernel expects "
           << spec.state_dim;
        throw DimensionError(os.str());
    }
    if (t < 0.0) {
        throw InputError("eval_kernel: time must be nonnegative");
    }
    out.resize(spec.state_dim, spec.noise_dim);
    struct Visitor {
        const Vector& x;
        Matrix& out;
        void operator()(const ConstantKernel& k) const { out = k.g0; }
        void operator()(const CosineScalarKernel& k) const {
            out(0, 0) = k.amplitude * std::cos(k.frequency * x(0));
        }
        void operator()(const AffineNormKernel& k) const {
            const double scale =
                k.gamma * x.norm() / std::sqrt(static_cast<double>(k.g0.size()));
            out.setConstant(scale);
            out += k.g0;
        }
        void operator()(const LinearMatrixKernel& k) const {
            out = k.g0;
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                out += x(i) * k.coeffs[static_cast<std::size_t>(i)];
            }
        }
    };
    std::visit(Visitor{x, out}, spec.family);
}

inline Matrix eval_kernel(const KernelSpec& spec, const Vector& x, double t) {
    Matrix out;
    eval_kernel_into(spec, x, t, out);
    return out;
}

/// Closed-form Lipschitz / origin / growth constants per family.
/// For affine families the growth constant comes from
/// (c + gamma ||x||)^2 <= 2 c^2 + 2 gamma^2 ||x||^2, i.e. 2 (c^2 + gamma^2).
inline KernelConstants analytic_constants(const KernelSpec& spec) {
    struct Visitor {
        KernelConstants operator()(const ConstantKernel& k) const {
            const double c = k.g0.norm();
            return {0.0, c, c * c};
        }
        KernelConstants operator()(const CosineScalarKernel& k) const {
            return {k.amplitude * k.frequency, k.amplitude, k.amplitude * k.amplitude};
        }
        KernelConstants operator()(const AffineNormKernel& k) const {
            const double c = k.g0.norm();
            return {k.gamma, c, 2.0 * (c * c + k.gamma * k.gamma)};
        }
        KernelConstants operator()(const LinearMatrixKernel& k) const {
            // Exact operator norm of x -> sum_i x_i G_i as a map into the
            // Frobenius-normed matrices: top singular value of the stacked
            // [vec(G_1) ... vec(G_n)] matrix.
            const Eigen::Index n = k.g0.rows();
            const Eigen::Index m = k.g0.cols();
            Matrix stacked(n * m, n);
            for (Eigen::Index i = 0; i < n; ++i) {
                stacked.col(i) =
                    Eigen::Map<const Vector>(k.coeffs[static_cast<std::size_t>(i)].data(), n * m);
            }
            const double gamma = stacked.jacobiSvd().singularValues()(0);
            const double c = k.g0.norm();
            return {gamma, c, 2.0 * (c * c + gamma * gamma)};
        }
    };
    return std::visit(Visitor{}, spec.family);
}

/// Numeric estimator of the Assumption constants on an axis-aligned grid
/// of `grid_points` nodes per axis inside [-radius, radius]^n. Secant
/// slopes and grid maxima are lower bounds of the true constants; they
/// converge to the analytic values as the grid refines.
inline KernelConstants estimate_constants_bruteforce(const KernelSpec& spec, double radius,
                                                     int grid_points) {
    if (!(radius > 0.0)) {
        throw InputError("estimate_constants_bruteforce: radius must be positive");
    }
    if (grid_points < 2) {
        throw InputError("estimate_constants_bruteforce: need at least 2 grid points per axis");
    }
    const int n = spec.state_dim;
    double total = 1.0;
    for (int i = 0; i < n; ++i) total *= static_cast<double>(grid_points);
    if (total > 1e7) {
        throw ResourceError("estimate_constants_bruteforce: grid exceeds 1e7 evaluations");
    }
    const auto count = static_cast<std::size_t>(total);
    if (0.5 * total * (total - 1.0) > 2e8) {
        throw ResourceError("estimate_constants_bruteforce: pairwise sweep exceeds 2e8 comparisons");
    }

    std::vector<Vector> points(count, Vector::Zero(n));
    for (std::size_t flat = 0; flat < count; ++flat) {
        std::size_t rest = flat;
        for (int axis = 0; axis < n; ++axis) {
            const auto idx = static_cast<int>(rest % static_cast<std::size_t>(grid_points));
            rest /= static_cast<std::size_t>(grid_points);
            points[flat](axis) =
                -radius + 2.0 * radius * static_cast<double>(idx) / (grid_points - 1);
        }
    }

    std::vector<Matrix> values(count);
    KernelConstants est;
    Matrix buffer;
    for (std::size_t i = 0; i < count; ++i) {
        eval_kernel_into(spec, points[i], 0.0, buffer);
        values[i] = buffer;
        const double growth_ratio = buffer.squaredNorm() / (1.0 + points[i].squaredNorm());
        if (growth_ratio > est.gamma_g) est.gamma_g = growth_ratio;
    }
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t j = i + 1; j < count; ++j) {
            const double dist = (points[i] - points[j]).norm();
            if (dist == 0.0) continue;
            const double slope = (values[i] - values[j]).norm() / dist;
            if (slope > est.gamma) est.gamma = slope;
        }
    }
    est.c = eval_kernel(spec, Vector::Zero(n), 0.0).norm();
    return est;
}

}  // namespace stochabound
