#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <vector>

#include "stochabound/errors.hpp"
#include "stochabound/kernel.hpp"
#include "stochabound/linalg.hpp"
#include "stochabound/rng.hpp"

namespace stochabound {

// Strong-path Euler-Maruyama integration of dX = A X dt + g(X, t) dW on a
// uniform grid. All randomness is counter-based (see rng.hpp): a path is
// a pure function of (spec, seed), independent of scheduling. Within one
// path, draw stream 0 is reserved for the initial state and stream k >= 1
// for the Wiener increment of step k.

/// Any simulated component beyond this magnitude aborts the path; a
/// certified system never gets near it, so crossing it signals a
/// misconfigured run rather than an interesting trajectory.
inline constexpr double kBlowUpThreshold = 1e12;

inline constexpr std::int64_t kMaxSteps = 100'000'000;  // step-count guard

/// Initial state law: a point mass at `mean` when `stddev` == 0, else the
/// isotropic Gaussian N(mean, stddev^2 I).
struct InitialLaw {
    Vector mean;
    double stddev = 0.0;
};

struct SystemSpec {
    Matrix a;           // Hurwitz drift matrix, n x n
    KernelSpec kernel;  // perturbation kernel, n x m
    InitialLaw x0;
    double horizon = 0.0;  // T
    double dt = 0.0;
};

struct Trajectory {
    std::vector<double> times;  // 0, dt, 2 dt, ..., steps * dt
    Matrix states;              // n x (steps + 1); column k is X(t_k)
    double sup_norm = 0.0;      // max_k ||X(t_k)||
};

/// Number of EM steps; the horizon is snapped to the nearest grid multiple.
inline std::int64_t step_count(const SystemSpec& spec) {
    return std::llround(spec.horizon / spec.dt);
}

inline void validate_system(const SystemSpec& spec) {
    require_square(spec.a, "A");
    require_finite(spec.a, "A");
    const Eigen::Index n = spec.a.rows();
    if (spec.kernel.state_dim != n) {
        std::ostringstream os;
        os << "system: kernel state dimension " << spec.kernel.state_dim
           << " does not match drift dimension " << n;
        throw DimensionError(os.str());
    }
    if (spec.x0.mean.size() != n) {
        throw DimensionError("system: initial mean dimension does not match drift dimension");
    }
    if (!spec.x0.mean.allFinite() || !(spec.x0.stddev >= 0.0) ||
        !std::isfinite(spec.x0.stddev)) {
        throw InputError("system: initial law must have finite mean and stddev >= 0");
    }
    if (!(spec.dt > 0.0) || !(spec.horizon > 0.0) || spec.dt > spec.horizon) {
        throw InputError("system: need 0 < dt <= T");
    }
    const std::int64_t steps = step_count(spec);
    if (steps < 1 || steps > kMaxSteps) {
        throw InputError("system: step count T/dt out of range [1, 1e8]");
    }
}

/// `steps` independent m-vectors of Wiener increments, each component
/// N(0, dt), fully determined by `seed`. Increment k is drawn from stream
/// k + 1, matching what simulate_path consumes.
inline std::vector<Vector> wiener_increments(int m, std::int64_t steps, double dt,
                                             std::uint64_t seed) {
    if (m < 1 || steps < 1) {
        throw InputError("wiener_increments: m and steps must be >= 1");
    }
    if (!(dt > 0.0)) {
        throw InputError("wiener_increments: dt must be positive");
    }
    const double scale = std::sqrt(dt);
    std::vector<Vector> increments(static_cast<std::size_t>(steps));
    for (std::int64_t k = 0; k < steps; ++k) {
        Vector dw(m);
        for (int j = 0; j < m; ++j) {
            dw(j) = scale * normal_at(seed, static_cast<std::uint64_t>(k + 1),
                                      static_cast<std::uint64_t>(j));
        }
        increments[static_cast<std::size_t>(k)] = std::move(dw);
    }
    return increments;
}

/// One Euler-Maruyama update: x + A x dt + g(x, t) dW.
inline Vector em_step(const Vector& x, double t, const SystemSpec& spec, const Vector& dw) {
    if (x.size() != spec.a.rows() || dw.size() != spec.kernel.noise_dim) {
        throw DimensionError("em_step: state or increment dimension mismatch");
    }
    Matrix g;
    eval_kernel_into(spec.kernel, x, t, g);
    Vector next = x + spec.dt * (spec.a * x) + g * dw;
    if (!next.allFinite() || next.cwiseAbs().maxCoeff() > kBlowUpThreshold) {
        throw BlowUpError("em_step: state left the finite range");
    }
    return next;
}

/// Draws X0 from the initial law using the path's reserved stream 0.
inline Vector draw_initial_state(const SystemSpec& spec, std::uint64_t seed) {
    Vector x = spec.x0.mean;
    if (spec.x0.stddev > 0.0) {
        for (Eigen::Index j = 0; j < x.size(); ++j) {
            x(j) += spec.x0.stddev * normal_at(seed, 0, static_cast<std::uint64_t>(j));
        }
    }
    return x;
}

/// Integrates one path over the full grid. The trajectory is a pure
/// function of (spec, seed).
inline Trajectory simulate_path(const SystemSpec& spec, std::uint64_t seed) {
    validate_system(spec);
    const Eigen::Index n = spec.a.rows();
    const int m = spec.kernel.noise_dim;
    const std::int64_t steps = step_count(spec);
    const double root_dt = std::sqrt(spec.dt);

    Trajectory traj;
    traj.times.resize(static_cast<std::size_t>(steps) + 1);
    traj.states.resize(n, steps + 1);

    Vector x = draw_initial_state(spec, seed);
    traj.states.col(0) = x;
    traj.times[0] = 0.0;
    traj.sup_norm = x.norm();

    Matrix g(n, m);
    Vector dw(m);
    Vector drift(n);
    for (std::int64_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * spec.dt;
        eval_kernel_into(spec.kernel, x, t, g);
        for (int j = 0; j < m; ++j) {
            dw(j) = root_dt * normal_at(seed, static_cast<std::uint64_t>(k + 1),
                                        static_cast<std::uint64_t>(j));
        }
        drift.noalias() = spec.a * x;
        x += spec.dt * drift;
        x.noalias() += g * dw;
        if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kBlowUpThreshold) {
            std::ostringstream os;
            os << "simulate_path: blow-up at step " << (k + 1) << " (t = "
               << static_cast<double>(k + 1) * spec.dt << ")";
            throw BlowUpError(os.str());
        }
        traj.states.col(k + 1) = x;
        traj.times[static_cast<std::size_t>(k) + 1] = static_cast<double>(k + 1) * spec.dt;
        const double norm = x.norm();
        if (norm > traj.sup_norm) traj.sup_norm = norm;
    }
    return traj;
}

/// E||X0|| of the initial law, exactly. For a point mass this is ||mean||;
/// for the Gaussian it is sigma * E sqrt(W) with W noncentral chi-square,
/// evaluated as a Poisson mixture of central-chi means:
///   E sqrt(W) = sum_j Pois(j; l/2) * sqrt(2) * G((n+2j+1)/2) / G((n+2j)/2),
/// with l = ||mean||^2 / sigma^2 and G the gamma function.
inline double expected_initial_norm(const InitialLaw& law) {
    if (law.stddev == 0.0) {
        return law.mean.norm();
    }
    const double n = static_cast<double>(law.mean.size());
    const double lambda = law.mean.squaredNorm() / (law.stddev * law.stddev);
    const double half_lambda = 0.5 * lambda;

    double sum = 0.0;
    const int j_max =
        half_lambda == 0.0
            ? 0
            : 200 + static_cast<int>(half_lambda + 12.0 * std::sqrt(half_lambda + 1.0));
    for (int j = 0; j <= j_max; ++j) {
        const double log_weight =
            j == 0 ? -half_lambda
                   : -half_lambda + j * std::log(half_lambda) -
                         std::lgamma(static_cast<double>(j) + 1.0);
        const double log_chi_mean = 0.5 * std::numbers::ln2 +
                                    std::lgamma(0.5 * (n + 2 * j + 1)) -
                                    std::lgamma(0.5 * (n + 2 * j));
        sum += std::exp(log_weight + log_chi_mean);
    }
    return law.stddev * sum;
}

}  // namespace stochabound
