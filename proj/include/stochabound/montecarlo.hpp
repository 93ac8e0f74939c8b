#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "stochabound/certify.hpp"
#include "stochabound/errors.hpp"
#include "stochabound/sde.hpp"

namespace stochabound {

// Ensemble simulation and the empirical side of the certificates: E||X(t)||
// curves, tail-window limits, sup-exceedance probabilities, and the
// supermartingale behaviour of the Lyapunov value.
//
// Paths are dealt to workers in fixed-size blocks and block partials are
// combined in block order, so every statistic is bit-identical for any
// worker count (STOCHABOUND_THREADS only changes wall time, never values).

inline constexpr std::size_t kEnsembleBlock = 256;

struct EnsembleResult {
    std::vector<double> times;
    std::vector<double> mean_norm;     // per-time ensemble mean of ||X(t)||
    std::vector<double> sem_norm;      // standard error of that mean
    std::vector<double> mean_sq_norm;  // per-time ensemble mean of ||X(t)||^2
    std::vector<double> mean_v;        // mean of 0.5 x^T P x when P was supplied
    std::vector<double> sem_v;
    std::vector<double> sup_norms;  // one per trajectory: sup_k ||X(t_k)||
    int n_paths = 0;
    std::uint64_t master_seed = 0;
    double decorrelation_time = 0.0;  // 1 / |spectral abscissa of A|
    // max over all simulated states of ||g(x,t)|| - (c + gamma ||x||);
    // nonpositive up to roundoff when the kernel constants are honest.
    double envelope_slack_max = 0.0;
};

struct ExceedancePoint {
    double epsilon = 0.0;
    double empirical = 0.0;   // fraction of paths with sup norm strictly above epsilon
    double p_derived = 0.0;   // raw tail bounds at this epsilon
    double p_paper = 0.0;
};

struct VerificationVerdict {
    double b_limit = 0.0;
    double b_sup = 0.0;
    double tail_mean = 0.0;
    double tail_sem = 0.0;
    double max_mean_norm = 0.0;
    bool limit_ok = false;
    bool sup_ok = false;
    bool exceedance_ok = false;
    bool exceedance_applicable = false;  // tail bound requires E||X0|| > b_limit
    bool supermartingale_ok = false;

    bool all_ok() const { return limit_ok && sup_ok && exceedance_ok && supermartingale_ok; }
};

struct VerificationRun {
    VerificationVerdict verdict;
    EnsembleResult ensemble;
    std::vector<ExceedancePoint> exceedance;
};

/// Worker cap: STOCHABOUND_THREADS when set (>= 1), else hardware width.
inline unsigned worker_count(std::size_t jobs) {
    unsigned cap = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("STOCHABOUND_THREADS")) {
        char* end = nullptr;
        const long parsed = std::strtol(env, &end, 10);
        if (end != env && parsed >= 1) {
            cap = static_cast<unsigned>(parsed);
        }
    }
    return static_cast<unsigned>(std::min<std::size_t>(cap, std::max<std::size_t>(jobs, 1)));
}

namespace detail {

struct BlockStats {
    std::vector<double> sum_norm;
    std::vector<double> sum_sq_norm;
    std::vector<double> sum_v;
    std::vector<double> sum_v_sq;
    double envelope_slack = -std::numeric_limits<double>::infinity();
};

}  // namespace detail

/// Simulates `n_paths` independent trajectories (path p is keyed by
/// path_seed(master_seed, p)) and aggregates the per-time statistics.
/// When `quad_form` is given, the ensemble mean and standard error of the
/// Lyapunov value 0.5 x^T P x are collected as well.
inline EnsembleResult run_ensemble(const SystemSpec& spec, int n_paths,
                                   std::uint64_t master_seed,
                                   const Matrix* quad_form = nullptr) {
    validate_system(spec);
    if (n_paths < 2) {
        throw InputError("run_ensemble: need at least 2 paths");
    }
    const std::int64_t steps = step_count(spec);
    const auto n_times = static_cast<std::size_t>(steps) + 1;
    const auto total_paths = static_cast<std::size_t>(n_paths);
    const std::size_t n_blocks = (total_paths + kEnsembleBlock - 1) / kEnsembleBlock;
    const KernelConstants constants = analytic_constants(spec.kernel);
    const bool want_v = quad_form != nullptr;

    EnsembleResult result;
    result.n_paths = n_paths;
    result.master_seed = master_seed;
    result.sup_norms.resize(total_paths);
    result.times.resize(n_times);
    for (std::size_t k = 0; k < n_times; ++k) {
        result.times[k] = static_cast<double>(k) * spec.dt;
    }
    const HurwitzResult stab = is_hurwitz(spec.a);
    result.decorrelation_time =
        stab.abscissa < 0.0 ? 1.0 / std::abs(stab.abscissa) : spec.horizon;

    std::vector<detail::BlockStats> blocks(n_blocks);
    std::atomic<std::size_t> next_block{0};
    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mutex;

    auto work = [&]() {
        Matrix g_buffer;
        while (true) {
            const std::size_t block = next_block.fetch_add(1);
            if (block >= n_blocks || failed.load()) break;
            detail::BlockStats stats;
            stats.sum_norm.assign(n_times, 0.0);
            stats.sum_sq_norm.assign(n_times, 0.0);
            if (want_v) {
                stats.sum_v.assign(n_times, 0.0);
                stats.sum_v_sq.assign(n_times, 0.0);
            }
            const std::size_t first = block * kEnsembleBlock;
            const std::size_t last = std::min(first + kEnsembleBlock, total_paths);
            for (std::size_t path = first; path < last; ++path) {
                try {
                    const Trajectory traj =
                        simulate_path(spec, path_seed(master_seed, path));
                    result.sup_norms[path] = traj.sup_norm;
                    for (std::size_t k = 0; k < n_times; ++k) {
                        const auto state = traj.states.col(static_cast<Eigen::Index>(k));
                        const double norm = state.norm();
                        stats.sum_norm[k] += norm;
                        stats.sum_sq_norm[k] += norm * norm;
                        if (want_v) {
                            const double v = 0.5 * state.dot((*quad_form) * state);
                            stats.sum_v[k] += v;
                            stats.sum_v_sq[k] += v * v;
                        }
                        eval_kernel_into(spec.kernel, state, traj.times[k], g_buffer);
                        const double slack =
                            g_buffer.norm() - constants.c - constants.gamma * norm;
                        if (slack > stats.envelope_slack) stats.envelope_slack = slack;
                    }
                } catch (const Error& e) {
                    failed.store(true);
                    std::scoped_lock lock(failure_mutex);
                    if (failure.empty()) {
                        std::ostringstream os;
                        os << "run_ensemble: path " << path << " failed: " << e.what();
                        failure = os.str();
                    }
                    break;
                }
            }
            blocks[block] = std::move(stats);
        }
    };

    const unsigned workers = worker_count(n_blocks);
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (failed.load()) {
        throw BlowUpError(failure);
    }

    // Deterministic reduction: block partials in block order.
    std::vector<double> sum_norm(n_times, 0.0), sum_sq(n_times, 0.0);
    std::vector<double> sum_v(n_times, 0.0), sum_v_sq(n_times, 0.0);
    double envelope = -std::numeric_limits<double>::infinity();
    for (const auto& stats : blocks) {
        for (std::size_t k = 0; k < n_times; ++k) {
            sum_norm[k] += stats.sum_norm[k];
            sum_sq[k] += stats.sum_sq_norm[k];
            if (want_v) {
                sum_v[k] += stats.sum_v[k];
                sum_v_sq[k] += stats.sum_v_sq[k];
            }
        }
        envelope = std::max(envelope, stats.envelope_slack);
    }
    result.envelope_slack_max = envelope;

    const double n = static_cast<double>(n_paths);
    auto finalize = [n](double sum, double sum_of_squares, double& mean, double& sem) {
        mean = sum / n;
        const double var = std::max(0.0, (sum_of_squares - sum * sum / n) / (n - 1.0));
        sem = std::sqrt(var / n);
    };
    result.mean_norm.resize(n_times);
    result.sem_norm.resize(n_times);
    result.mean_sq_norm.resize(n_times);
    if (want_v) {
        result.mean_v.resize(n_times);
        result.sem_v.resize(n_times);
    }
    for (std::size_t k = 0; k < n_times; ++k) {
        finalize(sum_norm[k], sum_sq[k], result.mean_norm[k], result.sem_norm[k]);
        result.mean_sq_norm[k] = sum_sq[k] / n;
        if (want_v) {
            finalize(sum_v[k], sum_v_sq[k], result.mean_v[k], result.sem_v[k]);
        }
    }
    return result;
}

/// Time-average of the mean-norm curve over the trailing `tail_fraction`
/// of the horizon, with a standard error deflated for temporal
/// autocorrelation: the window holds roughly T_window / tau independent
/// samples, tau being the drift decorrelation time.
inline std::pair<double, double> estimate_limit(const EnsembleResult& result,
                                                double tail_fraction) {
    if (!(tail_fraction > 0.0) || tail_fraction > 1.0) {
        throw InputError("estimate_limit: tail_fraction must lie in (0, 1]");
    }
    const std::size_t n_times = result.times.size();
    if (n_times == 0) {
        throw InputError("estimate_limit: empty ensemble");
    }
    const double horizon = result.times.back();
    const double window_start = horizon * (1.0 - tail_fraction);
    std::size_t first = 0;
    while (first < n_times && result.times[first] < window_start) ++first;
    const std::size_t window = n_times - first;
    if (window < 10) {
        throw InputError("estimate_limit: tail window holds fewer than 10 grid points");
    }

    double mean = 0.0;
    double mean_sem_sq = 0.0;
    for (std::size_t k = first; k < n_times; ++k) {
        mean += result.mean_norm[k];
        mean_sem_sq += result.sem_norm[k] * result.sem_norm[k];
    }
    mean /= static_cast<double>(window);
    mean_sem_sq /= static_cast<double>(window);

    const double window_span = horizon - result.times[first];
    const double tau = std::max(result.decorrelation_time, 1e-300);
    const double ess = std::clamp(window_span / tau, 1.0, static_cast<double>(window));
    return {mean, std::sqrt(mean_sem_sq / ess)};
}

/// Empirical sup-exceedance curve: for each threshold, the fraction of
/// trajectories whose sup norm strictly exceeds it.
inline std::vector<std::pair<double, double>> exceedance_curve(
    const EnsembleResult& result, const std::vector<double>& epsilons) {
    if (epsilons.empty()) {
        throw InputError("exceedance_curve: empty epsilon grid");
    }
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        if (!(epsilons[i] >= 0.0) || !std::isfinite(epsilons[i])) {
            throw InputError("exceedance_curve: epsilons must be finite and nonnegative");
        }
        if (i > 0 && epsilons[i] < epsilons[i - 1]) {
            throw InputError("exceedance_curve: epsilons must be sorted ascending");
        }
    }
    std::vector<std::pair<double, double>> curve;
    curve.reserve(epsilons.size());
    const double n = static_cast<double>(result.sup_norms.size());
    for (const double eps : epsilons) {
        std::size_t count = 0;
        for (const double sup : result.sup_norms) {
            if (sup > eps) ++count;
        }
        curve.emplace_back(eps, static_cast<double>(count) / n);
    }
    return curve;
}

/// Runs the ensemble and evaluates every empirical check against the
/// certificate:
///   limit_ok  - tail-window mean within 3 SE of the limiting bound,
///   sup_ok    - peak of the mean-norm curve within 3 SE of the sup bound,
///   exceedance_ok - empirical sup-exceedance dominated by the tail bound
///       wherever that bound is informative (<= 1); the tail bound only
///       applies when E||X0|| exceeds the limiting bound, and is vacuous
///       otherwise,
///   supermartingale_ok - while the mean norm remains above the limiting
///       bound, the ensemble-mean Lyapunov value is nonincreasing up to
///       3 SE slack.
inline VerificationRun verify(const SystemSpec& spec, const LyapunovCertificate& cert,
                              const BoundReport& bounds, int n_paths,
                              std::uint64_t master_seed, const std::vector<double>& epsilons,
                              double tail_fraction = 0.2) {
    require_condition(cert, "verify");
    VerificationRun run;
    run.ensemble = run_ensemble(spec, n_paths, master_seed, &cert.p);
    const EnsembleResult& ens = run.ensemble;

    VerificationVerdict& verdict = run.verdict;
    verdict.b_limit = bounds.b_limit;
    verdict.b_sup = bounds.b_sup;

    const auto [tail_mean, tail_sem] = estimate_limit(ens, tail_fraction);
    verdict.tail_mean = tail_mean;
    verdict.tail_sem = tail_sem;
    verdict.limit_ok = tail_mean <= bounds.b_limit + 3.0 * tail_sem;

    double max_mean = 0.0, max_sem = 0.0;
    for (std::size_t k = 0; k < ens.mean_norm.size(); ++k) {
        max_mean = std::max(max_mean, ens.mean_norm[k]);
        max_sem = std::max(max_sem, ens.sem_norm[k]);
    }
    verdict.max_mean_norm = max_mean;
    verdict.sup_ok = max_mean <= bounds.b_sup + 3.0 * max_sem;

    const auto curve = exceedance_curve(ens, epsilons);
    verdict.exceedance_applicable = bounds.e_x0 > bounds.b_limit;
    verdict.exceedance_ok = true;
    run.exceedance.reserve(curve.size());
    for (const auto& [eps, empirical] : curve) {
        const TailBound tb = tail_bound(cert, bounds.e_x0, eps);
        run.exceedance.push_back({eps, empirical, tb.p_derived, tb.p_paper});
        if (verdict.exceedance_applicable && tb.p_derived <= 1.0 && empirical > tb.p_derived) {
            verdict.exceedance_ok = false;
        }
    }

    // Empirical supermartingale property of V = 0.5 x^T P x: nonincreasing
    // mean while the mean norm is still outside the limiting bound.
    verdict.supermartingale_ok = true;
    for (std::size_t k = 0; k + 1 < ens.mean_norm.size(); ++k) {
        if (ens.mean_norm[k] <= bounds.b_limit) break;
        const double slack = 3.0 * std::sqrt(ens.sem_v[k] * ens.sem_v[k] +
                                             ens.sem_v[k + 1] * ens.sem_v[k + 1]);
        if (ens.mean_v[k + 1] > ens.mean_v[k] + slack) {
            verdict.supermartingale_ok = false;
            break;
        }
    }
    return run;
}

}  // namespace stochabound
