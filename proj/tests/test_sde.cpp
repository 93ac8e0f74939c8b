#include <catch2/catch.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "stochabound/sde.hpp"

using namespace stochabound;

namespace {

SystemSpec scalar_system(double drift, const KernelSpec& kernel, double x0, double horizon,
                         double dt) {
    SystemSpec spec;
    spec.a = Matrix::Constant(1, 1, drift);
    spec.kernel = kernel;
    spec.x0.mean = Vector::Constant(1, x0);
    spec.x0.stddev = 0.0;
    spec.horizon = horizon;
    spec.dt = dt;
    return spec;
}

KernelSpec zero_kernel_1d() { return make_constant_kernel(Matrix::Zero(1, 1)); }

KernelSpec study_kernel() { return make_cosine_scalar_kernel(0.25, 4.0); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace

TEST_CASE("wiener increments have the contracted moments") {
    const int count = 1'000'000;
    const double dt = 0.01;
    const auto increments = wiener_increments(1, count, dt, 2024);

    double sum = 0.0, sum_sq = 0.0;
    for (const auto& dw : increments) {
        sum += dw(0);
        sum_sq += dw(0) * dw(0);
    }
    const double mean = sum / count;
    const double var = (sum_sq - sum * sum / count) / (count - 1);

    CHECK(std::abs(mean) <= 4.0 * std::sqrt(dt / count));
    CHECK(var == Approx(dt).epsilon(0.01));
}

TEST_CASE("wiener increments are reproducible bit for bit") {
    const auto first = wiener_increments(3, 500, 0.05, 99);
    const auto second = wiener_increments(3, 500, 0.05, 99);
    REQUIRE(first.size() == second.size());
    for (std::size_t k = 0; k < first.size(); ++k) {
        for (Eigen::Index j = 0; j < 3; ++j) {
            CHECK(first[k](j) == second[k](j));
        }
    }

    const auto other_seed = wiener_increments(3, 500, 0.05, 100);
    bool any_difference = false;
    for (std::size_t k = 0; k < first.size() && !any_difference; ++k) {
        any_difference = (first[k] - other_seed[k]).cwiseAbs().maxCoeff() > 0.0;
    }
    CHECK(any_difference);
}

TEST_CASE("wiener increments validate their arguments") {
    CHECK_THROWS_AS(wiener_increments(0, 10, 0.1, 1), InputError);
    CHECK_THROWS_AS(wiener_increments(1, 0, 0.1, 1), InputError);
    CHECK_THROWS_AS(wiener_increments(1, 10, 0.0, 1), InputError);
}

TEST_CASE("single Euler-Maruyama steps") {
    const SystemSpec drift_only = scalar_system(-1.0, zero_kernel_1d(), 1.0, 1.0, 0.1);
    const Vector next = em_step(Vector::Constant(1, 1.0), 0.0, drift_only,
                                Vector::Constant(1, 123.0));
    CHECK(next(0) == Approx(0.9).margin(1e-15));

    Matrix g0(2, 2);
    g0 << 0.5, 0.0, 0.0, 0.25;
    SystemSpec spec;
    spec.a = -Matrix::Identity(2, 2);
    spec.kernel = make_constant_kernel(g0);
    spec.x0.mean = Vector::Zero(2);
    spec.horizon = 1.0;
    spec.dt = 0.1;
    Vector dw(2);
    dw << 0.3, -0.2;
    const Vector from_origin = em_step(Vector::Zero(2), 0.0, spec, dw);
    CHECK((from_origin - g0 * dw).norm() == 0.0);

    const SystemSpec study = scalar_system(-1.0, study_kernel(), 0.0, 10.0, 1e-3);
    const Vector kick = em_step(Vector::Zero(1), 0.0, study, Vector::Constant(1, 0.01));
    CHECK(kick(0) == Approx(0.0025).margin(1e-18));
}

TEST_CASE("em_step rejects dimension mismatches") {
    const SystemSpec spec = scalar_system(-1.0, zero_kernel_1d(), 1.0, 1.0, 0.1);
    CHECK_THROWS_AS(em_step(Vector::Zero(2), 0.0, spec, Vector::Zero(1)), DimensionError);
    CHECK_THROWS_AS(em_step(Vector::Zero(1), 0.0, spec, Vector::Zero(2)), DimensionError);
}

TEST_CASE("unperturbed path tracks the exact exponential decay") {
    const SystemSpec spec = scalar_system(-1.0, zero_kernel_1d(), 1.0, 5.0, 1e-3);
    const Trajectory traj = simulate_path(spec, 7);
    const double exact = std::exp(-5.0);
    CHECK(traj.states(0, traj.states.cols() - 1) == Approx(exact).margin(5.0 * 1e-3));
    CHECK(traj.sup_norm == Approx(1.0));  // decay from the start value
    CHECK(traj.times.front() == 0.0);
    CHECK(traj.times.back() == Approx(5.0));
}

TEST_CASE("unperturbed path from the origin stays at the origin") {
    const SystemSpec spec = scalar_system(-1.0, zero_kernel_1d(), 0.0, 2.0, 1e-2);
    const Trajectory traj = simulate_path(spec, 11);
    CHECK(traj.sup_norm == 0.0);
    CHECK(traj.states.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("euler error on the linear drift has order one") {
    const double exact = std::exp(-5.0);
    std::vector<double> log_dt, log_err;
    for (const double dt : {1e-2, 1e-3, 1e-4}) {
        const SystemSpec spec = scalar_system(-1.0, zero_kernel_1d(), 1.0, 5.0, dt);
        const Trajectory traj = simulate_path(spec, 1);
        const double err = std::abs(traj.states(0, traj.states.cols() - 1) - exact);
        log_dt.push_back(std::log(dt));
        log_err.push_back(std::log(err));
    }
    // least-squares slope of log err against log dt
    const double n = static_cast<double>(log_dt.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < log_dt.size(); ++i) {
        sx += log_dt[i];
        sy += log_err[i];
        sxx += log_dt[i] * log_dt[i];
        sxy += log_dt[i] * log_err[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(slope == Approx(1.0).margin(0.1));
}

TEST_CASE("paths are pure functions of spec and seed") {
    const SystemSpec spec = scalar_system(-1.0, study_kernel(), 0.0, 1.0, 1e-3);
    const Trajectory first = simulate_path(spec, 42);
    const Trajectory second = simulate_path(spec, 42);
    CHECK((first.states - second.states).cwiseAbs().maxCoeff() == 0.0);
    CHECK(first.sup_norm == second.sup_norm);

    const Trajectory other = simulate_path(spec, 43);
    CHECK((first.states - other.states).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("gaussian initial states consume the reserved stream deterministically") {
    SystemSpec spec = scalar_system(-1.0, zero_kernel_1d(), 0.0, 1.0, 1e-2);
    spec.x0.stddev = 0.5;
    const Trajectory first = simulate_path(spec, 5);
    const Trajectory second = simulate_path(spec, 5);
    CHECK(first.states(0, 0) == second.states(0, 0));
    CHECK(first.states(0, 0) != 0.0);
}

TEST_CASE("explosive runs abort with a blow-up error") {
    const SystemSpec spec = scalar_system(5.0, zero_kernel_1d(), 1.0, 10.0, 1e-2);
    CHECK_THROWS_AS(simulate_path(spec, 3), BlowUpError);
}

TEST_CASE("system validation catches malformed specs") {
    SystemSpec spec = scalar_system(-1.0, zero_kernel_1d(), 1.0, 1.0, 0.1);
    spec.dt = 2.0;  // dt > T
    CHECK_THROWS_AS(validate_system(spec), InputError);

    SystemSpec mismatched = scalar_system(-1.0, zero_kernel_1d(), 1.0, 1.0, 0.1);
    mismatched.kernel = make_constant_kernel(Matrix::Zero(2, 1));
    CHECK_THROWS_AS(validate_system(mismatched), DimensionError);

    SystemSpec too_many_steps = scalar_system(-1.0, zero_kernel_1d(), 1.0, 1.0, 1e-12);
    CHECK_THROWS_AS(validate_system(too_many_steps), InputError);
}

TEST_CASE("expected initial norm: point mass and scalar gaussian") {
    InitialLaw point;
    point.mean = Vector::Constant(1, -2.5);
    CHECK(expected_initial_norm(point) == Approx(2.5));

    // folded normal mean for n = 1
    InitialLaw gauss;
    gauss.mean = Vector::Constant(1, 0.8);
    gauss.stddev = 0.6;
    const double mu = 0.8, sigma = 0.6;
    const double folded = sigma * std::sqrt(2.0 / std::numbers::pi) *
                              std::exp(-mu * mu / (2.0 * sigma * sigma)) +
                          mu * (1.0 - 2.0 * normal_cdf(-mu / sigma));
    CHECK(expected_initial_norm(gauss) == Approx(folded).epsilon(1e-12));
}

TEST_CASE("expected initial norm: centered case matches the chi mean") {
    InitialLaw law;
    law.mean = Vector::Zero(3);
    law.stddev = 1.3;
    CHECK(expected_initial_norm(law) ==
          Approx(1.3 * 2.0 * std::sqrt(2.0 / std::numbers::pi)).epsilon(1e-12));
}

TEST_CASE("expected initial norm matches Monte-Carlo sampling") {
    InitialLaw law;
    law.mean = Vector(2);
    law.mean << 1.5, -0.5;
    law.stddev = 0.7;
    const double exact = expected_initial_norm(law);

    auto rng = oracles::make_rng(31415);
    std::normal_distribution<double> noise(0.0, law.stddev);
    const int samples = 200'000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double x = law.mean(0) + noise(rng);
        const double y = law.mean(1) + noise(rng);
        const double norm = std::hypot(x, y);
        sum += norm;
        sum_sq += norm * norm;
    }
    const double mc_mean = sum / samples;
    const double mc_sem =
        std::sqrt((sum_sq - sum * sum / samples) / (samples - 1.0) / samples);
    CHECK(std::abs(exact - mc_mean) <= 4.0 * mc_sem);
}
