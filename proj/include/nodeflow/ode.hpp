#pragma once

#include <nodeflow/core.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace nodeflow {

enum class SolverMethod { fixed_rk4, adaptive_dp54 };

/// Integrator settings. step_count is steps per unit time for the fixed method.
struct SolverConfig {
    SolverMethod method = SolverMethod::fixed_rk4;
    long step_count = 256;
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    long max_steps = 1'000'000;

    void validate() const
    {
        if (step_count < 1) {
            throw InvalidArgument("SolverConfig: step_count must be >= 1");
        }
        if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) {
            throw InvalidArgument("SolverConfig: tolerances must be positive");
        }
        if (max_steps < step_count) {
            throw InvalidArgument("SolverConfig: max_steps must be >= step_count");
        }
    }

    friend bool operator==(const SolverConfig&, const SolverConfig&) = default;
};

/// Same config with the per-unit-time budget multiplied by ceil(max(1, factor)).
inline SolverConfig scaled_budget(SolverConfig cfg, double factor)
{
    const auto mult = static_cast<long>(std::ceil(std::max(1.0, std::abs(factor))));
    cfg.step_count *= mult;
    cfg.max_steps = std::max(cfg.max_steps, cfg.step_count);
    return cfg;
}

struct Trajectory {
    std::vector<double> times;
    std::vector<Vector> points;
};

namespace detail {

inline void ensure_finite(const Vector& z, double t)
{
    if (!z.allFinite()) {
        throw NonFiniteState("non-finite state reached at t = " + std::to_string(t));
    }
}

template <class Rhs>
Vector rk4_forward(const Rhs& rhs, Vector z, double horizon, long steps)
{
    const double h = horizon / static_cast<double>(steps);
    for (long i = 0; i < steps; ++i) {
        const Vector k1 = rhs(z);
        const Vector k2 = rhs(z + 0.5 * h * k1);
        const Vector k3 = rhs(z + 0.5 * h * k2);
        const Vector k4 = rhs(z + h * k3);
        z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        ensure_finite(z, h * static_cast<double>(i + 1));
    }
    return z;
}

// Dormand-Prince 5(4) with local extrapolation; error norm is the max over
// components of |err| / (abs_tol + rel_tol * max(|z|, |z_new|)).
template <class Rhs>
Vector dp54_forward(const Rhs& rhs, Vector z, double horizon, const SolverConfig& cfg)
{
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                     a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                     e6 = 22.0 / 525, e7 = -1.0 / 40;

    double t = 0.0;
    double h = horizon / static_cast<double>(cfg.step_count);
    Vector k1 = rhs(z);
    long steps = 0;
    while (t < horizon) {
        if (steps++ >= cfg.max_steps) {
            throw MaxStepsExceeded("adaptive_dp54: exceeded " + std::to_string(cfg.max_steps) + " steps");
        }
        const bool last = t + h >= horizon;
        if (last) {
            h = horizon - t;
        }
        const Vector k2 = rhs(z + h * (a21 * k1));
        const Vector k3 = rhs(z + h * (a31 * k1 + a32 * k2));
        const Vector k4 = rhs(z + h * (a41 * k1 + a42 * k2 + a43 * k3));
        const Vector k5 = rhs(z + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const Vector k6 = rhs(z + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        Vector znew = z + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const Vector k7 = rhs(znew);
        const Vector err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        double err_norm = 0.0;
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            const double scale = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(z[i]), std::abs(znew[i]));
            err_norm = std::max(err_norm, std::abs(err[i]) / scale);
        }
        if (!std::isfinite(err_norm)) {
            throw NonFiniteState("adaptive_dp54: non-finite error estimate at t = " + std::to_string(t));
        }
        if (err_norm <= 1.0) {
            t = last ? horizon : t + h;
            z = std::move(znew);
            k1 = k7;
            ensure_finite(z, t);
        }
        const double factor = err_norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err_norm, -0.2), 0.2, 5.0);
        h *= factor;
        if (h <= 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, horizon)) {
            throw NonFiniteState("adaptive_dp54: step size underflow at t = " + std::to_string(t));
        }
    }
    return z;
}

} // namespace detail

/// Numerical solution z(t) of z' = rhs(z), z(0) = x0.
///
/// Negative t integrates the negated field forward over |t|, which is exact
/// for autonomous systems. The fixed method takes ceil(|t| * step_count)
/// classical RK4 steps.
template <class Rhs>
Vector integrate(const Rhs& rhs, const Vector& x0, double t, const SolverConfig& cfg)
{
    if (!std::isfinite(t)) {
        throw InvalidArgument("integrate: non-finite time");
    }
    detail::ensure_finite(x0, 0.0);
    if (t == 0.0) {
        return x0;
    }
    const double horizon = std::abs(t);
    auto run = [&](const auto& f) -> Vector {
        if (cfg.method == SolverMethod::fixed_rk4) {
            const double exact = horizon * static_cast<double>(cfg.step_count);
            const auto steps = std::max<long>(1, static_cast<long>(std::ceil(exact * (1.0 - 1e-12))));
            return detail::rk4_forward(f, x0, horizon, steps);
        }
        return detail::dp54_forward(f, x0, horizon, cfg);
    };
    if (t > 0.0) {
        return run(rhs);
    }
    return run([&rhs](const Vector& z) -> Vector { return -rhs(z); });
}

/// Points at each of the given (sorted) times, integrated incrementally.
template <class Rhs>
Trajectory trajectory(const Rhs& rhs, const Vector& x0, std::span<const double> times, const SolverConfig& cfg)
{
    for (std::size_t i = 1; i < times.size(); ++i) {
        const bool ascending = times[1] > times[0];
        if (ascending ? !(times[i] > times[i - 1]) : !(times[i] < times[i - 1])) {
            throw InvalidArgument("trajectory: times must be strictly monotone");
        }
    }
    Trajectory out;
    out.times.assign(times.begin(), times.end());
    out.points.reserve(times.size());
    Vector z = x0;
    double t = 0.0;
    for (const double ti : times) {
        z = integrate(rhs, z, ti - t, cfg);
        t = ti;
        out.points.push_back(z);
    }
    return out;
}

} // namespace nodeflow
