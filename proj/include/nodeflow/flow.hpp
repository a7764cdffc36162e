#pragma once

#include <nodeflow/fields.hpp>

#include <algorithm>
#include <cmath>
#include <span>

namespace nodeflow {

/// The time-`terminal_time` map of a field, x -> phi(field, x, terminal_time).
struct FlowEndpoint {
    VectorFieldSpec field;
    SolverConfig cfg{};
    double terminal_time = 1.0;

    long dim() const { return field.dim(); }
};

inline Vector endpoint(const FlowEndpoint& ep, const Vector& x)
{
    return integrate(ep.field, x, ep.terminal_time, ep.cfg);
}

/// Inverse map: the endpoint of the negated field.
inline Vector inverse_endpoint(const FlowEndpoint& ep, const Vector& y)
{
    return integrate(VectorFieldSpec::scaled(-1.0, ep.field), y, ep.terminal_time, ep.cfg);
}

/// |phi(x, s+t) - phi(phi(x, s), t)|
inline double group_law_residual(const VectorFieldSpec& field, const Vector& x, double s, double t,
                                 const SolverConfig& cfg)
{
    const Vector direct = integrate(field, x, s + t, cfg);
    const Vector composed = integrate(field, integrate(field, x, s, cfg), t, cfg);
    return (direct - composed).norm();
}

/// |phi(f, x, T) - phi(T f, x, 1)|
///
/// The rescaled side runs with the step budget multiplied by |T| so both
/// sides take the same number of steps.
inline double rescale_residual(const VectorFieldSpec& field, const Vector& x, double time, const SolverConfig& cfg)
{
    if (!std::isfinite(time)) {
        throw InvalidArgument("rescale_residual: T must be finite");
    }
    const Vector direct = integrate(field, x, time, cfg);
    const Vector rescaled = integrate(VectorFieldSpec::scaled(time, field), x, 1.0, scaled_budget(cfg, time));
    return (direct - rescaled).norm();
}

/// Max displacement |endpoint(x) - x| over the given points; zero when every
/// point lies outside the support of the field.
inline double support_fixed_check(const VectorFieldSpec& field, std::span<const Vector> points,
                                  const SolverConfig& cfg = {})
{
    const FlowEndpoint ep{field, cfg, 1.0};
    double worst = 0.0;
    for (const auto& x : points) {
        worst = std::max(worst, (endpoint(ep, x) - x).norm());
    }
    return worst;
}

} // namespace nodeflow
