#pragma once

#include <nodeflow/fields.hpp>
#include <nodeflow/flow.hpp>
#include <nodeflow/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace nodeflow {

/// Axis-aligned box [lower, upper].
struct Box {
    Vector lower;
    Vector upper;

    /// Empty placeholder of dimension 0; not a valid compact.
    Box() = default;

    Box(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi))
    {
        if (lower.size() != upper.size() || lower.size() < 1) {
            throw InvalidArgument("Box: bounds must have the same positive dimension");
        }
        for (Eigen::Index i = 0; i < lower.size(); ++i) {
            if (!(lower[i] <= upper[i]) || !std::isfinite(lower[i]) || !std::isfinite(upper[i])) {
                throw InvalidArgument("Box: need finite lower[i] <= upper[i]");
            }
        }
    }

    /// [lo, hi]^d
    static Box cube(long d, double lo, double hi) { return {Vector::Constant(d, lo), Vector::Constant(d, hi)}; }

    long dim() const { return lower.size(); }

    bool contains(const Vector& x) const
    {
        return x.size() == dim() && (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
    }

    friend bool operator==(const Box& a, const Box& b) { return a.lower == b.lower && a.upper == b.upper; }
};

inline constexpr long kMaxGridPoints = 10'000'000;

/// Uniform grid with `resolution` points per axis including the corners.
/// Zero-width axes collapse to a single coordinate.
class BoxGrid {
public:
    BoxGrid(const Box& box, long resolution) : box_(box)
    {
        if (resolution < 2) {
            throw InvalidArgument("grid resolution must be >= 2");
        }
        counts_.resize(static_cast<std::size_t>(box.dim()));
        double total = 1.0;
        for (long i = 0; i < box.dim(); ++i) {
            counts_[static_cast<std::size_t>(i)] = box.lower[i] == box.upper[i] ? 1 : resolution;
            total *= static_cast<double>(counts_[static_cast<std::size_t>(i)]);
        }
        if (total > static_cast<double>(kMaxGridPoints)) {
            throw GridTooLarge("grid of " + std::to_string(total) + " points exceeds the 1e7 limit");
        }
        size_ = static_cast<long>(total);
    }

    long size() const { return size_; }

    Vector point(long index) const
    {
        Vector x(box_.dim());
        for (long i = 0; i < box_.dim(); ++i) {
            const long n = counts_[static_cast<std::size_t>(i)];
            const long k = index % n;
            index /= n;
            if (n == 1) {
                x[i] = box_.lower[i];
            } else if (k == n - 1) {
                x[i] = box_.upper[i];
            } else {
                x[i] = box_.lower[i] + (box_.upper[i] - box_.lower[i]) * static_cast<double>(k) /
                                           static_cast<double>(n - 1);
            }
        }
        return x;
    }

private:
    Box box_;
    std::vector<long> counts_;
    long size_ = 0;
};

/// max over the grid of |f(x) - g(x)|; a lower bound on the true sup over K.
template <class F, class G>
double sup_distance(const F& f, const G& g, const Box& box, long resolution, int threads = 1)
{
    const BoxGrid grid(box, resolution);
    std::vector<double> dist(static_cast<std::size_t>(grid.size()));
    parallel_for(grid.size(), threads, [&](long i) {
        const Vector x = grid.point(i);
        dist[static_cast<std::size_t>(i)] = (f(x) - g(x)).norm();
    });
    double worst = 0.0;
    for (const double d : dist) {
        if (std::isnan(d)) {
            return std::numeric_limits<double>::quiet_NaN();
        }
        worst = std::max(worst, d);
    }
    return worst;
}

/// Bounding box of a set of points.
inline Box bounding_box(const std::vector<Vector>& points)
{
    if (points.empty()) {
        throw InvalidArgument("bounding_box: no points");
    }
    Vector lo = points.front();
    Vector hi = points.front();
    for (const auto& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return {lo, hi};
}

/// Bounding box of a map's image of the grid over K.
template <class Map>
Box image_box(const Map& map, const Box& box, long resolution, int threads = 1)
{
    const BoxGrid grid(box, resolution);
    std::vector<Vector> images(static_cast<std::size_t>(grid.size()));
    parallel_for(grid.size(), threads, [&](long i) { images[static_cast<std::size_t>(i)] = map(grid.point(i)); });
    return bounding_box(images);
}

/// Bounding box of {phi(F, x, t) : x in grid(K), t in grid([0, 1])}.
inline Box reach_box(const VectorFieldSpec& field, const Box& box, long n_space, long n_time, const SolverConfig& cfg,
                     int threads = 1)
{
    if (n_space < 2 || n_time < 2) {
        throw InvalidArgument("reach_box: n_space and n_time must be >= 2");
    }
    check_dim(field.dim(), box.dim());
    std::vector<double> times(static_cast<std::size_t>(n_time));
    for (long i = 0; i < n_time; ++i) {
        times[static_cast<std::size_t>(i)] = i == n_time - 1 ? 1.0 : static_cast<double>(i) / (n_time - 1);
    }
    const BoxGrid grid(box, n_space);
    std::vector<Vector> lo(static_cast<std::size_t>(grid.size())), hi(static_cast<std::size_t>(grid.size()));
    parallel_for(grid.size(), threads, [&](long i) {
        const auto traj = trajectory(field, grid.point(i), times, cfg);
        const Box b = bounding_box(traj.points);
        lo[static_cast<std::size_t>(i)] = b.lower;
        hi[static_cast<std::size_t>(i)] = b.upper;
    });
    Box out = bounding_box(lo);
    out.upper = bounding_box(hi).upper;
    return out;
}

/// Extends every coordinate by `margin` on both sides. Contains the Euclidean
/// margin-neighbourhood of the box.
inline Box inflate(const Box& box, double margin)
{
    if (!(margin >= 0.0) || !std::isfinite(margin)) {
        throw InvalidArgument("inflate: margin must be finite and >= 0");
    }
    return {box.lower.array() - margin, box.upper.array() + margin};
}

/// Measured quantities of one Groenwall endpoint comparison.
struct ApproxReport {
    std::string label;
    double delta = 0.0;
    double lip_F = 0.0;
    double gronwall_bound = 0.0;
    double endpoint_sup_error = 0.0;
    double slack = 0.0;
    long grid_resolution = 0;
    bool bound_satisfied = false;
    Vector k_prime_lower;
    Vector k_prime_upper;
};

class BoundViolated : public Error {
public:
    explicit BoundViolated(ApproxReport r)
        : Error("Groenwall bound violated: endpoint error " + std::to_string(r.endpoint_sup_error) + " > " +
                std::to_string(r.gronwall_bound) + " + slack " + std::to_string(r.slack)),
          report(std::move(r))
    {
    }
    ApproxReport report;
};

/// Slack added to 2 delta e^L before declaring a violation.
inline double gronwall_slack(double delta) { return 1e-5 + 1e-3 * delta; }

inline constexpr long kReachTimeSamples = 11;

/// Computes an ApproxReport without throwing on a violated bound.
///
/// K' = inflate(reach_box(F, K), 2 e^{L_F}). delta is the largest field gap
/// seen on the K' grid and on a grid over the reach box (a subset of K'), so
/// fine structure near the trajectories is not lost when K' is large.
inline ApproxReport gronwall_check(const VectorFieldSpec& target, const VectorFieldSpec& approx, const Box& box,
                                   long resolution, const SolverConfig& cfg, int threads = 1)
{
    check_dim(target.dim(), approx.dim());
    check_dim(target.dim(), box.dim());
    ApproxReport r;
    r.grid_resolution = resolution;
    r.lip_F = target.lipschitz_bound();
    const Box reach = reach_box(target, box, resolution, kReachTimeSamples, cfg, threads);
    const Box k_prime = inflate(reach, 2.0 * std::exp(r.lip_F));
    r.k_prime_lower = k_prime.lower;
    r.k_prime_upper = k_prime.upper;
    r.delta = std::max(sup_distance(target, approx, k_prime, resolution, threads),
                       sup_distance(target, approx, reach, resolution, threads));
    const FlowEndpoint ep_target{target, cfg, 1.0};
    const FlowEndpoint ep_approx{approx, cfg, 1.0};
    r.endpoint_sup_error = sup_distance([&](const Vector& x) { return endpoint(ep_target, x); },
                                        [&](const Vector& x) { return endpoint(ep_approx, x); }, box, resolution,
                                        threads);
    r.gronwall_bound = 2.0 * r.delta * std::exp(r.lip_F);
    r.slack = gronwall_slack(r.delta);
    r.bound_satisfied = r.endpoint_sup_error <= r.gronwall_bound + r.slack;
    return r;
}

/// gronwall_check that throws BoundViolated (carrying the report) on failure.
inline ApproxReport gronwall_verify(const VectorFieldSpec& target, const VectorFieldSpec& approx, const Box& box,
                                   long resolution, const SolverConfig& cfg, int threads = 1)
{
    ApproxReport r = gronwall_check(target, approx, box, resolution, cfg, threads);
    if (!r.bound_satisfied) {
        throw BoundViolated(std::move(r));
    }
    return r;
}

/// Largest difference quotient |g(x) - g(y)| / |x - y| over axis-neighbour
/// pairs of the grid. A measured (not certified) Lipschitz estimate.
template <class Map>
double measured_lipschitz(const Map& map, const Box& box, long resolution, int threads = 1)
{
    const BoxGrid grid(box, resolution);
    std::vector<Vector> images(static_cast<std::size_t>(grid.size()));
    parallel_for(grid.size(), threads, [&](long i) { images[static_cast<std::size_t>(i)] = map(grid.point(i)); });
    double worst = 0.0;
    long stride = 1;
    for (long axis = 0; axis < box.dim(); ++axis) {
        const long n = box.lower[axis] == box.upper[axis] ? 1 : resolution;
        for (long i = 0; i < grid.size(); ++i) {
            if ((i / stride) % n == n - 1) {
                continue;
            }
            const long j = i + stride;
            const double dx = (grid.point(i) - grid.point(j)).norm();
            const double dy = (images[static_cast<std::size_t>(i)] - images[static_cast<std::size_t>(j)]).norm();
            worst = std::max(worst, dy / dx);
        }
        stride *= n;
    }
    return worst;
}

} // namespace nodeflow
