#include "support.hpp"

#include <nodeflow/approx.hpp>

#include <catch_amalgamated.hpp>

#include <numbers>

using namespace nodeflow;
using Catch::Matchers::WithinAbs;

namespace {

Vector vec(std::initializer_list<double> xs)
{
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (const double x : xs) {
        v[i++] = x;
    }
    return v;
}

/// 1 - 0.9 * tent on (1, 1.5): equals the unit constant field on every grid
/// node the check samples, but slows trajectories crossing the tent.
VectorFieldSpec hidden_tent()
{
    MlpParams p;
    p.activation = Activation::relu;
    Matrix w1(3, 1);
    w1 << 1, 1, 1;
    Matrix w2(1, 3);
    w2 << -3.6, 7.2, -3.6;
    p.layers.push_back({w1, vec({-1.0, -1.25, -1.5})});
    p.layers.push_back({w2, vec({1.0})});
    return VectorFieldSpec::mlp(p);
}

} // namespace

TEST_CASE("sup distance examples", "[approx]")
{
    const auto id = [](const Vector& x) { return x; };
    const Box box = Box::cube(3, -1.0, 1.0);
    CHECK(sup_distance(id, id, box, 5) == 0.0);
    const auto shifted = [](const Vector& x) { return Vector(x.array() + 0.3); };
    CHECK_THAT(sup_distance(id, shifted, box, 5), WithinAbs(0.3 * std::sqrt(3.0), 1e-12));

    const auto sine = [](const Vector& x) { return Vector::Constant(1, std::sin(x[0])); };
    const auto zero = [](const Vector&) { return Vector::Zero(1); };
    CHECK_THAT(sup_distance(sine, zero, Box::cube(1, 0.0, std::numbers::pi), 101), WithinAbs(1.0, 1e-3));
}

TEST_CASE("grids include corners and collapse degenerate axes", "[approx]")
{
    const Box box({vec({0.0, 2.0})}, {vec({1.0, 2.0})});
    const BoxGrid grid(box, 4);
    CHECK(grid.size() == 4);
    CHECK(grid.point(0) == vec({0.0, 2.0}));
    CHECK(grid.point(3) == vec({1.0, 2.0}));
    CHECK_THROWS_AS(BoxGrid(box, 1), InvalidArgument);
    CHECK_THROWS_AS(BoxGrid(Box::cube(3, 0.0, 1.0), 300), GridTooLarge);
    CHECK_NOTHROW(BoxGrid(Box::cube(2, 0.0, 1.0), 3000));
}

TEST_CASE("box invariants", "[approx]")
{
    CHECK_THROWS_AS(Box(vec({1.0}), vec({0.0})), InvalidArgument);
    CHECK_THROWS_AS(Box(vec({0.0}), vec({0.0, 1.0})), InvalidArgument);
    CHECK_THROWS_AS(Box(vec({0.0}), vec({INFINITY})), InvalidArgument);
    CHECK(Box::cube(2, -1.0, 1.0).contains(vec({1.0, -1.0})));
    CHECK_FALSE(Box::cube(2, -1.0, 1.0).contains(vec({1.0, -1.01})));
}

TEST_CASE("refining the grid never lowers the sup estimate", "[approx][property]")
{
    const auto f = [](const Vector& x) { return Vector::Constant(1, std::sin(7.0 * x[0]) * std::cos(3.0 * x[1])); };
    const auto zero = [](const Vector&) { return Vector::Zero(1); };
    const Box box = Box::cube(2, -1.3, 0.9);
    double previous = 0.0;
    for (long r = 3; r <= 193; r = 2 * r - 1) {
        const double d = sup_distance(f, zero, box, r);
        CHECK(d >= previous);
        previous = d;
    }
}

TEST_CASE("reach box examples", "[approx]")
{
    const SolverConfig cfg;
    const Box unit = Box::cube(2, 0.0, 1.0);
    CHECK(reach_box(VectorFieldSpec::zero(2), unit, 5, 5, cfg) == unit);

    const Box swept = reach_box(VectorFieldSpec::constant(vec({1.0})), Box::cube(1, 0.0, 1.0), 3, 5, cfg);
    CHECK_THAT(swept.lower[0], WithinAbs(0.0, 1e-14));
    CHECK_THAT(swept.upper[0], WithinAbs(2.0, 1e-14));

    // Rotation by angle t: compare against the closed-form sweep of the same samples.
    const Matrix a = VectorFieldSpec::elementary_skew(2);
    const Box rotated = reach_box(VectorFieldSpec::linear(a), unit, 9, 11, cfg);
    Vector lo = Vector::Constant(2, INFINITY), hi = Vector::Constant(2, -INFINITY);
    for (int i = 0; i < 9; ++i) {
        for (int j = 0; j < 9; ++j) {
            const Vector x = vec({i / 8.0, j / 8.0});
            for (int k = 0; k <= 10; ++k) {
                const Vector y = oracle::rotation(-k / 10.0) * x;
                lo = lo.cwiseMin(y);
                hi = hi.cwiseMax(y);
            }
        }
    }
    CHECK((rotated.lower - lo).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((rotated.upper - hi).cwiseAbs().maxCoeff() <= 1e-9);
    // The corner (1, 1) rotated by 1 rad lies inside.
    CHECK(inflate(rotated, 1e-12).contains(oracle::rotation(-1.0) * vec({1.0, 1.0})));
    CHECK_THROWS_AS(reach_box(VectorFieldSpec::zero(2), unit, 1, 5, cfg), InvalidArgument);
}

TEST_CASE("inflate examples", "[approx]")
{
    const Box unit = Box::cube(2, 0.0, 1.0);
    CHECK(inflate(unit, 0.0) == unit);
    CHECK(inflate(unit, 2.0 * std::exp(0.0)) == Box::cube(2, -2.0, 3.0));
    const Box b = inflate(Box::cube(1, -1.0, 1.0), 2.0 * std::exp(0.5));
    CHECK_THAT(b.lower[0], WithinAbs(-4.2974425414, 1e-9));
    CHECK_THAT(b.upper[0], WithinAbs(4.2974425414, 1e-9));
    CHECK_THROWS_AS(inflate(unit, -1.0), InvalidArgument);
}

TEST_CASE("Groenwall check examples", "[approx]")
{
    const SolverConfig cfg;
    const Box box = Box::cube(2, -1.0, 1.0);

    SECTION("identical fields")
    {
        const auto f = VectorFieldSpec::radial_rotation(VectorFieldSpec::elementary_skew(2));
        const ApproxReport r = gronwall_verify(f, f, box, 9, cfg);
        CHECK(r.delta == 0.0);
        CHECK(r.endpoint_sup_error <= r.slack);
        CHECK(r.bound_satisfied);
    }
    SECTION("constant fields differing by eta")
    {
        const Vector c = vec({0.5, -0.25});
        const Vector eta = vec({0.03, 0.04});
        const ApproxReport r =
            gronwall_verify(VectorFieldSpec::constant(c), VectorFieldSpec::constant(c + eta), box, 9, cfg);
        CHECK_THAT(r.delta, WithinAbs(0.05, 1e-14));
        CHECK_THAT(r.endpoint_sup_error, WithinAbs(0.05, 1e-12));
        CHECK(r.lip_F == 0.0);
        CHECK(r.gronwall_bound == 2.0 * r.delta);
        CHECK(r.bound_satisfied);
    }
    SECTION("linear fields against the exponential oracle")
    {
        Matrix a(2, 2);
        a << -0.3, 0.8, -0.6, 0.2;
        Matrix e(2, 2);
        e << 0.01, -0.02, 0.015, 0.005;
        const ApproxReport r = gronwall_verify(VectorFieldSpec::linear(a), VectorFieldSpec::linear(a + e), box, 9, cfg);
        const Matrix gap = oracle::expm(a) - oracle::expm(a + e);
        double oracle_err = 0.0;
        const BoxGrid grid(box, 9);
        for (long i = 0; i < grid.size(); ++i) {
            oracle_err = std::max(oracle_err, (gap * grid.point(i)).norm());
        }
        CHECK_THAT(r.endpoint_sup_error, WithinAbs(oracle_err, 1e-9));
        CHECK(r.gronwall_bound == 2.0 * r.delta * std::exp(r.lip_F));
        CHECK(r.endpoint_sup_error <= r.gronwall_bound);
        const Box k_prime(r.k_prime_lower, r.k_prime_upper);
        CHECK(k_prime.contains(vec({0.0, 0.0})));
        CHECK(k_prime.upper[0] - k_prime.lower[0] >= 2.0 + 4.0 * std::exp(r.lip_F) - 1e-12);
    }
}

TEST_CASE("a field gap hidden between grid nodes trips the bound", "[approx]")
{
    const SolverConfig cfg;
    const auto target = VectorFieldSpec::constant(vec({1.0}));
    const auto approx = hidden_tent();
    const Box box = Box::cube(1, 0.0, 1.0);
    const ApproxReport r = gronwall_check(target, approx, box, 3, cfg);
    CHECK(r.delta <= 1e-12);
    CHECK(r.endpoint_sup_error > 0.01);
    CHECK_FALSE(r.bound_satisfied);
    try {
        gronwall_verify(target, approx, box, 3, cfg);
        FAIL("expected BoundViolated");
    } catch (const BoundViolated& e) {
        CHECK(e.report.endpoint_sup_error == r.endpoint_sup_error);
        CHECK(e.report.delta == r.delta);
    }
    // A finer grid sees the tent and the bound holds again.
    CHECK(gronwall_check(target, approx, box, 41, cfg).bound_satisfied);
}

TEST_CASE("Groenwall bound holds for perturbed analytic pairs", "[approx][property]")
{
    std::mt19937_64 rng(61);
    const SolverConfig cfg;
    const Box box = Box::cube(2, -1.0, 1.0);
    for (int i = 0; i < 6; ++i) {
        const Matrix a = oracle::random_matrix(2, 2, rng, 0.5);
        const Matrix e = oracle::random_matrix(2, 2, rng, 0.01);
        const ApproxReport r = gronwall_check(VectorFieldSpec::linear(a), VectorFieldSpec::linear(a + e), box, 7, cfg);
        CHECK(r.bound_satisfied);
        const double amp = 1.0 + 0.1 * i;
        const ApproxReport s =
            gronwall_check(VectorFieldSpec::radial_rotation(VectorFieldSpec::elementary_skew(2), 0.5, 1.5, 1.0),
                           VectorFieldSpec::radial_rotation(VectorFieldSpec::elementary_skew(2), 0.5, 1.5, amp), box, 7,
                           cfg);
        CHECK(s.bound_satisfied);
    }
}

TEST_CASE("measured Lipschitz constant of a linear map", "[approx]")
{
    Matrix a(2, 2);
    a << 2.0, 0.0, 0.0, 0.5;
    const auto f = [&](const Vector& x) { return Vector(a * x); };
    CHECK_THAT(measured_lipschitz(f, Box::cube(2, -1.0, 1.0), 5), WithinAbs(2.0, 1e-12));
}

TEST_CASE("parallel grid evaluation matches the serial result", "[approx]")
{
    const auto f = [](const Vector& x) { return Vector::Constant(1, std::sin(5.0 * x[0] + x[1])); };
    const auto zero = [](const Vector&) { return Vector::Zero(1); };
    const Box box = Box::cube(2, -1.0, 1.0);
    CHECK(sup_distance(f, zero, box, 51, 1) == sup_distance(f, zero, box, 51, 4));
    const auto field = VectorFieldSpec::radial_rotation(VectorFieldSpec::elementary_skew(2));
    CHECK(reach_box(field, box, 9, 5, SolverConfig{}, 1) == reach_box(field, box, 9, 5, SolverConfig{}, 3));
}
