#include "support.hpp"

#include <nodeflow/norm.hpp>

#include <catch_amalgamated.hpp>

#include <numbers>

using namespace nodeflow;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double kPiSquaredOverSix = std::numbers::pi * std::numbers::pi / 6.0;

/// Exact integral of h over [delta, 1]: sum_k (1 - delta^{1/k}) / k^2.
double h_l1_from(double delta, long terms)
{
    double sum = 0.0;
    for (long k = terms; k >= 1; --k) {
        const double kd = static_cast<double>(k);
        sum += -std::expm1(std::log(delta) / kd) / (kd * kd);
    }
    return sum;
}

} // namespace

TEST_CASE("h_eval examples", "[norm]")
{
    const SeriesValue near_one = h_eval(1.0 - 1e-12);
    const double zeta3 = oracle::zeta_partial(3.0, 2'000'000) + 1.0 / (2.0 * 2e6 * 2e6);
    CHECK_THAT(near_one.value, WithinAbs(-zeta3, 1e-9));
    CHECK_THAT(near_one.value, WithinAbs(-1.2020569, 1e-6));

    const SeriesValue first = h_eval(0.25, {1, 10.0, TailCriterion::absolute});
    CHECK(first.terms == 1);
    CHECK(first.value == -1.0);

    const SeriesValue tail = h_eval(0.5, {1000, 1.0, TailCriterion::absolute});
    CHECK(tail.terms == 1000);
    CHECK(tail.tail_bound <= 1e-6 * (1 + 1e-12));
}

TEST_CASE("h_eval raises the truncation to meet the tolerance", "[norm]")
{
    for (const double x : {1e-3, 0.2, 0.9}) {
        const SeriesValue v = h_eval(x, {1, 1e-8, TailCriterion::absolute});
        CHECK(v.tail_bound <= 1e-8);
        const SeriesValue finer = h_eval(x, {v.terms * 4, 1e-8, TailCriterion::absolute});
        CHECK(std::abs(finer.value - v.value) <= v.tail_bound);
    }
}

TEST_CASE("h_eval domain and convergence errors", "[norm]")
{
    CHECK_THROWS_AS(h_eval(0.0), DomainError);
    CHECK_THROWS_AS(h_eval(1.0), DomainError);
    CHECK_THROWS_AS(h_eval(-0.5), DomainError);
    CHECK_THROWS_AS(h_eval(NAN), DomainError);
    CHECK_THROWS_AS(h_eval(1e-20, {1, 1e-10, TailCriterion::absolute}), TailNotConverged);
    CHECK_THROWS_AS(h_eval(0.5, {0, 1e-10, TailCriterion::absolute}), InvalidArgument);
}

TEST_CASE("h is negative and strictly increasing on a 10^4-point grid", "[norm][property]")
{
    const SeriesConfig sc = quadrature_series();
    const double lo = 1e-6, hi = 1.0 - 1e-6;
    double previous = -INFINITY;
    int not_increasing = 0;
    int non_negative = 0;
    for (int i = 0; i < 10000; ++i) {
        const double x = lo + (hi - lo) * i / 9999.0;
        const double v = h_eval(x, sc).value;
        not_increasing += v <= previous ? 1 : 0;
        non_negative += v >= 0.0 ? 1 : 0;
        previous = v;
    }
    CHECK(not_increasing == 0);
    CHECK(non_negative == 0);
}

TEST_CASE("lp_norm examples", "[norm]")
{
    const auto one = [](double) { return 1.0; };
    for (const double p : {1.0, 2.0, 3.7}) {
        CHECK_THAT(lp_norm(one, p, 0.0, 1.0), WithinAbs(1.0, 1e-12));
    }
    CHECK_THAT(lp_norm([](double x) { return x; }, 1.0, 0.0, 1.0), WithinAbs(0.5, 1e-12));
    CHECK_THAT(lp_norm([](double x) { return x; }, 2.0, 0.0, 1.0), WithinAbs(std::sqrt(1.0 / 3.0), 1e-10));
    CHECK_THROWS_AS(lp_norm(one, 0.5, 0.0, 1.0), InvalidArgument);
    CHECK_THROWS_AS(lp_norm(one, 1.0, 1.0, 1.0), InvalidArgument);
}

TEST_CASE("open sampling never evaluates a singular endpoint", "[norm]")
{
    QuadConfig qc;
    qc.open_left = true;
    const auto singular = [](double x) {
        if (x == 0.0) {
            throw std::logic_error("evaluated at 0");
        }
        return 1.0 / std::sqrt(x);
    };
    CHECK_THAT(lp_norm(singular, 1.0, 0.0, 1.0, qc), WithinAbs(2.0, 1e-6));
}

TEST_CASE("term-wise integrals match their closed forms", "[norm][property]")
{
    for (const long k : {1L, 5L, 50L}) {
        const double kd = static_cast<double>(k);
        for (const double delta : {1e-2, 1e-6}) {
            const auto term = [kd](double x) { return std::pow(x, 1.0 / kd - 1.0) / (kd * kd * kd); };
            const double exact = -std::expm1(std::log(delta) / kd) / (kd * kd);
            INFO("k " << k << ", delta " << delta);
            CHECK_THAT(lp_norm(term, 1.0, delta, 1.0), WithinAbs(exact, 1e-7));
        }
    }
}

TEST_CASE("L1 norm of h matches the term-wise sum", "[norm]")
{
    for (const double delta : {1e-2, 1e-4, 1e-6}) {
        const double quad = h_lp_norm(1.0, delta, 1.0);
        INFO("delta " << delta);
        CHECK_THAT(quad, WithinAbs(h_l1_from(delta, 2'000'000), 1e-5));
    }
    // An open left end starts at zero_cutoff; the mass below it is about
    // 1/ln(1/cutoff), so the reference is the sum over [cutoff, 1].
    const double cutoff = QuadConfig{}.zero_cutoff;
    const double full = h_lp_norm(1.0, 0.0, 1.0);
    CHECK_THAT(full, WithinAbs(h_l1_from(cutoff, 2'000'000), 1e-5));
    CHECK(kPiSquaredOverSix - full > 0.0);
    CHECK(kPiSquaredOverSix - full < 2.0 / std::log(1.0 / cutoff));
}

TEST_CASE("L1 norm grows as delta shrinks and stays below pi^2/6", "[norm][property]")
{
    double previous = 0.0;
    for (const double delta : {1e-1, 1e-2, 1e-3, 1e-4, 1e-6}) {
        const double v = h_lp_norm(1.0, delta, 1.0 - delta);
        CHECK(v > previous);
        CHECK(v < kPiSquaredOverSix);
        previous = v;
    }
}

TEST_CASE("divergence probe", "[norm]")
{
    const std::vector<double> deltas{1e-2, 1e-4, 1e-6};
    const auto l1 = divergence_probe(1.0, deltas);
    const auto p15 = divergence_probe(1.5, deltas);
    const auto p2 = divergence_probe(2.0, deltas);
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        CHECK(l1[i] < kPiSquaredOverSix);
        CHECK(p2[i] > p15[i]);
        if (i > 0) {
            CHECK(l1[i] > l1[i - 1]);
            CHECK(p15[i] > p15[i - 1]);
            CHECK(p2[i] > p2[i - 1]);
        }
    }
    // L^1 increments shrink while L^2 increments do not.
    CHECK(l1[2] - l1[1] < l1[1] - l1[0]);
    CHECK(p2[2] - p2[1] > p2[1] - p2[0]);
    CHECK_THROWS_AS(divergence_probe(1.5, {0.6}), DomainError);
}

TEST_CASE("halving ladder", "[norm]")
{
    const auto ladder = halving_ladder(1e-2, 1e-6);
    REQUIRE(ladder.size() == 15);
    CHECK(ladder.front() == 1e-2);
    CHECK(ladder.back() <= 1e-6);
    CHECK(ladder[ladder.size() - 2] > 1e-6);
}

TEST_CASE("g_n gap examples", "[norm]")
{
    const double eps = 0.01;
    const long n = static_cast<long>(std::ceil(kPiSquaredOverSix / eps)) + 1;
    CHECK(gn_gap(n, 1.0, 0.0, 1.0) < eps);
    CHECK_THAT(gn_gap(1, 1.0, 0.25, 0.75), WithinRel(h_lp_norm(1.0, 0.25, 0.75), 1e-15));
    CHECK_THAT(gn_gap(4, 2.0, 0.1, 0.6), WithinRel(h_lp_norm(2.0, 0.1, 0.6) / 4.0, 1e-15));
    CHECK(gn_gap(20, 1.25, 1e-6, 1.0 - 1e-6) > gn_gap(20, 1.25, 1e-2, 1.0 - 1e-2));
    CHECK_THROWS_AS(gn_gap(0, 1.0, 0.0, 1.0), InvalidArgument);
}

TEST_CASE("a witness separates L1 and Lp closeness", "[norm]")
{
    const GapWitness w = search_gap_witness(0.1, 1.25);
    REQUIRE(w.found);
    CHECK(w.l1_gap < 0.1);
    CHECK(w.lp_gap >= 1.0);
    CHECK_THAT(gn_gap(w.n, 1.25, w.delta, 1.0 - w.delta), WithinRel(w.lp_gap, 1e-15));
}
