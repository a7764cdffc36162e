#pragma once

#include <nodeflow/core.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace nodeflow {

/// How SeriesConfig::tail_tolerance is compared with the truncation bound.
enum class TailCriterion {
    /// tail_bound <= tail_tolerance
    absolute,
    /// tail_bound <= tail_tolerance / x, i.e. relative to the 1/x envelope of
    /// |h|; the truncation length no longer depends on x.
    inverse_x,
};

struct SeriesConfig {
    long truncation = 1;
    double tail_tolerance = 1e-10;
    TailCriterion criterion = TailCriterion::absolute;
};

inline constexpr long kMaxSeriesTerms = 10'000'000;

struct SeriesValue {
    double value = 0.0;
    double tail_bound = 0.0;
    long terms = 0;
};

/// h(x) = -sum_{k>=1} x^{1/k - 1} / k^3 on (0, 1), truncated.
///
/// Every term is bounded by 1/(x k^3), so the omitted tail is at most
/// (1/x) sum_{k>K} 1/k^3 <= 1/(2 x K^2). K starts at sc.truncation and is
/// raised to the smallest length meeting the tolerance.
inline SeriesValue h_eval(double x, const SeriesConfig& sc = {})
{
    if (!(x > 0.0 && x < 1.0)) {
        throw DomainError("h_eval: x = " + std::to_string(x) + " is outside (0, 1)");
    }
    if (sc.truncation < 1 || !(sc.tail_tolerance > 0.0)) {
        throw InvalidArgument("h_eval: need truncation >= 1 and tail_tolerance > 0");
    }
    // tail(K) = c / K^2 with c = 1/(2x); solve c / K^2 <= tolerance.
    const double limit = sc.criterion == TailCriterion::absolute ? sc.tail_tolerance : sc.tail_tolerance / x;
    const double needed = std::ceil(std::sqrt(1.0 / (2.0 * x * limit)));
    if (needed > static_cast<double>(kMaxSeriesTerms)) {
        throw TailNotConverged("h_eval: more than 1e7 terms needed at x = " + std::to_string(x));
    }
    const long terms = std::max(sc.truncation, static_cast<long>(needed));
    const double log_x = std::log(x);
    double sum = 0.0;
    for (long k = terms; k >= 1; --k) {
        const double kd = static_cast<double>(k);
        sum += std::exp((1.0 / kd - 1.0) * log_x) / (kd * kd * kd);
    }
    const double kd = static_cast<double>(terms);
    return {-sum, 1.0 / (2.0 * x * kd * kd), terms};
}

struct QuadConfig {
    /// Per-panel acceptance: |S2 - S1| <= 15 max(abs_tol, rel_tol |S2|).
    double abs_tol = 1e-8;
    double rel_tol = 1e-10;
    int max_depth = 48;
    /// Replacement for a left endpoint at 0 under open sampling.
    double zero_cutoff = 1e-300;
    bool open_left = false;
    bool open_right = false;
};

namespace detail {

struct SimpsonPanel {
    double a, m, b;
    double fa, fm, fb;
    double whole;
};

template <class F>
double adaptive_simpson(const F& f, const SimpsonPanel& p, double tol, int depth, const QuadConfig& qc)
{
    const double lm = 0.5 * (p.a + p.m);
    const double rm = 0.5 * (p.m + p.b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (p.m - p.a) / 6.0 * (p.fa + 4.0 * flm + p.fm);
    const double right = (p.b - p.m) / 6.0 * (p.fm + 4.0 * frm + p.fb);
    const double refined = left + right;
    if (!std::isfinite(refined)) {
        throw QuadratureNotConverged("lp_norm: non-finite integrand near x = " + std::to_string(p.m));
    }
    const double diff = refined - p.whole;
    if (std::abs(diff) <= 15.0 * std::max(tol, qc.rel_tol * std::abs(refined))) {
        return refined + diff / 15.0;
    }
    if (depth >= qc.max_depth) {
        throw QuadratureNotConverged("lp_norm: recursion depth exceeded near x = " + std::to_string(p.m));
    }
    return adaptive_simpson(f, {p.a, lm, p.m, p.fa, flm, p.fm, left}, 0.5 * tol, depth + 1, qc) +
           adaptive_simpson(f, {p.m, rm, p.b, p.fm, frm, p.fb, right}, 0.5 * tol, depth + 1, qc);
}

} // namespace detail

/// (integral over [a, b] of |map|^p)^(1/p).
///
/// The interval is cut into geometric panels [l, 2l], [2l, 4l], ... from the
/// left end, which resolves integrands singular at 0; each panel runs
/// adaptive Simpson. Open ends are moved inward by a relative 1e-15 (or to
/// zero_cutoff for a left end at 0) and never evaluated.
inline double lp_norm(const std::function<double(double)>& map, double p, double a, double b, const QuadConfig& qc = {})
{
    if (!(p >= 1.0) || !std::isfinite(p)) {
        throw InvalidArgument("lp_norm: p must be finite and >= 1");
    }
    if (!(a < b)) {
        throw InvalidArgument("lp_norm: need a < b");
    }
    double lo = a;
    double hi = b;
    if (qc.open_left) {
        lo = a == 0.0 ? qc.zero_cutoff : a + std::abs(a) * 1e-15;
    }
    if (qc.open_right) {
        hi = b - std::max(std::abs(b) * 1e-15, qc.zero_cutoff);
    }
    const auto integrand = [&](double x) { return std::pow(std::abs(map(x)), p); };

    std::vector<double> cuts{lo};
    if (lo > 0.0) {
        for (double c = 2.0 * lo; c < hi; c *= 2.0) {
            cuts.push_back(c);
        }
    }
    cuts.push_back(hi);

    double total = 0.0;
    double f_left = integrand(cuts.front());
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double pa = cuts[i];
        const double pb = cuts[i + 1];
        const double pm = 0.5 * (pa + pb);
        const double fm = integrand(pm);
        const double fb = integrand(pb);
        const double whole = (pb - pa) / 6.0 * (f_left + 4.0 * fm + fb);
        total += detail::adaptive_simpson(integrand, {pa, pm, pb, f_left, fm, fb, whole}, qc.abs_tol, 0, qc);
        f_left = fb;
    }
    if (!std::isfinite(total)) {
        throw QuadratureNotConverged("lp_norm: integral is not finite");
    }
    return std::pow(total, 1.0 / p);
}

/// Series settings used for quadrature of h: relative accuracy 1e-9 against
/// the 1/x envelope (about 2.2e4 terms per evaluation).
inline SeriesConfig quadrature_series() { return {1, 1e-9, TailCriterion::inverse_x}; }

/// ||h||_{p,[a,b]} for 0 <= a < b <= 1; ends at 0 or 1 are sampled openly.
inline double h_lp_norm(double p, double a, double b, QuadConfig qc = {},
                        const SeriesConfig& sc = quadrature_series())
{
    if (!(a >= 0.0 && a < b && b <= 1.0)) {
        throw DomainError("h_lp_norm: need 0 <= a < b <= 1");
    }
    qc.open_left = qc.open_left || a == 0.0;
    qc.open_right = qc.open_right || b == 1.0;
    return lp_norm([&sc](double x) { return h_eval(x, sc).value; }, p, a, b, qc);
}

/// ||h||_{p,[delta, 1/2]} for each delta.
inline std::vector<double> divergence_probe(double p, const std::vector<double>& deltas, const QuadConfig& qc = {},
                                            const SeriesConfig& sc = quadrature_series())
{
    std::vector<double> out;
    out.reserve(deltas.size());
    for (const double d : deltas) {
        if (!(d > 0.0 && d < 0.5)) {
            throw DomainError("divergence_probe: every delta must lie in (0, 0.5)");
        }
        out.push_back(h_lp_norm(p, d, 0.5, qc, sc));
    }
    return out;
}

/// ||g_n - Id||_{p,[a,b]} with g_n = Id + h/n, i.e. ||h||_{p,[a,b]} / n.
inline double gn_gap(long n, double p, double a, double b, const QuadConfig& qc = {},
                     const SeriesConfig& sc = quadrature_series())
{
    if (n < 1) {
        throw InvalidArgument("gn_gap: n must be positive");
    }
    return h_lp_norm(p, a, b, qc, sc) / static_cast<double>(n);
}

/// delta, delta/2, delta/4, ... down to (and including the first value not
/// above) `last`.
inline std::vector<double> halving_ladder(double first, double last)
{
    std::vector<double> out;
    for (double d = first; ; d *= 0.5) {
        out.push_back(d);
        if (d <= last * (1.0 + 1e-12)) {
            break;
        }
    }
    return out;
}

/// A pair (N, delta) separating the L^1 and L^p behaviour of g_N.
struct GapWitness {
    long n = 0;
    double delta = 0.0;
    double l1_gap = 0.0;
    double lp_gap = 0.0;
    bool found = false;
};

/// Smallest N with ||g_N - Id||_{1,[0,1]} < l1_eps, then the largest delta
/// among 10^-2, 10^-3, ..., 10^-max_exponent with
/// ||g_N - Id||_{p,[delta,1-delta]} >= 1.
inline GapWitness search_gap_witness(double l1_eps, double p, int max_exponent = 40, const QuadConfig& qc = {},
                                     const SeriesConfig& sc = quadrature_series())
{
    GapWitness w;
    const double l1 = h_lp_norm(1.0, 0.0, 1.0, qc, sc);
    w.n = static_cast<long>(std::floor(l1 / l1_eps)) + 1;
    w.l1_gap = l1 / static_cast<double>(w.n);
    for (int e = 2; e <= max_exponent; ++e) {
        const double delta = std::pow(10.0, -e);
        w.delta = delta;
        w.lp_gap = gn_gap(w.n, p, delta, 1.0 - delta, qc, sc);
        if (w.lp_gap >= 1.0) {
            w.found = true;
            break;
        }
    }
    return w;
}

} // namespace nodeflow
