#pragma once

#include <nodeflow/approx.hpp>
#include <nodeflow/inn.hpp>
#include <nodeflow/train.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace nodeflow {

struct StageReport {
    long index = 0;
    std::string kind;
    /// eps_j = eps / (|W| k prod_{i>j} (L_i + 1))
    double budget = 0.0;
    /// Lipschitz estimate of the true stage endpoint on its compact, from
    /// grid difference quotients. Used for the budgets.
    double lipschitz = 0.0;
    /// max(lipschitz, difference quotients over the pairs the error chain
    /// actually transports). Used for the telescoping check.
    double transport_lipschitz = 0.0;
    Box compact;
    Box fit_box;
    double field_delta = 0.0;
    double fit_loss = 0.0;
    /// Measured sup of |g_j - approx_j| over the compact grid and over the
    /// points the approximate composition actually visits.
    double stage_error = 0.0;
    bool budget_met = false;
    ApproxReport gronwall;
};

struct CompositionReport {
    double eps = 0.0;
    double op_norm_w = 0.0;
    long resolution = 0;
    std::vector<StageReport> stages;
    double final_error = 0.0;
    /// |W| sum_j stage_error_j prod_{i>j} transport_lipschitz_i
    double telescoped_bound = 0.0;
    bool chain_holds = false;
    bool within_eps = false;
    bool budgets_met = false;
};

class BudgetMissed : public Error {
public:
    explicit BudgetMissed(CompositionReport r) : Error(describe(r)), report(std::move(r)) {}
    CompositionReport report;

private:
    static std::string describe(const CompositionReport& r)
    {
        std::string msg = "stage budgets missed (stage error / budget):";
        for (const auto& s : r.stages) {
            msg += " [" + std::to_string(s.index) + "] " + std::to_string(s.stage_error) + "/" +
                   std::to_string(s.budget);
        }
        return msg;
    }
};

struct CompositionResult {
    InnModel model;
    CompositionReport report;
};

/// Endpoint of a known stage field: closed form when available.
inline Vector stage_endpoint(const VectorFieldSpec& field, const Vector& x, const SolverConfig& cfg)
{
    if (has_closed_form(field)) {
        return closed_form_flow(field, x, 1.0);
    }
    return integrate(field, x, 1.0, cfg);
}

/// Builds W o psi_k o ... o psi_1 approximating W o g_k o ... o g_1 on K,
/// where g_j is the time-1 endpoint of stages[j].
///
/// Stage j is fitted on inflate(reach_box(F_j, K_j), eps_j): if the field
/// error stays below eps_j / (2 e^{L}) the approximate trajectories cannot
/// leave that set. K_1 = K and K_{j+1} is the image box of the true prefix
/// inflated by the accumulated error allowance B_j = sum_{i<=j} eps_i
/// prod_{i<l<=j} L_l. Stage j trains with seed tc.seed + j.
///
/// Throws BudgetMissed (with the full report) when some stage error reaches
/// its budget.
inline CompositionResult approximate_composition(const std::vector<VectorFieldSpec>& stages, const AffineMap& w,
                                                 const Box& box, double eps, const TrainConfig& tc,
                                                 const SolverConfig& cfg = {}, int threads = 1)
{
    if (stages.empty()) {
        throw InvalidArgument("approximate_composition: need at least one stage");
    }
    if (!(eps > 0.0)) {
        throw InvalidArgument("approximate_composition: eps must be positive");
    }
    tc.validate();
    const long d = box.dim();
    check_dim(w.dim(), d);
    for (const auto& f : stages) {
        check_dim(d, f.dim());
    }
    const std::size_t k = stages.size();
    const long res = tc.resolution;

    CompositionReport report;
    report.eps = eps;
    report.op_norm_w = op_norm(w);
    report.resolution = res;
    report.stages.resize(k);

    // True prefixes: compacts and Lipschitz estimates.
    std::vector<Box> compacts{box};
    for (std::size_t j = 0; j < k; ++j) {
        auto g = [&](const Vector& x) { return stage_endpoint(stages[j], x, cfg); };
        report.stages[j].index = static_cast<long>(j);
        report.stages[j].kind = std::string(stages[j].kind());
        report.stages[j].lipschitz = measured_lipschitz(g, compacts[j], res, threads);
        if (j + 1 < k) {
            compacts.push_back(image_box(g, compacts[j], res, threads));
        }
    }
    for (std::size_t j = 0; j < k; ++j) {
        double prod = 1.0;
        for (std::size_t i = j + 1; i < k; ++i) {
            prod *= report.stages[i].lipschitz + 1.0;
        }
        report.stages[j].budget = eps / (report.op_norm_w * static_cast<double>(k) * prod);
    }
    double allowance = 0.0;
    for (std::size_t j = 1; j < k; ++j) {
        allowance = allowance * report.stages[j - 1].lipschitz + report.stages[j - 1].budget;
        compacts[j] = inflate(compacts[j], allowance);
    }

    // Fit stage by stage while tracking true and approximate images of the grid.
    const BoxGrid grid(box, res);
    std::vector<Vector> exact(static_cast<std::size_t>(grid.size()));
    std::vector<Vector> approx(static_cast<std::size_t>(grid.size()));
    for (long i = 0; i < grid.size(); ++i) {
        exact[static_cast<std::size_t>(i)] = approx[static_cast<std::size_t>(i)] = grid.point(i);
    }
    std::vector<FlowEndpoint> endpoints;
    for (std::size_t j = 0; j < k; ++j) {
        auto& st = report.stages[j];
        st.compact = compacts[j];
        const Box reach = reach_box(stages[j], compacts[j], res, kReachTimeSamples, cfg, threads);
        st.fit_box = inflate(reach, st.budget);
        TrainConfig stage_tc = tc;
        stage_tc.seed = tc.seed + j;
        FitResult fit = fit_field(stages[j], st.fit_box, stage_tc, threads);
        st.field_delta = fit.delta;
        st.fit_loss = fit.final_loss;
        const FlowEndpoint ep{fit.field, cfg, 1.0};
        auto g = [&](const Vector& x) { return stage_endpoint(stages[j], x, cfg); };
        auto g_hat = [&](const Vector& x) { return endpoint(ep, x); };

        double err = sup_distance(g, g_hat, compacts[j], res, threads);
        std::vector<Vector> next_exact(exact.size()), next_approx(approx.size()), g_of_approx(approx.size());
        parallel_for(static_cast<long>(exact.size()), threads, [&](long i) {
            const auto u = static_cast<std::size_t>(i);
            next_exact[u] = g(exact[u]);
            g_of_approx[u] = g(approx[u]);
            next_approx[u] = g_hat(approx[u]);
        });
        double transport = st.lipschitz;
        for (std::size_t i = 0; i < exact.size(); ++i) {
            err = std::max(err, (g_of_approx[i] - next_approx[i]).norm());
            const double gap = (exact[i] - approx[i]).norm();
            if (gap > 0.0) {
                transport = std::max(transport, (next_exact[i] - g_of_approx[i]).norm() / gap);
            }
        }
        st.stage_error = err;
        st.transport_lipschitz = transport;
        st.budget_met = err < st.budget;
        st.gronwall = gronwall_check(stages[j], fit.field, compacts[j], res, cfg, threads);
        st.gronwall.label = "stage " + std::to_string(j);
        exact = std::move(next_exact);
        approx = std::move(next_approx);
        endpoints.push_back(ep);
    }

    double final_error = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i) {
        final_error = std::max(final_error, (w.apply(exact[i]) - w.apply(approx[i])).norm());
    }
    double chain = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        double prod = 1.0;
        for (std::size_t i = j + 1; i < k; ++i) {
            prod *= report.stages[i].transport_lipschitz;
        }
        chain += report.stages[j].stage_error * prod;
    }
    report.final_error = final_error;
    report.telescoped_bound = report.op_norm_w * chain;
    report.chain_holds = final_error <= report.telescoped_bound * (1.0 + 1e-9) + 1e-12;
    report.within_eps = final_error < eps;
    report.budgets_met = std::all_of(report.stages.begin(), report.stages.end(),
                                     [](const StageReport& s) { return s.budget_met; });
    if (!report.budgets_met) {
        throw BudgetMissed(std::move(report));
    }
    return {InnModel(std::move(endpoints), w), std::move(report)};
}

/// Training settings of the two-stage demo below: 24x24x24 tanh network,
/// 2000 Adam epochs on 1024 samples, then 6000 full-batch L-BFGS iterations,
/// seed 7. Fit quality varies noticeably with the seed.
inline TrainConfig demo_train_config()
{
    TrainConfig tc;
    tc.sample_count = 1024;
    tc.epoch_count = 2000;
    tc.batch_size = 32;
    tc.learning_rate = 1e-2;
    tc.seed = 7;
    tc.hidden = {24, 24, 24};
    tc.activation = Activation::tanh;
    tc.resolution = 21;
    tc.refine_iterations = 6000;
    return tc;
}

/// Two-stage target in d = 2: a radial rotation (amplitude 0.25 on the
/// annulus 1 <= |x| <= 2) followed by the shift by (0.3, -0.2).
inline std::vector<VectorFieldSpec> demo_stages()
{
    Vector shift(2);
    shift << 0.3, -0.2;
    return {VectorFieldSpec::radial_rotation(VectorFieldSpec::elementary_skew(2), 1.0, 2.0, 0.25),
            VectorFieldSpec::constant(shift)};
}

/// W = R(pi/6) diag(2, 1) with bias (0.1, 0.1); op_norm(W) = 2.
inline AffineMap demo_affine()
{
    const double c = std::cos(std::numbers::pi / 6.0);
    const double s = std::sin(std::numbers::pi / 6.0);
    Matrix rot(2, 2);
    rot << c, -s, s, c;
    Matrix scale = Matrix::Zero(2, 2);
    scale(0, 0) = 2.0;
    scale(1, 1) = 1.0;
    Vector b(2);
    b << 0.1, 0.1;
    return {rot * scale, b};
}

inline Box demo_box() { return Box::cube(2, -1.5, 1.5); }

} // namespace nodeflow
