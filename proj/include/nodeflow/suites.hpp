#pragma once

#include <nodeflow/approx.hpp>
#include <nodeflow/compose.hpp>
#include <nodeflow/flow.hpp>
#include <nodeflow/norm.hpp>
#include <nodeflow/report.hpp>
#include <nodeflow/serialize.hpp>
#include <nodeflow/train.hpp>

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace nodeflow {

enum class SuiteKind { flow_axioms, gronwall, fit, compose, rescale, normcmp };

inline constexpr std::array<std::string_view, 6> kSuiteNames = {"flow_axioms", "gronwall", "fit",
                                                                "compose",     "rescale",  "normcmp"};

inline std::string_view suite_name(SuiteKind k) { return kSuiteNames[static_cast<std::size_t>(k)]; }

/// Invalid experiment configuration; field() is the offending JSON path.
class ConfigInvalid : public Error {
public:
    ConfigInvalid(const std::string& field, const std::string& what)
        : Error("invalid config field '" + field + "': " + what), field_(field)
    {
    }
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

struct ExperimentConfig {
    SuiteKind kind = SuiteKind::flow_axioms;
    long dimension = 1;
    Box box;
    SolverConfig solver;
    TrainConfig train;
    std::uint64_t seed = 7;
    std::string output_prefix;
    /// Kind-specific settings, validated by the suite.
    Json params = Json::object();
    /// The document as given, echoed into the report.
    Json source;
};

namespace detail {

inline const Json* optional_key(const Json& j, const char* key)
{
    const auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

/// Rethrows FormatError as ConfigInvalid with the path prefixed.
template <class Fn>
auto as_config(const std::string& prefix, Fn&& fn) -> decltype(fn())
{
    try {
        return fn();
    } catch (const FormatError& e) {
        const std::string path = e.path() == "<root>" ? prefix : prefix + "." + e.path();
        std::string what = e.what();
        what = what.substr(std::min(what.size(), e.path().size() + 2));
        throw ConfigInvalid(path, what);
    }
}

inline const std::array<std::string_view, 8> kConfigKeys = {"kind",  "dimension", "box",  "solver",
                                                           "train", "seed",      "output_prefix", "params"};

} // namespace detail

/// Parses and validates an experiment document. `kind` and `dimension` are
/// required everywhere; `params.target` is required for fit, and
/// `params.stages` / `params.affine` for compose outside d = 2.
inline ExperimentConfig parse_config(const Json& j)
{
    if (!j.is_object()) {
        throw ConfigInvalid("<root>", "expected a JSON object");
    }
    for (const auto& item : j.items()) {
        if (std::find(detail::kConfigKeys.begin(), detail::kConfigKeys.end(), item.key()) == detail::kConfigKeys.end()) {
            throw ConfigInvalid(item.key(), "unknown field");
        }
    }
    ExperimentConfig c;
    c.source = j;

    const Json* kind = detail::optional_key(j, "kind");
    if (!kind) {
        throw ConfigInvalid("kind", "required field missing");
    }
    if (!kind->is_string()) {
        throw ConfigInvalid("kind", "expected a string");
    }
    const auto name = kind->get<std::string>();
    const auto found = std::find(kSuiteNames.begin(), kSuiteNames.end(), name);
    if (found == kSuiteNames.end()) {
        throw ConfigInvalid("kind", "unknown suite '" + name + "'");
    }
    c.kind = static_cast<SuiteKind>(found - kSuiteNames.begin());

    const Json* dim = detail::optional_key(j, "dimension");
    if (!dim) {
        throw ConfigInvalid("dimension", "required field missing");
    }
    if (!dim->is_number_integer() || dim->get<long>() < 1 || dim->get<long>() > 6) {
        throw ConfigInvalid("dimension", "expected an integer in [1, 6]");
    }
    c.dimension = dim->get<long>();

    if (const Json* seed = detail::optional_key(j, "seed")) {
        if (!seed->is_number_unsigned()) {
            throw ConfigInvalid("seed", "expected a non-negative integer");
        }
        c.seed = seed->get<std::uint64_t>();
    }

    c.box = Box::cube(c.dimension, -1.5, 1.5);
    if (const Json* box = detail::optional_key(j, "box")) {
        c.box = detail::as_config("box", [&] { return box_from_json(*box); });
        if (c.box.dim() != c.dimension) {
            throw ConfigInvalid("box", "dimension " + std::to_string(c.box.dim()) + " differs from 'dimension'");
        }
    }
    if (const Json* solver = detail::optional_key(j, "solver")) {
        c.solver = detail::as_config("solver", [&] { return solver_from_json(*solver); });
    }

    TrainConfig base = c.kind == SuiteKind::compose ? demo_train_config() : TrainConfig{};
    base.seed = c.seed;
    c.train = base;
    if (const Json* train = detail::optional_key(j, "train")) {
        c.train = detail::as_config("train", [&] { return train_from_json(*train, "", base); });
    }

    c.output_prefix = name;
    if (const Json* prefix = detail::optional_key(j, "output_prefix")) {
        if (!prefix->is_string() || prefix->get<std::string>().empty()) {
            throw ConfigInvalid("output_prefix", "expected a non-empty string");
        }
        c.output_prefix = prefix->get<std::string>();
    }

    if (const Json* params = detail::optional_key(j, "params")) {
        if (!params->is_object()) {
            throw ConfigInvalid("params", "expected an object");
        }
        c.params = *params;
    }
    if (c.kind == SuiteKind::fit && !c.params.contains("target")) {
        throw ConfigInvalid("params.target", "required field missing");
    }
    if (c.kind == SuiteKind::compose && c.dimension != 2) {
        if (!c.params.contains("stages")) {
            throw ConfigInvalid("params.stages", "required outside dimension 2");
        }
        if (!c.params.contains("affine")) {
            throw ConfigInvalid("params.affine", "required outside dimension 2");
        }
    }
    return c;
}

inline ExperimentConfig parse_config_text(const std::string& text)
{
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigInvalid("<root>", std::string("invalid JSON: ") + e.what());
    }
    return parse_config(j);
}

struct SuiteResult {
    std::string csv;
    Json results = Json::object();
    std::optional<std::string> svg;
    /// Cases that raised a module error, with their inputs.
    Json failures = Json::array();
    bool passed = false;
};

namespace detail {

struct ParamReader {
    const Json& params;

    double number(const char* key, double fallback) const
    {
        const Json* v = optional_key(params, key);
        if (!v) {
            return fallback;
        }
        if (!v->is_number()) {
            throw ConfigInvalid(std::string("params.") + key, "expected a number");
        }
        return v->get<double>();
    }

    long integer(const char* key, long fallback, long min_value) const
    {
        const Json* v = optional_key(params, key);
        if (!v) {
            return fallback;
        }
        if (!v->is_number_integer() || v->get<long>() < min_value) {
            throw ConfigInvalid(std::string("params.") + key,
                                "expected an integer >= " + std::to_string(min_value));
        }
        return v->get<long>();
    }

    std::vector<double> numbers(const char* key, std::vector<double> fallback) const
    {
        const Json* v = optional_key(params, key);
        if (!v) {
            return fallback;
        }
        if (!v->is_array() || v->empty()) {
            throw ConfigInvalid(std::string("params.") + key, "expected a non-empty array of numbers");
        }
        std::vector<double> out;
        for (const auto& e : *v) {
            if (!e.is_number()) {
                throw ConfigInvalid(std::string("params.") + key, "expected a non-empty array of numbers");
            }
            out.push_back(e.get<double>());
        }
        return out;
    }
};

inline Vector uniform_in(const Box& box, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vector x(box.dim());
    for (long i = 0; i < box.dim(); ++i) {
        x[i] = box.lower[i] + (box.upper[i] - box.lower[i]) * u(rng);
    }
    return x;
}

inline Vector unit_diagonal(long d) { return Vector::Ones(d) / std::sqrt(static_cast<double>(d)); }

/// Fixed non-normal matrix with entries in [-0.3, 0.3]: skew part plus a
/// small diagonal.
inline Matrix zoo_matrix(long d)
{
    Matrix a(d, d);
    for (long i = 0; i < d; ++i) {
        for (long j = 0; j < d; ++j) {
            a(i, j) = i == j ? -0.1 + 0.05 * static_cast<double>(i) : 0.3 * static_cast<double>(j - i) / static_cast<double>(d);
        }
    }
    return a;
}

inline Vector zoo_shift(long d)
{
    Vector c(d);
    for (long i = 0; i < d; ++i) {
        c[i] = d == 1 ? 0.5 : 0.5 - 0.8 * static_cast<double>(i) / static_cast<double>(d - 1);
    }
    return c;
}

} // namespace detail

struct NamedField {
    std::string name;
    VectorFieldSpec field;
};

/// The analytic fields available in dimension d: zero, constant, linear,
/// then bump1d (d = 1) or radial_rotation (d >= 2, amplitude `radial_amp`).
inline std::vector<NamedField> analytic_zoo(long d, double radial_amp = 1.0)
{
    std::vector<NamedField> zoo{{"zero", VectorFieldSpec::zero(d)},
                                {"constant", VectorFieldSpec::constant(detail::zoo_shift(d))},
                                {"linear", VectorFieldSpec::linear(detail::zoo_matrix(d))}};
    if (d == 1) {
        zoo.push_back({"bump1d", VectorFieldSpec::bump1d(1.0, 1.0, 0.8 * radial_amp)});
    } else {
        zoo.push_back({"radial_rotation",
                       VectorFieldSpec::radial_rotation(VectorFieldSpec::elementary_skew(d), 1.0, 2.0, radial_amp)});
    }
    return zoo;
}

/// Points strictly outside the support of a Bump1D or RadialRotation field:
/// half in the inner hole, half beyond the outer radius (out to +3).
inline std::vector<Vector> points_outside_support(const VectorFieldSpec& field, long count, std::mt19937_64& rng)
{
    double inner = 0.0, outer = 0.0;
    if (const auto* b = std::get_if<VectorFieldSpec::Bump1D>(&field.variant())) {
        inner = b->center - 0.5 * b->width;
        outer = b->center + 0.5 * b->width;
    } else if (const auto* r = std::get_if<VectorFieldSpec::RadialRotation>(&field.variant())) {
        inner = r->r_inner;
        outer = r->r_outer;
    } else {
        throw InvalidArgument("points_outside_support: field has no annular support");
    }
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<Vector> pts;
    for (long i = 0; i < count; ++i) {
        double radius = 0.0;
        if (i % 2 == 0 && inner > 0.0) {
            radius = inner * u(rng) * (1.0 - 1e-9);
        } else {
            radius = outer * (1.0 + 1e-9) + 3.0 * u(rng);
        }
        Vector dir(field.dim());
        do {
            for (long k = 0; k < dir.size(); ++k) {
                dir[k] = n(rng);
            }
        } while (dir.norm() < 1e-3);
        pts.push_back(radius * dir / dir.norm());
    }
    return pts;
}

namespace detail {

inline Json failure(const std::string& case_name, Json inputs, const std::exception& e)
{
    return {{"case", case_name}, {"inputs", std::move(inputs)}, {"error", e.what()}};
}

inline void set_result(SuiteResult& r, const CsvTable& table, bool passed)
{
    r.csv = table.str();
    r.passed = passed && r.failures.empty();
}

} // namespace detail

inline constexpr double kAxiomTolerance = 1e-6;
inline constexpr double kClosedFormTolerance = 1e-7;
inline constexpr double kNormTolerance = 1e-9;

/// Group law, inverse round trip, closed-form agreement, norm preservation
/// and exact support checks over the analytic zoo.
inline SuiteResult run_flow_axioms(const ExperimentConfig& c, int threads)
{
    const detail::ParamReader pr{c.params};
    const long cases = pr.integer("cases", 100, 1);
    const long grid = pr.integer("closed_form_grid", 10, 2);
    const double t_max = pr.number("time_range", 1.0);
    const double closed_t = pr.number("closed_form_time", 2.0);

    SuiteResult res;
    CsvTable table({"check", "field", "dimension", "cases", "max_error", "tolerance", "pass", "seed"});
    Json checks = Json::array();
    bool all = true;
    const auto seed = static_cast<long>(c.seed);
    const auto record = [&](const std::string& check, const std::string& field, long n, double err, double tol) {
        const bool ok = err <= tol;
        all = all && ok;
        table.add_row({check, field, c.dimension, n, err, tol, ok, seed});
        checks.push_back({{"check", check}, {"field", field}, {"cases", n}, {"max_error", err}, {"tolerance", tol},
                          {"pass", ok}});
    };

    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> time_dist(-t_max, t_max);
    for (const auto& [name, field] : analytic_zoo(c.dimension)) {
        std::vector<Vector> xs;
        std::vector<double> ss, ts;
        // s, t and s + t all lie in [-t_max, t_max].
        while (static_cast<long>(xs.size()) < cases) {
            const Vector x = detail::uniform_in(c.box, rng);
            const double s = time_dist(rng);
            const double t = time_dist(rng);
            if (std::abs(s + t) <= t_max) {
                xs.push_back(x);
                ss.push_back(s);
                ts.push_back(t);
            }
        }
        std::vector<double> group(static_cast<std::size_t>(cases)), round(static_cast<std::size_t>(cases));
        try {
            parallel_for(cases, threads, [&](long i) {
                const auto u = static_cast<std::size_t>(i);
                group[u] = group_law_residual(field, xs[u], ss[u], ts[u], c.solver);
                const FlowEndpoint ep{field, c.solver, ts[u]};
                round[u] = (inverse_endpoint(ep, endpoint(ep, xs[u])) - xs[u]).norm();
            });
        } catch (const Error& e) {
            res.failures.push_back(detail::failure("axioms/" + name, {{"field", to_json(field)}}, e));
            continue;
        }
        record("group_law", name, cases, *std::max_element(group.begin(), group.end()), kAxiomTolerance);
        record("inverse_roundtrip", name, cases, *std::max_element(round.begin(), round.end()), kAxiomTolerance);

        if (has_closed_form(field)) {
            // Diagonal of the box against a symmetric time grid.
            std::vector<double> cf(static_cast<std::size_t>(grid * grid)), nrm(cf.size(), 0.0);
            const bool radial = field.kind() == "radial_rotation";
            parallel_for(grid * grid, threads, [&](long idx) {
                const long i = idx / grid;
                const long k = idx % grid;
                const double a = static_cast<double>(i) / static_cast<double>(grid - 1);
                const Vector x = c.box.lower + a * (c.box.upper - c.box.lower);
                const double t = -closed_t + 2.0 * closed_t * static_cast<double>(k) / static_cast<double>(grid - 1);
                const Vector exact = closed_form_flow(field, x, t);
                const Vector numeric = integrate(field, x, t, c.solver);
                cf[static_cast<std::size_t>(idx)] = (exact - numeric).norm();
                if (radial) {
                    nrm[static_cast<std::size_t>(idx)] =
                        std::max(std::abs(exact.norm() - x.norm()), std::abs(numeric.norm() - x.norm()));
                }
            });
            record("closed_form", name, grid * grid, *std::max_element(cf.begin(), cf.end()), kClosedFormTolerance);
            if (radial) {
                record("norm_preservation", name, grid * grid, *std::max_element(nrm.begin(), nrm.end()),
                       kNormTolerance);
            }
        }
        if (field.kind() == "bump1d" || field.kind() == "radial_rotation") {
            const auto pts = points_outside_support(field, cases, rng);
            record("support_fixed", name, cases, support_fixed_check(field, pts, c.solver), 0.0);
        }
    }
    res.results = {{"checks", std::move(checks)}};
    detail::set_result(res, table, all);
    return res;
}

/// Endpoint error against 2 delta e^L over analytic perturbations and, with
/// params.trained (default true), MLP fits on K'.
inline SuiteResult run_gronwall(const ExperimentConfig& c, int threads)
{
    const detail::ParamReader pr{c.params};
    const long res_pts = pr.integer("resolution", c.dimension >= 3 ? 11 : 21, 2);
    const auto etas = pr.numbers("perturbations", {1e-1, 3e-2, 1e-2, 3e-3, 1e-3});
    bool trained = true;
    if (const Json* t = detail::optional_key(c.params, "trained")) {
        if (!t->is_boolean()) {
            throw ConfigInvalid("params.trained", "expected a boolean");
        }
        trained = t->get<bool>();
    }

    const long d = c.dimension;
    const Vector shift = detail::zoo_shift(d);
    const Matrix a = detail::zoo_matrix(d);
    Matrix e = Matrix::Zero(d, d);
    for (long i = 0; i < d; ++i) {
        for (long j = 0; j < d; ++j) {
            e(i, j) = std::cos(1.0 + static_cast<double>(3 * i + j));
        }
    }
    e /= spectral_norm(e);
    const auto make_annular = [d](double amp) {
        return d == 1 ? VectorFieldSpec::bump1d(1.0, 1.0, amp)
                      : VectorFieldSpec::radial_rotation(VectorFieldSpec::elementary_skew(d), 1.0, 2.0, amp);
    };
    const std::string annular = d == 1 ? "bump1d" : "radial_rotation";

    struct Pair {
        std::string target_name, approx_name;
        double eta;
        VectorFieldSpec target, approx;
        bool fit = false;
    };
    std::vector<Pair> pairs;
    for (const double eta : etas) {
        pairs.push_back({"constant", "constant+eta", eta, VectorFieldSpec::constant(shift),
                         VectorFieldSpec::constant(shift + eta * detail::unit_diagonal(d))});
        pairs.push_back({"linear", "linear+eta", eta, VectorFieldSpec::linear(a), VectorFieldSpec::linear(a + eta * e)});
        pairs.push_back({annular, annular + "+eta", eta, make_annular(0.5), make_annular(0.5 + eta)});
        pairs.push_back({"zero", "constant(eta)", eta, VectorFieldSpec::zero(d),
                         VectorFieldSpec::constant(eta * detail::unit_diagonal(d))});
    }
    for (const auto& base : {VectorFieldSpec::constant(shift), VectorFieldSpec::linear(a), make_annular(0.5)}) {
        pairs.push_back({std::string(base.kind()), "same", 0.0, base, base});
    }
    if (trained) {
        for (const auto& base : {VectorFieldSpec::zero(d), VectorFieldSpec::constant(shift),
                                 VectorFieldSpec::linear(a), make_annular(0.25)}) {
            pairs.push_back({std::string(base.kind()), "mlp", 0.0, base, base, true});
        }
    }

    SuiteResult res;
    CsvTable table({"case", "target", "approx", "perturbation", "delta", "lip_F", "gronwall_bound",
                    "endpoint_error", "slack", "pass", "seed"});
    Json reports = Json::array();
    Series errors{"measured error", {}, {}};
    Series bounds{"2 delta e^L", {}, {}};
    bool all = true;
    long index = 0;
    for (auto& p : pairs) {
        const std::string case_name = "pair" + std::to_string(index);
        try {
            if (p.fit) {
                const Box reach = reach_box(p.target, c.box, res_pts, kReachTimeSamples, c.solver, threads);
                const Box k_prime = inflate(reach, 2.0 * std::exp(p.target.lipschitz_bound()));
                TrainConfig tc = c.train;
                tc.seed = c.train.seed + static_cast<std::uint64_t>(index);
                p.approx = fit_field(p.target, k_prime, tc, threads).field;
            }
            ApproxReport r = gronwall_check(p.target, p.approx, c.box, res_pts, c.solver, threads);
            r.label = case_name;
            all = all && r.bound_satisfied;
            table.add_row({case_name, p.target_name, p.approx_name, p.eta, r.delta, r.lip_F, r.gronwall_bound,
                           r.endpoint_sup_error, r.slack, r.bound_satisfied, static_cast<long>(c.seed)});
            Json jr = to_json(r);
            jr["target"] = to_json(p.target);
            jr["approx_kind"] = p.approx_name;
            reports.push_back(std::move(jr));
            errors.x.push_back(static_cast<double>(index));
            errors.y.push_back(r.endpoint_sup_error);
            bounds.x.push_back(static_cast<double>(index));
            bounds.y.push_back(r.gronwall_bound + r.slack);
        } catch (const Error& e) {
            res.failures.push_back(detail::failure(case_name, {{"target", to_json(p.target)}, {"eta", p.eta}}, e));
        }
        ++index;
    }
    const long violations = std::count_if(reports.begin(), reports.end(),
                                          [](const Json& r) { return !r["bound_satisfied"].get<bool>(); });
    res.results = {{"pairs", static_cast<long>(pairs.size())}, {"violations", violations}, {"reports", reports}};
    res.svg = render_svg({"Endpoint error vs bound per pair", "pair", "sup error", false, true, {errors, bounds}});
    detail::set_result(res, table, all);
    return res;
}

/// Fits params.target on the box, checks monotone refinement of the
/// measured delta and the endpoint bound for the fitted field.
inline SuiteResult run_fit(const ExperimentConfig& c, int threads)
{
    const detail::ParamReader pr{c.params};
    const long levels = pr.integer("refinement_levels", 3, 1);
    const VectorFieldSpec target =
        detail::as_config("params.target", [&] { return field_from_json(c.params["target"]); });
    if (target.dim() != c.dimension) {
        throw ConfigInvalid("params.target", "field dimension differs from 'dimension'");
    }
    SuiteResult res;
    CsvTable table({"check", "resolution", "value", "bound", "pass", "seed"});
    const auto seed = static_cast<long>(c.seed);

    const FitResult fit = fit_field(target, c.box, c.train, threads);
    Series curve{"delta", {}, {}};
    bool monotone = true;
    long r = c.train.resolution;
    double previous = -1.0;
    for (long level = 0; level < levels; ++level) {
        const double delta = sup_distance(target, fit.field, c.box, r, threads);
        const bool ok = delta >= previous;
        monotone = monotone && ok;
        table.add_row({std::string("delta"), r, delta, previous < 0 ? 0.0 : previous, ok, seed});
        curve.x.push_back(static_cast<double>(r));
        curve.y.push_back(delta);
        previous = delta;
        r = 2 * r - 1;
    }
    ApproxReport g = gronwall_check(target, fit.field, c.box, c.train.resolution, c.solver, threads);
    g.label = "fit";
    table.add_row({std::string("gronwall"), g.grid_resolution, g.endpoint_sup_error, g.gronwall_bound + g.slack,
                   g.bound_satisfied, seed});
    res.results = {{"target", to_json(target)},
                   {"fit_delta", fit.delta},
                   {"fit_delta_resolution", fit.delta_resolution},
                   {"final_loss", fit.final_loss},
                   {"train", to_json(c.train)},
                   {"gronwall", to_json(g)},
                   {"model", to_json(fit.field)}};
    res.svg = render_svg({"Measured delta vs grid resolution", "points per axis", "sup |F - f|", false, false, {curve}});
    detail::set_result(res, table, monotone && g.bound_satisfied);
    return res;
}

/// Stage-wise composition; defaults to the two-stage d = 2 demo.
inline SuiteResult run_compose(const ExperimentConfig& c, int threads)
{
    const detail::ParamReader pr{c.params};
    const double eps = pr.number("eps", 0.1);
    std::vector<VectorFieldSpec> stages;
    if (c.params.contains("stages")) {
        const Json& js = c.params["stages"];
        if (!js.is_array() || js.empty()) {
            throw ConfigInvalid("params.stages", "expected a non-empty array of fields");
        }
        for (std::size_t i = 0; i < js.size(); ++i) {
            const std::string path = "params.stages[" + std::to_string(i) + "]";
            stages.push_back(detail::as_config(path, [&] { return field_from_json(js[i]); }));
            if (stages.back().dim() != c.dimension) {
                throw ConfigInvalid(path, "field dimension differs from 'dimension'");
            }
        }
    } else {
        stages = demo_stages();
    }
    AffineMap w = demo_affine();
    if (c.params.contains("affine")) {
        const Json& ja = c.params["affine"];
        w = detail::as_config("params.affine", [&] {
            Matrix m = matrix_from_json(detail::require(ja, "weight", ""), "weight");
            Vector b = vector_from_json(detail::require(ja, "bias", ""), "bias");
            if (m.rows() != c.dimension || m.cols() != c.dimension || b.size() != c.dimension) {
                throw FormatError("<root>", "shape differs from 'dimension'");
            }
            try {
                return AffineMap(std::move(m), std::move(b));
            } catch (const SingularAffine& e) {
                throw FormatError("weight", e.what());
            }
        });
    }

    SuiteResult res;
    CsvTable table({"check", "stage", "kind", "value", "bound", "pass", "seed"});
    const auto seed = static_cast<long>(c.seed);
    CompositionReport report;
    std::optional<InnModel> model;
    try {
        auto out = approximate_composition(stages, w, c.box, eps, c.train, c.solver, threads);
        report = std::move(out.report);
        model.emplace(std::move(out.model));
    } catch (const BudgetMissed& e) {
        report = e.report;
        res.failures.push_back(detail::failure("budget", {{"eps", eps}, {"train", to_json(c.train)}}, e));
    }
    for (const auto& s : report.stages) {
        table.add_row({std::string("stage_budget"), s.index, s.kind, s.stage_error, s.budget, s.budget_met, seed});
        table.add_row({std::string("stage_gronwall"), s.index, s.kind, s.gronwall.endpoint_sup_error,
                       s.gronwall.gronwall_bound + s.gronwall.slack, s.gronwall.bound_satisfied, seed});
    }
    const long k = static_cast<long>(report.stages.size());
    table.add_row({std::string("final_vs_eps"), k, std::string("composition"), report.final_error, report.eps,
                   report.within_eps, seed});
    table.add_row({std::string("final_vs_chain"), k, std::string("composition"), report.final_error,
                   report.telescoped_bound, report.chain_holds, seed});
    bool all = report.within_eps && report.chain_holds && report.budgets_met;
    for (const auto& s : report.stages) {
        all = all && s.gronwall.bound_satisfied;
    }
    res.results = {{"report", to_json(report)}, {"train", to_json(c.train)}};
    if (model) {
        res.results["model"] = to_json(*model);
    }
    detail::set_result(res, table, all);
    return res;
}

/// |phi(f, x, T) - phi(T f, x, 1)| over the zoo for each T.
inline SuiteResult run_rescale(const ExperimentConfig& c, int threads)
{
    const detail::ParamReader pr{c.params};
    const auto times = pr.numbers("times", {-2.0, -0.5, 0.5, 2.0, 10.0});
    const long points = pr.integer("points", 20, 1);
    std::mt19937_64 rng(c.seed);
    std::vector<Vector> xs;
    for (long i = 0; i < points; ++i) {
        xs.push_back(detail::uniform_in(c.box, rng));
    }
    SuiteResult res;
    CsvTable table({"field", "dimension", "T", "points", "max_residual", "tolerance", "pass", "seed"});
    Json rows = Json::array();
    bool all = true;
    for (const auto& [name, field] : analytic_zoo(c.dimension)) {
        for (const double t : times) {
            std::vector<double> r(static_cast<std::size_t>(points));
            try {
                parallel_for(points, threads, [&](long i) {
                    r[static_cast<std::size_t>(i)] = rescale_residual(field, xs[static_cast<std::size_t>(i)], t, c.solver);
                });
            } catch (const Error& e) {
                res.failures.push_back(detail::failure(name, {{"field", to_json(field)}, {"T", t}}, e));
                continue;
            }
            const double worst = *std::max_element(r.begin(), r.end());
            const bool ok = worst <= kAxiomTolerance;
            all = all && ok;
            table.add_row({name, c.dimension, t, points, worst, kAxiomTolerance, ok, static_cast<long>(c.seed)});
            rows.push_back({{"field", name}, {"T", t}, {"max_residual", worst}, {"pass", ok}});
        }
    }
    res.results = {{"rows", std::move(rows)}};
    detail::set_result(res, table, all);
    return res;
}

/// ||h||_{1,[a,b]} = sum_k (b^{1/k} - a^{1/k}) / k^2 by term-wise integration.
/// For 0 < a < b <= 1, b^{1/k} - a^{1/k} <= log(b/a)/k, so the omitted tail is
/// below log(b/a) / (2 terms^2).
inline double h_l1_termwise(double a, double b, long terms = 2'000'000)
{
    double sum = 0.0;
    for (long k = terms; k >= 1; --k) {
        const double kd = static_cast<double>(k);
        sum += (std::pow(b, 1.0 / kd) - std::pow(a, 1.0 / kd)) / (kd * kd);
    }
    return sum;
}

/// The h / g_n comparison: divergence ladder per p, the L^1 check against
/// pi^2/6, and the (N, delta) witness search.
inline SuiteResult run_normcmp(const ExperimentConfig& c, int threads)
{
    const detail::ParamReader pr{c.params};
    const auto ps = pr.numbers("p_values", {1.0, 1.5, 2.0});
    const double first = pr.number("ladder_first", 1e-2);
    const double last = pr.number("ladder_last", 1e-6);
    const double growth = pr.number("growth_factor", 2.0);
    const double l1_delta = pr.number("l1_delta", 1e-6);
    const double l1_tol = pr.number("l1_tolerance", 5e-3);
    const double l1_eps = pr.number("l1_eps", 0.1);
    const double witness_p = pr.number("witness_p", 1.25);
    const long max_exp = pr.integer("max_exponent", 40, 2);
    if (!(first > last && last > 0.0 && first < 0.5)) {
        throw ConfigInvalid("params.ladder_first", "need 0 < ladder_last < ladder_first < 0.5");
    }
    for (const double p : ps) {
        if (!(p >= 1.0)) {
            throw ConfigInvalid("params.p_values", "every p must be >= 1");
        }
    }

    const GapWitness wit = search_gap_witness(l1_eps, witness_p, static_cast<int>(max_exp));
    const std::vector<double> ladder = halving_ladder(first, last);

    SuiteResult res;
    CsvTable table({"p", "delta", "upper", "norm", "n", "gap", "seed"});
    const auto seed = static_cast<long>(c.seed);
    Json ladders = Json::array();
    Json checks = Json::array();
    ChartSpec chart{"Norm of h on [delta, 1/2]", "delta", "norm", true, true, {}};
    bool all = true;
    const auto check = [&](const std::string& name, double value, double bound, bool ok) {
        all = all && ok;
        checks.push_back({{"check", name}, {"value", value}, {"bound", bound}, {"pass", ok}});
    };

    std::vector<std::vector<double>> values(ps.size());
    parallel_for(static_cast<long>(ps.size()), threads,
                 [&](long i) { values[static_cast<std::size_t>(i)] = divergence_probe(ps[static_cast<std::size_t>(i)], ladder); });
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const double p = ps[i];
        const auto& v = values[i];
        Series s{"p = " + format_double(p), ladder, v};
        chart.series.push_back(s);
        bool increasing = true;
        for (std::size_t k = 0; k < v.size(); ++k) {
            table.add_row({p, ladder[k], 0.5, v[k], wit.n, v[k] / static_cast<double>(wit.n), seed});
            if (k > 0 && !(v[k] > v[k - 1])) {
                increasing = false;
            }
        }
        const double ratio = v.back() / v.front();
        check("increasing p=" + format_double(p), ratio, 1.0, increasing);
        if (p > 1.0) {
            check("growth p=" + format_double(p), ratio, growth, ratio >= growth);
        } else {
            check("bounded p=" + format_double(p), v.back(), std::numbers::pi * std::numbers::pi / 6.0,
                  v.back() <= std::numbers::pi * std::numbers::pi / 6.0);
        }
        ladders.push_back({{"p", p}, {"deltas", ladder}, {"norms", v}, {"ratio", ratio}});
    }

    const double zeta2 = std::numbers::pi * std::numbers::pi / 6.0;
    const double l1 = h_lp_norm(1.0, l1_delta, 1.0 - l1_delta);
    const double l1_exact = h_l1_termwise(l1_delta, 1.0 - l1_delta);
    table.add_row({1.0, l1_delta, 1.0 - l1_delta, l1, wit.n, l1 / static_cast<double>(wit.n), seed});
    check("l1 vs pi^2/6", std::abs(l1 - zeta2), l1_tol, std::abs(l1 - zeta2) <= l1_tol);
    check("l1 vs term-wise sum", std::abs(l1 - l1_exact), l1_tol, std::abs(l1 - l1_exact) <= l1_tol);

    table.add_row({1.0, 0.0, 1.0, wit.l1_gap * static_cast<double>(wit.n), wit.n, wit.l1_gap, seed});
    table.add_row({witness_p, wit.delta, 1.0 - wit.delta, wit.lp_gap * static_cast<double>(wit.n), wit.n, wit.lp_gap,
                   seed});
    check("witness l1 gap", wit.l1_gap, l1_eps, wit.l1_gap < l1_eps);
    check("witness lp gap", wit.lp_gap, 1.0, wit.found && wit.lp_gap >= 1.0);

    res.results = {{"ladders", std::move(ladders)},
                   {"l1", {{"delta", l1_delta}, {"quadrature", l1}, {"termwise", l1_exact}, {"pi2_over_6", zeta2}}},
                   {"witness",
                    {{"n", wit.n}, {"delta", wit.delta}, {"l1_gap", wit.l1_gap}, {"lp_gap", wit.lp_gap},
                     {"p", witness_p}, {"found", wit.found}}},
                   {"checks", std::move(checks)}};
    res.svg = render_svg(chart);
    detail::set_result(res, table, all);
    return res;
}

inline SuiteResult run_suite(const ExperimentConfig& c, int threads = 1)
{
    switch (c.kind) {
    case SuiteKind::flow_axioms: return run_flow_axioms(c, threads);
    case SuiteKind::gronwall: return run_gronwall(c, threads);
    case SuiteKind::fit: return run_fit(c, threads);
    case SuiteKind::compose: return run_compose(c, threads);
    case SuiteKind::rescale: return run_rescale(c, threads);
    case SuiteKind::normcmp: return run_normcmp(c, threads);
    }
    throw InvalidArgument("run_suite: unknown kind");
}

/// Full JSON report. Everything outside "metadata" is a function of the
/// config alone.
inline Json report_json(const ExperimentConfig& c, const SuiteResult& r, const Json& metadata)
{
    return {{"suite", std::string(suite_name(c.kind))},
            {"seed", c.seed},
            {"config", c.source},
            {"passed", r.passed},
            {"results", r.results},
            {"failures", r.failures},
            {"metadata", metadata}};
}

} // namespace nodeflow
