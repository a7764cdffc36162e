#pragma once

#include <nodeflow/approx.hpp>
#include <nodeflow/compose.hpp>
#include <nodeflow/inn.hpp>
#include <nodeflow/train.hpp>

#include <json.hpp>

#include <string>
#include <vector>

namespace nodeflow {

using Json = nlohmann::json;

/// Malformed document. The message starts with the JSON path of the offending
/// value, e.g. "endpoints[1].field.a: expected an array".
class FormatError : public Error {
public:
    FormatError(const std::string& path, const std::string& what) : Error(path + ": " + what), path_(path) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

inline constexpr int kModelSchemaVersion = 1;

namespace detail {

inline std::string join_path(const std::string& base, const std::string& key)
{
    return base.empty() ? key : base + "." + key;
}

inline const Json& require(const Json& j, const std::string& key, const std::string& path)
{
    if (!j.is_object()) {
        throw FormatError(path.empty() ? "<root>" : path, "expected an object");
    }
    const auto it = j.find(key);
    if (it == j.end()) {
        throw FormatError(join_path(path, key), "required field missing");
    }
    return *it;
}

inline double get_double(const Json& j, const std::string& path)
{
    if (!j.is_number()) {
        throw FormatError(path, "expected a number");
    }
    return j.get<double>();
}

inline long get_long(const Json& j, const std::string& path)
{
    if (!j.is_number_integer()) {
        throw FormatError(path, "expected an integer");
    }
    return j.get<long>();
}

inline std::string get_string(const Json& j, const std::string& path)
{
    if (!j.is_string()) {
        throw FormatError(path, "expected a string");
    }
    return j.get<std::string>();
}

} // namespace detail

inline Json vector_to_json(const Vector& v)
{
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back(v[i]);
    }
    return out;
}

/// Row-major nested arrays.
inline Json matrix_to_json(const Matrix& m)
{
    Json out = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row.push_back(m(r, c));
        }
        out.push_back(std::move(row));
    }
    return out;
}

inline Vector vector_from_json(const Json& j, const std::string& path)
{
    if (!j.is_array() || j.empty()) {
        throw FormatError(path, "expected a non-empty array of numbers");
    }
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v[static_cast<Eigen::Index>(i)] = detail::get_double(j[i], path + "[" + std::to_string(i) + "]");
    }
    return v;
}

inline Matrix matrix_from_json(const Json& j, const std::string& path)
{
    if (!j.is_array() || j.empty()) {
        throw FormatError(path, "expected a non-empty array of rows");
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    Matrix m;
    for (Eigen::Index r = 0; r < rows; ++r) {
        const std::string row_path = path + "[" + std::to_string(r) + "]";
        const Vector row = vector_from_json(j[static_cast<std::size_t>(r)], row_path);
        if (r == 0) {
            m.resize(rows, row.size());
        } else if (row.size() != m.cols()) {
            throw FormatError(row_path, "row length differs from the first row");
        }
        m.row(r) = row.transpose();
    }
    return m;
}

inline Json to_json(const VectorFieldSpec& field)
{
    using F = VectorFieldSpec;
    Json j;
    j["type"] = std::string(field.kind());
    std::visit(
        [&j](const auto& f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, F::Zero>) {
                j["dim"] = f.dim;
            } else if constexpr (std::is_same_v<T, F::Constant>) {
                j["c"] = vector_to_json(f.c);
            } else if constexpr (std::is_same_v<T, F::Linear>) {
                j["a"] = matrix_to_json(f.a);
            } else if constexpr (std::is_same_v<T, F::Bump1D>) {
                j["center"] = f.center;
                j["width"] = f.width;
                j["amplitude"] = f.amplitude;
            } else if constexpr (std::is_same_v<T, F::RadialRotation>) {
                j["a"] = matrix_to_json(f.a);
                j["r_inner"] = f.r_inner;
                j["r_outer"] = f.r_outer;
                j["amplitude"] = f.amplitude;
            } else if constexpr (std::is_same_v<T, F::Mlp>) {
                j["activation"] = f.params.activation == Activation::tanh ? "tanh" : "relu";
                Json layers = Json::array();
                for (const auto& layer : f.params.layers) {
                    layers.push_back({{"weight", matrix_to_json(layer.weight)}, {"bias", vector_to_json(layer.bias)}});
                }
                j["layers"] = std::move(layers);
            } else {
                j["factor"] = f.factor;
                j["inner"] = to_json(*f.inner);
            }
        },
        field.variant());
    return j;
}

inline Activation activation_from_json(const Json& j, const std::string& path)
{
    const std::string name = detail::get_string(j, path);
    if (name == "tanh") {
        return Activation::tanh;
    }
    if (name == "relu") {
        return Activation::relu;
    }
    throw FormatError(path, "unknown activation '" + name + "'");
}

/// Builds a field through the validating factories; constructor errors are
/// rethrown as FormatError at `path`.
inline VectorFieldSpec field_from_json(const Json& j, const std::string& path = "")
{
    using detail::require;
    const std::string type = detail::get_string(require(j, "type", path), detail::join_path(path, "type"));
    const auto at = [&path](const char* key) { return detail::join_path(path, key); };
    const auto num = [&](const char* key) { return detail::get_double(require(j, key, path), at(key)); };
    try {
        if (type == "zero") {
            return VectorFieldSpec::zero(detail::get_long(require(j, "dim", path), at("dim")));
        }
        if (type == "constant") {
            return VectorFieldSpec::constant(vector_from_json(require(j, "c", path), at("c")));
        }
        if (type == "linear") {
            return VectorFieldSpec::linear(matrix_from_json(require(j, "a", path), at("a")));
        }
        if (type == "bump1d") {
            return VectorFieldSpec::bump1d(num("center"), num("width"), num("amplitude"));
        }
        if (type == "radial_rotation") {
            return VectorFieldSpec::radial_rotation(matrix_from_json(require(j, "a", path), at("a")), num("r_inner"),
                                                    num("r_outer"), num("amplitude"));
        }
        if (type == "mlp") {
            MlpParams params;
            params.activation = activation_from_json(require(j, "activation", path), at("activation"));
            const Json& layers = require(j, "layers", path);
            if (!layers.is_array()) {
                throw FormatError(at("layers"), "expected an array");
            }
            for (std::size_t i = 0; i < layers.size(); ++i) {
                const std::string lp = at("layers") + "[" + std::to_string(i) + "]";
                params.layers.push_back({matrix_from_json(require(layers[i], "weight", lp), lp + ".weight"),
                                         vector_from_json(require(layers[i], "bias", lp), lp + ".bias")});
            }
            return VectorFieldSpec::mlp(std::move(params));
        }
        if (type == "scaled") {
            return VectorFieldSpec::scaled(num("factor"), field_from_json(require(j, "inner", path), at("inner")));
        }
    } catch (const FormatError&) {
        throw;
    } catch (const Error& e) {
        throw FormatError(path.empty() ? "<root>" : path, e.what());
    }
    throw FormatError(at("type"), "unknown field type '" + type + "'");
}

inline Json to_json(const SolverConfig& cfg)
{
    return {{"method", cfg.method == SolverMethod::fixed_rk4 ? "fixed_rk4" : "adaptive_dp54"},
            {"step_count", cfg.step_count},
            {"rel_tol", cfg.rel_tol},
            {"abs_tol", cfg.abs_tol},
            {"max_steps", cfg.max_steps}};
}

/// Missing keys keep their defaults.
inline SolverConfig solver_from_json(const Json& j, const std::string& path = "")
{
    if (!j.is_object()) {
        throw FormatError(path.empty() ? "<root>" : path, "expected an object");
    }
    SolverConfig cfg;
    const auto at = [&path](const char* key) { return detail::join_path(path, key); };
    if (j.contains("method")) {
        const std::string m = detail::get_string(j["method"], at("method"));
        if (m == "fixed_rk4") {
            cfg.method = SolverMethod::fixed_rk4;
        } else if (m == "adaptive_dp54") {
            cfg.method = SolverMethod::adaptive_dp54;
        } else {
            throw FormatError(at("method"), "unknown solver method '" + m + "'");
        }
    }
    if (j.contains("step_count")) {
        cfg.step_count = detail::get_long(j["step_count"], at("step_count"));
    }
    if (j.contains("rel_tol")) {
        cfg.rel_tol = detail::get_double(j["rel_tol"], at("rel_tol"));
    }
    if (j.contains("abs_tol")) {
        cfg.abs_tol = detail::get_double(j["abs_tol"], at("abs_tol"));
    }
    if (j.contains("max_steps")) {
        cfg.max_steps = detail::get_long(j["max_steps"], at("max_steps"));
    }
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw FormatError(path.empty() ? "<root>" : path, e.what());
    }
    return cfg;
}

inline Json to_json(const TrainConfig& tc)
{
    return {{"sample_count", tc.sample_count},
            {"epoch_count", tc.epoch_count},
            {"batch_size", tc.batch_size},
            {"learning_rate", tc.learning_rate},
            {"seed", tc.seed},
            {"hidden", tc.hidden},
            {"activation", tc.activation == Activation::tanh ? "tanh" : "relu"},
            {"resolution", tc.resolution},
            {"refine_iterations", tc.refine_iterations}};
}

/// Missing keys are taken from `base`.
inline TrainConfig train_from_json(const Json& j, const std::string& path = "", TrainConfig base = {})
{
    if (!j.is_object()) {
        throw FormatError(path.empty() ? "<root>" : path, "expected an object");
    }
    const auto at = [&path](const char* key) { return detail::join_path(path, key); };
    const auto read_long = [&](const char* key, long& out) {
        if (j.contains(key)) {
            out = detail::get_long(j[key], at(key));
        }
    };
    read_long("sample_count", base.sample_count);
    read_long("epoch_count", base.epoch_count);
    read_long("batch_size", base.batch_size);
    read_long("resolution", base.resolution);
    read_long("refine_iterations", base.refine_iterations);
    if (j.contains("learning_rate")) {
        base.learning_rate = detail::get_double(j["learning_rate"], at("learning_rate"));
    }
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) {
            throw FormatError(at("seed"), "expected a non-negative integer");
        }
        base.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("hidden")) {
        const Json& h = j["hidden"];
        if (!h.is_array()) {
            throw FormatError(at("hidden"), "expected an array of widths");
        }
        base.hidden.clear();
        for (std::size_t i = 0; i < h.size(); ++i) {
            base.hidden.push_back(detail::get_long(h[i], at("hidden") + "[" + std::to_string(i) + "]"));
        }
    }
    if (j.contains("activation")) {
        base.activation = activation_from_json(j["activation"], at("activation"));
    }
    try {
        base.validate();
    } catch (const Error& e) {
        throw FormatError(path.empty() ? "<root>" : path, e.what());
    }
    return base;
}

inline Json to_json(const Box& box)
{
    return {{"lower", vector_to_json(box.lower)}, {"upper", vector_to_json(box.upper)}};
}

inline Box box_from_json(const Json& j, const std::string& path = "")
{
    const auto at = [&path](const char* key) { return detail::join_path(path, key); };
    Vector lo = vector_from_json(detail::require(j, "lower", path), at("lower"));
    Vector hi = vector_from_json(detail::require(j, "upper", path), at("upper"));
    try {
        return {std::move(lo), std::move(hi)};
    } catch (const Error& e) {
        throw FormatError(path.empty() ? "<root>" : path, e.what());
    }
}

inline Json to_json(const FlowEndpoint& ep)
{
    return {{"field", to_json(ep.field)}, {"solver", to_json(ep.cfg)}, {"terminal_time", ep.terminal_time}};
}

inline FlowEndpoint endpoint_from_json(const Json& j, const std::string& path = "")
{
    const auto at = [&path](const char* key) { return detail::join_path(path, key); };
    FlowEndpoint ep{field_from_json(detail::require(j, "field", path), at("field"))};
    if (j.contains("solver")) {
        ep.cfg = solver_from_json(j["solver"], at("solver"));
    }
    if (j.contains("terminal_time")) {
        ep.terminal_time = detail::get_double(j["terminal_time"], at("terminal_time"));
    }
    return ep;
}

inline Json to_json(const InnModel& model)
{
    Json endpoints = Json::array();
    for (const auto& ep : model.endpoints) {
        endpoints.push_back(to_json(ep));
    }
    return {{"schema_version", kModelSchemaVersion},
            {"affine",
             {{"weight", matrix_to_json(model.affine.weight())}, {"bias", vector_to_json(model.affine.bias())}}},
            {"endpoints", std::move(endpoints)}};
}

inline InnModel model_from_json(const Json& j)
{
    using detail::require;
    const long version = detail::get_long(require(j, "schema_version", ""), "schema_version");
    if (version != kModelSchemaVersion) {
        throw FormatError("schema_version", "unsupported version " + std::to_string(version));
    }
    const Json& aff = require(j, "affine", "");
    Matrix w = matrix_from_json(require(aff, "weight", "affine"), "affine.weight");
    Vector b = vector_from_json(require(aff, "bias", "affine"), "affine.bias");
    const Json& eps = require(j, "endpoints", "");
    if (!eps.is_array()) {
        throw FormatError("endpoints", "expected an array");
    }
    std::vector<FlowEndpoint> endpoints;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        endpoints.push_back(endpoint_from_json(eps[i], "endpoints[" + std::to_string(i) + "]"));
    }
    try {
        return {std::move(endpoints), AffineMap(std::move(w), std::move(b))};
    } catch (const FormatError&) {
        throw;
    } catch (const Error& e) {
        throw FormatError("affine", e.what());
    }
}

/// Shortest round-trip representation; parsing it back yields identical doubles.
inline std::string dump_model(const InnModel& model) { return to_json(model).dump(2); }

inline InnModel parse_model(const std::string& text)
{
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw FormatError("<root>", std::string("invalid JSON: ") + e.what());
    }
    return model_from_json(j);
}

inline Json to_json(const ApproxReport& r)
{
    return {{"label", r.label},
            {"delta", r.delta},
            {"lip_F", r.lip_F},
            {"gronwall_bound", r.gronwall_bound},
            {"endpoint_sup_error", r.endpoint_sup_error},
            {"slack", r.slack},
            {"grid_resolution", r.grid_resolution},
            {"bound_satisfied", r.bound_satisfied},
            {"k_prime", {{"lower", vector_to_json(r.k_prime_lower)}, {"upper", vector_to_json(r.k_prime_upper)}}}};
}

inline Json to_json(const StageReport& s)
{
    return {{"index", s.index},
            {"kind", s.kind},
            {"budget", s.budget},
            {"lipschitz", s.lipschitz},
            {"transport_lipschitz", s.transport_lipschitz},
            {"compact", to_json(s.compact)},
            {"fit_box", to_json(s.fit_box)},
            {"field_delta", s.field_delta},
            {"fit_loss", s.fit_loss},
            {"stage_error", s.stage_error},
            {"budget_met", s.budget_met},
            {"gronwall", to_json(s.gronwall)}};
}

inline Json to_json(const CompositionReport& r)
{
    Json stages = Json::array();
    for (const auto& s : r.stages) {
        stages.push_back(to_json(s));
    }
    return {{"eps", r.eps},
            {"op_norm_w", r.op_norm_w},
            {"resolution", r.resolution},
            {"stages", std::move(stages)},
            {"final_error", r.final_error},
            {"telescoped_bound", r.telescoped_bound},
            {"chain_holds", r.chain_holds},
            {"within_eps", r.within_eps},
            {"budgets_met", r.budgets_met}};
}

} // namespace nodeflow
