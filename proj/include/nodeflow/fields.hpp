#pragma once

#include <nodeflow/core.hpp>
#include <nodeflow/linalg.hpp>
#include <nodeflow/ode.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace nodeflow {

/// Smooth bump exp(4 - 1/(u(1-u))) on (0, 1), zero elsewhere. Peak value 1 at u = 1/2.
namespace bump {

inline double profile(double u)
{
    if (!(u > 0.0 && u < 1.0)) {
        return 0.0;
    }
    return std::exp(4.0 - 1.0 / (u * (1.0 - u)));
}

inline double derivative(double u)
{
    if (!(u > 0.0 && u < 1.0)) {
        return 0.0;
    }
    const double q = u * (1.0 - u);
    return profile(u) * (1.0 - 2.0 * u) / (q * q);
}

inline constexpr int kLipschitzSamples = 100'000;
inline constexpr double kLipschitzSafety = 1.1;

/// max |profile'| by dense sampling.
inline double max_abs_derivative()
{
    static const double value = [] {
        double m = 0.0;
        for (int i = 1; i < kLipschitzSamples; ++i) {
            m = std::max(m, std::abs(derivative(static_cast<double>(i) / kLipschitzSamples)));
        }
        return m;
    }();
    return value;
}

} // namespace bump

enum class Activation { relu, tanh };

struct MlpLayer {
    Matrix weight;
    Vector bias;
};

/// Dense network x -> W_L s(... s(W_1 x + b_1) ...) + b_L; the activation is
/// applied between layers only.
struct MlpParams {
    std::vector<MlpLayer> layers;
    Activation activation = Activation::tanh;

    long input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols(); }
    long output_dim() const { return layers.empty() ? 0 : layers.back().weight.rows(); }

    void validate() const
    {
        if (layers.empty()) {
            throw InvalidArgument("MlpParams: at least one layer required");
        }
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto& l = layers[i];
            if (l.weight.rows() != l.bias.size() || l.weight.rows() == 0 || l.weight.cols() == 0) {
                throw InvalidArgument("MlpParams: layer " + std::to_string(i) + " has inconsistent shapes");
            }
            if (i > 0 && layers[i - 1].weight.rows() != l.weight.cols()) {
                throw InvalidArgument("MlpParams: layer " + std::to_string(i) + " does not chain");
            }
            if (!l.weight.allFinite() || !l.bias.allFinite()) {
                throw InvalidArgument("MlpParams: non-finite parameters");
            }
        }
        if (input_dim() != output_dim()) {
            throw InvalidArgument("MlpParams: input and output widths must match");
        }
    }

    Vector operator()(const Vector& x) const
    {
        Vector h = x;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            Vector z = layers[i].bias;
            z.noalias() += layers[i].weight * h;
            if (i + 1 < layers.size()) {
                if (activation == Activation::tanh) {
                    z = z.array().tanh().matrix();
                } else {
                    z = z.cwiseMax(0.0);
                }
            }
            h = std::move(z);
        }
        return h;
    }
};

/// A globally Lipschitz vector field on R^d with a certified Lipschitz bound.
///
/// Instances are immutable; the bound is computed once at construction.
class VectorFieldSpec {
public:
    struct Zero {
        long dim;
    };
    struct Constant {
        Vector c;
    };
    struct Linear {
        Matrix a;
    };
    /// Odd extension v(x) = vt(|x|) x/|x| of the radial bump
    /// vt(r) = amplitude * profile((r - center)/width + 1/2).
    struct Bump1D {
        double center;
        double width;
        double amplitude;
    };
    /// X(x) = phi(|x|) A x with phi = amplitude * profile over [r_inner, r_outer].
    struct RadialRotation {
        Matrix a;
        double r_inner;
        double r_outer;
        double amplitude;
    };
    struct Mlp {
        MlpParams params;
    };
    struct Scaled {
        double factor;
        std::shared_ptr<const VectorFieldSpec> inner;
    };
    using Variant = std::variant<Zero, Constant, Linear, Bump1D, RadialRotation, Mlp, Scaled>;

    static VectorFieldSpec zero(long d)
    {
        if (d < 1) {
            throw InvalidArgument("Zero: dimension must be positive");
        }
        return VectorFieldSpec(Zero{d});
    }
    static VectorFieldSpec constant(Vector c)
    {
        if (c.size() < 1 || !c.allFinite()) {
            throw InvalidArgument("Constant: vector must be non-empty and finite");
        }
        return VectorFieldSpec(Constant{std::move(c)});
    }
    static VectorFieldSpec linear(Matrix a)
    {
        if (a.rows() < 1 || a.rows() != a.cols() || !a.allFinite()) {
            throw InvalidArgument("Linear: matrix must be square, non-empty and finite");
        }
        return VectorFieldSpec(Linear{std::move(a)});
    }
    static VectorFieldSpec bump1d(double center, double width, double amplitude)
    {
        if (!(width > 0.0) || !(center - 0.5 * width >= 0.0) || !std::isfinite(center + width + amplitude)) {
            throw InvalidArgument("Bump1D: need width > 0 and support [center - width/2, center + width/2] in [0, inf)");
        }
        return VectorFieldSpec(Bump1D{center, width, amplitude});
    }
    static VectorFieldSpec radial_rotation(Matrix a, double r_inner = 1.0, double r_outer = 2.0, double amplitude = 1.0)
    {
        if (a.rows() < 2 || a.rows() != a.cols() || !a.allFinite()) {
            throw InvalidArgument("RadialRotation: need a square matrix of size >= 2");
        }
        if ((a + a.transpose()).cwiseAbs().maxCoeff() != 0.0) {
            throw InvalidArgument("RadialRotation: matrix must be skew-symmetric");
        }
        if (!(r_inner > 0.0 && r_inner < r_outer) || !std::isfinite(r_outer + amplitude)) {
            throw InvalidArgument("RadialRotation: need 0 < r_inner < r_outer");
        }
        return VectorFieldSpec(RadialRotation{std::move(a), r_inner, r_outer, amplitude});
    }
    static VectorFieldSpec mlp(MlpParams params)
    {
        params.validate();
        return VectorFieldSpec(Mlp{std::move(params)});
    }
    static VectorFieldSpec scaled(double factor, VectorFieldSpec inner)
    {
        if (!std::isfinite(factor)) {
            throw InvalidArgument("Scaled: factor must be finite");
        }
        return VectorFieldSpec(Scaled{factor, std::make_shared<const VectorFieldSpec>(std::move(inner))});
    }

    /// The smallest nonzero skew matrix: A(0,1) = 1, A(1,0) = -1.
    static Matrix elementary_skew(long d)
    {
        Matrix a = Matrix::Zero(d, d);
        a(0, 1) = 1.0;
        a(1, 0) = -1.0;
        return a;
    }

    long dim() const { return dim_; }
    double lipschitz_bound() const { return lipschitz_; }
    const Variant& variant() const { return v_; }

    std::string_view kind() const
    {
        static constexpr std::string_view names[] = {"zero", "constant", "linear", "bump1d",
                                                     "radial_rotation", "mlp", "scaled"};
        return names[v_.index()];
    }

    /// Compact support radius for Bump1D and RadialRotation; the field is
    /// exactly zero for |x| >= this value. Negative when the field has no
    /// compact support.
    double support_radius() const
    {
        if (const auto* b = std::get_if<Bump1D>(&v_)) {
            return b->center + 0.5 * b->width;
        }
        if (const auto* r = std::get_if<RadialRotation>(&v_)) {
            return r->r_outer;
        }
        if (std::holds_alternative<Zero>(v_)) {
            return 0.0;
        }
        if (const auto* s = std::get_if<Scaled>(&v_)) {
            return s->factor == 0.0 ? 0.0 : s->inner->support_radius();
        }
        return -1.0;
    }

    /// Unchecked evaluation; see eval() for the dimension-checked entry point.
    Vector operator()(const Vector& x) const
    {
        return std::visit([&x](const auto& f) { return apply(f, x); }, v_);
    }

    Vector eval(const Vector& x) const
    {
        check_dim(dim_, x.size());
        return (*this)(x);
    }

    /// Radial profile of Bump1D (vt) or RadialRotation (phi).
    double radial_profile(double r) const
    {
        if (const auto* b = std::get_if<Bump1D>(&v_)) {
            return b->amplitude * bump::profile((r - b->center) / b->width + 0.5);
        }
        if (const auto* rr = std::get_if<RadialRotation>(&v_)) {
            return rr->amplitude * bump::profile((r - rr->r_inner) / (rr->r_outer - rr->r_inner));
        }
        throw InvalidArgument("radial_profile: field has no radial profile");
    }

private:
    explicit VectorFieldSpec(Variant v) : v_(std::move(v))
    {
        dim_ = std::visit([](const auto& f) { return dim_of(f); }, v_);
        lipschitz_ = std::visit([](const auto& f) { return bound_of(f); }, v_);
    }

    static long dim_of(const Zero& f) { return f.dim; }
    static long dim_of(const Constant& f) { return f.c.size(); }
    static long dim_of(const Linear& f) { return f.a.rows(); }
    static long dim_of(const Bump1D&) { return 1; }
    static long dim_of(const RadialRotation& f) { return f.a.rows(); }
    static long dim_of(const Mlp& f) { return f.params.input_dim(); }
    static long dim_of(const Scaled& f) { return f.inner->dim(); }

    static double bound_of(const Zero&) { return 0.0; }
    static double bound_of(const Constant&) { return 0.0; }
    static double bound_of(const Linear& f) { return spectral_norm(f.a); }
    static double bound_of(const Bump1D& f)
    {
        return bump::kLipschitzSafety * std::abs(f.amplitude) / f.width * bump::max_abs_derivative();
    }
    // |J| <= |A| (|phi(r)| + r |phi'(r)|) since |Ax| <= |A| r.
    static double bound_of(const RadialRotation& f)
    {
        const double width = f.r_outer - f.r_inner;
        double m = 0.0;
        for (int i = 1; i < bump::kLipschitzSamples; ++i) {
            const double u = static_cast<double>(i) / bump::kLipschitzSamples;
            const double r = f.r_inner + u * width;
            m = std::max(m, bump::profile(u) + r * std::abs(bump::derivative(u)) / width);
        }
        return bump::kLipschitzSafety * std::abs(f.amplitude) * spectral_norm(f.a) * m;
    }
    static double bound_of(const Mlp& f)
    {
        double prod = 1.0;
        for (const auto& l : f.params.layers) {
            prod *= spectral_norm(l.weight);
        }
        return prod;
    }
    static double bound_of(const Scaled& f) { return std::abs(f.factor) * f.inner->lipschitz_bound(); }

    static Vector apply(const Zero& f, const Vector&) { return Vector::Zero(f.dim); }
    static Vector apply(const Constant& f, const Vector&) { return f.c; }
    static Vector apply(const Linear& f, const Vector& x) { return f.a * x; }
    static Vector apply(const Bump1D& f, const Vector& x)
    {
        Vector out(1);
        const double r = std::abs(x[0]);
        if (r == 0.0) {
            out[0] = 0.0;
            return out;
        }
        const double v = f.amplitude * bump::profile((r - f.center) / f.width + 0.5);
        out[0] = x[0] > 0.0 ? v : -v;
        return out;
    }
    static Vector apply(const RadialRotation& f, const Vector& x)
    {
        const double r = x.norm();
        if (!(r > f.r_inner && r < f.r_outer)) {
            return Vector::Zero(x.size());
        }
        const double phi = f.amplitude * bump::profile((r - f.r_inner) / (f.r_outer - f.r_inner));
        return phi * (f.a * x);
    }
    static Vector apply(const Mlp& f, const Vector& x) { return f.params(x); }
    static Vector apply(const Scaled& f, const Vector& x) { return f.factor * (*f.inner)(x); }

    Variant v_;
    long dim_ = 0;
    double lipschitz_ = 0.0;
};

inline Vector eval(const VectorFieldSpec& field, const Vector& x) { return field.eval(x); }
inline double lipschitz_bound(const VectorFieldSpec& field) { return field.lipschitz_bound(); }

/// Dimension-checked integration of a field.
inline Vector integrate(const VectorFieldSpec& field, const Vector& x0, double t, const SolverConfig& cfg)
{
    check_dim(field.dim(), x0.size());
    cfg.validate();
    return integrate<VectorFieldSpec>(field, x0, t, cfg);
}

inline Trajectory trajectory(const VectorFieldSpec& field, const Vector& x0, std::span<const double> times,
                             const SolverConfig& cfg)
{
    check_dim(field.dim(), x0.size());
    cfg.validate();
    return trajectory<VectorFieldSpec>(field, x0, times, cfg);
}

inline bool has_closed_form(const VectorFieldSpec& field)
{
    const auto& v = field.variant();
    if (const auto* s = std::get_if<VectorFieldSpec::Scaled>(&v)) {
        return has_closed_form(*s->inner);
    }
    return std::holds_alternative<VectorFieldSpec::Zero>(v) || std::holds_alternative<VectorFieldSpec::Constant>(v) ||
           std::holds_alternative<VectorFieldSpec::Linear>(v) ||
           std::holds_alternative<VectorFieldSpec::RadialRotation>(v);
}

/// Exact flow for the variants that have one.
///
/// RadialRotation uses exp(t phi(|x|) A) x: the flow preserves |x|, so phi is
/// constant along each trajectory.
inline Vector closed_form_flow(const VectorFieldSpec& field, const Vector& x, double t)
{
    check_dim(field.dim(), x.size());
    using F = VectorFieldSpec;
    const auto& v = field.variant();
    if (std::holds_alternative<F::Zero>(v)) {
        return x;
    }
    if (const auto* c = std::get_if<F::Constant>(&v)) {
        return x + t * c->c;
    }
    if (const auto* l = std::get_if<F::Linear>(&v)) {
        return matrix_exp(t * l->a) * x;
    }
    if (const auto* r = std::get_if<F::RadialRotation>(&v)) {
        const double phi = field.radial_profile(x.norm());
        if (phi == 0.0) {
            return x;
        }
        return matrix_exp((t * phi) * r->a) * x;
    }
    if (const auto* s = std::get_if<F::Scaled>(&v)) {
        return closed_form_flow(*s->inner, x, s->factor * t);
    }
    throw NoClosedForm(std::string("no closed-form flow for field kind '") + std::string(field.kind()) + "'");
}

} // namespace nodeflow
