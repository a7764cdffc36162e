#pragma once

#include <nodeflow/flow.hpp>
#include <nodeflow/linalg.hpp>

#include <cmath>
#include <vector>

namespace nodeflow {

/// Invertible affine map x -> W x + b.
class AffineMap {
public:
    static constexpr double kDeterminantThreshold = 1e-12;

    AffineMap(Matrix w, Vector b) : w_(std::move(w)), b_(std::move(b))
    {
        if (w_.rows() < 1 || w_.rows() != w_.cols() || b_.size() != w_.rows()) {
            throw InvalidArgument("AffineMap: W must be square and match b");
        }
        if (!w_.allFinite() || !b_.allFinite()) {
            throw SingularAffine("AffineMap: non-finite entries");
        }
        lu_.compute(w_);
        if (!(std::abs(lu_.determinant()) > kDeterminantThreshold)) {
            throw SingularAffine("AffineMap: |det W| <= 1e-12");
        }
    }

    static AffineMap identity(long d) { return {Matrix::Identity(d, d), Vector::Zero(d)}; }

    long dim() const { return w_.rows(); }
    const Matrix& weight() const { return w_; }
    const Vector& bias() const { return b_; }

    Vector apply(const Vector& x) const
    {
        check_dim(dim(), x.size());
        return w_ * x + b_;
    }

    /// W^{-1} (y - b) by the stored partial-pivot LU factorization.
    Vector solve(const Vector& y) const
    {
        check_dim(dim(), y.size());
        return lu_.solve(y - b_);
    }

private:
    Matrix w_;
    Vector b_;
    Eigen::PartialPivLU<Matrix> lu_;
};

/// Spectral norm of W, power iteration to 1e-8 relative tolerance.
inline double op_norm(const AffineMap& affine) { return spectral_norm(affine.weight(), 1e-8); }

/// W o psi_k o ... o psi_1: flow endpoints applied in order, affine map last.
struct InnModel {
    std::vector<FlowEndpoint> endpoints;
    AffineMap affine;

    InnModel(std::vector<FlowEndpoint> eps, AffineMap aff) : endpoints(std::move(eps)), affine(std::move(aff))
    {
        for (const auto& ep : endpoints) {
            if (ep.dim() != affine.dim()) {
                throw DimensionMismatch(affine.dim(), ep.dim());
            }
        }
    }

    long dim() const { return affine.dim(); }
};

inline Vector forward(const InnModel& model, const Vector& x)
{
    check_dim(model.dim(), x.size());
    Vector z = x;
    for (const auto& ep : model.endpoints) {
        z = endpoint(ep, z);
    }
    return model.affine.apply(z);
}

inline Vector inverse(const InnModel& model, const Vector& y)
{
    Vector z = model.affine.solve(y);
    for (auto it = model.endpoints.rbegin(); it != model.endpoints.rend(); ++it) {
        z = inverse_endpoint(*it, z);
    }
    return z;
}

} // namespace nodeflow
