#pragma once

#include <nodeflow/core.hpp>

#include <algorithm>
#include <cmath>

namespace nodeflow {

/// Spectral norm of M by power iteration on M^T M.
///
/// Iterates until the relative change of the estimate drops below rel_tol.
/// The start vector is fixed, so the result is deterministic.
inline double spectral_norm(const Matrix& m, double rel_tol = 1e-12, int max_iter = 10000)
{
    if (m.size() == 0) {
        return 0.0;
    }
    const Matrix gram = m.transpose() * m;
    Vector v(gram.cols());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        v[i] = 1.0 + 0.1 * static_cast<double>(i) + 0.01 * static_cast<double>(i * i);
    }
    v.normalize();
    double sigma2 = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        Vector w = gram * v;
        const double norm = w.norm();
        if (norm == 0.0) {
            return 0.0;
        }
        const double next = v.dot(w);
        v = w / norm;
        if (it > 0 && std::abs(next - sigma2) <= rel_tol * std::abs(next)) {
            sigma2 = next;
            break;
        }
        sigma2 = next;
    }
    // Rayleigh quotient at the converged vector is tighter than the last step.
    sigma2 = std::max(sigma2, v.dot(gram * v));
    return std::sqrt(std::max(sigma2, 0.0));
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
inline Matrix matrix_exp(const Matrix& m)
{
    const auto n = m.rows();
    if (n != m.cols()) {
        throw InvalidArgument("matrix_exp: matrix must be square");
    }
    if (!m.allFinite()) {
        throw InvalidArgument("matrix_exp: non-finite entries");
    }
    const double norm1 = m.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm1 > 0.5) {
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / 0.5)));
    }
    const Matrix scaled = m / std::ldexp(1.0, squarings);

    // ||scaled||_1 <= 1/2, so 20 terms leave a remainder below 1e-25.
    Matrix result = Matrix::Identity(n, n);
    Matrix term = Matrix::Identity(n, n);
    for (int k = 1; k <= 20; ++k) {
        term = term * scaled / static_cast<double>(k);
        result += term;
    }
    for (int s = 0; s < squarings; ++s) {
        result = result * result;
    }
    return result;
}

} // namespace nodeflow
