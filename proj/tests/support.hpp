#pragma once

// Independent oracles shared by the unit tests.

#include <nodeflow/core.hpp>

#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <random>
#include <vector>

namespace oracle {

using nodeflow::Matrix;
using nodeflow::Vector;

/// Pade-based exponential from Eigen's MatrixFunctions module.
inline Matrix expm(const Matrix& m) { return m.exp(); }

/// Largest singular value by one-sided Jacobi SVD.
inline double op_norm(const Matrix& m)
{
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

inline Matrix rotation(double theta)
{
    Matrix r(2, 2);
    r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    return r;
}

inline Matrix random_matrix(long rows, long cols, std::mt19937_64& rng, double scale = 1.0)
{
    std::normal_distribution<double> n(0.0, scale);
    Matrix m(rows, cols);
    for (long i = 0; i < rows; ++i) {
        for (long j = 0; j < cols; ++j) {
            m(i, j) = n(rng);
        }
    }
    return m;
}

inline Matrix random_skew(long d, std::mt19937_64& rng)
{
    const Matrix m = random_matrix(d, d, rng);
    return 0.5 * (m - m.transpose());
}

inline Vector random_vector(long d, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    Vector v(d);
    for (long i = 0; i < d; ++i) {
        v[i] = u(rng);
    }
    return v;
}

/// sum_{k=1}^{n} 1/k^s
inline double zeta_partial(double s, long n)
{
    double sum = 0.0;
    for (long k = n; k >= 1; --k) {
        sum += std::pow(static_cast<double>(k), -s);
    }
    return sum;
}

} // namespace oracle
