#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace nodeflow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NonFiniteState : public Error {
public:
    using Error::Error;
};

class MaxStepsExceeded : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    DimensionMismatch(long expected, long got)
        : Error("dimension mismatch: expected " + std::to_string(expected) + ", got " + std::to_string(got))
    {
    }
    using Error::Error;
};

class NoClosedForm : public Error {
public:
    using Error::Error;
};

class SingularAffine : public Error {
public:
    using Error::Error;
};

class GridTooLarge : public Error {
public:
    using Error::Error;
};

class NonFiniteLoss : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class TailNotConverged : public Error {
public:
    using Error::Error;
};

class QuadratureNotConverged : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

inline void check_dim(long expected, long got)
{
    if (expected != got) {
        throw DimensionMismatch(expected, got);
    }
}

} // namespace nodeflow
