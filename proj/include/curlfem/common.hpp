#pragma once

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <stdexcept>
#include <string>

namespace curlfem {

using Complex = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using CVec3 = Eigen::Vector3cd;
using CMat3 = Eigen::Matrix3cd;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input file could not be parsed; the message carries line/section context.
class ParseError : public Error {
public:
    using Error::Error;
};

/// A vector field with an (optional) analytic curl, valued in Scalar^3.
template <typename Scalar>
struct VectorField {
    using Value = Eigen::Matrix<Scalar, 3, 1>;
    std::function<Value(const Vec3&)> value;
    std::function<Value(const Vec3&)> curl;

    bool has_curl() const { return static_cast<bool>(curl); }
};

using RealField = VectorField<double>;
using ComplexField = VectorField<Complex>;

/// Promotes a real field to a complex one.
inline ComplexField to_complex(const RealField& f)
{
    ComplexField out;
    out.value = [v = f.value](const Vec3& x) -> CVec3 { return v(x).cast<Complex>(); };
    if (f.has_curl())
        out.curl = [c = f.curl](const Vec3& x) -> CVec3 { return c(x).cast<Complex>(); };
    return out;
}

/// Cofactor matrix in the convention A^co = det(A) A^{-1}.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 3, 3> cofactor(const Eigen::MatrixBase<Derived>& a)
{
    Eigen::Matrix<typename Derived::Scalar, 3, 3> c;
    c(0, 0) = a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1);
    c(0, 1) = a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2);
    c(0, 2) = a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1);
    c(1, 0) = a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2);
    c(1, 1) = a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0);
    c(1, 2) = a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2);
    c(2, 0) = a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0);
    c(2, 1) = a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1);
    c(2, 2) = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    return c;
}

/// Number of worker threads: CURLFEM_THREADS if set (at most 256), else hardware concurrency.
int thread_count();

/// Runs fn(i) for i in [0, n) over thread_count() workers with static chunking.
/// Callers must write results to per-index slots so the outcome is thread-count independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace curlfem
