#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace glsurf {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
using Vec2d = Vec2<double>;

template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
using ArrayXd = ArrayX<double>;

// 2D fields are indexed (ix, iy): the first index runs along x.
template <typename Scalar>
using Array2 = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Array2d = Array2<double>;
using Array2cd = Array2<std::complex<double>>;
using Array2i = Array2<int>;

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

// Error hierarchy. Every error carries the category the CLI maps to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInputError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class RegimeError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : Error(what), last_residual_(last_residual) {}
  double last_residual() const { return last_residual_; }

 private:
  double last_residual_;
};

class SearchError : public Error {
 public:
  using Error::Error;
};

class NotApplicableError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

class ResolutionError : public Error {
 public:
  using Error::Error;
};

class GridMismatchError : public Error {
 public:
  using Error::Error;
};

}  // namespace glsurf
