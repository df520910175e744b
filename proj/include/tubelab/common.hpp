#ifndef TUBELAB_COMMON_HPP
#define TUBELAB_COMMON_HPP

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace tubelab {

using cplx = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

inline constexpr double pi = std::numbers::pi;

/// Invalid argument or incompatible inputs.
class DomainError : public std::invalid_argument {
 public:
  explicit DomainError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// A grid, basis or truncation too coarse for the requested computation.
class ResolutionError : public std::runtime_error {
 public:
  explicit ResolutionError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure detected at run time (instability, defective Gram matrix).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Neumaier-compensated accumulator; order-dependent only through the
/// sequence of additions, so a fixed chunking gives reproducible sums.
template <typename T>
class CompensatedSum {
 public:
  void add(T value) {
    const T t = sum_ + value;
    if (std::abs(sum_) >= std::abs(value)) {
      comp_ += (sum_ - t) + value;
    } else {
      comp_ += (value - t) + sum_;
    }
    sum_ = t;
  }
  [[nodiscard]] T value() const { return sum_ + comp_; }

 private:
  T sum_{};
  T comp_{};
};

template <>
inline void CompensatedSum<cplx>::add(cplx value) {
  // componentwise Neumaier on the real and imaginary parts
  const double sr = sum_.real() + value.real();
  const double si = sum_.imag() + value.imag();
  double cr = comp_.real();
  double ci = comp_.imag();
  cr += std::abs(sum_.real()) >= std::abs(value.real()) ? (sum_.real() - sr) + value.real()
                                                        : (value.real() - sr) + sum_.real();
  ci += std::abs(sum_.imag()) >= std::abs(value.imag()) ? (sum_.imag() - si) + value.imag()
                                                        : (value.imag() - si) + sum_.imag();
  sum_ = {sr, si};
  comp_ = {cr, ci};
}

inline double square(double x) { return x * x; }

}  // namespace tubelab

#endif  // TUBELAB_COMMON_HPP
