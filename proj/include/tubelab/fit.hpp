#ifndef TUBELAB_FIT_HPP
#define TUBELAB_FIT_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tubelab/common.hpp"

namespace tubelab {

enum class FitModel { PurePower, PowerTimesLog };

inline std::string to_string(FitModel m) { return m == FitModel::PurePower ? "PurePower" : "PowerTimesLog"; }

struct ScalingFit {
  FitModel model = FitModel::PurePower;
  double slope = 0.0;
  double intercept = 0.0;  // natural log of the prefactor
  double r_squared = 0.0;
  double max_residual = 0.0;
  std::size_t count = 0;
};

/// Least squares on log-transformed data.
/// PurePower:     log y = c + s log x
/// PowerTimesLog: log y = c + s log x + log log(1/x)   (requires 0 < x < 1)
inline ScalingFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y,
                                FitModel model = FitModel::PurePower) {
  if (x.size() != y.size()) throw DomainError("fit_power_law: abscissa/ordinate size mismatch");
  if (x.size() < 3) throw DomainError("fit_power_law: need at least 3 samples");
  std::vector<double> lx(x.size());
  std::vector<double> ly(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("fit_power_law: nonpositive value");
    if (model == FitModel::PowerTimesLog && !(x[i] < 1.0)) {
      throw DomainError("fit_power_law: PowerTimesLog needs abscissae in (0, 1)");
    }
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
    if (model == FitModel::PowerTimesLog) ly[i] -= std::log(-lx[i]);
  }
  std::vector<double> sorted = lx;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw DomainError("fit_power_law: abscissae must be distinct");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  ScalingFit f;
  f.model = model;
  f.count = x.size();
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = ly[i] - (f.intercept + f.slope * lx[i]);
    ssr += r * r;
    f.max_residual = std::max(f.max_residual, std::abs(r));
  }
  // constant data (up to rounding in the mean): a perfect fit by convention
  f.r_squared = syy > 1e-20 * n * (1.0 + my * my) ? 1.0 - ssr / syy : 1.0;
  return f;
}

}  // namespace tubelab

#endif  // TUBELAB_FIT_HPP
