#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

namespace spinn::test {

inline double central(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double central2(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

/// Fourth-order accurate first derivative (Richardson on central differences).
inline double richardson(const std::function<double(double)>& f, double x, double h) {
  return (4.0 * central(f, x, h / 2.0) - central(f, x, h)) / 3.0;
}

inline double richardson2(const std::function<double(double)>& f, double x, double h) {
  return (4.0 * central2(f, x, h / 2.0) - central2(f, x, h)) / 3.0;
}

inline double rel_err(double got, double want, double floor = 1e-12) {
  return std::abs(got - want) / std::max({std::abs(want), std::abs(got), floor});
}

}  // namespace spinn::test
