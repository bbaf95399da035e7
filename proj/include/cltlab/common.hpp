#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cltlab {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSqrt2Pi = 2.50662827463100050242;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;
// 0.5 * ln(2*pi*e), differential entropy of the standard normal.
inline constexpr double kGaussianEntropy = 1.41893853320467274178;

/// Thrown when a user-supplied parameter is outside its admissible range.
class invalid_parameter : public std::invalid_argument {
 public:
  explicit invalid_parameter(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Thrown when a numerical contract cannot be met (domain too small,
/// absolute-continuity violation, unstable range, ...).
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

inline double standard_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / kSqrt2Pi;
}

inline double standard_normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

/// Upper tail P(G > x), accurate far into the tail.
inline double standard_normal_sf(double x) {
  return 0.5 * std::erfc(x / std::sqrt(2.0));
}

inline double sqr(double x) { return x * x; }

/// Quintic smoothstep on [0,1]: s(0)=0, s(1)=1, s'(0)=s'(1)=s''(0)=s''(1)=0.
inline double smoothstep5(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * t * (t * (6.0 * t - 15.0) + 10.0);
}

inline double smoothstep5_deriv(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  return 30.0 * t * t * (t - 1.0) * (t - 1.0);
}

/// Integral of smoothstep5 from 0 to t (t in [0,1]).
inline double smoothstep5_integral(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return t - 0.5;
  const double t4 = t * t * t * t;
  return t4 * (t * (t - 3.0) + 2.5);
}

/// Trapezoid rule over uniformly spaced samples.
inline double trapezoid(std::span<const double> values, double step) {
  if (values.size() < 2) return 0.0;
  double sum = 0.5 * (values.front() + values.back());
  for (std::size_t i = 1; i + 1 < values.size(); ++i) sum += values[i];
  return sum * step;
}

/// Per-node trapezoid weights: step everywhere, halved at the two ends.
/// Region integrals built from these weights add up exactly to the total.
inline double trapezoid_weight(std::size_t i, std::size_t n, double step) {
  return (i == 0 || i + 1 == n) ? 0.5 * step : step;
}

namespace detail {

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a,
                                   double b, double fa, double fm, double fb,
                                   double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Deterministic adaptive Simpson quadrature on [a, b].
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-12, int max_depth = 48) {
  if (!(b > a)) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::adaptive_simpson_rec(f, a, m, b > a ? fa : fa, fm, fb, whole, tol,
                                      max_depth);
}

/// Integrate over a piecewise-smooth function given interior breakpoints.
inline double integrate_piecewise(const std::function<double(double)>& f, double a,
                                  double b, std::span<const double> breaks,
                                  double tol = 1e-12) {
  std::vector<double> pts{a};
  for (double x : breaks)
    if (x > a && x < b) pts.push_back(x);
  pts.push_back(b);
  std::sort(pts.begin(), pts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    total += integrate(f, pts[i], pts[i + 1], tol);
  return total;
}

/// Golden-section minimizer for a unimodal-ish 1-D objective; deterministic.
inline double minimize_scalar(const std::function<double(double)>& f, double a,
                              double b, double tol = 1e-12) {
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol * (1.0 + std::abs(a) + std::abs(b))) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace cltlab
