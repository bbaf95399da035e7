#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "cltlab/common.hpp"
#include "cltlab/dist.hpp"
#include "cltlab/grid.hpp"

namespace cltlab {

namespace detail {

/// Cumulative integral from the left on a uniform grid, 4th order: each
/// subinterval integrates the cubic through its four surrounding nodes.
inline std::vector<double> cumulative_left(const std::vector<double>& f, double h) {
  const std::size_t n = f.size();
  std::vector<double> c(n, 0.0);
  if (n < 4) return c;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    double inc;
    if (k == 0) {
      inc = h * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]) / 24.0;
    } else if (k + 2 >= n) {
      inc = h * (f[n - 4] - 5.0 * f[n - 3] + 19.0 * f[n - 2] + 9.0 * f[n - 1]) / 24.0;
    } else {
      inc = h * (-f[k - 1] + 13.0 * f[k] + 13.0 * f[k + 1] - f[k + 2]) / 24.0;
    }
    c[k + 1] = c[k] + inc;
  }
  return c;
}

/// Cumulative integral of the right tail: r[k] = int_{x_k}^{x_end}.
/// Accumulated from the right so tiny tail values keep relative precision.
inline std::vector<double> cumulative_right(const std::vector<double>& f, double h) {
  const std::size_t n = f.size();
  std::vector<double> r(n, 0.0);
  if (n < 4) return r;
  for (std::size_t k = n - 1; k-- > 0;) {
    double inc;
    if (k == 0) {
      inc = h * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]) / 24.0;
    } else if (k + 2 >= n) {
      inc = h * (f[n - 4] - 5.0 * f[n - 3] + 19.0 * f[n - 2] + 9.0 * f[n - 1]) / 24.0;
    } else {
      inc = h * (-f[k - 1] + 13.0 * f[k] + 13.0 * f[k + 1] - f[k + 2]) / 24.0;
    }
    r[k] = r[k + 1] + inc;
  }
  return r;
}

/// 5-point centered first derivative; one-sided 2nd-order at the edges.
inline std::vector<double> derivative5(const std::vector<double>& f, double h) {
  const std::size_t n = f.size();
  std::vector<double> d(n, 0.0);
  if (n < 5) return d;
  for (std::size_t i = 2; i + 2 < n; ++i)
    d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
  d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
  d[1] = (f[2] - f[0]) / (2.0 * h);
  d[n - 2] = (f[n - 1] - f[n - 3]) / (2.0 * h);
  d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
  return d;
}

}  // namespace detail

/// Solution of f'(w) - w f(w) = g(w) - E g(G) with derivatives and the
/// measured ODE residual. Boundary points (3 each side) are excluded from
/// all norm and residual measurements.
struct SteinSolution {
  GridFunction g;
  double g_mean_gaussian = 0.0;
  std::vector<double> f, f1, f2, f3;
  double residual = 0.0;

  static constexpr std::size_t kBoundary = 3;

  double interior_sup(const std::vector<double>& v) const {
    double m = 0.0;
    for (std::size_t i = kBoundary; i + kBoundary < v.size(); ++i)
      m = std::max(m, std::abs(v[i]));
    return m;
  }
};

/// Solve Stein's equation by stable cumulative quadrature from the nearer
/// tail: the left integral for w <= 0, the equivalent right integral for
/// w > 0 (their total vanishes because E g(G) uses the same quadrature).
inline SteinSolution stein_solution(const GridFunction& g) {
  const std::size_t n = g.size();
  if (n < 64) throw invalid_parameter("stein_solution: need at least 64 samples");
  const double h = g.step;
  if (std::abs(g.lo) > 30.0 || std::abs(g.hi()) > 30.0)
    throw numeric_error("stein_solution: |w| > 30 exceeds the stable range");

  std::vector<double> phi(n), gphi(n);
  for (std::size_t i = 0; i < n; ++i) {
    phi[i] = standard_normal_pdf(g.x(i));
    gphi[i] = g.values[i] * phi[i];
  }
  const auto cphi = detail::cumulative_left(phi, h);
  const auto cgphi = detail::cumulative_left(gphi, h);
  const double mu = cgphi.back() / cphi.back();

  std::vector<double> F(n);
  for (std::size_t i = 0; i < n; ++i) F[i] = (g.values[i] - mu) * phi[i];
  const auto left = detail::cumulative_left(F, h);
  const auto right = detail::cumulative_right(F, h);

  SteinSolution s;
  s.g = g;
  s.g_mean_gaussian = mu;
  s.f.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = g.x(i);
    const double e = std::exp(0.5 * w * w);
    s.f[i] = (w <= 0.0) ? e * left[i] : -e * right[i];
  }
  s.f1 = detail::derivative5(s.f, h);
  // 5-point second and third derivatives on the interior
  s.f2.assign(n, 0.0);
  s.f3.assign(n, 0.0);
  for (std::size_t i = 2; i + 2 < n; ++i) {
    s.f2[i] = (-s.f[i - 2] + 16.0 * s.f[i - 1] - 30.0 * s.f[i] + 16.0 * s.f[i + 1] -
               s.f[i + 2]) /
              (12.0 * h * h);
    s.f3[i] = (s.f[i + 2] - 2.0 * s.f[i + 1] + 2.0 * s.f[i - 1] - s.f[i - 2]) /
              (2.0 * h * h * h);
  }
  for (std::size_t i = SteinSolution::kBoundary; i + SteinSolution::kBoundary < n;
       ++i) {
    const double w = g.x(i);
    const double r = std::abs(s.f1[i] - w * s.f[i] - (g.values[i] - mu));
    s.residual = std::max(s.residual, r);
  }
  return s;
}

/// Measured norms of the Stein solution against the Lemma 2.2 bounds
/// (2||g'||, sqrt(2/pi)||g'||, 2||g'||) plus, when the second derivative of
/// g is supplied, the pointwise comparison curves for |f''| and |f'''|.
struct SteinBoundReport {
  double g_prime_sup = 0.0;
  double f_sup = 0.0, f_bound = 0.0;
  double f1_sup = 0.0, f1_bound = 0.0;
  double f2_sup = 0.0, f2_bound = 0.0;
  double residual = 0.0;

  bool has_curves = false;
  double f2_curve_min_slack = 0.0;  // min over interior of curve34(x) - |f''(x)|
  double f3_curve_min_slack = 0.0;  // min over interior of curve35(x) - |f'''(x)|

  bool lemma22_holds(double tol = 1e-6) const {
    return f_sup <= f_bound + tol && f1_sup <= f1_bound + tol &&
           f2_sup <= f2_bound + tol;
  }
};

inline SteinBoundReport stein_bound_report(
    const GridFunction& g,
    const std::optional<GridFunction>& g_second = std::nullopt) {
  const SteinSolution s = stein_solution(g);
  const std::size_t n = g.size();
  const auto gp = detail::derivative5(g.values, g.step);
  SteinBoundReport r;
  r.residual = s.residual;
  for (std::size_t i = SteinSolution::kBoundary; i + SteinSolution::kBoundary < n; ++i)
    r.g_prime_sup = std::max(r.g_prime_sup, std::abs(gp[i]));
  if (!std::isfinite(r.g_prime_sup) || r.g_prime_sup > 1e12)
    throw numeric_error("stein_bound_report: g has unbounded derivative");
  r.f_sup = s.interior_sup(s.f);
  r.f1_sup = s.interior_sup(s.f1);
  r.f2_sup = s.interior_sup(s.f2);
  r.f_bound = 2.0 * r.g_prime_sup;
  r.f1_bound = std::sqrt(2.0 / kPi) * r.g_prime_sup;
  r.f2_bound = 2.0 * r.g_prime_sup;

  if (g_second) {
    if (g_second->size() != n)
      throw invalid_parameter("stein_bound_report: g'' grid mismatch");
    r.has_curves = true;
    double h2_sup = 0.0;
    for (std::size_t i = SteinSolution::kBoundary; i + SteinSolution::kBoundary < n;
         ++i)
      h2_sup = std::max(h2_sup, std::abs(g_second->values[i]));
    // left cumulative of h phi for the conditional-tail-mean term
    std::vector<double> hphi(n);
    for (std::size_t i = 0; i < n; ++i)
      hphi[i] = g.values[i] * standard_normal_pdf(g.x(i));
    const auto chphi = detail::cumulative_left(hphi, g.step);
    const double mu = s.g_mean_gaussian;
    double slack2 = std::numeric_limits<double>::infinity();
    double slack3 = std::numeric_limits<double>::infinity();
    for (std::size_t i = SteinSolution::kBoundary; i + SteinSolution::kBoundary < n;
         ++i) {
      const double x = g.x(i);
      const double ax = std::abs(x);
      // index of -|x| on the grid
      const auto j = static_cast<std::size_t>(std::llround((-ax - g.lo) / g.step));
      const double tail_phi = standard_normal_sf(ax);
      const double tail_mean = (tail_phi > 0.0) ? chphi[j] / tail_phi : 0.0;
      const double mills = std::exp(0.5 * x * x) * tail_phi;
      const double curve2 = std::abs(gp[i]) +
                            2.0 * kSqrt2Pi * (1.0 + x * x) * mills *
                                (std::abs(mu) + std::abs(tail_mean)) +
                            std::abs(x * mu) + std::abs(x * g.values[i]);
      const double curve3 =
          2.0 * (std::sqrt(2.0 / kPi) + ax) * r.g_prime_sup + h2_sup;
      slack2 = std::min(slack2, curve2 - std::abs(s.f2[i]));
      slack3 = std::min(slack3, curve3 - std::abs(s.f3[i]));
    }
    r.f2_curve_min_slack = slack2;
    r.f3_curve_min_slack = slack3;
  }
  return r;
}

/// Closed-form zero-bias density p*(x) = E[V 1{V > x}] / sigma^2 for a
/// zero-mean spec, returned as an evaluator plus its smoothness breakpoints.
struct ZeroBiasPdf {
  std::function<double(double)> pdf;
  std::vector<double> breakpoints;
  double lo = 0.0, hi = 0.0;  // support window for quadrature
};

inline ZeroBiasPdf zero_bias_pdf(const DistributionSpec& spec) {
  if (std::abs(spec.mean()) > 1e-9)
    throw invalid_parameter("zero_bias: spec must have zero mean, got " +
                            std::to_string(spec.mean()));
  const double var = spec.variance();
  ZeroBiasPdf z;
  switch (spec.family()) {
    case Family::gaussian: {
      const double s = std::sqrt(var);
      z.pdf = [s](double x) { return standard_normal_pdf(x / s) / s; };
      z.lo = -42.0 * s;
      z.hi = 42.0 * s;
      return z;
    }
    case Family::uniform: {
      const auto sup = spec.quad_support();
      const double a = sup.second;  // symmetric: lo = -a
      z.pdf = [a](double x) {
        return (std::abs(x) <= a) ? 3.0 * (a * a - x * x) / (4.0 * a * a * a) : 0.0;
      };
      z.breakpoints = {-a, a};
      z.lo = -a;
      z.hi = a;
      return z;
    }
    case Family::laplace: {
      const double b = std::sqrt(0.5 * var);
      z.pdf = [b](double x) {
        const double ax = std::abs(x);
        return std::exp(-ax / b) * (ax + b) / (4.0 * b * b);
      };
      z.breakpoints = {0.0};
      z.lo = -760.0 * b;
      z.hi = 760.0 * b;
      return z;
    }
    case Family::logistic: {
      const double s = std::sqrt(3.0 * var) / kPi;
      z.pdf = [s, var](double x) {
        const double ax = std::abs(x);
        const double e = std::exp(-ax / s);
        return (ax * e / (1.0 + e) + s * std::log1p(e)) / var;
      };
      z.lo = -780.0 * s;
      z.hi = 780.0 * s;
      return z;
    }
    case Family::gaussian_mixture: {
      const auto sup = spec.quad_support();
      const DistributionSpec copy = spec;
      z.pdf = [copy, var](double x) {
        return copy.mixture_upper_partial_mean(x) / var;
      };
      z.lo = sup.first;
      z.hi = sup.second;
      return z;
    }
  }
  throw invalid_parameter("zero_bias: unsupported family");
}

/// Zero-bias density sampled on a grid (closed-form route).
inline GridDensity zero_bias_density(const DistributionSpec& spec,
                                     const GridSpec& grid = GridSpec{}) {
  const ZeroBiasPdf z = zero_bias_pdf(spec);
  const double L = grid.half_width;
  const std::size_t n =
      static_cast<std::size_t>(std::llround(2.0 * L / grid.step)) + 1;
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = z.pdf(-L + static_cast<double>(i) * grid.step);
  return GridDensity(-L, grid.step, std::move(v));
}

/// Zero-bias density of a grid density (quadrature route): cumulative of
/// t p(t) from the right, divided by the grid variance.
inline GridDensity zero_bias_density(const GridDensity& p) {
  const double mean = p.grid_mean();
  if (std::abs(mean) > 1e-6)
    throw invalid_parameter("zero_bias: grid density must have zero mean, got " +
                            std::to_string(mean));
  const double var = p.grid_variance();
  std::vector<double> tp(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) tp[i] = p.x(i) * p[i];
  auto cum = detail::cumulative_right(tp, p.step());
  for (auto& c : cum) c = std::max(0.0, c / var);
  return GridDensity(p.lo(), p.step(), std::move(cum));
}

/// |sigma^2 E f'(V*) - E[V f(V)]|, both sides by piecewise adaptive
/// quadrature over the analytic densities.
inline double zero_bias_identity_residual(const DistributionSpec& spec,
                                          const std::function<double(double)>& f,
                                          const std::function<double(double)>& fp) {
  const ZeroBiasPdf z = zero_bias_pdf(spec);
  const double var = spec.variance();
  const double lhs =
      var * integrate_piecewise([&](double x) { return fp(x) * z.pdf(x); }, z.lo,
                                z.hi, z.breakpoints, 1e-13);
  const auto sup = spec.quad_support();
  const double rhs = integrate_piecewise(
      [&](double x) { return x * f(x) * spec.density(x); }, sup.first, sup.second,
      spec.breakpoints(), 1e-13);
  return std::abs(lhs - rhs);
}

/// Lemma 3.1 data: the exact E Delta^2 under the independent coupling of
/// (xi_I, xi_I*) and the paper's chain of upper bounds ending at gamma/n.
struct CouplingReport {
  std::size_t n = 0;
  std::vector<double> weights;  // P(I = i) = Var(xi_i)
  double e_delta_sq = 0.0;
  double chain2 = 0.0;        // 2 sum (E xi^4/3 + (E xi^2)^2)
  double intermediate = 0.0;  // (4/3) sum E xi^4
  double gamma = 0.0;         // (4/3) J^2 M^{4/(4+delta0)}
  double bound = 0.0;         // gamma / n
};

inline CouplingReport coupling_delta_second_moment(
    const std::vector<DistributionSpec>& specs, std::size_t n, double delta0 = 1.0) {
  if (specs.empty() || n == 0)
    throw invalid_parameter("coupling: need at least one summand");
  std::vector<DistributionSpec> cycled;
  cycled.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = specs[i % specs.size()];
    if (std::abs(s.mean()) > 1e-9)
      throw invalid_parameter("coupling: summands must have zero mean: " +
                              s.describe());
    if (!s.has_finite_fisher())
      throw numeric_error("coupling: " + s.describe() +
                          " has infinite Fisher information");
    cycled.push_back(s);
  }
  const CumulantSummary cs = cumulant_summary(cycled, delta0);
  CouplingReport r;
  r.n = n;
  r.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = cycled[i];
    const double e2 = s.raw_moment(2) / cs.b_n;
    const double e4 = s.raw_moment(4) / sqr(cs.b_n);
    r.weights[i] = s.variance() / cs.b_n;
    const double zb_second = e4 / (3.0 * e2);  // E (xi*)^2
    r.e_delta_sq += r.weights[i] * (zb_second + e2);
    r.chain2 += 2.0 * (e4 / 3.0 + e2 * e2);
    r.intermediate += (4.0 / 3.0) * e4;
  }
  r.gamma = (4.0 / 3.0) * sqr(cs.j_bound) *
            std::pow(cs.m_bound, 4.0 / (4.0 + delta0));
  r.bound = r.gamma / static_cast<double>(n);
  return r;
}

}  // namespace cltlab
