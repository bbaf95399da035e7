#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cltlab/common.hpp"
#include "cltlab/dist.hpp"
#include "cltlab/fft.hpp"

namespace cltlab {

/// A real function sampled on a uniform grid; values may be signed.
struct GridFunction {
  double lo = 0.0;
  double step = 0.0;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double x(std::size_t i) const { return lo + static_cast<double>(i) * step; }
  double hi() const { return values.empty() ? lo : x(values.size() - 1); }

  static GridFunction sample(double lo, double hi, double step,
                             const std::function<double(double)>& f) {
    GridFunction g;
    g.lo = lo;
    g.step = step;
    const std::size_t n = static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
    g.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) g.values[i] = f(g.x(i));
    return g;
  }
};

/// Nonnegative, normalized density on a uniform grid.
///
/// Construction clips sub-fp negative ripple, verifies the raw trapezoid mass
/// and rescales it to exactly one; the raw mass and clipped mass stay
/// available as diagnostics. Immutable after construction.
class GridDensity {
 public:
  static constexpr double kMassTol = 1e-6;

  GridDensity(double lo, double step, std::vector<double> values)
      : lo_(lo), step_(step), values_(std::move(values)) {
    if (values_.size() < 64)
      throw invalid_parameter("GridDensity: need at least 64 grid points, got " +
                              std::to_string(values_.size()));
    if (!(step_ > 0.0)) throw invalid_parameter("GridDensity: step must be > 0");
    double clipped = 0.0;
    for (auto& v : values_) {
      if (v < 0.0) {
        if (v < -1e-9)
          throw numeric_error("GridDensity: negative density sample " +
                              std::to_string(v));
        clipped -= v;
        v = 0.0;
      }
    }
    clipped_mass_ = clipped * step_;
    raw_mass_ = trapezoid(values_, step_);
    if (std::abs(raw_mass_ - 1.0) > 1e-3)
      throw numeric_error("GridDensity: sampled mass " + std::to_string(raw_mass_) +
                          " too far from 1 (domain too small?)");
    const double inv = 1.0 / raw_mass_;
    for (auto& v : values_) v *= inv;
  }

  double lo() const { return lo_; }
  double hi() const { return x(values_.size() - 1); }
  double step() const { return step_; }
  std::size_t size() const { return values_.size(); }
  double x(std::size_t i) const { return lo_ + static_cast<double>(i) * step_; }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::vector<double>& values() const { return values_; }

  /// Trapezoid mass (exactly 1 up to fp after construction).
  double mass() const { return trapezoid(values_, step_); }
  double raw_mass() const { return raw_mass_; }
  double clipped_mass() const { return clipped_mass_; }
  double dropped_tail_mass() const { return dropped_tail_mass_; }

  double grid_mean() const {
    double m = 0.0;
    for (std::size_t i = 0; i < size(); ++i)
      m += trapezoid_weight(i, size(), step_) * x(i) * values_[i];
    return m;
  }

  double grid_variance() const {
    const double m = grid_mean();
    double v = 0.0;
    for (std::size_t i = 0; i < size(); ++i)
      v += trapezoid_weight(i, size(), step_) * sqr(x(i) - m) * values_[i];
    return v;
  }

  GridFunction as_function() const { return GridFunction{lo_, step_, values_}; }

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw numeric_error("cannot open " + path + " for writing");
    out << "x,density\n";
    char buf[64];
    for (std::size_t i = 0; i < size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", x(i), values_[i]);
      out << buf;
    }
  }

  static GridDensity read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw numeric_error("cannot open " + path);
    std::string line;
    std::getline(in, line);  // header
    std::vector<double> xs, vs;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto comma = line.find(',');
      xs.push_back(std::stod(line.substr(0, comma)));
      vs.push_back(std::stod(line.substr(comma + 1)));
    }
    if (xs.size() < 2) throw numeric_error("read_csv: too few rows in " + path);
    const double step = xs[1] - xs[0];
    for (std::size_t i = 1; i < xs.size(); ++i)
      if (std::abs(xs[i] - xs[0] - step * static_cast<double>(i)) > 1e-9 * (1.0 + std::abs(xs[i])))
        throw numeric_error("read_csv: non-uniform grid in " + path);
    return GridDensity(xs[0], step, std::move(vs));
  }

 private:
  friend GridDensity convolve_pair(const GridDensity&, const GridDensity&);
  friend GridDensity crop_density(const GridDensity&, double, double);

  double lo_;
  double step_;
  std::vector<double> values_;
  double raw_mass_ = 1.0;
  double clipped_mass_ = 0.0;
  double dropped_tail_mass_ = 0.0;
};

/// Working-grid policy: [-L, L] with L = max(12, 4 sqrt(ln n) + 8) rounded up
/// to a step multiple, step 2^-8. The truncation sets B(u) reach u sqrt(ln n)
/// with u < sqrt(2), so the domain dominates them with room for tails.
struct GridSpec {
  double half_width = 12.0;
  double step = 1.0 / 256.0;

  static GridSpec for_n(std::size_t n, double step = 1.0 / 256.0) {
    GridSpec g;
    g.step = step;
    const double raw =
        std::max(12.0, 4.0 * std::sqrt(std::log(static_cast<double>(std::max<std::size_t>(n, 2)))) + 8.0);
    g.half_width = std::ceil(raw / step) * step;
    return g;
  }
};

/// Pointwise-exact sampling of an analytic density. Nodes whose sampling cell
/// straddles a density jump take the exact cell average from the CDF, which
/// keeps the trapezoid mass exact for compact-support families.
inline GridDensity discretize(const DistributionSpec& spec, double lo, double hi,
                              double step) {
  if (!(hi > lo) || !(step > 0.0))
    throw invalid_parameter("discretize: need lo < hi and step > 0");
  const double coverage = spec.cdf(hi) - spec.cdf(lo);
  if (coverage < 1.0 - 1e-9) {
    std::ostringstream os;
    os << "discretize: [" << lo << ", " << hi << "] captures only " << coverage
       << " of the mass of " << spec.describe();
    throw numeric_error(os.str());
  }
  const std::size_t n = static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
  std::vector<double> v(n);
  const auto jumps = (spec.family() == Family::uniform) ? spec.breakpoints()
                                                        : std::vector<double>{};
  for (std::size_t i = 0; i < n; ++i) {
    const double x = lo + static_cast<double>(i) * step;
    bool near_jump = false;
    for (double j : jumps)
      if (std::abs(x - j) <= 0.5 * step) near_jump = true;
    v[i] = near_jump ? (spec.cdf(x + 0.5 * step) - spec.cdf(x - 0.5 * step)) / step
                     : spec.density(x);
  }
  return GridDensity(lo, step, std::move(v));
}

inline GridDensity discretize(const DistributionSpec& spec, const GridSpec& grid) {
  return discretize(spec, -grid.half_width, grid.half_width, grid.step);
}

/// Density of the sum of independent variables with laws p and q.
/// Zero-padded fast convolution on the occupied sample ranges; the output
/// lives on the combined domain. Negative fp ripple is clipped and the result
/// renormalized (recorded in the diagnostics).
inline GridDensity convolve_pair(const GridDensity& p, const GridDensity& q) {
  if (std::abs(p.step() - q.step()) > 1e-12 * p.step())
    throw invalid_parameter("convolve_pair: step mismatch (" +
                            std::to_string(p.step()) + " vs " +
                            std::to_string(q.step()) + ")");
  const auto occupied = [](const GridDensity& d) -> std::pair<std::size_t, std::size_t> {
    std::size_t a = 0, b = d.size() - 1;
    while (a < b && d[a] == 0.0) ++a;
    while (b > a && d[b] == 0.0) --b;
    return {a, b};
  };
  const auto [pa, pb] = occupied(p);
  const auto [qa, qb] = occupied(q);
  if (p[pa] == 0.0 || q[qa] == 0.0)
    throw numeric_error("convolve_pair: empty density");
  std::vector<double> av(p.values().begin() + pa, p.values().begin() + pb + 1);
  std::vector<double> bv(q.values().begin() + qa, q.values().begin() + qb + 1);
  std::vector<double> c = fft_convolve(av, bv);
  for (auto& x : c) x *= p.step();
  const double out_lo = p.lo() + q.lo() + static_cast<double>(pa + qa) * p.step();
  return GridDensity(out_lo, p.step(), std::move(c));
}

/// Re-window a density to [lo, hi] (grid-aligned): overlap is copied, the
/// rest zero-padded; cropped tail mass is recorded and the result
/// renormalized.
inline GridDensity crop_density(const GridDensity& d, double lo, double hi) {
  const double off = (lo - d.lo()) / d.step();
  if (std::abs(off - std::llround(off)) > 1e-6)
    throw invalid_parameter("crop_density: window not grid-aligned");
  const long i0 = std::llround(off);
  const long count = std::llround((hi - lo) / d.step()) + 1;
  std::vector<double> v(static_cast<std::size_t>(count), 0.0);
  bool any = false;
  for (long k = 0; k < count; ++k) {
    const long src = i0 + k;
    if (src >= 0 && src < static_cast<long>(d.size())) {
      v[static_cast<std::size_t>(k)] = d[static_cast<std::size_t>(src)];
      any = true;
    }
  }
  if (!any) throw numeric_error("crop_density: window does not meet the density");
  const double kept = trapezoid(v, d.step());
  GridDensity out(lo, d.step(), std::move(v));
  out.dropped_tail_mass_ = std::max(0.0, 1.0 - kept);
  return out;
}

namespace detail {

inline GridDensity convolve_and_crop(const GridDensity& a, const GridDensity& b,
                                     double lo, double hi) {
  return crop_density(convolve_pair(a, b), lo, hi);
}

}  // namespace detail

/// Density of (X_1 + ... + X_n) / divisor on [-L, L]. Identical summands use
/// binary doubling (log2 n transforms); heterogeneous lists left-fold.
inline GridDensity scaled_sum_density(const std::vector<DistributionSpec>& specs,
                                      std::size_t n, double divisor,
                                      const GridSpec& grid) {
  if (specs.empty() || n == 0)
    throw invalid_parameter("scaled_sum_density: need at least one summand");
  const double L = grid.half_width, step = grid.step;
  if (std::abs(L / step - std::llround(L / step)) > 1e-9)
    throw invalid_parameter("scaled_sum_density: half-width must be a step multiple");
  const double c = 1.0 / divisor;

  if (specs.size() == 1) {
    const GridDensity base = discretize(specs[0].scaled(c), -L, L, step);
    if (n == 1) return base;
    // exponentiation by squaring over the convolution monoid
    std::size_t k = n;
    GridDensity acc = base;  // placeholder; tracks whether a factor was taken
    bool have_acc = false;
    GridDensity sq = base;
    while (true) {
      if (k & 1) {
        acc = have_acc ? detail::convolve_and_crop(acc, sq, -L, L) : sq;
        have_acc = true;
      }
      k >>= 1;
      if (k == 0) break;
      sq = detail::convolve_and_crop(sq, sq, -L, L);
    }
    return acc;
  }

  GridDensity acc = discretize(specs[0].scaled(c), -L, L, step);
  for (std::size_t i = 1; i < n; ++i) {
    const auto& s = specs[i % specs.size()];
    const GridDensity next = discretize(s.scaled(c), -L, L, step);
    acc = detail::convolve_and_crop(acc, next, -L, L);
  }
  return acc;
}

/// Density of W_n = sum X_i / sqrt(B_n); specs are cycled to length n.
inline GridDensity normalized_sum_density(const std::vector<DistributionSpec>& specs,
                                          std::size_t n, const GridSpec& grid) {
  if (specs.empty() || n == 0)
    throw invalid_parameter("normalized_sum_density: need at least one summand");
  double b_n = 0.0;
  for (std::size_t i = 0; i < n; ++i) b_n += specs[i % specs.size()].variance();
  return scaled_sum_density(specs, n, std::sqrt(b_n), grid);
}

inline GridDensity normalized_sum_density(const std::vector<DistributionSpec>& specs,
                                          std::size_t n) {
  return normalized_sum_density(specs, n, GridSpec::for_n(n));
}

/// Standard normal density sampled on the same grid as `like`.
inline GridDensity standard_normal_grid(const GridDensity& like) {
  std::vector<double> v(like.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = standard_normal_pdf(like.x(i));
  return GridDensity(like.lo(), like.step(), std::move(v));
}

inline GridDensity standard_normal_grid(const GridSpec& grid) {
  const std::size_t n =
      static_cast<std::size_t>(std::llround(2.0 * grid.half_width / grid.step)) + 1;
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = standard_normal_pdf(-grid.half_width + static_cast<double>(i) * grid.step);
  return GridDensity(-grid.half_width, grid.step, std::move(v));
}

}  // namespace cltlab
