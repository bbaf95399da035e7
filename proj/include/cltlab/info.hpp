#pragma once

#include <cmath>
#include <sstream>
#include <string>

#include "cltlab/common.hpp"
#include "cltlab/dist.hpp"
#include "cltlab/grid.hpp"

namespace cltlab {

// densities below this are treated as zero in p-weighted integrands
inline constexpr double kDensityFloor = 1e-300;
// p above this where q vanishes is an absolute-continuity violation
inline constexpr double kAbsContThreshold = 1e-8;

namespace detail {

inline void require_shared_grid(const GridDensity& p, const GridDensity& q,
                                const char* who) {
  if (p.size() != q.size() || std::abs(p.lo() - q.lo()) > 1e-12 ||
      std::abs(p.step() - q.step()) > 1e-15)
    throw invalid_parameter(std::string(who) + ": densities must share a grid");
}

}  // namespace detail

/// Differential entropy -int p ln p (nats), trapezoid rule, 0 ln 0 = 0.
inline double entropy(const GridDensity& p) {
  double h = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double v = p[i];
    if (v > kDensityFloor)
      h -= trapezoid_weight(i, p.size(), p.step()) * v * std::log(v);
  }
  return h;
}

struct KlResult {
  double value = 0.0;
  double dropped_mass = 0.0;  // p-mass skipped where q vanished below the floor
};

/// KL(p || q) in nats with the documented floor policy. Throws when q
/// vanishes where p is non-negligible, reporting the offending x-range.
inline KlResult kl_detailed(const GridDensity& p, const GridDensity& q) {
  detail::require_shared_grid(p, q, "kl");
  double acc = 0.0, dropped = 0.0;
  double bad_lo = 0.0, bad_hi = 0.0;
  bool bad = false;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = p[i], qi = q[i];
    if (pi <= kDensityFloor) continue;
    const double w = trapezoid_weight(i, p.size(), p.step());
    if (qi <= kDensityFloor) {
      if (pi > kAbsContThreshold) {
        if (!bad) bad_lo = p.x(i);
        bad_hi = p.x(i);
        bad = true;
      } else {
        dropped += w * pi;
      }
      continue;
    }
    acc += w * pi * std::log(pi / qi);
  }
  if (bad) {
    std::ostringstream os;
    os << "kl: absolute-continuity violation, q vanishes on [" << bad_lo << ", "
       << bad_hi << "] where p > " << kAbsContThreshold;
    throw numeric_error(os.str());
  }
  return {acc, dropped};
}

inline double kl(const GridDensity& p, const GridDensity& q) {
  return kl_detailed(p, q).value;
}

/// L1 distance int |p - q| (the paper's total-variation convention; 2 at
/// disjoint supports).
inline double total_variation_l1(const GridDensity& p, const GridDensity& q) {
  detail::require_shared_grid(p, q, "total_variation_l1");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    acc += trapezoid_weight(i, p.size(), p.step()) * std::abs(p[i] - q[i]);
  return acc;
}

/// Everything about one (p, q) pair in one place.
struct DivergenceReport {
  double h_p = 0.0;
  double h_q = 0.0;
  double kl_pq = 0.0;
  double kl_qp = 0.0;
  double d = 0.0;              // symmetric KL
  double l1 = 0.0;             // int |p - q|
  double pinsker_slack = 0.0;  // kl_pq - l1^2 / 2
  double tail_mass_dropped = 0.0;

  std::string csv_header() const {
    return "h_p,h_q,kl_pq,kl_qp,d,l1,pinsker_slack,tail_mass_dropped";
  }
  std::string csv_row() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g",
                  h_p, h_q, kl_pq, kl_qp, d, l1, pinsker_slack, tail_mass_dropped);
    return buf;
  }
};

inline DivergenceReport symmetric_kl(const GridDensity& p, const GridDensity& q) {
  DivergenceReport r;
  const KlResult pq = kl_detailed(p, q);
  const KlResult qp = kl_detailed(q, p);
  r.h_p = entropy(p);
  r.h_q = entropy(q);
  r.kl_pq = pq.value;
  r.kl_qp = qp.value;
  r.d = pq.value + qp.value;
  r.l1 = total_variation_l1(p, q);
  r.pinsker_slack = r.kl_pq - 0.5 * r.l1 * r.l1;
  r.tail_mass_dropped = pq.dropped_mass + qp.dropped_mass;
  return r;
}

/// h((X+Y)/sqrt(2)) - (h(X)+h(Y))/2, >= 0 with equality iff both Gaussian
/// with equal variance. Requires equal variances.
inline double entropy_jump(const DistributionSpec& x, const DistributionSpec& y,
                           const GridSpec& grid = GridSpec::for_n(2)) {
  const double vx = x.variance(), vy = y.variance();
  if (std::abs(vx - vy) > 1e-9 * std::max(vx, vy))
    throw invalid_parameter("entropy_jump: variances must match (" +
                            std::to_string(vx) + " vs " + std::to_string(vy) + ")");
  const double L = grid.half_width, step = grid.step;
  const GridDensity sum =
      scaled_sum_density({x, y}, 2, std::sqrt(2.0), grid);
  const GridDensity px = discretize(x, -L, L, step);
  const GridDensity py = discretize(y, -L, L, step);
  return entropy(sum) - 0.5 * (entropy(px) + entropy(py));
}

/// Closed-form symmetric KL between the AWGN joint law (X, X+N) and the
/// product of its marginals; equals the SNR var_in/var_noise exactly.
inline double awgn_symmetric_divergence(double var_in, double var_noise) {
  if (var_in < 0.0 || !(var_noise > 0.0))
    throw invalid_parameter("awgn_symmetric_divergence: need var_in >= 0, var_noise > 0");
  if (var_in == 0.0) return 0.0;  // independent joint, zero divergence limit
  // joint covariance [[a, a], [a, a+s]]; product of marginals diag(a, a+s)
  const double a = var_in, s = var_noise;
  const double det_joint = a * (a + s) - a * a;
  const double det_prod = a * (a + s);
  const double tr_prodinv_joint = a / a + (a + s) / (a + s);
  const double tr_jointinv_prod = ((a + s) * a + a * (a + s)) / det_joint;
  const double kl_joint_prod =
      0.5 * (tr_prodinv_joint - 2.0 + std::log(det_prod / det_joint));
  const double kl_prod_joint =
      0.5 * (tr_jointinv_prod - 2.0 + std::log(det_joint / det_prod));
  return kl_joint_prod + kl_prod_joint;
}

struct Lemma41Report {
  double d_kl = 0.0;   // KL(X || G_X)
  double bound = 0.0;  // 0.5 ln(Var J)
  double slack = 0.0;  // bound - d_kl
};

/// D(X) <= 0.5 ln(Var(X) J(X)) for zero-mean X with finite Fisher information.
inline Lemma41Report lemma41_check(const DistributionSpec& spec,
                                   double half_width = 16.0,
                                   double step = 1.0 / 1024.0) {
  if (std::abs(spec.mean()) > 1e-9)
    throw invalid_parameter("lemma41_check: spec must have zero mean");
  const double j = spec.fisher_information();  // throws for uniform
  const double var = spec.variance();
  const GridDensity px = discretize(spec, -half_width, half_width, step);
  const GridDensity gx =
      discretize(DistributionSpec::gaussian(spec.mean(), var), -half_width,
                 half_width, step);
  Lemma41Report r;
  r.d_kl = kl(px, gx);
  r.bound = 0.5 * std::log(var * j);
  r.slack = r.bound - r.d_kl;
  return r;
}

}  // namespace cltlab
