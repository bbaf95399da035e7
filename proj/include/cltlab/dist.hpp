#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cltlab/common.hpp"

namespace cltlab {

enum class Family { gaussian, uniform, laplace, gaussian_mixture, logistic };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::gaussian: return "gaussian";
    case Family::uniform: return "uniform";
    case Family::laplace: return "laplace";
    case Family::gaussian_mixture: return "gaussian_mixture";
    case Family::logistic: return "logistic";
  }
  return "?";
}

namespace detail {

/// Dirichlet eta(p) = sum (-1)^{k-1} k^{-p}; alternating series, the error is
/// below the first omitted term.
inline double dirichlet_eta(double p) {
  double sum = 0.0, sign = 1.0;
  for (int k = 1; k < 200000; ++k) {
    const double term = sign * std::pow(static_cast<double>(k), -p);
    sum += term;
    if (std::abs(term) < 1e-18) break;
    sign = -sign;
  }
  return sum;
}

/// E|X|^p for X ~ N(mu, sigma^2); closed form at mu=0, quadrature otherwise.
inline double gaussian_abs_moment(double mu, double sigma, double p) {
  if (std::abs(mu) < 1e-14 * (1.0 + sigma)) {
    return std::pow(sigma, p) * std::pow(2.0, 0.5 * p) *
           std::tgamma(0.5 * (p + 1.0)) / std::sqrt(kPi);
  }
  const double lo = mu - 42.0 * sigma, hi = mu + 42.0 * sigma;
  const std::vector<double> breaks{0.0};
  return integrate_piecewise(
      [&](double x) {
        const double z = (x - mu) / sigma;
        return std::pow(std::abs(x), p) * std::exp(-0.5 * z * z) / (sigma * kSqrt2Pi);
      },
      lo, hi, breaks, 1e-14);
}

inline double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace detail

/// Gaussian-minorization witness: density(x) >= l1 * exp(-l2 x^2 / 2) on R.
struct MinorizationParams {
  double l1 = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;  // max{1, -ln(l1 sqrt(2 pi / l2))}
  double delta1 = 1.0;
  double a_n_fraction = 1.0;
  bool delta1_above_quarter = true;
};

/// Analytic description of one independent summand.
///
/// All accessors are closed-form except where noted; specs are immutable
/// values and safe to share across threads.
class DistributionSpec {
 public:
  static DistributionSpec gaussian(double mean, double variance) {
    if (!(variance > 0.0) || !std::isfinite(variance))
      throw invalid_parameter("gaussian: variance must be > 0, got " +
                              std::to_string(variance));
    if (!std::isfinite(mean))
      throw invalid_parameter("gaussian: mean must be finite");
    DistributionSpec s(Family::gaussian);
    s.a_ = mean;
    s.b_ = variance;
    s.full_support_ = true;
    return s;
  }

  static DistributionSpec uniform(double lo, double hi) {
    if (!(lo < hi))
      throw invalid_parameter("uniform: lo must be < hi, got [" +
                              std::to_string(lo) + ", " + std::to_string(hi) + "]");
    DistributionSpec s(Family::uniform);
    s.a_ = lo;
    s.b_ = hi;
    s.full_support_ = false;
    return s;
  }

  static DistributionSpec laplace(double scale) {
    if (!(scale > 0.0))
      throw invalid_parameter("laplace: scale must be > 0, got " +
                              std::to_string(scale));
    DistributionSpec s(Family::laplace);
    s.a_ = scale;
    s.full_support_ = true;
    return s;
  }

  static DistributionSpec logistic(double scale) {
    if (!(scale > 0.0))
      throw invalid_parameter("logistic: scale must be > 0, got " +
                              std::to_string(scale));
    DistributionSpec s(Family::logistic);
    s.a_ = scale;
    s.full_support_ = true;
    return s;
  }

  static DistributionSpec gaussian_mixture(std::vector<double> weights,
                                           std::vector<double> means,
                                           std::vector<double> variances) {
    if (weights.empty() || weights.size() != means.size() ||
        weights.size() != variances.size())
      throw invalid_parameter(
          "gaussian_mixture: weights/means/variances must be equal-length and "
          "non-empty");
    double wsum = 0.0;
    for (double w : weights) {
      if (!(w > 0.0)) throw invalid_parameter("gaussian_mixture: weights must be > 0");
      wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-9)
      throw invalid_parameter("gaussian_mixture: weights must sum to 1, got " +
                              std::to_string(wsum));
    for (double v : variances)
      if (!(v > 0.0))
        throw invalid_parameter("gaussian_mixture: variances must be > 0");
    DistributionSpec s(Family::gaussian_mixture);
    s.w_ = std::move(weights);
    s.mu_ = std::move(means);
    s.var_ = std::move(variances);
    s.full_support_ = true;
    return s;
  }

  Family family() const { return family_; }
  bool full_support() const { return full_support_; }

  double mean() const {
    switch (family_) {
      case Family::gaussian: return a_;
      case Family::uniform: return 0.5 * (a_ + b_);
      case Family::laplace:
      case Family::logistic: return 0.0;
      case Family::gaussian_mixture: {
        double m = 0.0;
        for (std::size_t i = 0; i < w_.size(); ++i) m += w_[i] * mu_[i];
        return m;
      }
    }
    return 0.0;
  }

  double variance() const {
    switch (family_) {
      case Family::gaussian: return b_;
      case Family::uniform: return sqr(b_ - a_) / 12.0;
      case Family::laplace: return 2.0 * a_ * a_;
      case Family::logistic: return kPi * kPi * a_ * a_ / 3.0;
      case Family::gaussian_mixture: {
        double m = mean(), s = 0.0;
        for (std::size_t i = 0; i < w_.size(); ++i)
          s += w_[i] * (sqr(mu_[i]) + var_[i]);
        return s - m * m;
      }
    }
    return 0.0;
  }

  double density(double x) const {
    switch (family_) {
      case Family::gaussian: {
        const double s = std::sqrt(b_);
        return standard_normal_pdf((x - a_) / s) / s;
      }
      case Family::uniform:
        return (x >= a_ && x <= b_) ? 1.0 / (b_ - a_) : 0.0;
      case Family::laplace:
        return std::exp(-std::abs(x) / a_) / (2.0 * a_);
      case Family::logistic: {
        // 1/(4s) sech^2(x/(2s)), evaluated tail-stably
        const double t = std::abs(x) / a_;
        const double e = std::exp(-t);
        return e / (a_ * sqr(1.0 + e));
      }
      case Family::gaussian_mixture: {
        double d = 0.0;
        for (std::size_t i = 0; i < w_.size(); ++i) {
          const double s = std::sqrt(var_[i]);
          d += w_[i] * standard_normal_pdf((x - mu_[i]) / s) / s;
        }
        return d;
      }
    }
    return 0.0;
  }

  /// ln density(x); stable far into the tails (used by the minorization search).
  double log_density(double x) const {
    switch (family_) {
      case Family::gaussian:
        return -0.5 * sqr(x - a_) / b_ - 0.5 * std::log(b_) - kLogSqrt2Pi;
      case Family::uniform:
        return (x >= a_ && x <= b_) ? -std::log(b_ - a_)
                                    : -std::numeric_limits<double>::infinity();
      case Family::laplace:
        return -std::abs(x) / a_ - std::log(2.0 * a_);
      case Family::logistic: {
        const double t = std::abs(x) / a_;
        return -t - 2.0 * std::log1p(std::exp(-t)) - std::log(a_);
      }
      case Family::gaussian_mixture: {
        double m = -std::numeric_limits<double>::infinity();
        std::vector<double> t(w_.size());
        for (std::size_t i = 0; i < w_.size(); ++i) {
          t[i] = -0.5 * sqr(x - mu_[i]) / var_[i] + std::log(w_[i]) -
                 0.5 * std::log(var_[i]);
          m = std::max(m, t[i]);
        }
        double acc = 0.0;
        for (double ti : t) acc += std::exp(ti - m);
        return m + std::log(acc) - kLogSqrt2Pi;
      }
    }
    return 0.0;
  }

  /// Score p'/p. Undefined at uniform kinks (throws).
  double score(double x) const {
    switch (family_) {
      case Family::gaussian: return -(x - a_) / b_;
      case Family::uniform:
        throw numeric_error("uniform: score undefined (density kinks)");
      case Family::laplace: return (x >= 0.0 ? -1.0 : 1.0) / a_;
      case Family::logistic: return -std::tanh(0.5 * x / a_) / a_;
      case Family::gaussian_mixture: {
        double m = -std::numeric_limits<double>::infinity();
        std::vector<double> t(w_.size());
        for (std::size_t i = 0; i < w_.size(); ++i) {
          t[i] = -0.5 * sqr(x - mu_[i]) / var_[i] + std::log(w_[i]) -
                 0.5 * std::log(var_[i]);
          m = std::max(m, t[i]);
        }
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < w_.size(); ++i) {
          const double e = std::exp(t[i] - m);
          den += e;
          num += e * (-(x - mu_[i]) / var_[i]);
        }
        return num / den;
      }
    }
    return 0.0;
  }

  double cdf(double x) const {
    switch (family_) {
      case Family::gaussian:
        return standard_normal_cdf((x - a_) / std::sqrt(b_));
      case Family::uniform:
        if (x <= a_) return 0.0;
        if (x >= b_) return 1.0;
        return (x - a_) / (b_ - a_);
      case Family::laplace:
        return x < 0.0 ? 0.5 * std::exp(x / a_) : 1.0 - 0.5 * std::exp(-x / a_);
      case Family::logistic:
        return 1.0 / (1.0 + std::exp(-x / a_));
      case Family::gaussian_mixture: {
        double c = 0.0;
        for (std::size_t i = 0; i < w_.size(); ++i)
          c += w_[i] * standard_normal_cdf((x - mu_[i]) / std::sqrt(var_[i]));
        return c;
      }
    }
    return 0.0;
  }

  /// Raw moment E X^k for k in 0..6, closed form.
  double raw_moment(int k) const {
    if (k < 0 || k > 6)
      throw invalid_parameter("raw_moment: order must be in 0..6, got " +
                              std::to_string(k));
    switch (family_) {
      case Family::gaussian:
        return gaussian_raw_moment(a_, b_, k);
      case Family::uniform: {
        // (hi^{k+1} - lo^{k+1}) / ((k+1)(hi - lo))
        return (std::pow(b_, k + 1) - std::pow(a_, k + 1)) /
               ((k + 1) * (b_ - a_));
      }
      case Family::laplace: {
        if (k % 2 == 1) return 0.0;
        double f = 1.0;
        for (int i = 2; i <= k; ++i) f *= i;
        return f * std::pow(a_, k);
      }
      case Family::logistic: {
        if (k % 2 == 1) return 0.0;
        if (k == 0) return 1.0;
        static const double eta2 = kPi * kPi / 12.0;
        static const double eta4 = 7.0 * std::pow(kPi, 4) / 720.0;
        static const double eta6 = 31.0 * std::pow(kPi, 6) / 30240.0;
        const double eta = (k == 2) ? eta2 : (k == 4) ? eta4 : eta6;
        double f = 1.0;
        for (int i = 2; i <= k; ++i) f *= i;
        return 2.0 * f * eta * std::pow(a_, k);
      }
      case Family::gaussian_mixture: {
        double m = 0.0;
        for (std::size_t i = 0; i < w_.size(); ++i)
          m += w_[i] * gaussian_raw_moment(mu_[i], var_[i], k);
        return m;
      }
    }
    return 0.0;
  }

  /// Absolute moment E|X|^p for real p > 0.
  double abs_moment(double p) const {
    switch (family_) {
      case Family::gaussian:
        return detail::gaussian_abs_moment(a_, std::sqrt(b_), p);
      case Family::uniform: {
        const double c = (p + 1.0) * (b_ - a_);
        if (a_ >= 0.0) return (std::pow(b_, p + 1.0) - std::pow(a_, p + 1.0)) / c;
        if (b_ <= 0.0)
          return (std::pow(-a_, p + 1.0) - std::pow(-b_, p + 1.0)) / c;
        return (std::pow(-a_, p + 1.0) + std::pow(b_, p + 1.0)) / c;
      }
      case Family::laplace:
        return std::tgamma(p + 1.0) * std::pow(a_, p);
      case Family::logistic:
        return 2.0 * std::tgamma(p + 1.0) * detail::dirichlet_eta(p) *
               std::pow(a_, p);
      case Family::gaussian_mixture: {
        double m = 0.0;
        for (std::size_t i = 0; i < w_.size(); ++i)
          m += w_[i] * detail::gaussian_abs_moment(mu_[i], std::sqrt(var_[i]), p);
        return m;
      }
    }
    return 0.0;
  }

  bool has_finite_fisher() const { return family_ != Family::uniform; }

  /// J(X) = int p'^2 / p. Closed form except for mixtures (quadrature).
  /// Throws for the uniform family (score undefined at the kinks).
  double fisher_information() const {
    switch (family_) {
      case Family::gaussian: return 1.0 / b_;
      case Family::uniform:
        throw numeric_error("uniform: infinite Fisher information");
      case Family::laplace: return 1.0 / (a_ * a_);
      case Family::logistic: return 1.0 / (3.0 * a_ * a_);
      case Family::gaussian_mixture: {
        double smax = 0.0, lo = mu_[0], hi = mu_[0];
        for (std::size_t i = 0; i < w_.size(); ++i) {
          smax = std::max(smax, std::sqrt(var_[i]));
          lo = std::min(lo, mu_[i]);
          hi = std::max(hi, mu_[i]);
        }
        lo -= 42.0 * smax;
        hi += 42.0 * smax;
        return integrate_piecewise(
            [this](double x) {
              const double d = density(x);
              return d > 0.0 ? sqr(score(x)) * d : 0.0;
            },
            lo, hi, mu_, 1e-13);
      }
    }
    return 0.0;
  }

  /// Upper bound on the total variation of the density (Lemma 2.5 condition 3):
  /// sqrt(J) for finite-J families, the exact 2/(hi-lo) for the uniform.
  double density_total_variation_bound() const {
    if (family_ == Family::uniform) return 2.0 / (b_ - a_);
    return std::sqrt(fisher_information());
  }

  /// Practical support window: covers all but ~1e-340 of the mass.
  std::pair<double, double> quad_support() const {
    switch (family_) {
      case Family::gaussian: {
        const double s = std::sqrt(b_);
        return {a_ - 42.0 * s, a_ + 42.0 * s};
      }
      case Family::uniform: return {a_, b_};
      case Family::laplace: return {-760.0 * a_, 760.0 * a_};
      case Family::logistic: return {-780.0 * a_, 780.0 * a_};
      case Family::gaussian_mixture: {
        double lo = mu_[0], hi = mu_[0];
        for (std::size_t i = 0; i < w_.size(); ++i) {
          const double s = std::sqrt(var_[i]);
          lo = std::min(lo, mu_[i] - 42.0 * s);
          hi = std::max(hi, mu_[i] + 42.0 * s);
        }
        return {lo, hi};
      }
    }
    return {0.0, 0.0};
  }

  /// Abscissae where the density or its derivative is non-smooth.
  std::vector<double> breakpoints() const {
    switch (family_) {
      case Family::uniform: return {a_, b_};
      case Family::laplace: return {0.0};
      default: return {};
    }
  }

  /// E[X 1{X > x}] for the mixture family: sum_i w_i (mu_i Q(z_i) + s_i phi(z_i)).
  double mixture_upper_partial_mean(double x) const {
    if (family_ != Family::gaussian_mixture)
      throw invalid_parameter("mixture_upper_partial_mean: not a mixture");
    double acc = 0.0;
    for (std::size_t i = 0; i < w_.size(); ++i) {
      const double s = std::sqrt(var_[i]);
      const double z = (x - mu_[i]) / s;
      acc += w_[i] * (mu_[i] * standard_normal_sf(z) + s * standard_normal_pdf(z));
    }
    return acc;
  }

  /// Natural quadratic decay dominator for the minorization bound; nullopt
  /// for compact-support families. Gaussian tails force l2 strictly above
  /// 1/sigma^2 when the dominating component is off-center.
  std::optional<double> natural_minorization_decay() const {
    switch (family_) {
      case Family::gaussian:
        return (std::abs(a_) < 1e-14) ? 1.0 / b_ : 2.0 / b_;
      case Family::uniform: return std::nullopt;
      case Family::laplace:
      case Family::logistic: return 1.0 / (a_ * a_);
      case Family::gaussian_mixture: {
        double vmax = 0.0;
        for (double v : var_) vmax = std::max(vmax, v);
        bool centered_widest = false;
        for (std::size_t i = 0; i < w_.size(); ++i)
          if (var_[i] == vmax && std::abs(mu_[i]) < 1e-14) centered_widest = true;
        return centered_widest ? 1.0 / vmax : 2.0 / vmax;
      }
    }
    return std::nullopt;
  }

  /// Spec of c*X for c > 0; every family is closed under positive scaling.
  DistributionSpec scaled(double c) const {
    if (!(c > 0.0)) throw invalid_parameter("scaled: factor must be > 0");
    switch (family_) {
      case Family::gaussian: return gaussian(c * a_, c * c * b_);
      case Family::uniform: return uniform(c * a_, c * b_);
      case Family::laplace: return laplace(c * a_);
      case Family::logistic: return logistic(c * a_);
      case Family::gaussian_mixture: {
        std::vector<double> mu(mu_), var(var_);
        for (auto& m : mu) m *= c;
        for (auto& v : var) v *= c * c;
        return gaussian_mixture(w_, std::move(mu), std::move(var));
      }
    }
    return *this;
  }

  std::string describe() const {
    std::ostringstream os;
    os << family_name(family_) << "(";
    switch (family_) {
      case Family::gaussian:
      case Family::uniform: os << a_ << ", " << b_; break;
      case Family::laplace:
      case Family::logistic: os << a_; break;
      case Family::gaussian_mixture:
        for (std::size_t i = 0; i < w_.size(); ++i) {
          if (i) os << "; ";
          os << w_[i] << "," << mu_[i] << "," << var_[i];
        }
        break;
    }
    os << ")";
    return os.str();
  }

 private:
  explicit DistributionSpec(Family f) : family_(f) {}

  static double gaussian_raw_moment(double mu, double var, int k) {
    // central moments of N(0, var): 1, 0, var, 0, 3 var^2, 0, 15 var^3
    const double c[7] = {1.0, 0.0, var,       0.0,
                         3.0 * var * var, 0.0, 15.0 * var * var * var};
    double m = 0.0;
    for (int j = 0; j <= k; ++j)
      m += detail::binomial(k, j) * std::pow(mu, k - j) * c[j];
    return m;
  }

  Family family_;
  double a_ = 0.0, b_ = 0.0;          // family-specific scalar parameters
  std::vector<double> w_, mu_, var_;  // mixture components
  bool full_support_ = false;
};

/// make_family("gaussian", {0, 1}) etc.; mixture takes flat (w, mu, var) triplets.
inline DistributionSpec make_family(Family kind, const std::vector<double>& params) {
  switch (kind) {
    case Family::gaussian:
      if (params.size() != 2)
        throw invalid_parameter("gaussian expects (mean, variance)");
      return DistributionSpec::gaussian(params[0], params[1]);
    case Family::uniform:
      if (params.size() != 2) throw invalid_parameter("uniform expects (lo, hi)");
      return DistributionSpec::uniform(params[0], params[1]);
    case Family::laplace:
      if (params.size() != 1) throw invalid_parameter("laplace expects (scale)");
      return DistributionSpec::laplace(params[0]);
    case Family::logistic:
      if (params.size() != 1) throw invalid_parameter("logistic expects (scale)");
      return DistributionSpec::logistic(params[0]);
    case Family::gaussian_mixture: {
      if (params.size() < 3 || params.size() % 3 != 0)
        throw invalid_parameter(
            "gaussian_mixture expects (w, mean, variance) triplets");
      std::vector<double> w, mu, var;
      for (std::size_t i = 0; i < params.size(); i += 3) {
        w.push_back(params[i]);
        mu.push_back(params[i + 1]);
        var.push_back(params[i + 2]);
      }
      return DistributionSpec::gaussian_mixture(std::move(w), std::move(mu),
                                                std::move(var));
    }
  }
  throw invalid_parameter("unknown family");
}

/// Aggregate cumulant/moment data for a summand list.
struct CumulantSummary {
  std::size_t n = 0;
  double b_n = 0.0;                 // sum of variances
  std::vector<double> gamma3;       // E X_i^3
  std::vector<double> gamma4;       // E X_i^4 - 3 E X_i^2
  double m_bound = 0.0;             // sup_i E|X_i|^{4+delta0}
  double delta0 = 1.0;
  double j_bound = 0.0;             // sup_i J(X_i); +inf if any summand lacks it

  double sum_gamma3() const {
    double s = 0.0;
    for (double g : gamma3) s += g;
    return s;
  }
  double sum_gamma4() const {
    double s = 0.0;
    for (double g : gamma4) s += g;
    return s;
  }
};

inline CumulantSummary cumulant_summary(const std::vector<DistributionSpec>& specs,
                                        double delta0 = 1.0) {
  if (specs.empty()) throw invalid_parameter("cumulant_summary: empty spec list");
  if (!(delta0 > 0.0)) throw invalid_parameter("cumulant_summary: delta0 must be > 0");
  CumulantSummary cs;
  cs.n = specs.size();
  cs.delta0 = delta0;
  for (const auto& s : specs) {
    cs.b_n += s.variance();
    cs.gamma3.push_back(s.raw_moment(3));
    cs.gamma4.push_back(s.raw_moment(4) - 3.0 * s.raw_moment(2));
    const double m = s.abs_moment(4.0 + delta0);
    if (!std::isfinite(m))
      throw numeric_error("cumulant_summary: E|X|^{4+delta0} not finite for " +
                          s.describe());
    cs.m_bound = std::max(cs.m_bound, m);
    cs.j_bound = std::max(cs.j_bound,
                          s.has_finite_fisher()
                              ? s.fisher_information()
                              : std::numeric_limits<double>::infinity());
  }
  return cs;
}

/// Best (l1, l2) with density >= l1 exp(-l2 x^2/2); none for compact support.
/// l2 is fixed to the family's natural quadratic decay dominator, l1 is the
/// exact infimum of density(x) exp(l2 x^2/2), found in log domain.
inline std::optional<MinorizationParams> minorization_params(
    const DistributionSpec& spec) {
  const auto decay = spec.natural_minorization_decay();
  if (!decay) return std::nullopt;
  const double l2 = *decay;

  // objective in log domain: ln density(x) + l2 x^2 / 2
  const auto obj = [&](double x) { return spec.log_density(x) + 0.5 * l2 * x * x; };

  // deterministic scan + golden refinement on [-50, 50]
  const int kScan = 4001;
  double best_x = 0.0, best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kScan; ++i) {
    const double x = -50.0 + 100.0 * i / (kScan - 1);
    const double v = obj(x);
    if (v < best) {
      best = v;
      best_x = x;
    }
  }
  const double cell = 100.0 / (kScan - 1);
  const double xr = minimize_scalar(obj, best_x - cell, best_x + cell, 1e-13);
  best = std::min(best, obj(xr));

  MinorizationParams mp;
  mp.l1 = std::exp(best);
  mp.l2 = l2;
  mp.l3 = std::max(1.0, -std::log(mp.l1 * std::sqrt(2.0 * kPi / mp.l2)));
  return mp;
}

}  // namespace cltlab
