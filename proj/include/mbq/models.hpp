#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mbq/errors.hpp"

namespace mbq {

// ---------------------------------------------------------------------------
// Parameter sets
// ---------------------------------------------------------------------------

// Mixed one-factor model: one OU driver with mean reversion k, mixing weight
// gamma on the omega2 lognormal leg.
struct OneFactorParams {
  double k = 1.0;
  double gamma = 0.5;
  double omega1 = 0.0;
  double omega2 = 0.0;

  void validate() const {
    if (k < 0.0) throw std::invalid_argument("one-factor: k must be >= 0");
    if (gamma < 0.0 || gamma > 1.0)
      throw std::invalid_argument("one-factor: gamma must lie in [0,1]");
    if (omega1 < 0.0 || omega2 < 0.0)
      throw std::invalid_argument("one-factor: vol-of-vol must be >= 0");
  }
};

// Mixed two-factor model: two correlated OU drivers blended by theta, plus
// the same (gamma, omega1, omega2) lognormal mix.
struct TwoFactorParams {
  double k1 = 7.54;
  double k2 = 0.24;
  double theta = 0.23;
  double rho = 0.7;
  double gamma = 0.5;
  double omega1 = 0.0;
  double omega2 = 0.0;

  void validate() const {
    if (!(k1 > k2) || k2 < 0.0)
      throw std::invalid_argument("two-factor: requires k1 > k2 >= 0");
    if (theta < 0.0 || theta > 1.0)
      throw std::invalid_argument("two-factor: theta must lie in [0,1]");
    if (rho < -1.0 || rho > 1.0)
      throw std::invalid_argument("two-factor: rho must lie in [-1,1]");
    if (gamma < 0.0 || gamma > 1.0)
      throw std::invalid_argument("two-factor: gamma must lie in [0,1]");
    if (omega1 < 0.0 || omega2 < 0.0)
      throw std::invalid_argument("two-factor: vol-of-vol must be >= 0");
  }
};

// OU state of one or both factors observed at time t.
struct OUState {
  double t = 0.0;
  double x1 = 0.0;
  double x2 = 0.0;  // unused in the one-factor model
};

// ---------------------------------------------------------------------------
// Forward variance curve
// ---------------------------------------------------------------------------

enum class CurveConvention { Decimal, VixPointsSquared };

// Piecewise-constant initial forward variance. Stored in decimal annualised
// variance; the 100^2 scaling lives only in the VIX mapping.
struct ForwardVarianceCurve {
  struct Bucket {
    double t_start = 0.0;
    double t_end = 0.0;
    double xi0 = 0.0;
  };

  std::vector<Bucket> buckets;

  ForwardVarianceCurve() = default;

  ForwardVarianceCurve(std::vector<Bucket> b,
                       CurveConvention conv = CurveConvention::Decimal)
      : buckets(std::move(b)) {
    if (conv == CurveConvention::VixPointsSquared)
      for (Bucket& bk : buckets) bk.xi0 /= 1e4;
    validate();
  }

  static ForwardVarianceCurve flat(double xi0, double t_end = 100.0) {
    return ForwardVarianceCurve({{0.0, t_end, xi0}});
  }

  void validate() const {
    double prev_end = -1.0;
    for (const Bucket& b : buckets) {
      if (!(b.xi0 > 0.0))
        throw std::invalid_argument("forward variance curve: xi0 must be > 0");
      if (!(b.t_end > b.t_start))
        throw std::invalid_argument("forward variance curve: empty bucket");
      if (b.t_start < prev_end)
        throw std::invalid_argument("forward variance curve: overlapping buckets");
      prev_end = b.t_end;
    }
  }

  bool covers(double a, double b) const {
    if (buckets.empty() || a < buckets.front().t_start || b > buckets.back().t_end)
      return false;
    // Interior gaps between consecutive buckets break coverage too.
    for (std::size_t i = 1; i < buckets.size(); ++i)
      if (buckets[i].t_start > buckets[i - 1].t_end &&
          buckets[i].t_start > a && buckets[i - 1].t_end < b)
        return false;
    return true;
  }

  // Buckets are half-open [t_start, t_end); the final bucket also owns its
  // right endpoint.
  double value(double T) const {
    for (std::size_t i = 0; i < buckets.size(); ++i) {
      const Bucket& b = buckets[i];
      const bool last = i + 1 == buckets.size();
      if (T >= b.t_start && (T < b.t_end || (last && T <= b.t_end))) return b.xi0;
    }
    throw coverage_error("forward variance curve does not cover T = " +
                         std::to_string(T));
  }
};

// ---------------------------------------------------------------------------
// Deterministic model quantities
// ---------------------------------------------------------------------------

// Var(X_t) = (1 - e^{-2kt}) / (2k), continuous at k = 0 where it equals t.
inline double ou_variance(double k, double t) {
  if (k < 0.0 || t < 0.0) throw std::invalid_argument("ou_variance: k, t must be >= 0");
  if (k == 0.0) return t;
  return -std::expm1(-2.0 * k * t) / (2.0 * k);
}

// h(t, T) = e^{-2k(T-t)} Var(X_t).
inline double h_factor(double k, double t, double T) {
  if (t > T) throw std::invalid_argument("h_factor: requires t <= T");
  return std::exp(-2.0 * k * (T - t)) * ou_variance(k, t);
}

struct CrossVariances {
  double v1 = 0.0;
  double v2 = 0.0;
  double v12 = 0.0;
};

// Marginal variances of the two OU factors and their covariance
// v12 = rho (1 - e^{-(k1+k2)t}) / (k1 + k2).
inline CrossVariances cross_variances(const TwoFactorParams& p, double t) {
  if (t < 0.0) throw std::invalid_argument("cross_variances: t must be >= 0");
  CrossVariances v;
  v.v1 = ou_variance(p.k1, t);
  v.v2 = ou_variance(p.k2, t);
  const double ks = p.k1 + p.k2;
  v.v12 = ks == 0.0 ? p.rho * t : -p.rho * std::expm1(-ks * t) / ks;
  return v;
}

// Correlation of (X^1_t, X^2_t); the time-dependent rho_12 used for the
// Cholesky mapping at the quantisation horizon.
inline double ou_correlation(const TwoFactorParams& p, double t) {
  const CrossVariances v = cross_variances(p, t);
  if (v.v1 == 0.0 || v.v2 == 0.0) return 0.0;
  return v.v12 / std::sqrt(v.v1 * v.v2);
}

// Normaliser 1 / sqrt((1-theta)^2 + theta^2 + 2 rho theta (1-theta)).
inline double alpha_theta(const TwoFactorParams& p) {
  const double th = p.theta;
  const double denom = (1.0 - th) * (1.0 - th) + th * th + 2.0 * p.rho * th * (1.0 - th);
  if (!(denom > 0.0))
    throw std::invalid_argument("alpha_theta: degenerate mix, (1-theta)^2 + theta^2 "
                                "+ 2 rho theta (1-theta) must be > 0");
  return 1.0 / std::sqrt(denom);
}

// chi(t, T) = Var(lambda_t^T), in closed form.
inline double chi(const TwoFactorParams& p, double t, double T) {
  if (t > T) throw std::invalid_argument("chi: requires t <= T");
  const double a = alpha_theta(p);
  const CrossVariances v = cross_variances(p, t);
  const double th = p.theta;
  const double tau = T - t;
  return a * a *
         ((1.0 - th) * (1.0 - th) * std::exp(-2.0 * p.k1 * tau) * v.v1 +
          th * th * std::exp(-2.0 * p.k2 * tau) * v.v2 +
          2.0 * th * (1.0 - th) * std::exp(-(p.k1 + p.k2) * tau) * v.v12);
}

// Decayed state x_t^T = e^{-k(T-t)} X_t.
inline double decay_state(double k, double t, double T, double x) {
  return std::exp(-k * (T - t)) * x;
}

// lambda_t^T = alpha_theta [(1-theta) e^{-k1(T-t)} X^1_t + theta e^{-k2(T-t)} X^2_t].
inline double lambda_state(const TwoFactorParams& p, double t, double T, double x1,
                           double x2) {
  const double tau = T - t;
  return alpha_theta(p) * ((1.0 - p.theta) * std::exp(-p.k1 * tau) * x1 +
                           p.theta * std::exp(-p.k2 * tau) * x2);
}

// f^T(t, x) for the one-factor mix; x is the already-decayed state x_t^T.
inline double mixed_f_one(const OneFactorParams& p, double t, double T, double x) {
  const double h = h_factor(p.k, t, T);
  return (1.0 - p.gamma) * std::exp(p.omega1 * x - 0.5 * p.omega1 * p.omega1 * h) +
         p.gamma * std::exp(p.omega2 * x - 0.5 * p.omega2 * p.omega2 * h);
}

// f^T(t, lambda) for the two-factor mix; lambda is lambda_t^T.
inline double mixed_f_two(const TwoFactorParams& p, double t, double T, double lambda) {
  const double c = chi(p, t, T);
  return (1.0 - p.gamma) * std::exp(p.omega1 * lambda - 0.5 * p.omega1 * p.omega1 * c) +
         p.gamma * std::exp(p.omega2 * lambda - 0.5 * p.omega2 * p.omega2 * c);
}

// xi_t^T = xi_0^T f^T(t, .) evaluated at the decayed state.
inline double forward_variance(const ForwardVarianceCurve& curve,
                               const OneFactorParams& p, const OUState& state,
                               double T) {
  if (T < state.t) throw std::invalid_argument("forward_variance: requires T >= t");
  return curve.value(T) * mixed_f_one(p, state.t, T, decay_state(p.k, state.t, T, state.x1));
}

inline double forward_variance(const ForwardVarianceCurve& curve,
                               const TwoFactorParams& p, const OUState& state,
                               double T) {
  if (T < state.t) throw std::invalid_argument("forward_variance: requires T >= t");
  return curve.value(T) *
         mixed_f_two(p, state.t, T, lambda_state(p, state.t, T, state.x1, state.x2));
}

}  // namespace mbq
