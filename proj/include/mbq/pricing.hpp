#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mbq/conventions.hpp"
#include "mbq/errors.hpp"
#include "mbq/math/gauss_legendre.hpp"
#include "mbq/math/normal.hpp"
#include "mbq/models.hpp"
#include "mbq/quantiser.hpp"

namespace mbq {

enum class OptionKind { Call, Put, Future };

// Quantised VIX^2 values (VIX-points squared, i.e. including the 100^2
// scaling) for one expiry, with their cell probabilities.
struct VixStateValues {
  double maturity = 0.0;
  std::vector<double> values;
  std::vector<double> probs;

  void validate() const {
    if (values.size() != probs.size())
      throw std::invalid_argument("VixStateValues: size mismatch");
    for (double v : values)
      if (!(v > 0.0)) throw std::invalid_argument("VixStateValues: values must be > 0");
  }
};

// ---------------------------------------------------------------------------
// VIX^2 as a function of the OU state
//
// V(state) = (100^2 / Delta) * Int_{T_i}^{T_i+Delta} xi_0^T f^T(T_i, .) dT
// with the time integral on a fixed Gauss-Legendre rule. All per-node
// constants depend only on (params, curve, T_i) and are precomputed once;
// the same evaluator backs quantised pricing, the quadrature oracles and
// Monte-Carlo.
// ---------------------------------------------------------------------------

class VixSquare1F {
 public:
  VixSquare1F(const OneFactorParams& p, const ForwardVarianceCurve& curve, double t_i,
              int time_nodes = 20)
      : params_(p), t_i_(t_i) {
    p.validate();
    const double delta = conventions().delta_years;
    if (!curve.covers(t_i, t_i + delta))
      throw coverage_error("VixSquare1F: curve does not cover [T_i, T_i+Delta] for T_i = " +
                           std::to_string(t_i));
    const QuadRule rule = gauss_legendre_on(time_nodes, t_i, t_i + delta);
    const double scale = 1e4 / delta;
    c_.resize(rule.nodes.size());
    a1_.resize(rule.nodes.size());
    a2_.resize(rule.nodes.size());
    b1_.resize(rule.nodes.size());
    b2_.resize(rule.nodes.size());
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const double T = rule.nodes[i];
      const double h = h_factor(p.k, t_i, T);
      const double d = std::exp(-p.k * (T - t_i));
      c_[i] = scale * rule.weights[i] * curve.value(T);
      a1_[i] = (1.0 - p.gamma) * std::exp(-0.5 * p.omega1 * p.omega1 * h);
      a2_[i] = p.gamma * std::exp(-0.5 * p.omega2 * p.omega2 * h);
      b1_[i] = p.omega1 * d;
      b2_[i] = p.omega2 * d;
    }
  }

  double maturity() const { return t_i_; }
  const OneFactorParams& params() const { return params_; }

  // VIX^2 in points squared for X_{T_i} = x.
  double operator()(double x) const {
    double v = 0.0;
    for (std::size_t i = 0; i < c_.size(); ++i)
      v += c_[i] * (a1_[i] * std::exp(b1_[i] * x) + a2_[i] * std::exp(b2_[i] * x));
    return v;
  }

 private:
  OneFactorParams params_;
  double t_i_;
  std::vector<double> c_, a1_, a2_, b1_, b2_;
};

class VixSquare2F {
 public:
  VixSquare2F(const TwoFactorParams& p, const ForwardVarianceCurve& curve, double t_i,
              int time_nodes = 20)
      : params_(p), t_i_(t_i) {
    p.validate();
    const double delta = conventions().delta_years;
    if (!curve.covers(t_i, t_i + delta))
      throw coverage_error("VixSquare2F: curve does not cover [T_i, T_i+Delta] for T_i = " +
                           std::to_string(t_i));
    const QuadRule rule = gauss_legendre_on(time_nodes, t_i, t_i + delta);
    const double scale = 1e4 / delta;
    const double alpha = alpha_theta(p);
    c_.resize(rule.nodes.size());
    a1_.resize(rule.nodes.size());
    a2_.resize(rule.nodes.size());
    u_.resize(rule.nodes.size());
    v_.resize(rule.nodes.size());
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const double T = rule.nodes[i];
      const double x = chi(p, t_i, T);
      c_[i] = scale * rule.weights[i] * curve.value(T);
      a1_[i] = (1.0 - p.gamma) * std::exp(-0.5 * p.omega1 * p.omega1 * x);
      a2_[i] = p.gamma * std::exp(-0.5 * p.omega2 * p.omega2 * x);
      u_[i] = alpha * (1.0 - p.theta) * std::exp(-p.k1 * (T - t_i));
      v_[i] = alpha * p.theta * std::exp(-p.k2 * (T - t_i));
    }
  }

  double maturity() const { return t_i_; }
  const TwoFactorParams& params() const { return params_; }

  double operator()(double x1, double x2) const {
    double v = 0.0;
    for (std::size_t i = 0; i < c_.size(); ++i) {
      const double lambda = u_[i] * x1 + v_[i] * x2;
      v += c_[i] * (a1_[i] * std::exp(params_.omega1 * lambda) +
                    a2_[i] * std::exp(params_.omega2 * lambda));
    }
    return v;
  }

 private:
  TwoFactorParams params_;
  double t_i_;
  std::vector<double> c_, a1_, a2_, u_, v_;
};

// ---------------------------------------------------------------------------
// Quantised state values and prices
// ---------------------------------------------------------------------------

inline VixStateValues vix_squared_states(const OneFactorParams& p,
                                         const ForwardVarianceCurve& curve, double t_i,
                                         const OUStateGrid& grid) {
  if (grid.dim != 1)
    throw std::invalid_argument("vix_squared_states: 1-D state grid expected");
  if (std::fabs(grid.t - t_i) > 1e-12)
    throw std::invalid_argument("vix_squared_states: grid scaled to t != T_i");
  const VixSquare1F eval(p, curve, t_i);
  VixStateValues out;
  out.maturity = t_i;
  out.probs = grid.probs;
  out.values.resize(grid.n);
  for (int j = 0; j < grid.n; ++j) out.values[j] = eval(grid.states[j]);
  return out;
}

inline VixStateValues vix_squared_states(const TwoFactorParams& p,
                                         const ForwardVarianceCurve& curve, double t_i,
                                         const OUStateGrid& grid) {
  if (grid.dim != 2)
    throw std::invalid_argument("vix_squared_states: 2-D state grid expected");
  if (std::fabs(grid.t - t_i) > 1e-12)
    throw std::invalid_argument("vix_squared_states: grid scaled to t != T_i");
  const VixSquare2F eval(p, curve, t_i);
  VixStateValues out;
  out.maturity = t_i;
  out.probs = grid.probs;
  out.values.resize(grid.n);
  for (int j = 0; j < grid.n; ++j) out.values[j] = eval(grid.x(j), grid.y(j));
  return out;
}

// F = sum_j sqrt(V_j) p_j.
inline double price_future(const VixStateValues& s) {
  double f = 0.0;
  for (std::size_t j = 0; j < s.values.size(); ++j)
    f += std::sqrt(s.values[j]) * s.probs[j];
  return f;
}

inline double price_call(const VixStateValues& s, double strike, double rate) {
  if (!(strike > 0.0)) throw std::invalid_argument("price_call: strike must be > 0");
  double acc = 0.0;
  for (std::size_t j = 0; j < s.values.size(); ++j) {
    const double diff = std::sqrt(s.values[j]) - strike;
    if (diff > 0.0) acc += diff * s.probs[j];
  }
  return std::exp(-rate * s.maturity) * acc;
}

inline double price_put(const VixStateValues& s, double strike, double rate) {
  if (!(strike > 0.0)) throw std::invalid_argument("price_put: strike must be > 0");
  double acc = 0.0;
  for (std::size_t j = 0; j < s.values.size(); ++j) {
    const double diff = strike - std::sqrt(s.values[j]);
    if (diff > 0.0) acc += diff * s.probs[j];
  }
  return std::exp(-rate * s.maturity) * acc;
}

// ---------------------------------------------------------------------------
// Black-76
// ---------------------------------------------------------------------------

inline double black_price(double forward, double strike, double rate, double expiry,
                          double sigma, OptionKind kind) {
  if (!(forward > 0.0) || !(strike > 0.0))
    throw std::invalid_argument("black_price: forward and strike must be > 0");
  if (sigma < 0.0) throw std::invalid_argument("black_price: sigma must be >= 0");
  if (!(expiry > 0.0)) throw std::invalid_argument("black_price: expiry must be > 0");
  const double disc = std::exp(-rate * expiry);
  if (kind == OptionKind::Future) return forward;
  const double s = sigma * std::sqrt(expiry);
  if (s == 0.0) {
    const double intrinsic =
        kind == OptionKind::Call ? std::max(forward - strike, 0.0)
                                 : std::max(strike - forward, 0.0);
    return disc * intrinsic;
  }
  const double d1 = std::log(forward / strike) / s + 0.5 * s;
  const double d2 = d1 - s;
  if (kind == OptionKind::Call)
    return disc * (forward * norm_cdf(d1) - strike * norm_cdf(d2));
  return disc * (strike * norm_cdf(-d2) - forward * norm_cdf(-d1));
}

// Unique Black-76 volatility reproducing the given price: bisection on the
// bracket, then Newton polish on the vega. Deep OTM VIX calls have tiny
// vega, hence the bracket-first order.
inline double implied_vol(double price, double forward, double strike, double rate,
                          double expiry, OptionKind kind) {
  if (kind == OptionKind::Future)
    throw std::invalid_argument("implied_vol: option kind required");
  const double disc = std::exp(-rate * expiry);
  const double intrinsic = kind == OptionKind::Call
                               ? disc * std::max(forward - strike, 0.0)
                               : disc * std::max(strike - forward, 0.0);
  const double upper = kind == OptionKind::Call ? disc * forward : disc * strike;
  if (price < intrinsic)
    throw no_solution_error("implied_vol: price " + std::to_string(price) +
                            " below the discounted-intrinsic lower bound " +
                            std::to_string(intrinsic));
  if (price >= upper)
    throw no_solution_error("implied_vol: price " + std::to_string(price) +
                            " at or above the upper bound " + std::to_string(upper));
  if (price == intrinsic) return 0.0;

  double lo = 1e-6, hi = 10.0;
  auto value = [&](double sigma) {
    return black_price(forward, strike, rate, expiry, sigma, kind) - price;
  };
  if (value(lo) > 0.0) return 0.0;  // price indistinguishable from intrinsic
  while (value(hi) < 0.0) {
    hi *= 2.0;
    if (hi > 100.0)
      throw no_solution_error("implied_vol: no volatility below 100 matches the price");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
    const double mid = 0.5 * (lo + hi);
    (value(mid) < 0.0 ? lo : hi) = mid;
  }
  double sigma = 0.5 * (lo + hi);
  for (int it = 0; it < 8; ++it) {
    const double diff = value(sigma);
    if (std::fabs(diff) <= 1e-10) break;
    const double s = sigma * std::sqrt(expiry);
    const double d1 = std::log(forward / strike) / s + 0.5 * s;
    const double vega = disc * forward * norm_pdf(d1) * std::sqrt(expiry);
    if (vega <= 0.0) break;
    const double next = sigma - diff / vega;
    if (next <= lo || next >= hi) break;
    sigma = next;
  }
  return sigma;
}

}  // namespace mbq
