#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mbq/math/adaptive.hpp"
#include "mbq/math/gauss_legendre.hpp"
#include "mbq/math/normal.hpp"
#include "mbq/math/rng.hpp"
#include "mbq/models.hpp"
#include "mbq/pricing.hpp"

namespace mbq {

// Reference-pricing controls. Integrals are truncated to
// [-truncation, truncation] per space dimension.
struct QuadratureSpec {
  enum class Scheme { Adaptive, TensorGauss };

  double truncation = 10.0;
  double abs_tol = 1e-10;
  double rel_tol = 1e-6;
  Scheme scheme = Scheme::Adaptive;
  int tensor_nodes = 64;

  void validate() const {
    if (!(truncation > 0.0))
      throw std::invalid_argument("QuadratureSpec: truncation must be > 0");
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0))
      throw std::invalid_argument("QuadratureSpec: tolerances must be > 0");
  }
};

// Payoff on the VIX level; the discount rate rides along so every pricing
// route applies the same e^{-r T_i}.
struct VixPayoff {
  OptionKind kind = OptionKind::Future;
  double strike = 0.0;
  double rate = 0.0;

  double operator()(double vix) const {
    switch (kind) {
      case OptionKind::Future: return vix;
      case OptionKind::Call: return std::max(vix - strike, 0.0);
      case OptionKind::Put: return std::max(strike - vix, 0.0);
    }
    return 0.0;
  }

  double discount(double t_i) const {
    return kind == OptionKind::Future ? 1.0 : std::exp(-rate * t_i);
  }
};

// ---------------------------------------------------------------------------
// Exact quadrature
// ---------------------------------------------------------------------------

// One-factor reference price: the payoff of sqrt(V(sigma_X z)) integrated
// against the standard normal density; the inner time integral uses the same
// 20-node rule as pricing.
inline double quad_price_1f(const VixPayoff& payoff, const OneFactorParams& p,
                            const ForwardVarianceCurve& curve, double t_i,
                            const QuadratureSpec& spec = {}) {
  spec.validate();
  const VixSquare1F vix2(p, curve, t_i);
  const double sd = std::sqrt(ou_variance(p.k, t_i));
  if (sd == 0.0) return payoff.discount(t_i) * payoff(std::sqrt(vix2(0.0)));
  auto integrand = [&](double z) { return payoff(std::sqrt(vix2(sd * z))) * norm_pdf(z); };
  double value;
  if (spec.scheme == QuadratureSpec::Scheme::TensorGauss) {
    const QuadRule rule = gauss_legendre_on(spec.tensor_nodes, -spec.truncation,
                                            spec.truncation);
    value = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
      value += rule.weights[i] * integrand(rule.nodes[i]);
  } else {
    value = integrate_adaptive(integrand, -spec.truncation, spec.truncation,
                               spec.abs_tol, spec.rel_tol)
                .integral;
  }
  return payoff.discount(t_i) * value;
}

// Two-factor reference price against the correlated bivariate density on
// [-trunc, trunc]^2.
inline double quad_price_2f(const VixPayoff& payoff, const TwoFactorParams& p,
                            const ForwardVarianceCurve& curve, double t_i,
                            const QuadratureSpec& spec = {}) {
  spec.validate();
  const VixSquare2F vix2(p, curve, t_i);
  const CrossVariances v = cross_variances(p, t_i);
  const double rho12 = ou_correlation(p, t_i);
  if (!(std::fabs(rho12) < 1.0))
    throw std::invalid_argument(
        "quad_price_2f: |rho12| = 1 makes the bivariate density degenerate; "
        "reduce to the one-factor quadrature");
  const double s1 = std::sqrt(v.v1), s2 = std::sqrt(v.v2);
  const double one_m = 1.0 - rho12 * rho12;
  const double norm = 1.0 / (2.0 * M_PI * std::sqrt(one_m));
  auto integrand = [&](double z1, double z2) {
    const double q = (z1 * z1 + z2 * z2 - 2.0 * rho12 * z1 * z2) / (2.0 * one_m);
    return payoff(std::sqrt(vix2(s1 * z1, s2 * z2))) * norm * std::exp(-q);
  };
  double value;
  if (spec.scheme == QuadratureSpec::Scheme::TensorGauss) {
    const QuadRule rule = gauss_legendre_on(spec.tensor_nodes, -spec.truncation,
                                            spec.truncation);
    value = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < rule.nodes.size(); ++j)
        row += rule.weights[j] * integrand(rule.nodes[i], rule.nodes[j]);
      value += rule.weights[i] * row;
    }
  } else {
    value = integrate_adaptive_2d(integrand, -spec.truncation, spec.truncation,
                                  -spec.truncation, spec.truncation, spec.abs_tol,
                                  spec.rel_tol)
                .integral;
  }
  return payoff.discount(t_i) * value;
}

// ---------------------------------------------------------------------------
// Monte-Carlo with exact OU sampling
// ---------------------------------------------------------------------------

struct McResult {
  double price = 0.0;
  double std_error = 0.0;
};

namespace detail {

struct Welford {
  std::int64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }

  void merge(const Welford& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    const double d = o.mean - mean;
    const double total = static_cast<double>(n + o.n);
    mean += d * static_cast<double>(o.n) / total;
    m2 += o.m2 + d * d * static_cast<double>(n) * static_cast<double>(o.n) / total;
    n += o.n;
  }
};

// Shared MC driver: one pass of exact OU draws, every payoff accumulated on
// the same VIX samples. Chunked so the accumulation order is fixed.
template <typename SampleVix>
std::vector<McResult> mc_run(const SampleVix& sample_vix,
                             const std::vector<VixPayoff>& payoffs, double t_i,
                             std::int64_t n_paths) {
  if (n_paths < 1) throw std::invalid_argument("mc_price: n_paths must be >= 1");
  const std::int64_t chunk = 1 << 16;
  std::vector<Welford> totals(payoffs.size());
  std::vector<Welford> local(payoffs.size());
  for (std::int64_t start = 0; start < n_paths; start += chunk) {
    const std::int64_t stop = std::min(n_paths, start + chunk);
    for (auto& w : local) w = Welford{};
    for (std::int64_t i = start; i < stop; ++i) {
      const double vix = sample_vix(static_cast<std::uint64_t>(i));
      for (std::size_t k = 0; k < payoffs.size(); ++k) local[k].add(payoffs[k](vix));
    }
    for (std::size_t k = 0; k < payoffs.size(); ++k) totals[k].merge(local[k]);
  }
  std::vector<McResult> out(payoffs.size());
  for (std::size_t k = 0; k < payoffs.size(); ++k) {
    const double disc = payoffs[k].discount(t_i);
    out[k].price = disc * totals[k].mean;
    const double var =
        totals[k].n > 1 ? totals[k].m2 / static_cast<double>(totals[k].n - 1) : 0.0;
    out[k].std_error = disc * std::sqrt(var / static_cast<double>(totals[k].n));
  }
  return out;
}

}  // namespace detail

// Several payoffs on one set of exact OU samples; deterministic in the seed.
inline std::vector<McResult> mc_prices(const std::vector<VixPayoff>& payoffs,
                                       const OneFactorParams& p,
                                       const ForwardVarianceCurve& curve, double t_i,
                                       std::int64_t n_paths, std::uint64_t seed) {
  const VixSquare1F vix2(p, curve, t_i);
  const double sd = std::sqrt(ou_variance(p.k, t_i));
  const CounterRng rng(seed);
  auto sample = [&](std::uint64_t i) { return std::sqrt(vix2(sd * rng.normal(i))); };
  return detail::mc_run(sample, payoffs, t_i, n_paths);
}

inline std::vector<McResult> mc_prices(const std::vector<VixPayoff>& payoffs,
                                       const TwoFactorParams& p,
                                       const ForwardVarianceCurve& curve, double t_i,
                                       std::int64_t n_paths, std::uint64_t seed) {
  const VixSquare2F vix2(p, curve, t_i);
  const CrossVariances v = cross_variances(p, t_i);
  const double rho12 = ou_correlation(p, t_i);
  const double s1 = std::sqrt(v.v1), s2 = std::sqrt(v.v2);
  const double w = std::sqrt(1.0 - rho12 * rho12);
  const CounterRng rng(seed);
  auto sample = [&](std::uint64_t i) {
    const double z1 = rng.normal(2 * i);
    const double z2 = rng.normal(2 * i + 1);
    return std::sqrt(vix2(s1 * z1, s2 * (rho12 * z1 + w * z2)));
  };
  return detail::mc_run(sample, payoffs, t_i, n_paths);
}

inline McResult mc_price(const VixPayoff& payoff, const OneFactorParams& p,
                         const ForwardVarianceCurve& curve, double t_i,
                         std::int64_t n_paths, std::uint64_t seed) {
  return mc_prices({payoff}, p, curve, t_i, n_paths, seed)[0];
}

inline McResult mc_price(const VixPayoff& payoff, const TwoFactorParams& p,
                         const ForwardVarianceCurve& curve, double t_i,
                         std::int64_t n_paths, std::uint64_t seed) {
  return mc_prices({payoff}, p, curve, t_i, n_paths, seed)[0];
}

}  // namespace mbq
