#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "mbq/calibration.hpp"
#include "mbq/oracle.hpp"
#include "mbq/pricing.hpp"
#include "mbq/quantiser.hpp"

namespace mbq {

// The reference test configuration: flat xi_0 = 0.03, realistic calibrated
// slice parameters, a term structure of 10 futures from one week to ten
// months, 18 calls and 8 puts at the three-month expiry.
struct ReferenceSetup {
  OneFactorParams one_factor{1.0, 0.61, 5.53, 0.69};
  TwoFactorParams two_factor{7.54, 0.24, 0.23, 0.7, 0.60, 9.12, 1.10};
  double xi0 = 0.03;
  double options_maturity = 0.25;
  int n_calls = 18;
  int n_puts = 8;
  double call_moneyness_lo = 0.9, call_moneyness_hi = 2.0;
  double put_moneyness_lo = 0.9, put_moneyness_hi = 1.25;

  std::vector<double> futures_maturities() const {
    std::vector<double> t;
    t.push_back(7.0 / 365.0);
    for (int m = 1; m <= 8; ++m) t.push_back(m * 30.0 / 365.0);
    t.push_back(300.0 / 365.0);
    // Keep the options expiry on the ladder so its states are shared.
    t[3] = options_maturity;
    return t;
  }

  std::vector<double> call_strikes(double atm_future) const {
    return moneyness_ladder(atm_future, call_moneyness_lo, call_moneyness_hi, n_calls);
  }
  std::vector<double> put_strikes(double atm_future) const {
    return moneyness_ladder(atm_future, put_moneyness_lo, put_moneyness_hi, n_puts);
  }

  static std::vector<double> moneyness_ladder(double f, double lo, double hi, int n) {
    std::vector<double> k(n);
    for (int i = 0; i < n; ++i)
      k[i] = f * (lo + (hi - lo) * i / (n - 1.0));
    return k;
  }
};

struct BenchConfig {
  ModelKind model = ModelKind::OneFactor;
  int repetitions = 20;
  QuadratureSpec spec;  // adaptive scheme, production tolerances
  ReferenceSetup setup;
};

struct BenchItem {
  std::string name;
  double maturity = 0.0;
  double strike = 0.0;  // 0 for futures
  double price_quant = 0.0;
  double price_quad = 0.0;
  double rel_err_vs_quad = 0.0;
  double median_quant_ns = 0.0;  // net pricing cost on prepared states
  double median_quad_ns = 0.0;   // full adaptive integral
};

struct BenchReport {
  ModelKind model;
  std::vector<BenchItem> items;
  double workload_quant_ns = 0.0;  // median over repetitions, full workload
  double workload_quad_ns = 0.0;
  double speedup = 0.0;  // quad / quant
};

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double now_ns() {
  return static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                 std::chrono::steady_clock::now().time_since_epoch())
                                 .count());
}

}  // namespace detail

// Figure-2 style workload (10 futures + 18 calls), both routes, wall-clock
// medians over the configured repetitions. The quantisation route computes
// each maturity's states once and reuses them across payoffs, which is where
// its advantage over payoff-by-payoff quadrature comes from.
inline BenchReport run_bench(const BenchConfig& cfg, const QuantiserGrid& grid) {
  BenchReport report;
  report.model = cfg.model;
  const ReferenceSetup& s = cfg.setup;
  const ForwardVarianceCurve curve = ForwardVarianceCurve::flat(s.xi0);
  const std::vector<double> maturities = s.futures_maturities();
  const double t_opt = s.options_maturity;

  auto states_at = [&](double t) {
    if (cfg.model == ModelKind::OneFactor)
      return vix_squared_states(s.one_factor, curve, t, scale_to_ou(grid, s.one_factor.k, t));
    TwoFactorParams p = s.two_factor;
    return vix_squared_states(p, curve, t, scale_to_ou(grid, p, t));
  };
  auto quad_at = [&](const VixPayoff& payoff, double t) {
    return cfg.model == ModelKind::OneFactor
               ? quad_price_1f(payoff, s.one_factor, curve, t, cfg.spec)
               : quad_price_2f(payoff, s.two_factor, curve, t, cfg.spec);
  };

  const std::vector<double> strikes = s.call_strikes(price_future(states_at(t_opt)));

  // Full-workload timing, quantisation route.
  std::vector<double> quant_reps, quad_reps;
  double sink = 0.0;
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    const double t0 = detail::now_ns();
    for (double t : maturities) {
      const VixStateValues v = states_at(t);
      sink += price_future(v);
      if (t == t_opt)
        for (double k : strikes) sink += price_call(v, k, 0.0);
    }
    quant_reps.push_back(detail::now_ns() - t0);
  }

  // Full-workload timing, quadrature route (payoff by payoff).
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    const double t0 = detail::now_ns();
    for (double t : maturities) sink += quad_at({OptionKind::Future}, t);
    for (double k : strikes) sink += quad_at({OptionKind::Call, k, 0.0}, t_opt);
    quad_reps.push_back(detail::now_ns() - t0);
  }
  report.workload_quant_ns = detail::median(quant_reps);
  report.workload_quad_ns = detail::median(quad_reps);
  report.speedup = report.workload_quad_ns / report.workload_quant_ns;

  // Per-item medians and the accuracy columns.
  std::map<double, VixStateValues> prepared;
  for (double t : maturities) prepared[t] = states_at(t);
  auto time_item = [&](auto&& fn) {
    std::vector<double> times;
    for (int rep = 0; rep < cfg.repetitions; ++rep) {
      const double t0 = detail::now_ns();
      sink += fn();
      times.push_back(detail::now_ns() - t0);
    }
    return detail::median(times);
  };

  for (double t : maturities) {
    BenchItem item;
    char name[32];
    std::snprintf(name, sizeof name, "future_%03dd", static_cast<int>(t * 365.0 + 0.5));
    item.name = name;
    item.maturity = t;
    const VixStateValues& v = prepared[t];
    item.median_quant_ns = time_item([&] { return price_future(v); });
    item.price_quant = price_future(v);
    item.median_quad_ns = time_item([&] { return quad_at({OptionKind::Future}, t); });
    item.price_quad = quad_at({OptionKind::Future}, t);
    item.rel_err_vs_quad = std::fabs(item.price_quant - item.price_quad) / item.price_quad;
    report.items.push_back(std::move(item));
  }
  const VixStateValues& vopt = prepared[t_opt];
  for (std::size_t i = 0; i < strikes.size(); ++i) {
    BenchItem item;
    char name[32];
    std::snprintf(name, sizeof name, "call_%02zu", i + 1);
    item.name = name;
    item.maturity = t_opt;
    item.strike = strikes[i];
    item.median_quant_ns = time_item([&] { return price_call(vopt, strikes[i], 0.0); });
    item.price_quant = price_call(vopt, strikes[i], 0.0);
    item.median_quad_ns =
        time_item([&] { return quad_at({OptionKind::Call, strikes[i], 0.0}, t_opt); });
    item.price_quad = quad_at({OptionKind::Call, strikes[i], 0.0}, t_opt);
    item.rel_err_vs_quad = std::fabs(item.price_quant - item.price_quad) / item.price_quad;
    report.items.push_back(std::move(item));
  }
  static volatile double observable;
  observable = sink;  // keep the timed work from being elided
  return report;
}

}  // namespace mbq
