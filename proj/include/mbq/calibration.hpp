#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mbq/marketdata.hpp"
#include "mbq/math/nelder_mead.hpp"
#include "mbq/math/rng.hpp"
#include "mbq/models.hpp"
#include "mbq/pricing.hpp"
#include "mbq/quantiser.hpp"

namespace mbq {

enum class ModelKind { OneFactor, TwoFactor };

// Slice-level calibrated parameters (the structural set stays fixed).
struct SliceParams {
  double gamma = 0.5;
  double omega1 = 8.0;
  double omega2 = 1.0;
  double xi0 = 0.03;
};

struct CalibrationConfig {
  ModelKind model = ModelKind::OneFactor;
  double k = 1.0;  // one-factor mean reversion, fixed
  // Two-factor structural parameters, fixed a priori (Set III).
  double k1 = 7.54, k2 = 0.24, theta = 0.23, rho = 0.7;
  bool calibrate_xi0 = true;

  struct Box {
    double lo, hi;
  };
  Box gamma_bounds{0.0, 1.0};
  Box omega1_bounds{0.0, 50.0};
  Box omega2_bounds{0.0, 25.0};
  Box xi0_bounds{1e-4, 1.0};

  double f_tol = 1e-6;
  long max_evals = 5000;
  int multistart = 3;
  std::uint64_t seed = 42;
  double moneyness_lo = 0.9, moneyness_hi = 2.0;
  int grid_n = 0;  // 0 -> 1000 (1F) / 1450 (2F)

  int default_grid_n() const {
    if (grid_n > 0) return grid_n;
    return model == ModelKind::OneFactor ? 1000 : 1450;
  }

  OneFactorParams one_factor(const SliceParams& s) const {
    return {k, s.gamma, s.omega1, s.omega2};
  }
  TwoFactorParams two_factor(const SliceParams& s) const {
    return {k1, k2, theta, rho, s.gamma, s.omega1, s.omega2};
  }
};

struct CalibrationResult {
  Date expiry{};
  int maturity_days = 0;
  double maturity_years = 0.0;
  SliceParams params;
  double objective = 0.0;
  double futures_re = 0.0;
  double calls_arbae = 0.0;
  long evaluations = 0;
  int calls_in_window = 0;
  bool xi0_polished = false;
  enum class Status { Ok, FuturesOnly, Failed } status = Status::Ok;
  double fitted_r = 0.0;
  double fitted_F = 0.0;
};

// ---------------------------------------------------------------------------
// Slice repricing shared by the objective, the diagnostics and the stability
// harness, so in-sample and repriced numbers are bitwise comparable.
// ---------------------------------------------------------------------------

struct SlicePrices {
  double future = 0.0;
  std::vector<double> calls;  // aligned with the corridor quotes
};

inline SlicePrices reprice_slice(const CalibrationConfig& cfg, const SliceParams& p,
                                 double t_i, double rate,
                                 const std::vector<OptionQuote>& calls,
                                 const OUStateGrid& grid) {
  const ForwardVarianceCurve curve = slice_curve(t_i, p.xi0);
  const VixStateValues states =
      cfg.model == ModelKind::OneFactor
          ? vix_squared_states(cfg.one_factor(p), curve, t_i, grid)
          : vix_squared_states(cfg.two_factor(p), curve, t_i, grid);
  SlicePrices out;
  out.future = price_future(states);
  out.calls.reserve(calls.size());
  for (const auto& q : calls) out.calls.push_back(price_call(states, q.strike, rate));
  return out;
}

// Corridor violation of one price against [bid, ask], relative one-sided.
inline double corridor_violation(double bid, double ask, double model) {
  double v = 0.0;
  if (model > ask) v += (model - ask) / ask;
  if (model < bid) v += (bid - model) / bid;
  return v;
}

// The joint objective: squared futures relative error plus the mean of
// squared per-strike corridor violations (the two one-sided terms are summed
// before squaring; at most one is nonzero).
inline double objective(const CalibrationConfig& cfg, const SliceParams& p,
                        const QuoteSlice& slice, const std::vector<OptionQuote>& calls,
                        const OUStateGrid& grid) {
  const SlicePrices prices = reprice_slice(cfg, p, slice.t, slice.fitted_r, calls, grid);
  const double fut = (prices.future - slice.fitted_F) / slice.fitted_F;
  double acc = fut * fut;
  if (!calls.empty()) {
    double corridor = 0.0;
    for (std::size_t j = 0; j < calls.size(); ++j) {
      const double v = corridor_violation(calls[j].bid, calls[j].ask, prices.calls[j]);
      corridor += v * v;
    }
    acc += corridor / static_cast<double>(calls.size());
  }
  return acc;
}

inline double objective(const CalibrationConfig& cfg, const SliceParams& p,
                        const QuoteSlice& slice, const OUStateGrid& grid) {
  return objective(cfg, p, slice, moneyness_window(slice, cfg.moneyness_lo, cfg.moneyness_hi),
                   grid);
}

// ---------------------------------------------------------------------------
// Slice and surface calibration
// ---------------------------------------------------------------------------

namespace detail {

inline OUStateGrid scale_grid(const CalibrationConfig& cfg, const QuantiserGrid& grid,
                              double t) {
  if (cfg.model == ModelKind::OneFactor) return scale_to_ou(grid, cfg.k, t);
  TwoFactorParams p{cfg.k1, cfg.k2, cfg.theta, cfg.rho, 0.5, 0.0, 0.0};
  return scale_to_ou(grid, p, t);
}

}  // namespace detail

// Box-constrained local minimisation of the corridor objective over
// (gamma, omega1, omega2[, xi0]) with deterministic multistart. The label
// symmetry (gamma, w1, w2) -> (1-gamma, w2, w1) is removed by canonicalising
// to omega1 >= omega2. When xi0 is calibrated, a final polish rescales it to
// zero the futures error, which the square-root scaling makes exact.
inline CalibrationResult calibrate_slice(const QuoteSlice& slice,
                                         const CalibrationConfig& cfg,
                                         const QuantiserGrid& grid,
                                         std::optional<double> fixed_xi0 = std::nullopt) {
  if (!slice.fitted())
    throw std::invalid_argument("calibrate_slice: slice has no parity fit");
  CalibrationResult res;
  res.expiry = slice.expiry;
  res.maturity_days = slice.expiry_days();
  res.maturity_years = slice.t;
  res.fitted_r = slice.fitted_r;
  res.fitted_F = slice.fitted_F;

  const std::vector<OptionQuote> calls =
      moneyness_window(slice, cfg.moneyness_lo, cfg.moneyness_hi);
  res.calls_in_window = static_cast<int>(calls.size());
  if (calls.empty()) res.status = CalibrationResult::Status::FuturesOnly;

  const OUStateGrid states = detail::scale_grid(cfg, grid, slice.t);

  double xi0_init;
  if (cfg.calibrate_xi0) {
    xi0_init = strip_forward_variance(slice).xi0;
  } else {
    xi0_init = fixed_xi0 ? *fixed_xi0 : strip_forward_variance(slice).xi0;
  }
  xi0_init = std::min(cfg.xi0_bounds.hi, std::max(cfg.xi0_bounds.lo, xi0_init));

  const int dims = cfg.calibrate_xi0 ? 4 : 3;
  auto unpack = [&](const std::vector<double>& x) {
    SliceParams p;
    p.gamma = x[0];
    p.omega1 = x[1];
    p.omega2 = x[2];
    p.xi0 = cfg.calibrate_xi0 ? x[3] : xi0_init;
    return p;
  };
  auto f = [&](const std::vector<double>& x) {
    return objective(cfg, unpack(x), slice, calls, states);
  };

  const std::vector<double> lo = cfg.calibrate_xi0
                                     ? std::vector<double>{cfg.gamma_bounds.lo, cfg.omega1_bounds.lo,
                                                           cfg.omega2_bounds.lo, cfg.xi0_bounds.lo}
                                     : std::vector<double>{cfg.gamma_bounds.lo, cfg.omega1_bounds.lo,
                                                           cfg.omega2_bounds.lo};
  const std::vector<double> hi = cfg.calibrate_xi0
                                     ? std::vector<double>{cfg.gamma_bounds.hi, cfg.omega1_bounds.hi,
                                                           cfg.omega2_bounds.hi, cfg.xi0_bounds.hi}
                                     : std::vector<double>{cfg.gamma_bounds.hi, cfg.omega1_bounds.hi,
                                                           cfg.omega2_bounds.hi};

  const CounterRng rng(cfg.seed);
  bool any = false;
  NelderMeadResult best;
  for (int start = 0; start < std::max(1, cfg.multistart); ++start) {
    std::vector<double> x0(dims), step(dims);
    if (start == 0) {
      x0[0] = 0.5;
      x0[1] = 8.0;
      x0[2] = 1.0;
    } else {
      const std::uint64_t base = 16ull * static_cast<std::uint64_t>(start);
      x0[0] = 0.2 + 0.6 * rng.uniform(base);
      x0[1] = 2.0 + 14.0 * rng.uniform(base + 1);
      x0[2] = 0.1 + 2.9 * rng.uniform(base + 2);
    }
    step[0] = 0.15;
    step[1] = 2.0;
    step[2] = 0.5;
    if (cfg.calibrate_xi0) {
      x0[3] = start == 0 ? xi0_init
                         : xi0_init * (0.8 + 0.45 * rng.uniform(16ull * start + 3));
      step[3] = 0.2 * xi0_init;
    }
    NelderMeadResult r;
    try {
      r = nelder_mead(f, x0, step, lo, hi, cfg.f_tol, cfg.max_evals);
    } catch (const std::exception&) {
      continue;
    }
    res.evaluations += r.evaluations;
    if (!any || r.fx < best.fx) {
      best = r;
      any = true;
    }
  }
  if (!any) {
    res.status = CalibrationResult::Status::Failed;
    res.params = SliceParams{0.5, 8.0, 1.0, xi0_init};
    return res;
  }

  SliceParams p = unpack(best.x);
  res.objective = best.fx;

  if (cfg.calibrate_xi0) {
    const SlicePrices prices = reprice_slice(cfg, p, slice.t, slice.fitted_r, calls, states);
    if (prices.future != slice.fitted_F && prices.future > 0.0) {
      SliceParams polished = p;
      const double ratio = slice.fitted_F / prices.future;
      polished.xi0 = std::min(cfg.xi0_bounds.hi,
                              std::max(cfg.xi0_bounds.lo, p.xi0 * ratio * ratio));
      const double fx = objective(cfg, polished, slice, calls, states);
      if (fx <= res.objective) {
        p = polished;
        res.objective = fx;
        res.xi0_polished = true;
      }
    }
  }

  if (p.omega2 > p.omega1) {
    std::swap(p.omega1, p.omega2);
    p.gamma = 1.0 - p.gamma;
  }
  res.params = p;

  const SlicePrices final_prices =
      reprice_slice(cfg, p, slice.t, slice.fitted_r, calls, states);
  res.futures_re = std::fabs(slice.fitted_F - final_prices.future) / slice.fitted_F;
  if (!calls.empty()) {
    double acc = 0.0;
    for (std::size_t j = 0; j < calls.size(); ++j)
      acc += corridor_violation(calls[j].bid, calls[j].ask, final_prices.calls[j]);
    res.calls_arbae = acc / static_cast<double>(calls.size());
  }
  return res;
}

// Independent per-slice calibrations; results are index-aligned with the
// input order regardless of the worker count, so parallel and sequential
// runs are identical.
inline std::vector<CalibrationResult> calibrate_surface(
    const std::vector<QuoteSlice>& slices, const CalibrationConfig& cfg,
    const QuantiserGrid& grid, int threads = 1) {
  if (slices.empty())
    throw std::invalid_argument("calibrate_surface: need at least one slice");
  std::vector<CalibrationResult> results(slices.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < slices.size(); i += stride) {
      try {
        results[i] = calibrate_slice(slices[i], cfg, grid);
      } catch (const std::exception&) {
        results[i].expiry = slices[i].expiry;
        results[i].maturity_days = slices[i].expiry_days();
        results[i].maturity_years = slices[i].t;
        results[i].status = CalibrationResult::Status::Failed;
      }
    }
  };
  const int n_threads = std::max(1, threads);
  if (n_threads == 1 || slices.size() == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t)
      pool.emplace_back(work, static_cast<std::size_t>(t), static_cast<std::size_t>(n_threads));
    for (auto& th : pool) th.join();
  }
  return results;
}

}  // namespace mbq
