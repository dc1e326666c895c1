#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mbq/calibration.hpp"
#include "mbq/marketdata.hpp"

namespace mbq {

// ---------------------------------------------------------------------------
// Error metrics
// ---------------------------------------------------------------------------

inline double relative_error(double f_mkt, double f_model) {
  if (!(f_mkt > 0.0)) throw std::invalid_argument("relative_error: market price must be > 0");
  return std::fabs(f_mkt - f_model) / f_mkt;
}

// One-sided relative bid-ask error of a single model price.
inline double rbae(double bid, double ask, double model) {
  if (!(bid > 0.0) || ask < bid)
    throw std::invalid_argument("rbae: requires ask >= bid > 0");
  return corridor_violation(bid, ask, model);
}

struct CorridorTriple {
  double bid;
  double ask;
  double model;
};

// Slice-average of the one-sided violations. Unlike the calibration
// objective the terms are not squared. Quotes with bid <= 0 are excluded
// from m (they are filtered upstream; the count is reported back).
inline double arbae(const std::vector<CorridorTriple>& triples, int* excluded = nullptr) {
  double acc = 0.0;
  int m = 0, skip = 0;
  for (const auto& t : triples) {
    if (!(t.bid > 0.0)) {
      ++skip;
      continue;
    }
    acc += rbae(t.bid, t.ask, t.model);
    ++m;
  }
  if (excluded) *excluded = skip;
  if (m == 0) throw std::invalid_argument("arbae: no usable (bid, ask, model) triples");
  return acc / static_cast<double>(m);
}

// Trailing mean over up to `window` points; shorter at the series head.
inline std::vector<double> moving_average(const std::vector<double>& series,
                                          int window = 30) {
  if (window < 1) throw std::invalid_argument("moving_average: window must be >= 1");
  std::vector<double> out(series.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    acc += series[i];
    if (i >= static_cast<std::size_t>(window)) acc -= series[i - window];
    const std::size_t n = std::min<std::size_t>(i + 1, window);
    out[i] = acc / static_cast<double>(n);
  }
  return out;
}

struct SummaryStats {
  double mean = 0.0;
  double sd = 0.0;
  double min = 0.0;
  double max = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
  // Boxplot data: quartiles and 1.5 IQR whiskers.
  double p25 = 0.0;
  double p50 = 0.0;
  double p75 = 0.0;
  double whisker_lo = 0.0;
  double whisker_hi = 0.0;
};

// Linear interpolation between order statistics.
inline double percentile(std::vector<double> sorted, double p) {
  const double h = (sorted.size() - 1) * p / 100.0;
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - lo) * (sorted[lo + 1] - sorted[lo]);
}

inline SummaryStats summary_stats(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("summary_stats: empty input");
  std::vector<double> v = values;
  std::sort(v.begin(), v.end());
  SummaryStats s;
  double acc = 0.0;
  for (double x : v) acc += x;
  s.mean = acc / v.size();
  double sq = 0.0;
  for (double x : v) sq += (x - s.mean) * (x - s.mean);
  s.sd = v.size() > 1 ? std::sqrt(sq / (v.size() - 1)) : 0.0;
  s.min = v.front();
  s.max = v.back();
  s.p95 = percentile(v, 95.0);
  s.p99 = percentile(v, 99.0);
  s.p25 = percentile(v, 25.0);
  s.p50 = percentile(v, 50.0);
  s.p75 = percentile(v, 75.0);
  const double iqr = s.p75 - s.p25;
  s.whisker_lo = s.p25 - 1.5 * iqr;
  s.whisker_hi = s.p75 + 1.5 * iqr;
  return s;
}

// ---------------------------------------------------------------------------
// Fixed-parameter repricing tests
// ---------------------------------------------------------------------------

struct ErrorRecord {
  Date date{};
  int lag = 0;
  int expiry_days = 0;  // on the repricing date
  std::string metric;   // "RE" or "ARBAE"
  double value = 0.0;
};

struct StabilityRun {
  int test_id = 0;
  Date anchor{};
  bool partial = false;
  std::vector<ErrorRecord> records;
  std::vector<CalibrationResult> anchor_results;
};

struct StabilityConfig {
  CalibrationConfig calibration;
  int horizon_days = 30;  // trading days after the anchor
};

namespace detail {

// Parity-fit every slice that supports it; drop the rest.
inline std::vector<QuoteSlice> fitted_slices(const Surface& surface) {
  std::vector<QuoteSlice> out;
  for (QuoteSlice s : surface.slices) {
    if (!s.parity_fittable) continue;
    fit_rate_future(s);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace detail

// Tests 1-4: calibrate at the anchor date, hold (gamma, omega1, omega2)
// fixed over the horizon, refresh xi0 per the test's rule, reprice daily
// against the market. Slices are matched across days by expiry date; rolled
// off expiries drop out.
//
//   Test 1: anchor fit holds xi0 at its market strip; xi0 re-stripped daily.
//   Test 2: anchor fit calibrates xi0; xi0 re-stripped daily.
//   Test 3: anchor fit calibrates xi0; xi0 recalibrated daily to the
//           futures through the exact sqrt(xi0) price scaling.
//   Test 4: everything held fixed.
inline StabilityRun run_stability_test(int test_id,
                                       const std::map<Date, Surface>& data, Date start,
                                       const StabilityConfig& cfg,
                                       const QuantiserGrid& grid) {
  if (test_id < 1 || test_id > 4)
    throw std::invalid_argument("run_stability_test: test id must be 1..4");
  StabilityRun run;
  run.test_id = test_id;

  std::vector<Date> dates;
  for (const auto& [d, _] : data)
    if (!(d < start)) dates.push_back(d);
  if (dates.empty())
    throw std::invalid_argument("run_stability_test: no data on or after the start date");
  run.anchor = dates.front();
  if (static_cast<int>(dates.size()) < cfg.horizon_days + 1) run.partial = true;
  const int lags = std::min<int>(cfg.horizon_days, static_cast<int>(dates.size()) - 1);

  CalibrationConfig cal = cfg.calibration;
  cal.calibrate_xi0 = test_id != 1;

  const std::vector<QuoteSlice> anchor_slices = detail::fitted_slices(data.at(run.anchor));
  std::map<Date, SliceParams> params_by_expiry;
  for (const auto& slice : anchor_slices) {
    CalibrationResult r = calibrate_slice(slice, cal, grid);
    if (r.status == CalibrationResult::Status::Failed) continue;
    params_by_expiry[slice.expiry] = r.params;
    run.anchor_results.push_back(std::move(r));
  }

  for (int lag = 0; lag <= lags; ++lag) {
    const Date day = dates[lag];
    const std::vector<QuoteSlice> day_slices = detail::fitted_slices(data.at(day));
    for (const auto& slice : day_slices) {
      auto it = params_by_expiry.find(slice.expiry);
      if (it == params_by_expiry.end()) continue;
      SliceParams p = it->second;

      if (test_id == 1 || test_id == 2) {
        p.xi0 = strip_forward_variance(slice).xi0;
      } else if (test_id == 3) {
        const OUStateGrid states = detail::scale_grid(cal, grid, slice.t);
        const SlicePrices probe = reprice_slice(cal, p, slice.t, slice.fitted_r, {}, states);
        const double ratio = slice.fitted_F / probe.future;
        p.xi0 *= ratio * ratio;
      }

      const std::vector<OptionQuote> calls =
          moneyness_window(slice, cal.moneyness_lo, cal.moneyness_hi);
      const OUStateGrid states = detail::scale_grid(cal, grid, slice.t);
      const SlicePrices prices = reprice_slice(cal, p, slice.t, slice.fitted_r, calls, states);

      ErrorRecord re{day, lag, slice.expiry_days(), "RE",
                     relative_error(slice.fitted_F, prices.future)};
      run.records.push_back(re);
      if (!calls.empty()) {
        std::vector<CorridorTriple> triples;
        triples.reserve(calls.size());
        for (std::size_t j = 0; j < calls.size(); ++j)
          triples.push_back({calls[j].bid, calls[j].ask, prices.calls[j]});
        run.records.push_back({day, lag, slice.expiry_days(), "ARBAE", arbae(triples)});
      }
    }
  }
  return run;
}

}  // namespace mbq
