#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mbq/conventions.hpp"
#include "mbq/csv.hpp"
#include "mbq/dates.hpp"
#include "mbq/errors.hpp"
#include "mbq/models.hpp"
#include "mbq/pricing.hpp"

namespace mbq {

struct OptionQuote {
  Date trade_date{};
  Date expiry{};
  OptionKind kind = OptionKind::Call;
  double strike = 0.0;
  double bid = 0.0;
  double ask = 0.0;

  double mid() const { return 0.5 * (bid + ask); }
};

// One expiry's quotes plus the parity-fitted rate and futures price.
struct QuoteSlice {
  Date trade_date{};
  Date expiry{};
  double t = 0.0;  // years, ACT/365
  std::vector<OptionQuote> quotes;
  double fitted_r = std::numeric_limits<double>::quiet_NaN();
  double fitted_F = std::numeric_limits<double>::quiet_NaN();
  bool parity_fittable = true;

  bool fitted() const { return std::isfinite(fitted_F); }
  int expiry_days() const { return days_between(trade_date, expiry); }
};

struct RowError {
  long line = 0;
  std::string message;
};

struct Surface {
  Date trade_date{};
  std::vector<QuoteSlice> slices;
  std::vector<RowError> row_errors;
};

// ---------------------------------------------------------------------------
// Loading and filters
// ---------------------------------------------------------------------------

namespace detail {

inline std::optional<OptionKind> parse_kind(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (s == "call" || s == "c") return OptionKind::Call;
  if (s == "put" || s == "p") return OptionKind::Put;
  return std::nullopt;
}

}  // namespace detail

// Quotes grouped by expiry with the standard exclusion filters applied:
// zero-bid quotes are dropped and expiries under 7 calendar days removed.
// Accepts files with or without a trade_date column; with one, only the
// requested date's rows are used.
inline Surface load_surface(std::istream& in, Date trade_date) {
  CsvTable table = read_csv(in);
  Surface surface;
  surface.trade_date = trade_date;

  const int col_trade = table.column("trade_date");
  const int col_expiry = table.column("expiry");
  const int col_kind = table.column("kind");
  const int col_strike = table.column("strike");
  const int col_bid = table.column("bid");
  const int col_ask = table.column("ask");
  if (col_expiry < 0 || col_kind < 0 || col_strike < 0 || col_bid < 0 || col_ask < 0)
    throw parse_error("quote file: header must contain expiry, kind, strike, bid, ask");

  std::map<Date, std::vector<OptionQuote>> by_expiry;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const long line = table.row_lines[i];
    const auto& row = table.rows[i];
    try {
      const std::size_t needed = static_cast<std::size_t>(
          std::max({col_trade, col_expiry, col_kind, col_strike, col_bid, col_ask}));
      if (row.size() <= needed) throw parse_error("too few columns", line);
      OptionQuote q;
      q.trade_date = col_trade >= 0 ? parse_date(row[col_trade], line) : trade_date;
      if (q.trade_date != trade_date) continue;
      q.expiry = parse_date(row[col_expiry], line);
      const auto kind = detail::parse_kind(row[col_kind]);
      if (!kind) throw parse_error("kind must be call or put, got '" + row[col_kind] + "'", line);
      q.kind = *kind;
      q.strike = parse_double(row[col_strike], line);
      q.bid = parse_double(row[col_bid], line);
      q.ask = parse_double(row[col_ask], line);
      if (!(q.strike > 0.0)) throw parse_error("strike must be > 0", line);
      if (q.bid < 0.0 || q.ask < q.bid) throw parse_error("requires ask >= bid >= 0", line);
      if (!(q.expiry > q.trade_date)) throw parse_error("expiry must be after trade date", line);
      if (q.bid == 0.0) continue;                               // exclusion filter (1)
      if (days_between(trade_date, q.expiry) < 7) continue;     // exclusion filter (2)
      by_expiry[q.expiry].push_back(q);
    } catch (const parse_error& e) {
      surface.row_errors.push_back({line, e.what()});
    }
  }

  for (auto& [expiry, quotes] : by_expiry) {
    QuoteSlice s;
    s.trade_date = trade_date;
    s.expiry = expiry;
    s.t = conventions().years_from_days(days_between(trade_date, expiry));
    s.quotes = std::move(quotes);
    std::sort(s.quotes.begin(), s.quotes.end(), [](const OptionQuote& a, const OptionQuote& b) {
      if (a.strike != b.strike) return a.strike < b.strike;
      return a.kind == OptionKind::Call && b.kind == OptionKind::Put;
    });
    int paired = 0;
    std::map<double, std::pair<bool, bool>> seen;
    for (const auto& q : s.quotes) {
      auto& flag = seen[q.strike];
      (q.kind == OptionKind::Call ? flag.first : flag.second) = true;
    }
    for (const auto& [k, f] : seen)
      if (f.first && f.second) ++paired;
    s.parity_fittable = paired >= 2;
    surface.slices.push_back(std::move(s));
  }
  return surface;
}

inline Surface load_surface(const std::string& path, Date trade_date) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open quote file " + path);
  return load_surface(in, trade_date);
}

// All trade dates of a combined file, or of every *.csv under a directory.
inline std::map<Date, Surface> load_all_surfaces(const std::string& path) {
  namespace fs = std::filesystem;
  std::map<Date, Surface> out;
  std::vector<std::string> files;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path))
      if (entry.is_regular_file() && entry.path().extension() == ".csv")
        files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }
  for (const auto& file : files) {
    CsvTable table = read_csv_file(file);
    const int col_trade = table.column("trade_date");
    std::vector<Date> dates;
    if (col_trade >= 0) {
      std::map<std::string, bool> uniq;
      for (const auto& row : table.rows)
        if (row.size() > static_cast<std::size_t>(col_trade)) uniq[row[col_trade]] = true;
      for (const auto& [s, _] : uniq) dates.push_back(parse_date(s));
    } else {
      dates.push_back(parse_date(fs::path(file).stem().string()));
    }
    for (Date d : dates) out[d] = load_surface(file, d);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Put-call parity fit
// ---------------------------------------------------------------------------

namespace detail {

struct ParityPair {
  double strike;
  double call_mid;
  double put_mid;
};

// Duplicate quotes of the same (kind, strike) collapse to their mean mid, so
// the fit is invariant to reordering and duplication.
inline std::vector<ParityPair> parity_pairs(const QuoteSlice& slice) {
  std::map<double, std::pair<std::pair<double, int>, std::pair<double, int>>> acc;
  for (const auto& q : slice.quotes) {
    auto& entry = acc[q.strike];
    auto& side = q.kind == OptionKind::Call ? entry.first : entry.second;
    side.first += q.mid();
    side.second += 1;
  }
  std::vector<ParityPair> pairs;
  for (const auto& [strike, sides] : acc)
    if (sides.first.second > 0 && sides.second.second > 0)
      pairs.push_back({strike, sides.first.first / sides.first.second,
                       sides.second.first / sides.second.second});
  return pairs;
}

}  // namespace detail

// Least-squares (r, F) from put-call parity: for fixed r the optimal F is
// closed form, the outer search over r in [-0.05, 0.15] is golden section.
inline std::pair<double, double> fit_rate_future(QuoteSlice& slice) {
  const auto pairs = detail::parity_pairs(slice);
  int distinct = static_cast<int>(pairs.size());
  if (distinct < 2)
    throw std::invalid_argument("fit_rate_future: need >= 2 strikes with both call "
                                "and put mids (underdetermined)");
  const double T = slice.t;
  auto best_f = [&](double r) {
    const double disc = std::exp(-r * T);
    double acc = 0.0;
    for (const auto& p : pairs) acc += (p.call_mid - p.put_mid) + disc * p.strike;
    return acc / (disc * pairs.size());
  };
  auto sse = [&](double r) {
    const double disc = std::exp(-r * T);
    const double f = best_f(r);
    double acc = 0.0;
    for (const auto& p : pairs) {
      const double resid = p.call_mid - p.put_mid - disc * (f - p.strike);
      acc += resid * resid;
    }
    return acc;
  };

  double a = -0.05, b = 0.15;
  const double invphi = 0.6180339887498949;
  double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
  double f1 = sse(x1), f2 = sse(x2);
  while (b - a > 1e-12) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = sse(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = sse(x2);
    }
  }
  const double r = 0.5 * (a + b);
  slice.fitted_r = r;
  slice.fitted_F = best_f(r);
  return {slice.fitted_r, slice.fitted_F};
}

// Calls inside the closed moneyness window K / F in [lo, hi].
inline std::vector<OptionQuote> moneyness_window(const QuoteSlice& slice, double lo = 0.9,
                                                 double hi = 2.0) {
  if (!slice.fitted())
    throw std::invalid_argument("moneyness_window: slice has no fitted futures price");
  std::vector<OptionQuote> out;
  for (const auto& q : slice.quotes) {
    if (q.kind != OptionKind::Call) continue;
    const double m = q.strike / slice.fitted_F;
    if (m >= lo && m <= hi) out.push_back(q);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward-variance strip
// ---------------------------------------------------------------------------

struct StripResult {
  double xi0 = 0.0;  // decimal annualised variance
  bool missing_put_tail = false;
  bool missing_call_tail = false;

  bool tail_warning() const { return missing_put_tail || missing_call_tail; }
};

// xi_0 = (F^2 + 2 Int_0^F P + 2 Int_F^inf C) / 100^2 with undiscounted mid
// quotes; the integrals run over the quoted OTM strikes by trapezoid, with
// no extrapolation beyond them.
inline StripResult strip_forward_variance(const QuoteSlice& slice) {
  if (!slice.fitted())
    throw std::invalid_argument("strip_forward_variance: fit (r, F) first");
  const double F = slice.fitted_F;
  const double undisc = std::exp(slice.fitted_r * slice.t);

  std::map<double, std::pair<double, int>> put_acc, call_acc;
  for (const auto& q : slice.quotes) {
    if (q.kind == OptionKind::Put && q.strike < F) {
      put_acc[q.strike].first += q.mid();
      put_acc[q.strike].second += 1;
    } else if (q.kind == OptionKind::Call && q.strike > F) {
      call_acc[q.strike].first += q.mid();
      call_acc[q.strike].second += 1;
    }
  }
  auto trapezoid = [&](const std::map<double, std::pair<double, int>>& acc) {
    double integral = 0.0;
    double prev_k = 0.0, prev_v = 0.0;
    bool have_prev = false;
    for (const auto& [k, v] : acc) {
      const double value = undisc * v.first / v.second;
      if (have_prev) integral += 0.5 * (prev_v + value) * (k - prev_k);
      prev_k = k;
      prev_v = value;
      have_prev = true;
    }
    return integral;
  };

  StripResult out;
  out.missing_put_tail = put_acc.empty();
  out.missing_call_tail = call_acc.empty();
  const double points2 = F * F + 2.0 * trapezoid(put_acc) + 2.0 * trapezoid(call_acc);
  out.xi0 = points2 / 1e4;
  return out;
}

// Per-expiry stripped values; pricing consumes the bucket-constant step
// curve anchored at the expiries, display may interpolate linearly.
struct StrippedCurve {
  struct Point {
    Date expiry{};
    int expiry_days = 0;
    double t = 0.0;
    double xi0 = 0.0;
    bool tail_warning = false;
  };
  std::vector<Point> points;

  ForwardVarianceCurve to_curve() const {
    if (points.empty()) throw std::invalid_argument("StrippedCurve: empty");
    std::vector<ForwardVarianceCurve::Bucket> buckets;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double end = i + 1 < points.size() ? points[i + 1].t
                                               : points[i].t + conventions().delta_years;
      buckets.push_back({points[i].t, end, points[i].xi0});
    }
    return ForwardVarianceCurve(std::move(buckets));
  }
};

inline StrippedCurve strip_surface(const Surface& surface) {
  StrippedCurve out;
  for (const auto& slice : surface.slices) {
    if (!slice.fitted()) continue;
    const StripResult r = strip_forward_variance(slice);
    out.points.push_back({slice.expiry, slice.expiry_days(), slice.t, r.xi0,
                          r.tail_warning()});
  }
  return out;
}

// Single-bucket curve for one slice: the calibration convention keeps
// xi_0^T constant on [T_i, T_i + Delta].
inline ForwardVarianceCurve slice_curve(double t_i, double xi0) {
  return ForwardVarianceCurve({{t_i, t_i + conventions().delta_years, xi0}});
}

}  // namespace mbq
