#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include "mbq/errors.hpp"

namespace mbq {
namespace detail {

// Gauss 7 / Kronrod 15 pair (QUADPACK dqk15 constants).
inline constexpr double kGK15Nodes[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.000000000000000};
inline constexpr double kGK15WK[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
inline constexpr double kGK15WG[4] = {0.129484966168870, 0.279705391489277,
                                      0.381830050505119, 0.417959183673469};

struct SegmentResult {
  double integral = 0.0;
  double error = 0.0;
};

template <typename F>
SegmentResult gk15(const F& f, double a, double b) {
  const double centre = 0.5 * (a + b);
  const double hlgth = 0.5 * (b - a);
  const double fc = f(centre);
  double resg = fc * kGK15WG[3];
  double resk = fc * kGK15WK[7];
  double resabs = std::fabs(resk);
  double fv[15];
  fv[7] = fc;
  for (int j = 0; j < 7; ++j) {
    const double absc = hlgth * kGK15Nodes[j];
    const double f1 = f(centre - absc);
    const double f2 = f(centre + absc);
    fv[j] = f1;
    fv[14 - j] = f2;
    const double fsum = f1 + f2;
    if (j % 2 == 1) resg += kGK15WG[j / 2] * fsum;
    resk += kGK15WK[j] * fsum;
    resabs += kGK15WK[j] * (std::fabs(f1) + std::fabs(f2));
  }
  const double reskh = resk * 0.5;
  double resasc = kGK15WK[7] * std::fabs(fc - reskh);
  for (int j = 0; j < 7; ++j)
    resasc += kGK15WK[j] * (std::fabs(fv[j] - reskh) + std::fabs(fv[14 - j] - reskh));
  resasc *= std::fabs(hlgth);
  resabs *= std::fabs(hlgth);

  SegmentResult r;
  r.integral = resk * hlgth;
  double err = std::fabs((resk - resg) * hlgth);
  if (resasc != 0.0 && err != 0.0)
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  const double eps50 = 50.0 * std::numeric_limits<double>::epsilon();
  if (resabs > std::numeric_limits<double>::min() / eps50)
    err = std::max(eps50 * resabs, err);
  r.error = err;
  return r;
}

}  // namespace detail

struct AdaptiveResult {
  double integral = 0.0;
  double error_estimate = 0.0;
  long evaluations = 0;
};

// Globally adaptive 1-D integration on [a, b]: G7K15 on every segment, the
// worst segment bisected until the summed error estimate meets
// max(abs_tol, rel_tol * |I|). Starts from init_segments equal pieces.
template <typename F>
AdaptiveResult integrate_adaptive(const F& f, double a, double b, double abs_tol,
                                  double rel_tol, int max_segments = 2000,
                                  int init_segments = 10) {
  struct Seg {
    double a, b, integral, error;
    bool operator<(const Seg& o) const { return error < o.error; }
  };
  std::priority_queue<Seg> heap;
  AdaptiveResult out;
  double total = 0.0, errsum = 0.0;
  int nseg = 0;
  for (int i = 0; i < init_segments; ++i) {
    const double lo = a + (b - a) * i / init_segments;
    const double hi = a + (b - a) * (i + 1) / init_segments;
    auto r = detail::gk15(f, lo, hi);
    heap.push({lo, hi, r.integral, r.error});
    total += r.integral;
    errsum += r.error;
    out.evaluations += 15;
    ++nseg;
  }
  while (errsum > std::max(abs_tol, rel_tol * std::fabs(total))) {
    if (nseg >= max_segments)
      throw convergence_error("adaptive quadrature: tolerance not reached, estimate " +
                                  std::to_string(total),
                              errsum);
    Seg worst = heap.top();
    heap.pop();
    total -= worst.integral;
    errsum -= worst.error;
    const double mid = 0.5 * (worst.a + worst.b);
    auto r1 = detail::gk15(f, worst.a, mid);
    auto r2 = detail::gk15(f, mid, worst.b);
    heap.push({worst.a, mid, r1.integral, r1.error});
    heap.push({mid, worst.b, r2.integral, r2.error});
    total += r1.integral + r2.integral;
    errsum += r1.error + r2.error;
    out.evaluations += 30;
    ++nseg;
  }
  out.integral = total;
  out.error_estimate = errsum;
  return out;
}

namespace detail {

struct RectResult {
  double integral = 0.0;
  double error = 0.0;
  int split_axis = 0;
};

// Tensor G7K15 on a rectangle from a single 15x15 block of evaluations.
// The per-axis Gauss/Kronrod differences pick the split direction.
template <typename F2>
RectResult gk15_rect(const F2& f, double ax, double bx, double ay, double by) {
  double nx[15], ny[15], wkx[15], wky[15];
  const double cx = 0.5 * (ax + bx), hx = 0.5 * (bx - ax);
  const double cy = 0.5 * (ay + by), hy = 0.5 * (by - ay);
  double wg[15] = {0};
  for (int j = 0; j < 7; ++j) {
    nx[j] = cx - hx * kGK15Nodes[j];
    nx[14 - j] = cx + hx * kGK15Nodes[j];
    ny[j] = cy - hy * kGK15Nodes[j];
    ny[14 - j] = cy + hy * kGK15Nodes[j];
    wkx[j] = wkx[14 - j] = kGK15WK[j];
    wky[j] = wky[14 - j] = kGK15WK[j];
    if (j % 2 == 1) wg[j] = wg[14 - j] = kGK15WG[j / 2];
  }
  nx[7] = cx;
  ny[7] = cy;
  wkx[7] = wky[7] = kGK15WK[7];
  wg[7] = kGK15WG[3];

  double fv[15][15];
  double kk = 0.0, gk = 0.0, kg = 0.0;
  for (int i = 0; i < 15; ++i) {
    double row_k = 0.0;
    for (int j = 0; j < 15; ++j) {
      const double v = f(nx[i], ny[j]);
      fv[i][j] = v;
      row_k += wky[j] * v;
      kg += wkx[i] * wg[j] * v;
    }
    kk += wkx[i] * row_k;
    gk += wg[i] * row_k;
  }
  const double scale = hx * hy;
  // Weights sum to 2 per axis, so kk/4 estimates the mean of f on the cell.
  const double fmean = kk * 0.25;
  double resasc = 0.0;
  for (int i = 0; i < 15; ++i)
    for (int j = 0; j < 15; ++j) resasc += wkx[i] * wky[j] * std::fabs(fv[i][j] - fmean);
  resasc *= std::fabs(scale);

  RectResult r;
  r.integral = kk * scale;
  const double ex = std::fabs((kk - gk) * scale);  // sensitivity to the x rule
  const double ey = std::fabs((kk - kg) * scale);
  r.split_axis = ex >= ey ? 0 : 1;
  double err = ex + ey;
  if (resasc != 0.0 && err != 0.0)
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  r.error = err;
  return r;
}

}  // namespace detail

// Globally adaptive 2-D cubature over [ax,bx] x [ay,by]; rectangles are
// split along the axis whose embedded Gauss/Kronrod difference dominates.
template <typename F2>
AdaptiveResult integrate_adaptive_2d(const F2& f, double ax, double bx, double ay,
                                     double by, double abs_tol, double rel_tol,
                                     int max_rects = 4000, int init_grid = 5) {
  struct Rect {
    double ax, bx, ay, by, integral, error;
    int split_axis;
    bool operator<(const Rect& o) const { return error < o.error; }
  };
  std::priority_queue<Rect> heap;
  AdaptiveResult out;
  double total = 0.0, errsum = 0.0;
  int nrect = 0;
  for (int i = 0; i < init_grid; ++i) {
    for (int j = 0; j < init_grid; ++j) {
      const double x0 = ax + (bx - ax) * i / init_grid;
      const double x1 = ax + (bx - ax) * (i + 1) / init_grid;
      const double y0 = ay + (by - ay) * j / init_grid;
      const double y1 = ay + (by - ay) * (j + 1) / init_grid;
      auto r = detail::gk15_rect(f, x0, x1, y0, y1);
      heap.push({x0, x1, y0, y1, r.integral, r.error, r.split_axis});
      total += r.integral;
      errsum += r.error;
      out.evaluations += 225;
      ++nrect;
    }
  }
  while (errsum > std::max(abs_tol, rel_tol * std::fabs(total))) {
    if (nrect >= max_rects)
      throw convergence_error("adaptive cubature: tolerance not reached, estimate " +
                                  std::to_string(total),
                              errsum);
    Rect worst = heap.top();
    heap.pop();
    total -= worst.integral;
    errsum -= worst.error;
    double x0 = worst.ax, x1 = worst.bx, y0 = worst.ay, y1 = worst.by;
    double xm = 0.5 * (x0 + x1), ym = 0.5 * (y0 + y1);
    detail::RectResult r1, r2;
    Rect c1, c2;
    if (worst.split_axis == 0) {
      r1 = detail::gk15_rect(f, x0, xm, y0, y1);
      r2 = detail::gk15_rect(f, xm, x1, y0, y1);
      c1 = {x0, xm, y0, y1, r1.integral, r1.error, r1.split_axis};
      c2 = {xm, x1, y0, y1, r2.integral, r2.error, r2.split_axis};
    } else {
      r1 = detail::gk15_rect(f, x0, x1, y0, ym);
      r2 = detail::gk15_rect(f, x0, x1, ym, y1);
      c1 = {x0, x1, y0, ym, r1.integral, r1.error, r1.split_axis};
      c2 = {x0, x1, ym, y1, r2.integral, r2.error, r2.split_axis};
    }
    heap.push(c1);
    heap.push(c2);
    total += r1.integral + r2.integral;
    errsum += r1.error + r2.error;
    out.evaluations += 450;
    ++nrect;
  }
  out.integral = total;
  out.error_estimate = errsum;
  return out;
}

}  // namespace mbq
