#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "mbq/errors.hpp"
#include "mbq/math/normal.hpp"
#include "mbq/math/sobol.hpp"
#include "mbq/models.hpp"

namespace mbq {

// L2-optimal (1-D) or Lloyd-stationary (2-D) quantiser of the standard
// Gaussian law. points is row-major n x dim; dim-1 points are strictly
// increasing.
struct QuantiserGrid {
  int dim = 1;
  int n = 0;
  std::vector<double> points;
  std::vector<double> probs;
  double distortion = 0.0;  // L2 mean quantisation error e_N

  double x(int j) const { return points[static_cast<std::size_t>(j) * dim]; }
  double y(int j) const { return points[static_cast<std::size_t>(j) * dim + 1]; }
};

namespace detail {

// Voronoi midpoints of a sorted 1-D grid; m[0] = -inf, m[n] = +inf.
inline std::vector<double> midpoints(const std::vector<double>& y) {
  std::vector<double> m(y.size() + 1);
  m.front() = -std::numeric_limits<double>::infinity();
  m.back() = std::numeric_limits<double>::infinity();
  for (std::size_t j = 1; j < y.size(); ++j) m[j] = 0.5 * (y[j - 1] + y[j]);
  return m;
}

// Exact second moment of (X - y)^2 over the Gaussian cell (a, b).
inline double cell_sq_error(double a, double b, double y) {
  const double pa = std::isinf(a) ? 0.0 : norm_pdf(a);
  const double pb = std::isinf(b) ? 0.0 : norm_pdf(b);
  const double xa = std::isinf(a) ? 0.0 : a * pa;
  const double xb = std::isinf(b) ? 0.0 : b * pb;
  return (1.0 + y * y) * norm_mass(a, b) + xa - xb - 2.0 * y * (pa - pb);
}

inline double distortion_1d(const std::vector<double>& y) {
  const std::vector<double> m = midpoints(y);
  double e2 = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) e2 += cell_sq_error(m[j], m[j + 1], y[j]);
  return std::sqrt(std::max(0.0, e2));
}

// Solves the positive-half stationarity system. Variables z_1 < ... < z_m
// are the positive points; for odd n a fixed point at 0 contributes the
// moving inner boundary b_0 = z_1 / 2, for even n b_0 = 0.
inline std::vector<double> solve_half_system(int n, double tol, int max_iter) {
  const bool odd = (n % 2) != 0;
  const int m = n / 2;
  std::vector<double> z(m);
  // Companion-density init: optimal point density is ~ phi^{1/3}, the
  // N(0,3) law, so seed from its quantiles.
  for (int i = 0; i < m; ++i) {
    const double u = odd ? 0.5 + (i + 1.0) / n : 0.5 + (i + 0.5) / n;
    z[i] = std::sqrt(3.0) * norm_cdf_inv(std::min(u, 1.0 - 1e-16));
  }

  std::vector<double> b(m + 1), F(m), diag(m), lower(m), upper(m), dz(m);
  // Residual scaled by cell mass: the mismatch of each point against its
  // cell's conditional mean, in point-location units. Returns the max norm;
  // the squared 2-norm comes back through the out-parameter.
  auto residual = [&](const std::vector<double>& zz, std::vector<double>& FF,
                      std::vector<double>& bb, double& sq) {
    bb[0] = odd ? 0.5 * zz[0] : 0.0;
    for (int i = 1; i < m; ++i) bb[i] = 0.5 * (zz[i - 1] + zz[i]);
    bb[m] = std::numeric_limits<double>::infinity();
    double worst = 0.0;
    sq = 0.0;
    for (int i = 0; i < m; ++i) {
      const double mass = norm_mass(bb[i], bb[i + 1]);
      const double pa = norm_pdf(bb[i]);
      const double pb = std::isinf(bb[i + 1]) ? 0.0 : norm_pdf(bb[i + 1]);
      FF[i] = zz[i] * mass - (pa - pb);
      const double scaled = FF[i] / mass;
      worst = std::max(worst, std::fabs(scaled));
      sq += scaled * scaled;
    }
    return worst;
  };

  double res_sq = 0.0;
  double res = residual(z, F, b, res_sq);

  // Lloyd pre-smoothing: replacing each point by its exact cell mean is
  // globally stable and brings the tail cells into Newton's basin.
  for (int sweep = 0; sweep < 600 && res > 1e-5; ++sweep) {
    for (int i = 0; i < m; ++i) z[i] = norm_cell_mean(b[i], b[i + 1]);
    res = residual(z, F, b, res_sq);
  }

  for (int iter = 0; iter < max_iter; ++iter) {
    if (res < tol) return z;
    for (int i = 0; i < m; ++i) {
      const double mass = norm_mass(b[i], b[i + 1]);
      const double plo = norm_pdf(b[i]);
      const double phi_hi = std::isinf(b[i + 1]) ? 0.0 : norm_pdf(b[i + 1]);
      double d = mass;
      if (i + 1 < m) {
        d += 0.5 * phi_hi * (z[i] - b[i + 1]);
        upper[i] = 0.5 * phi_hi * (z[i] - b[i + 1]);
      } else {
        upper[i] = 0.0;
      }
      if (i > 0) {
        d -= 0.5 * plo * (z[i] - b[i]);
        lower[i] = -0.5 * plo * (z[i] - b[i]);
      } else {
        lower[i] = 0.0;
        if (odd) d -= 0.5 * plo * (z[0] - b[0]);  // b_0 moves with z_1
      }
      diag[i] = d;
    }
    // Thomas solve J dz = -F.
    std::vector<double> c(m), dvec(m);
    c[0] = upper[0] / diag[0];
    dvec[0] = -F[0] / diag[0];
    for (int i = 1; i < m; ++i) {
      const double w = diag[i] - lower[i] * c[i - 1];
      c[i] = i + 1 < m ? upper[i] / w : 0.0;
      dvec[i] = (-F[i] - lower[i] * dvec[i - 1]) / w;
    }
    dz[m - 1] = dvec[m - 1];
    for (int i = m - 2; i >= 0; --i) dz[i] = dvec[i] - c[i] * dz[i + 1];

    double step_inf = 0.0, z_inf = 1.0;
    for (int i = 0; i < m; ++i) {
      step_inf = std::max(step_inf, std::fabs(dz[i]));
      z_inf = std::max(z_inf, std::fabs(z[i]));
    }
    if (step_inf <= 1e-15 * z_inf) return z;  // at the floating floor

    // Damped update on the 2-norm merit; the half-grid must stay positive
    // and strictly increasing.
    double lambda = 1.0;
    std::vector<double> zn(m), Fn(m), bn(m + 1);
    bool stepped = false;
    for (int attempt = 0; attempt < 40; ++attempt) {
      bool ok = true;
      for (int i = 0; i < m; ++i) {
        zn[i] = z[i] + lambda * dz[i];
        if (zn[i] <= 0.0 || (i > 0 && zn[i] <= zn[i - 1])) ok = false;
      }
      double rn_sq = std::numeric_limits<double>::infinity();
      double rn = ok ? residual(zn, Fn, bn, rn_sq) : rn_sq;
      if (ok && rn_sq < res_sq) {
        z = zn;
        F = Fn;
        b = bn;
        res = rn;
        res_sq = rn_sq;
        stepped = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!stepped) {
      // No direction reduces the residual further: either converged to the
      // rounding floor or genuinely stuck.
      if (res < 1e-9) return z;
      throw convergence_error("gaussian quantiser: Newton step rejected", res);
    }
  }
  if (res >= tol && res >= 1e-9)
    throw convergence_error("gaussian quantiser: stationarity not reached", res);
  return z;
}

}  // namespace detail

// Stationary N-point quantiser of N(0,1) by Newton iteration on the
// stationarity conditions with exact Gaussian cell integrals. The grid is
// symmetric by construction: the positive half is solved and mirrored.
inline QuantiserGrid build_gaussian_1d(int n, double tol = 1e-12) {
  if (n < 1) throw std::invalid_argument("build_gaussian_1d: n must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("build_gaussian_1d: tol must be > 0");
  QuantiserGrid g;
  g.dim = 1;
  g.n = n;
  if (n == 1) {
    g.points = {0.0};
    g.probs = {1.0};
    g.distortion = 1.0;  // e^2 = Var(Z)
    return g;
  }
  const bool odd = (n % 2) != 0;
  const int m = n / 2;
  const std::vector<double> z = detail::solve_half_system(n, tol, 200);

  g.points.resize(n);
  g.probs.resize(n);
  for (int i = 0; i < m; ++i) {
    g.points[m + (odd ? 1 : 0) + i] = z[i];
    g.points[m - 1 - i] = -z[i];
  }
  if (odd) g.points[m] = 0.0;
  std::vector<double> mid = detail::midpoints(g.points);
  for (int j = 0; j < n; ++j) g.probs[j] = norm_mass(mid[j], mid[j + 1]);
  double total = 0.0;
  for (double p : g.probs) total += p;
  for (double& p : g.probs) p /= total;
  g.distortion = detail::distortion_1d(g.points);
  return g;
}

namespace detail {

// Uniform-bucket nearest-neighbour index over a fixed 2-D point set.
class NearestGrid2D {
 public:
  NearestGrid2D(const std::vector<double>& pts, int n) : pts_(pts), n_(n) {
    lo_[0] = lo_[1] = std::numeric_limits<double>::infinity();
    hi_[0] = hi_[1] = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      lo_[0] = std::min(lo_[0], pts_[2 * j]);
      hi_[0] = std::max(hi_[0], pts_[2 * j]);
      lo_[1] = std::min(lo_[1], pts_[2 * j + 1]);
      hi_[1] = std::max(hi_[1], pts_[2 * j + 1]);
    }
    side_ = std::max(4, static_cast<int>(std::ceil(std::sqrt(double(n)))));
    const double pad = 1e-9;
    for (int d = 0; d < 2; ++d) {
      lo_[d] -= pad;
      hi_[d] += pad;
      width_[d] = (hi_[d] - lo_[d]) / side_;
      if (width_[d] <= 0.0) width_[d] = 1.0;
    }
    cells_.assign(static_cast<std::size_t>(side_) * side_, {});
    for (int j = 0; j < n; ++j)
      cells_[cell_of(pts_[2 * j], pts_[2 * j + 1])].push_back(j);
  }

  int nearest(double x, double y) const {
    const int cx = coord(x, 0), cy = coord(y, 1);
    const double min_width = std::min(width_[0], width_[1]);
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int ring = 0; ring < side_; ++ring) {
      // Any point in Chebyshev ring R lies at least (R-1) bucket widths
      // away, so stop once that floor cannot beat the candidate.
      if (best >= 0 && ring >= 1) {
        const double gap = (ring - 1) * min_width;
        if (gap * gap > best_d2) break;
      }
      for (int i = cx - ring; i <= cx + ring; ++i) {
        for (int j = cy - ring; j <= cy + ring; ++j) {
          if (ring > 0 && std::abs(i - cx) != ring && std::abs(j - cy) != ring) continue;
          if (i < 0 || j < 0 || i >= side_ || j >= side_) continue;
          for (int idx : cells_[static_cast<std::size_t>(i) * side_ + j]) {
            const double dx = pts_[2 * idx] - x;
            const double dy = pts_[2 * idx + 1] - y;
            const double d2 = dx * dx + dy * dy;
            if (d2 < best_d2) {
              best_d2 = d2;
              best = idx;
            }
          }
        }
      }
    }
    return best;
  }

 private:
  int coord(double v, int d) const {
    int c = static_cast<int>((v - lo_[d]) / width_[d]);
    return std::min(side_ - 1, std::max(0, c));
  }
  std::size_t cell_of(double x, double y) const {
    return static_cast<std::size_t>(coord(x, 0)) * side_ + coord(y, 1);
  }

  const std::vector<double>& pts_;
  int n_;
  int side_ = 0;
  double lo_[2], hi_[2], width_[2];
  std::vector<std::vector<int>> cells_;
};

inline void gaussian_sample_2d(const Sobol2D& seq, std::uint64_t first,
                               std::uint64_t count, std::vector<double>& out) {
  out.resize(2 * count);
  for (std::uint64_t i = 0; i < count; ++i) {
    double u1, u2;
    seq.point(first + i, u1, u2);
    out[2 * i] = norm_cdf_inv(u1);
    out[2 * i + 1] = norm_cdf_inv(u2);
  }
}

// Best factor split n = n1 * n2 with n1 <= n2; (1, n) only when forced.
inline std::pair<int, int> factor_split(int n) {
  int best1 = 1, best2 = n;
  for (int a = 2; a * a <= n; ++a)
    if (n % a == 0) {
      best1 = a;
      best2 = n / a;
    }
  return {best1, best2};
}

}  // namespace detail

// Lloyd fixed point for the standard bivariate normal on a deterministic
// Sobol sample: independence-product initialisation, cell masses and means
// from a fixed-size quasi-random integration, seed entering as a digital
// shift of the sequence. A finer final sweep refreshes points, probabilities
// and the distortion estimate.
inline QuantiserGrid build_gaussian_2d(int n, double tol = 1e-9,
                                       std::uint64_t seed = 0) {
  if (n < 1) throw std::invalid_argument("build_gaussian_2d: n must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("build_gaussian_2d: tol must be > 0");
  QuantiserGrid g;
  g.dim = 2;
  g.n = n;
  if (n == 1) {
    g.points = {0.0, 0.0};
    g.probs = {1.0};
    g.distortion = std::sqrt(2.0);
    return g;
  }

  auto [n1, n2] = detail::factor_split(n);
  std::vector<double> pts(2 * static_cast<std::size_t>(n));
  if (n1 >= 2) {
    const QuantiserGrid ga = build_gaussian_1d(n1);
    const QuantiserGrid gb = build_gaussian_1d(n2);
    std::size_t j = 0;
    for (int a = 0; a < n1; ++a)
      for (int b = 0; b < n2; ++b) {
        pts[2 * j] = ga.points[a];
        pts[2 * j + 1] = gb.points[b];
        ++j;
      }
  } else {
    // Prime n: golden-angle spiral with chi-law radial spacing.
    for (int j = 0; j < n; ++j) {
      const double u = (j + 0.5) / n;
      const double r = std::sqrt(-2.0 * std::log1p(-u));
      const double a = 2.39996322972865332 * (j + 1);
      pts[2 * j] = r * std::cos(a);
      pts[2 * j + 1] = r * std::sin(a);
    }
  }

  const Sobol2D seq(seed);
  const std::uint64_t m_coarse = 1u << 19;
  std::vector<double> sample;
  detail::gaussian_sample_2d(seq, 1, m_coarse, sample);

  std::vector<double> sum_x(n), sum_y(n);
  std::vector<std::int64_t> count(n);
  double prev_e2 = std::numeric_limits<double>::infinity();
  const int max_iter = 4000;
  bool converged = false;
  double e2 = 0.0;
  for (int iter = 0; iter < max_iter; ++iter) {
    detail::NearestGrid2D nn(pts, n);
    std::fill(sum_x.begin(), sum_x.end(), 0.0);
    std::fill(sum_y.begin(), sum_y.end(), 0.0);
    std::fill(count.begin(), count.end(), 0);
    e2 = 0.0;
    for (std::uint64_t i = 0; i < m_coarse; ++i) {
      const double x = sample[2 * i], y = sample[2 * i + 1];
      const int j = nn.nearest(x, y);
      const double dx = x - pts[2 * j], dy = y - pts[2 * j + 1];
      e2 += dx * dx + dy * dy;
      sum_x[j] += x;
      sum_y[j] += y;
      ++count[j];
    }
    e2 /= static_cast<double>(m_coarse);
    for (int j = 0; j < n; ++j)
      if (count[j] > 0) {
        pts[2 * j] = sum_x[j] / count[j];
        pts[2 * j + 1] = sum_y[j] / count[j];
      }
    if (std::fabs(prev_e2 - e2) <= tol * e2) {
      converged = true;
      break;
    }
    prev_e2 = e2;
  }
  if (!converged)
    throw convergence_error("build_gaussian_2d: Lloyd iteration did not settle",
                            std::fabs(prev_e2 - e2));

  // Final refinement on a larger sample: one relocation sweep, then masses
  // and distortion for the settled grid.
  const std::uint64_t m_fine = 1u << 23;
  sample.clear();
  sample.shrink_to_fit();
  std::vector<double> fine;
  detail::gaussian_sample_2d(seq, 1 + m_coarse, m_fine, fine);
  for (int sweep = 0; sweep < 2; ++sweep) {
    detail::NearestGrid2D nn(pts, n);
    std::fill(sum_x.begin(), sum_x.end(), 0.0);
    std::fill(sum_y.begin(), sum_y.end(), 0.0);
    std::fill(count.begin(), count.end(), 0);
    e2 = 0.0;
    for (std::uint64_t i = 0; i < m_fine; ++i) {
      const double x = fine[2 * i], y = fine[2 * i + 1];
      const int j = nn.nearest(x, y);
      const double dx = x - pts[2 * j], dy = y - pts[2 * j + 1];
      e2 += dx * dx + dy * dy;
      sum_x[j] += x;
      sum_y[j] += y;
      ++count[j];
    }
    e2 /= static_cast<double>(m_fine);
    if (sweep == 0) {
      for (int j = 0; j < n; ++j)
        if (count[j] > 0) {
          pts[2 * j] = sum_x[j] / count[j];
          pts[2 * j + 1] = sum_y[j] / count[j];
        }
    }
  }

  g.points = std::move(pts);
  g.probs.resize(n);
  double total = 0.0;
  for (int j = 0; j < n; ++j) {
    // An unhit cell keeps half a sample of mass so probabilities stay > 0.
    g.probs[j] = count[j] > 0 ? static_cast<double>(count[j]) : 0.5;
    total += g.probs[j];
  }
  for (double& p : g.probs) p /= total;
  g.distortion = std::sqrt(e2);
  return g;
}

// ---------------------------------------------------------------------------
// Correlation and OU scaling
// ---------------------------------------------------------------------------

struct CorrelatedPair {
  std::vector<double> y1;
  std::vector<double> y2;
  double rho12 = 0.0;
};

// y1 = z1, y2 = rho12 z1 + sqrt(1-rho12^2) z2: standard bivariate pair with
// correlation rho12 (Cholesky mapping).
inline CorrelatedPair correlate(const std::vector<double>& z1,
                                const std::vector<double>& z2, double rho12) {
  if (std::fabs(rho12) > 1.0)
    throw std::invalid_argument("correlate: |rho12| must be <= 1");
  if (z1.size() != z2.size())
    throw std::invalid_argument("correlate: coordinate lengths differ");
  CorrelatedPair out;
  out.rho12 = rho12;
  out.y1 = z1;
  out.y2.resize(z2.size());
  const double w = std::sqrt(1.0 - rho12 * rho12);
  for (std::size_t i = 0; i < z2.size(); ++i) out.y2[i] = rho12 * z1[i] + w * z2[i];
  return out;
}

// Quantised OU states at a fixed observation time.
struct OUStateGrid {
  double t = 0.0;
  int dim = 1;
  int n = 0;
  std::vector<double> states;  // row-major n x dim
  std::vector<double> probs;

  double x(int j) const { return states[static_cast<std::size_t>(j) * dim]; }
  double y(int j) const { return states[static_cast<std::size_t>(j) * dim + 1]; }
};

// X_t = sigma_{X_t} z for each grid point.
inline OUStateGrid scale_to_ou(const QuantiserGrid& grid, double k, double t) {
  if (grid.dim != 1) throw std::invalid_argument("scale_to_ou: 1-D grid expected");
  if (t < 0.0) throw std::invalid_argument("scale_to_ou: t must be >= 0");
  OUStateGrid out;
  out.t = t;
  out.dim = 1;
  out.n = grid.n;
  out.probs = grid.probs;
  out.states.resize(grid.n);
  const double sd = std::sqrt(ou_variance(k, t));
  for (int j = 0; j < grid.n; ++j) out.states[j] = sd * grid.points[j];
  return out;
}

// Correlated pair (X^1_t, X^2_t): Cholesky at the horizon correlation
// rho12(t) = v12 / sqrt(v1 v2), then per-coordinate OU standard deviations.
inline OUStateGrid scale_to_ou(const QuantiserGrid& grid, const TwoFactorParams& p,
                               double t) {
  if (grid.dim != 2) throw std::invalid_argument("scale_to_ou: 2-D grid expected");
  if (t < 0.0) throw std::invalid_argument("scale_to_ou: t must be >= 0");
  OUStateGrid out;
  out.t = t;
  out.dim = 2;
  out.n = grid.n;
  out.probs = grid.probs;
  out.states.resize(2 * static_cast<std::size_t>(grid.n));
  const CrossVariances v = cross_variances(p, t);
  const double rho12 = ou_correlation(p, t);
  const double s1 = std::sqrt(v.v1), s2 = std::sqrt(v.v2);
  const double w = std::sqrt(1.0 - rho12 * rho12);
  for (int j = 0; j < grid.n; ++j) {
    const double z1 = grid.x(j), z2 = grid.y(j);
    out.states[2 * j] = s1 * z1;
    out.states[2 * j + 1] = s2 * (rho12 * z1 + w * z2);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialisation and cache
// ---------------------------------------------------------------------------

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "grid files are little-endian");

inline constexpr char kGridMagic[4] = {'M', 'B', 'Q', 'G'};
inline constexpr std::uint32_t kGridVersion = 1;

inline double estimate_distortion(const QuantiserGrid& g) {
  if (g.dim == 1) return distortion_1d(g.points);
  const Sobol2D seq(0);
  const std::uint64_t m = 1u << 20;
  NearestGrid2D nn(g.points, g.n);
  double e2 = 0.0;
  for (std::uint64_t i = 1; i <= m; ++i) {
    double u1, u2;
    seq.point(i, u1, u2);
    const double x = norm_cdf_inv(u1), y = norm_cdf_inv(u2);
    const int j = nn.nearest(x, y);
    const double dx = x - g.points[2 * j], dy = y - g.points[2 * j + 1];
    e2 += dx * dx + dy * dy;
  }
  return std::sqrt(e2 / m);
}

inline void validate_grid(QuantiserGrid& g) {
  if (g.n <= 0 || g.points.size() != static_cast<std::size_t>(g.n) * g.dim ||
      g.probs.size() != static_cast<std::size_t>(g.n))
    throw parse_error("quantiser grid: inconsistent sizes");
  double total = 0.0;
  for (double p : g.probs) {
    if (!(p > 0.0)) throw parse_error("quantiser grid: probabilities must be > 0");
    total += p;
  }
  if (std::fabs(total - 1.0) > 1e-6)
    throw parse_error("quantiser grid: probabilities sum to " + std::to_string(total) +
                      ", expected 1");
  for (double& p : g.probs) p /= total;
  if (g.dim == 1)
    for (int j = 1; j < g.n; ++j)
      if (!(g.points[j] > g.points[j - 1]))
        throw parse_error("quantiser grid: 1-D points must be strictly increasing");
}

}  // namespace detail

inline void save_grid(const QuantiserGrid& grid, const std::string& path) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_grid: cannot open " + tmp);
    out.write(detail::kGridMagic, 4);
    const std::uint32_t version = detail::kGridVersion;
    const std::uint32_t dim = static_cast<std::uint32_t>(grid.dim);
    const std::uint64_t n = static_cast<std::uint64_t>(grid.n);
    out.write(reinterpret_cast<const char*>(&version), sizeof version);
    out.write(reinterpret_cast<const char*>(&dim), sizeof dim);
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(reinterpret_cast<const char*>(&grid.distortion), sizeof grid.distortion);
    out.write(reinterpret_cast<const char*>(grid.points.data()),
              static_cast<std::streamsize>(grid.points.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(grid.probs.data()),
              static_cast<std::streamsize>(grid.probs.size() * sizeof(double)));
    if (!out) throw std::runtime_error("save_grid: write failed for " + tmp);
  }
  fs::rename(tmp, target);
}

namespace detail {

inline QuantiserGrid load_grid_text(std::istream& in) {
  QuantiserGrid g;
  g.dim = 0;
  std::string line;
  long line_no = 0;
  std::vector<double> cols;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    cols.clear();
    double v;
    while (ls >> v) cols.push_back(v);
    if (cols.empty()) {
      std::istringstream probe(line);
      std::string word;
      if (probe >> word) throw parse_error("quantiser grid: unreadable row", line_no);
      continue;  // blank line
    }
    int dim;
    if (cols.size() == 2)
      dim = 1;
    else if (cols.size() == 3 || cols.size() == 4)
      dim = 2;  // x, y, prob and an ignorable trailing column
    else
      throw parse_error("quantiser grid: expected 2, 3 or 4 columns", line_no);
    if (g.dim == 0) g.dim = dim;
    if (dim != g.dim) throw parse_error("quantiser grid: mixed column counts", line_no);
    if (dim == 1) {
      g.points.push_back(cols[0]);
      g.probs.push_back(cols[1]);
    } else {
      g.points.push_back(cols[0]);
      g.points.push_back(cols[1]);
      g.probs.push_back(cols[2]);
    }
  }
  if (g.probs.empty()) throw parse_error("quantiser grid: no rows");
  g.n = static_cast<int>(g.probs.size());
  if (g.dim == 1) {  // keep (point, prob) pairs aligned while sorting
    std::vector<std::size_t> idx(g.probs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return g.points[a] < g.points[b]; });
    std::vector<double> pts(g.n), pr(g.n);
    for (int i = 0; i < g.n; ++i) {
      pts[i] = g.points[idx[i]];
      pr[i] = g.probs[idx[i]];
    }
    g.points = std::move(pts);
    g.probs = std::move(pr);
  }
  validate_grid(g);
  g.distortion = estimate_distortion(g);
  return g;
}

}  // namespace detail

// Reads either the binary cache format or the plain-text layouts (1-D:
// point prob; 2-D: x y prob [ignored]) used by externally computed grids.
inline QuantiserGrid load_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_grid: cannot open " + path);
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  if (in.gcount() == 4 && std::equal(magic, magic + 4, detail::kGridMagic)) {
    std::uint32_t version = 0, dim = 0;
    std::uint64_t n = 0;
    QuantiserGrid g;
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    in.read(reinterpret_cast<char*>(&dim), sizeof dim);
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    in.read(reinterpret_cast<char*>(&g.distortion), sizeof g.distortion);
    if (!in || version != detail::kGridVersion || (dim != 1 && dim != 2))
      throw parse_error("quantiser grid: bad binary header in " + path);
    g.dim = static_cast<int>(dim);
    g.n = static_cast<int>(n);
    g.points.resize(n * dim);
    g.probs.resize(n);
    in.read(reinterpret_cast<char*>(g.points.data()),
            static_cast<std::streamsize>(g.points.size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(g.probs.data()),
            static_cast<std::streamsize>(g.probs.size() * sizeof(double)));
    if (!in) throw parse_error("quantiser grid: truncated binary file " + path);
    detail::validate_grid(g);
    return g;
  }
  std::ifstream text(path);
  return detail::load_grid_text(text);
}

// Cache directory: MBQ_CACHE_DIR, else XDG/HOME cache, else ./.mbq-cache.
inline std::string grid_cache_dir() {
  if (const char* env = std::getenv("MBQ_CACHE_DIR")) return env;
  if (const char* xdg = std::getenv("XDG_CACHE_HOME"))
    return std::string(xdg) + "/mbq";
  if (const char* home = std::getenv("HOME")) return std::string(home) + "/.cache/mbq";
  return ".mbq-cache";
}

// Cached grids are immutable after write and keyed by (dim, n, algorithm
// version); 2-D grids additionally carry the Lloyd seed.
inline QuantiserGrid cached_gaussian_1d(int n) {
  namespace fs = std::filesystem;
  const fs::path path =
      fs::path(grid_cache_dir()) / ("gauss1d_n" + std::to_string(n) + "_v" +
                                    std::to_string(detail::kGridVersion) + ".grid");
  if (fs::exists(path)) return load_grid(path.string());
  QuantiserGrid g = build_gaussian_1d(n);
  save_grid(g, path.string());
  return g;
}

inline QuantiserGrid cached_gaussian_2d(int n, std::uint64_t seed = 0) {
  namespace fs = std::filesystem;
  const fs::path path =
      fs::path(grid_cache_dir()) / ("gauss2d_n" + std::to_string(n) + "_s" +
                                    std::to_string(seed) + "_v" +
                                    std::to_string(detail::kGridVersion) + ".grid");
  if (fs::exists(path)) return load_grid(path.string());
  QuantiserGrid g = build_gaussian_2d(n, 1e-9, seed);
  save_grid(g, path.string());
  return g;
}

}  // namespace mbq
