#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace mbq {

struct NelderMeadResult {
  std::vector<double> x;
  double fx = 0.0;
  long evaluations = 0;
  bool converged = false;
};

// Box-constrained Nelder-Mead: proposed vertices are projected onto the box
// before evaluation. Terminates when the simplex function-value spread falls
// below f_tol or the evaluation budget runs out.
template <typename F>
NelderMeadResult nelder_mead(const F& f, const std::vector<double>& x0,
                             const std::vector<double>& step,
                             const std::vector<double>& lo, const std::vector<double>& hi,
                             double f_tol, long max_evals) {
  const std::size_t n = x0.size();
  auto clamp = [&](std::vector<double> x) {
    for (std::size_t i = 0; i < n; ++i) x[i] = std::min(hi[i], std::max(lo[i], x[i]));
    return x;
  };

  NelderMeadResult out;
  std::vector<std::vector<double>> verts(n + 1);
  std::vector<double> fvals(n + 1);
  verts[0] = clamp(x0);
  for (std::size_t i = 0; i < n; ++i) {
    verts[i + 1] = verts[0];
    verts[i + 1][i] += step[i];
    verts[i + 1] = clamp(verts[i + 1]);
    // A vertex clamped back onto the base point spans nothing; flip the step.
    if (verts[i + 1][i] == verts[0][i]) {
      verts[i + 1][i] -= step[i];
      verts[i + 1] = clamp(verts[i + 1]);
    }
  }
  for (std::size_t i = 0; i <= n; ++i) {
    fvals[i] = f(verts[i]);
    ++out.evaluations;
  }

  std::vector<std::size_t> order(n + 1);
  while (out.evaluations < max_evals) {
    for (std::size_t i = 0; i <= n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return fvals[a] < fvals[b]; });
    const std::size_t best = order[0], worst = order[n], second = order[n - 1];
    if (fvals[worst] - fvals[best] <= f_tol) {
      out.converged = true;
      break;
    }

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t d = 0; d < n; ++d) centroid[d] += verts[i][d];
    }
    for (double& c : centroid) c /= static_cast<double>(n);

    auto blend = [&](double coef) {
      std::vector<double> x(n);
      for (std::size_t d = 0; d < n; ++d)
        x[d] = centroid[d] + coef * (centroid[d] - verts[worst][d]);
      return clamp(x);
    };

    std::vector<double> xr = blend(1.0);
    const double fr = f(xr);
    ++out.evaluations;
    if (fr < fvals[order[0]]) {
      std::vector<double> xe = blend(2.0);
      const double fe = f(xe);
      ++out.evaluations;
      if (fe < fr) {
        verts[worst] = xe;
        fvals[worst] = fe;
      } else {
        verts[worst] = xr;
        fvals[worst] = fr;
      }
    } else if (fr < fvals[second]) {
      verts[worst] = xr;
      fvals[worst] = fr;
    } else {
      const bool outside = fr < fvals[worst];
      std::vector<double> xc = blend(outside ? 0.5 : -0.5);
      const double fc = f(xc);
      ++out.evaluations;
      if (fc < std::min(fr, fvals[worst])) {
        verts[worst] = xc;
        fvals[worst] = fc;
      } else {
        for (std::size_t i = 0; i <= n; ++i) {  // shrink toward the best vertex
          if (i == best) continue;
          for (std::size_t d = 0; d < n; ++d)
            verts[i][d] = verts[best][d] + 0.5 * (verts[i][d] - verts[best][d]);
          verts[i] = clamp(verts[i]);
          fvals[i] = f(verts[i]);
          ++out.evaluations;
        }
      }
    }
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i <= n; ++i)
    if (fvals[i] < fvals[best]) best = i;
  out.x = verts[best];
  out.fx = fvals[best];
  return out;
}

}  // namespace mbq
