#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <vector>

namespace spii {

// Downhill simplex (Nelder-Mead 1965) with the standard reflection /
// expansion / contraction / shrink coefficients. Used for the nonconvex
// finite-memory capacity-factor program, where the objective is a stationary
// distribution of a small chain and derivatives are not worth having.

struct NelderMeadOptions {
  int max_evals = 20000;
  double f_tol = 1e-10;
  double init_step = 0.5;
};

struct NelderMeadResult {
  std::vector<double> x;
  double f = 0.0;
  int evals = 0;
};

inline NelderMeadResult nelder_mead_minimize(
    const std::function<double(const std::vector<double>&)>& fn,
    const std::vector<double>& x0, const NelderMeadOptions& opt = {}) {
  const int n = static_cast<int>(x0.size());
  int evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    return fn(x);
  };

  std::vector<std::vector<double>> pts(n + 1, x0);
  std::vector<double> fv(n + 1);
  for (int i = 1; i <= n; ++i) pts[i][i - 1] += opt.init_step;
  for (int i = 0; i <= n; ++i) fv[i] = eval(pts[i]);

  std::vector<int> order(n + 1);
  while (evals < opt.max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return fv[a] < fv[b]; });
    int lo = order[0], hi = order[n], nh = order[n - 1];
    if (fv[hi] - fv[lo] < opt.f_tol) break;

    std::vector<double> centroid(n, 0.0);
    for (int i = 0; i <= n; ++i) {
      if (i == hi) continue;
      for (int j = 0; j < n; ++j) centroid[j] += pts[i][j];
    }
    for (int j = 0; j < n; ++j) centroid[j] /= n;

    auto blend = [&](double coef) {
      std::vector<double> x(n);
      for (int j = 0; j < n; ++j)
        x[j] = centroid[j] + coef * (pts[hi][j] - centroid[j]);
      return x;
    };

    std::vector<double> xr = blend(-1.0);
    double fr = eval(xr);
    if (fr < fv[lo]) {
      std::vector<double> xe = blend(-2.0);
      double fe = eval(xe);
      if (fe < fr) {
        pts[hi] = std::move(xe);
        fv[hi] = fe;
      } else {
        pts[hi] = std::move(xr);
        fv[hi] = fr;
      }
    } else if (fr < fv[nh]) {
      pts[hi] = std::move(xr);
      fv[hi] = fr;
    } else {
      std::vector<double> xc = blend(fr < fv[hi] ? -0.5 : 0.5);
      double fc = eval(xc);
      if (fc < std::min(fr, fv[hi])) {
        pts[hi] = std::move(xc);
        fv[hi] = fc;
      } else {
        for (int i = 0; i <= n; ++i) {
          if (i == lo) continue;
          for (int j = 0; j < n; ++j)
            pts[i][j] = pts[lo][j] + 0.5 * (pts[i][j] - pts[lo][j]);
          fv[i] = eval(pts[i]);
        }
      }
    }
  }

  int best = 0;
  for (int i = 1; i <= n; ++i)
    if (fv[i] < fv[best]) best = i;
  return NelderMeadResult{pts[best], fv[best], evals};
}

}  // namespace spii
