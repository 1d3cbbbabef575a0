#include "spii/lp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace spii {
namespace {

struct Tableau {
  // rows x (ncols + 1); last column is the rhs.
  std::vector<std::vector<double>> t;
  std::vector<int> basis;  // basic column per row
  int ncols = 0;

  double& at(int i, int j) { return t[i][j]; }
  double rhs(int i) const { return t[i][ncols]; }

  void pivot(int pr, int pc) {
    double p = t[pr][pc];
    for (int j = 0; j <= ncols; ++j) t[pr][j] /= p;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (static_cast<int>(i) == pr) continue;
      double f = t[i][pc];
      if (f == 0.0) continue;
      for (int j = 0; j <= ncols; ++j) t[i][j] -= f * t[pr][j];
    }
    basis[pr] = pc;
  }
};

// Runs simplex iterations maximizing cost . x from the current basis.
// `allowed[j]` gates which columns may enter. Returns false on unboundedness.
bool simplex(Tableau& tab, const std::vector<double>& cost,
             const std::vector<char>& allowed, const LpOptions& opt) {
  const int m = static_cast<int>(tab.t.size());
  // A column whose reduced cost sits below this is treated as numerical noise
  // when its ratio test finds no pivot; a genuinely unbounded ray shows a
  // substantially positive reduced cost.
  const double ray_tol = 1e-7;

  for (long iter = 0; iter < opt.max_iterations; ++iter) {
    bool pivoted = false;
    for (int j = 0; j < tab.ncols && !pivoted; ++j) {
      if (!allowed[j]) continue;
      // Reduced costs recomputed from scratch: O(m), cheap at this scale and
      // immune to drift across many pivots.
      double cbar = cost[j];
      for (int i = 0; i < m; ++i) {
        double cb = cost[tab.basis[i]];
        if (cb != 0.0) cbar -= cb * tab.t[i][j];
      }
      if (cbar <= opt.pivot_tol) continue;  // Bland: first improving column

      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m; ++i) {
        double a = tab.t[i][j];
        if (a > opt.pivot_tol) {
          double ratio = tab.rhs(i) / a;
          if (ratio < best - 1e-15 ||
              (std::abs(ratio - best) <= 1e-15 && leave >= 0 &&
               tab.basis[i] < tab.basis[leave])) {
            best = ratio;
            leave = i;
          }
        }
      }
      if (leave < 0) {
        if (cbar > ray_tol) return false;  // true unbounded direction
        continue;  // noise-level column without a pivot: skip it
      }
      tab.pivot(leave, j);
      pivoted = true;
    }
    if (!pivoted) return true;
  }
  throw std::runtime_error("lp_maximize: iteration limit exceeded");
}

}  // namespace

LpSolution lp_maximize(const std::vector<double>& objective,
                       const std::vector<LpRow>& rows, const LpOptions& opt) {
  const int n = static_cast<int>(objective.size());
  const int m = static_cast<int>(rows.size());

  // Column layout: [0, n) structural, then one slack/surplus per inequality,
  // then one artificial per >= / = row (and per <= row only via slack basis).
  int nslack = 0, nart = 0;
  for (const auto& r : rows) {
    if (static_cast<int>(r.coeffs.size()) != n)
      throw std::invalid_argument("lp_maximize: row width mismatch");
    LpRel rel = r.rel;
    if (r.rhs < 0) rel = (rel == LpRel::kLe ? LpRel::kGe : rel == LpRel::kGe ? LpRel::kLe : LpRel::kEq);
    if (rel != LpRel::kEq) ++nslack;
    // After sign normalization a <= row gets a basic slack; >= and = rows
    // need an artificial.
    if (rel != LpRel::kLe) ++nart;
  }

  Tableau tab;
  tab.ncols = n + nslack + nart;
  tab.t.assign(m, std::vector<double>(tab.ncols + 1, 0.0));
  tab.basis.assign(m, -1);

  int scol = n, acol = n + nslack;
  std::vector<char> is_art(tab.ncols, 0);
  for (int i = 0; i < m; ++i) {
    double sign = rows[i].rhs < 0 ? -1.0 : 1.0;
    LpRel rel = rows[i].rel;
    if (sign < 0) rel = (rel == LpRel::kLe ? LpRel::kGe : rel == LpRel::kGe ? LpRel::kLe : LpRel::kEq);
    for (int j = 0; j < n; ++j) tab.t[i][j] = sign * rows[i].coeffs[j];
    tab.t[i][tab.ncols] = sign * rows[i].rhs;
    if (rel == LpRel::kLe) {
      tab.t[i][scol] = 1.0;
      tab.basis[i] = scol++;
    } else {
      if (rel == LpRel::kGe) tab.t[i][scol++] = -1.0;
      tab.t[i][acol] = 1.0;
      is_art[acol] = 1;
      tab.basis[i] = acol++;
    }
  }

  LpSolution sol;

  if (nart > 0) {
    std::vector<double> phase1(tab.ncols, 0.0);
    for (int j = 0; j < tab.ncols; ++j)
      if (is_art[j]) phase1[j] = -1.0;
    std::vector<char> allowed(tab.ncols, 1);
    if (!simplex(tab, phase1, allowed, opt))
      throw std::runtime_error("lp_maximize: phase 1 unbounded");
    double infeas = 0.0;
    for (int i = 0; i < m; ++i)
      if (is_art[tab.basis[i]]) infeas += tab.rhs(i);
    if (infeas > opt.feas_tol) {
      sol.status = LpStatus::kInfeasible;
      return sol;
    }
    // Drive any artificial still basic (at zero) out of the basis.
    for (int i = 0; i < m; ++i) {
      if (!is_art[tab.basis[i]]) continue;
      int pc = -1;
      for (int j = 0; j < tab.ncols && pc < 0; ++j)
        if (!is_art[j] && std::abs(tab.t[i][j]) > opt.pivot_tol) pc = j;
      if (pc >= 0) tab.pivot(i, pc);
      // Otherwise the row is redundant; leaving the zero-level artificial
      // basic is harmless once artificials are barred from entering.
    }
  }

  std::vector<double> cost(tab.ncols, 0.0);
  for (int j = 0; j < n; ++j) cost[j] = objective[j];
  std::vector<char> allowed(tab.ncols, 1);
  for (int j = 0; j < tab.ncols; ++j)
    if (is_art[j]) allowed[j] = 0;
  if (!simplex(tab, cost, allowed, opt)) {
    sol.status = LpStatus::kUnbounded;
    return sol;
  }

  sol.status = LpStatus::kOptimal;
  sol.x.assign(n, 0.0);
  for (int i = 0; i < m; ++i)
    if (tab.basis[i] < n) sol.x[tab.basis[i]] = tab.rhs(i);
  sol.objective = 0.0;
  for (int j = 0; j < n; ++j) sol.objective += objective[j] * sol.x[j];
  return sol;
}

}  // namespace spii
