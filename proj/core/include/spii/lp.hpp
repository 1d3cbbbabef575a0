#pragma once

#include <string>
#include <vector>

namespace spii {

// Dense two-phase simplex for the desk-scale linear programs used throughout
// (region membership, boundary projection, capacity-factor blocks). All
// variables are non-negative; callers split free variables themselves.

enum class LpStatus { kOptimal, kInfeasible, kUnbounded };

enum class LpRel { kLe, kEq, kGe };

struct LpRow {
  std::vector<double> coeffs;
  LpRel rel;
  double rhs;
};

struct LpSolution {
  LpStatus status = LpStatus::kInfeasible;
  double objective = 0.0;
  std::vector<double> x;
};

struct LpOptions {
  double feas_tol = 1e-9;  // phase-1 residual accepted as feasible
  double pivot_tol = 1e-9; // reduced-cost / pivot magnitude threshold
  long max_iterations = 200000;
};

// Maximizes objective . x subject to the rows, x >= 0. Bland's rule, so no
// cycling; fine for the problem sizes here (tens of variables).
LpSolution lp_maximize(const std::vector<double>& objective,
                       const std::vector<LpRow>& rows,
                       const LpOptions& options = {});

}  // namespace spii
