#include "spii/region.hpp"

#include <stdexcept>

#include "spii/lp.hpp"

namespace spii {

bool region_membership(const Eigen::VectorXd& lambda, const ScheduleSet& pi,
                       double rho) {
  if (rho <= 0.0) throw std::invalid_argument("region_membership: rho must be > 0");
  if (lambda.size() != pi.num_queues())
    throw std::invalid_argument("region_membership: dimension mismatch");
  const int n = pi.num_queues();
  const int k = pi.size();

  // max s  s.t.  sum_d p_d d_i - s >= lambda_i / rho,  p in simplex.
  // Variables: p (k), s+ (1), s- (1); s = s+ - s- is free.
  std::vector<double> obj(k + 2, 0.0);
  obj[k] = 1.0;
  obj[k + 1] = -1.0;
  std::vector<LpRow> rows;
  for (int i = 0; i < n; ++i) {
    LpRow row;
    row.coeffs.assign(k + 2, 0.0);
    for (int d = 0; d < k; ++d)
      row.coeffs[d] = static_cast<double>(pi.schedules[d][i]);
    row.coeffs[k] = -1.0;
    row.coeffs[k + 1] = 1.0;
    row.rel = LpRel::kGe;
    row.rhs = lambda(i) / rho;
    rows.push_back(std::move(row));
  }
  LpRow simplex_row;
  simplex_row.coeffs.assign(k + 2, 0.0);
  for (int d = 0; d < k; ++d) simplex_row.coeffs[d] = 1.0;
  simplex_row.rel = LpRel::kEq;
  simplex_row.rhs = 1.0;
  rows.push_back(std::move(simplex_row));

  LpSolution sol = lp_maximize(obj, rows);
  if (sol.status != LpStatus::kOptimal)
    throw std::runtime_error("region_membership: slack LP did not solve");
  return sol.objective >= kStrictSlack;
}

Eigen::VectorXd proj_boundary(const Eigen::VectorXd& x, const ScheduleSet& pi) {
  if (x.size() != pi.num_queues())
    throw std::invalid_argument("proj_boundary: dimension mismatch");
  if (x.lpNorm<Eigen::Infinity>() == 0.0)
    throw std::invalid_argument("proj_boundary: zero vector");
  for (int i = 0; i < x.size(); ++i)
    if (x(i) < 0.0) throw std::invalid_argument("proj_boundary: negative input");

  const int n = pi.num_queues();
  const int k = pi.size();
  // max a  s.t.  a x_i <= sum_d p_d d_i,  p in simplex.
  std::vector<double> obj(k + 1, 0.0);
  obj[k] = 1.0;
  std::vector<LpRow> rows;
  for (int i = 0; i < n; ++i) {
    LpRow row;
    row.coeffs.assign(k + 1, 0.0);
    for (int d = 0; d < k; ++d)
      row.coeffs[d] = -static_cast<double>(pi.schedules[d][i]);
    row.coeffs[k] = x(i);
    row.rel = LpRel::kLe;
    row.rhs = 0.0;
    rows.push_back(std::move(row));
  }
  LpRow simplex_row;
  simplex_row.coeffs.assign(k + 1, 0.0);
  for (int d = 0; d < k; ++d) simplex_row.coeffs[d] = 1.0;
  simplex_row.rel = LpRel::kEq;
  simplex_row.rhs = 1.0;
  rows.push_back(std::move(simplex_row));

  LpSolution sol = lp_maximize(obj, rows);
  if (sol.status != LpStatus::kOptimal)
    throw std::runtime_error("proj_boundary: LP did not solve");
  return sol.objective * x;
}

Eigen::VectorXd convex_decomposition(const Eigen::VectorXd& target,
                                     const ScheduleSet& pi) {
  if (target.size() != pi.num_queues())
    throw std::invalid_argument("convex_decomposition: dimension mismatch");
  const int n = pi.num_queues();
  const int k = pi.size();
  std::vector<LpRow> rows;
  for (int i = 0; i < n; ++i) {
    LpRow row;
    for (int d = 0; d < k; ++d)
      row.coeffs.push_back(static_cast<double>(pi.schedules[d][i]));
    row.rel = LpRel::kEq;
    row.rhs = target(i);
    rows.push_back(std::move(row));
  }
  LpRow simplex_row;
  simplex_row.coeffs.assign(k, 1.0);
  simplex_row.rel = LpRel::kEq;
  simplex_row.rhs = 1.0;
  rows.push_back(std::move(simplex_row));

  LpOptions opt;
  opt.feas_tol = 1e-7;  // targets arrive through double-precision LPs
  LpSolution sol = lp_maximize(std::vector<double>(k, 0.0), rows, opt);
  if (sol.status != LpStatus::kOptimal)
    throw std::runtime_error("convex_decomposition: target not in conv(Pi)");
  Eigen::VectorXd p(k);
  double total = 0.0;
  for (int d = 0; d < k; ++d) {
    p(d) = std::max(sol.x[d], 0.0);
    total += p(d);
  }
  return p / total;
}

}  // namespace spii
