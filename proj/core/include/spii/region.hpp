#pragma once

#include <Eigen/Dense>

#include "spii/schedule_set.hpp"

namespace spii {

// Capacity-region geometry. The maximum capacity region is the set of arrival
// vectors strictly dominated by conv(Pi); its closure is conv(Pi) itself for
// monotone sets, so boundary operations work with convex-weight LPs over the
// members of Pi.

// Slack below which strict domination is rejected (the region is open; exact
// boundary points are not members).
inline constexpr double kStrictSlack = 1e-9;

// True iff lambda / rho is strictly dominated by conv(Pi), i.e. lambda lies
// in the rho-scaled open region.
bool region_membership(const Eigen::VectorXd& lambda, const ScheduleSet& pi,
                       double rho);

// Scaled projection of x onto the outer boundary of cl(region): a * x with
// a = sup { t : t x inside the closed region }. Throws on the zero vector.
Eigen::VectorXd proj_boundary(const Eigen::VectorXd& x, const ScheduleSet& pi);

// Convex weights p over Pi with sum_d p_d * d = target (target must lie in
// conv(Pi), e.g. a proj_boundary output). Vertex solution, so the support has
// at most N+1 members. Throws if infeasible.
Eigen::VectorXd convex_decomposition(const Eigen::VectorXd& target,
                                     const ScheduleSet& pi);

}  // namespace spii
