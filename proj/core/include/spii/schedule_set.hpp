#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace spii {

using Schedule = std::vector<long long>;
using QueueState = std::vector<long long>;
using ArrivalVec = std::vector<int>;  // {0,1}^N Bernoulli realizations

// The finite schedule set Pi together with its matrix form S (one row per
// member, row d = services offered per queue under schedule d).
struct ScheduleSet {
  std::vector<Schedule> schedules;

  int num_queues() const {
    return schedules.empty() ? 0 : static_cast<int>(schedules.front().size());
  }
  int size() const { return static_cast<int>(schedules.size()); }

  Eigen::MatrixXd service_matrix() const;

  // Index of a member, -1 if absent.
  int find(const Schedule& d) const;
  // Index of the all-zeros schedule; throws if absent.
  int zero_index() const;
};

// Basic structural construction: rejects empty sets, dimension mismatches,
// negative coordinates and duplicates. Assumption checks live in
// validate_schedule_set.
ScheduleSet make_schedule_set(std::vector<Schedule> schedules);

// Monotone closure of a generator set: every coordinatewise-dominated
// non-negative integer vector, in lexicographic order.
std::vector<Schedule> monotone_closure(const std::vector<Schedule>& generators);

// One-server-N-queues set {0, e1, ..., eN}.
ScheduleSet single_server_set(int num_queues);

struct ScheduleSetReport {
  std::vector<std::string> violations;  // empty iff Assumptions 1-3 hold
  // Repair suggestion when monotonicity fails: the closure of the input.
  std::vector<Schedule> closure_suggestion;
  bool ok() const { return violations.empty(); }
};

ScheduleSetReport validate_schedule_set(const ScheduleSet& pi);

// All members not coordinatewise dominated by a distinct member.
std::vector<int> maximal_element_indices(const ScheduleSet& pi);
// Same, but errors (std::runtime_error) unless there are at least two.
std::vector<int> maximal_elements(const ScheduleSet& pi);

// Maximal elements that are also extreme points of conv(Pi). These are the
// directions that pin down the capacity region boundary.
std::vector<int> maximal_extreme_indices(const ScheduleSet& pi);

// One slot of queue dynamics: (q - d)^+ + a, coordinatewise.
QueueState step_dynamics(const QueueState& q, const Schedule& d,
                         const ArrivalVec& a);

}  // namespace spii
