#include "spii/schedule_set.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "spii/lp.hpp"

namespace spii {

Eigen::MatrixXd ScheduleSet::service_matrix() const {
  Eigen::MatrixXd s(size(), num_queues());
  for (int d = 0; d < size(); ++d)
    for (int i = 0; i < num_queues(); ++i)
      s(d, i) = static_cast<double>(schedules[d][i]);
  return s;
}

int ScheduleSet::find(const Schedule& d) const {
  for (int i = 0; i < size(); ++i)
    if (schedules[i] == d) return i;
  return -1;
}

int ScheduleSet::zero_index() const {
  int idx = find(Schedule(num_queues(), 0));
  if (idx < 0) throw std::runtime_error("schedule set has no zero schedule");
  return idx;
}

ScheduleSet make_schedule_set(std::vector<Schedule> schedules) {
  if (schedules.empty())
    throw std::invalid_argument("schedule set must be non-empty");
  const std::size_t n = schedules.front().size();
  if (n == 0) throw std::invalid_argument("schedules must have dimension >= 1");
  std::set<Schedule> seen;
  for (const auto& d : schedules) {
    if (d.size() != n)
      throw std::invalid_argument("schedule dimension mismatch");
    for (long long v : d)
      if (v < 0) throw std::invalid_argument("schedules must be non-negative");
    if (!seen.insert(d).second)
      throw std::invalid_argument("duplicate schedule in set");
  }
  return ScheduleSet{std::move(schedules)};
}

std::vector<Schedule> monotone_closure(const std::vector<Schedule>& generators) {
  std::set<Schedule> out;
  for (const auto& g : generators) {
    // Enumerate the box [0, g].
    Schedule cur(g.size(), 0);
    while (true) {
      out.insert(cur);
      std::size_t i = 0;
      while (i < g.size() && cur[i] == g[i]) cur[i++] = 0;
      if (i == g.size()) break;
      ++cur[i];
    }
  }
  return {out.begin(), out.end()};
}

ScheduleSet single_server_set(int num_queues) {
  std::vector<Schedule> s{Schedule(num_queues, 0)};
  for (int i = 0; i < num_queues; ++i) {
    Schedule e(num_queues, 0);
    e[i] = 1;
    s.push_back(e);
  }
  return make_schedule_set(std::move(s));
}

namespace {

bool dominated(const Schedule& a, const Schedule& b) {  // a <= b
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] > b[i]) return false;
  return true;
}

}  // namespace

ScheduleSetReport validate_schedule_set(const ScheduleSet& pi) {
  ScheduleSetReport report;
  const int n = pi.num_queues();

  // Assumption 1: monotone (all dominated integer vectors present).
  auto closure = monotone_closure(pi.schedules);
  bool monotone = closure.size() == pi.schedules.size();
  if (!monotone) {
    report.violations.push_back(
        "assumption 1 violated: set is not monotone (closure has " +
        std::to_string(closure.size()) + " members, set has " +
        std::to_string(pi.schedules.size()) + ")");
    report.closure_suggestion = closure;
  }

  // Assumption 2 with c = 1: each queue served by some member; under
  // monotonicity this is the presence of each unit vector.
  for (int i = 0; i < n; ++i) {
    bool served = false;
    for (const auto& d : pi.schedules) served = served || d[i] > 0;
    if (!served)
      report.violations.push_back("assumption 2 violated: queue " +
                                  std::to_string(i) + " is never served");
  }

  // Assumption 3: at least two distinct maximal elements.
  if (maximal_element_indices(pi).size() < 2)
    report.violations.push_back(
        "assumption 3 violated: fewer than two maximal elements");

  return report;
}

std::vector<int> maximal_element_indices(const ScheduleSet& pi) {
  std::vector<int> out;
  for (int i = 0; i < pi.size(); ++i) {
    bool maximal = true;
    for (int j = 0; j < pi.size() && maximal; ++j)
      if (j != i && dominated(pi.schedules[i], pi.schedules[j])) maximal = false;
    if (maximal) out.push_back(i);
  }
  return out;
}

std::vector<int> maximal_elements(const ScheduleSet& pi) {
  auto idx = maximal_element_indices(pi);
  if (idx.size() < 2)
    throw std::runtime_error(
        "schedule set violates assumption 3: fewer than two maximal elements");
  return idx;
}

std::vector<int> maximal_extreme_indices(const ScheduleSet& pi) {
  auto maximal = maximal_elements(pi);
  const int n = pi.num_queues();
  std::vector<int> out;
  for (int cand : maximal) {
    // cand is extreme iff it is not a convex combination of the others.
    std::vector<LpRow> rows;
    for (int i = 0; i < n; ++i) {
      LpRow row;
      for (int j = 0; j < pi.size(); ++j)
        row.coeffs.push_back(j == cand ? 0.0
                                       : static_cast<double>(pi.schedules[j][i]));
      row.rel = LpRel::kEq;
      row.rhs = static_cast<double>(pi.schedules[cand][i]);
      rows.push_back(std::move(row));
    }
    LpRow simplex_row;
    simplex_row.coeffs.assign(pi.size(), 1.0);
    simplex_row.coeffs[cand] = 0.0;
    simplex_row.rel = LpRel::kEq;
    simplex_row.rhs = 1.0;
    rows.push_back(std::move(simplex_row));
    LpSolution sol = lp_maximize(std::vector<double>(pi.size(), 0.0), rows);
    if (sol.status != LpStatus::kOptimal) out.push_back(cand);
  }
  return out;
}

QueueState step_dynamics(const QueueState& q, const Schedule& d,
                         const ArrivalVec& a) {
  if (q.size() != d.size() || q.size() != a.size())
    throw std::invalid_argument("step_dynamics: dimension mismatch");
  QueueState next(q.size());
  for (std::size_t i = 0; i < q.size(); ++i)
    next[i] = std::max<long long>(q[i] - d[i], 0) + a[i];
  return next;
}

}  // namespace spii
