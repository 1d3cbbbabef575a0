#pragma once

#include <Eigen/Dense>
#include <span>
#include <utility>
#include <vector>

#include "spii/channel.hpp"
#include "spii/policies.hpp"
#include "spii/schedule_set.hpp"

namespace spii {

// Exact finite-chain analysis for simple-encoder / finite-memory-allocation
// pairs: the joint chain over (m_r, x, d), its stationary law, stationary
// service rates, projection of trajectories onto simple encoders, and the
// empirical drift diagnostic.

struct JointChain {
  int mem_size = 1;
  int sig_size = 1;
  int sched_size = 1;
  Eigen::MatrixXd transition;  // square, |M_r| |X| |Pi| states, row-stochastic

  int num_states() const { return mem_size * sig_size * sched_size; }
  int state_index(int m, int x, int d) const {
    return (m * sig_size + x) * sched_size + d;
  }
};

// Entrywise construction of
//   G^S_{(m,x,d),(m',x',d')} = G^E_{(m,x),x'} sum_y C_{x',y} G^A_{(m,y),m'} H^A_{(m,y),d'}.
// The current d never influences the next state, so rows are constant in d.
JointChain build_joint_chain(const SimpleEncoder& enc,
                             const FiniteMemoryAllocation& pol,
                             const Channel& c);

struct StationaryDistribution {
  Eigen::VectorXd probs;
  double residual = 0.0;  // ||pi G - pi||_inf of the returned vector
};

struct ReducibleChainError : std::runtime_error {
  explicit ReducibleChainError(std::string what,
                               std::vector<std::vector<int>> classes)
      : std::runtime_error(std::move(what)), closed_classes(std::move(classes)) {}
  std::vector<std::vector<int>> closed_classes;
};

// Unique stationary distribution of an irreducible row-stochastic matrix.
// Dense replace-one-equation solve; power-iteration fallback above
// kDenseStateLimit states. Throws ReducibleChainError naming the closed
// communicating classes when the chain is reducible.
StationaryDistribution stationary(const Eigen::MatrixXd& transition);
StationaryDistribution stationary(const JointChain& chain);

inline constexpr int kDenseStateLimit = 10000;

bool check_irreducible(const Eigen::MatrixXd& transition);
bool check_aperiodic(const Eigen::MatrixXd& transition);
bool check_irreducible(const JointChain& chain);
bool check_aperiodic(const JointChain& chain);
// Strongly connected components with no outgoing edge (the absorbing sets).
std::vector<std::vector<int>> closed_communicating_classes(
    const Eigen::MatrixXd& transition);

// Stationary service rate vector: the d-marginal of the joint chain's
// stationary law contracted with the schedules. For v = 0 this equals
// gamma C Theta S with gamma the stationary signal distribution.
Eigen::VectorXd service_rate(const SimpleEncoder& enc,
                             const FiniteMemoryAllocation& pol,
                             const Channel& c, const ScheduleSet& pi);

// Transition kernel of the (m_r, x) pair chain implied by Eq. above; the
// cheap object when the d-marginal is recomputed inside optimizers.
Eigen::MatrixXd pair_chain(const SimpleEncoder& enc,
                           const FiniteMemoryAllocation& pol, const Channel& c);

struct ProjectionOptions {
  double burn_in_fraction = 0.2;
  long long min_visits = 0;  // error if a visited-row count falls below this
};

struct ProjectionResult {
  SimpleEncoder encoder;
  // (m, x) rows never visited after burn-in; their rows are uniform.
  std::vector<std::pair<int, int>> unvisited_rows;
  Eigen::MatrixXd visit_counts;  // (|M_r| |X|) x 1 counts after burn-in
};

// Empirical conditionals P(X(t+1) = x' | X(t) = x, M_r(t) = m) from a
// trajectory of (x, m_r) samples, Laplace-smoothed with pseudo-count 1.
ProjectionResult project_to_simple(
    std::span<const std::pair<int, int>> signal_memory_trace, int mem_size,
    int sig_size, const ProjectionOptions& options = {});

struct DriftEstimate {
  std::vector<double> l1_slopes;  // per-window least-squares slope of |Q|_1
  std::vector<double> l2_slopes;  // same for |Q|^2
  double median_l1_second_half = 0.0;
  double median_l2_second_half = 0.0;
};

DriftEstimate drift_estimate(const std::vector<QueueState>& q_trace,
                             long long window);

// Least-squares slope of y against 0..n-1; helper shared with the stability
// detector.
double least_squares_slope(std::span<const double> y);

}  // namespace spii
