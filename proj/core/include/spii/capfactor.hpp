#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spii/channel.hpp"
#include "spii/policies.hpp"
#include "spii/schedule_set.hpp"
#include "spii/sim.hpp"

namespace spii {

// Computation and estimation of capacity factors: the parallel-queue closed
// form, the eps-majorizing upper bound, the two finite-dimensional
// optimization programs (memoryless and finite-memory receivers),
// simulation-based bisection, and assembly of the episodic Max-Weight bank.

// 1 - eps (1 - 1/N): the parallel-queue closed form.
double closed_form_parallel(int num_queues, double eps);

struct UpperBoundResult {
  double rho = 0.0;
  Eigen::VectorXd mu0;  // witness uninformative-portion service vector
};

// rho(eps, Pi) = sup over mu0 in conv(Pi) of the largest rho with
// rho * region dominated by (1-eps) conv(Pi) + eps mu0. The whole program is
// jointly linear in (rho, weights), so it is solved as a single LP.
UpperBoundResult upper_bound_epsmaj(const ScheduleSet& pi, double eps);

struct OptimOptions {
  int starts = 20;
  std::uint64_t seed = 20240901;
  int nm_evals_per_dim = 400;  // Nelder-Mead budget per parameter
};

struct V0Witness {
  Eigen::MatrixXd theta;               // |Y| x |Pi|
  std::vector<Eigen::VectorXd> r;      // signal distribution per direction
  std::vector<Eigen::VectorXd> mu;     // induced service rate per direction
  std::vector<int> directions;         // maximal extreme indices into Pi
};

struct VlWitness {
  FiniteMemoryAllocation alloc;
  std::vector<SimpleEncoder> encoders;  // one per direction
  std::vector<Eigen::VectorXd> mu;
  std::vector<int> directions;
};

struct CapFactorResult {
  double rho = 0.0;
  std::string method;
  std::optional<V0Witness> v0;
  std::optional<VlWitness> vl;
  int starts = 0;
  long long evals = 0;  // objective evaluations (finite-memory program)
};

// Memoryless-receiver program: maximize rho s.t. r^(i) C Theta S >= rho d^(i)
// over probability vectors r^(i) and row-stochastic Theta, by alternating
// exact LP blocks with seeded multistart. The blocks are individually linear,
// so each sweep is monotone in rho.
CapFactorResult optimize_v0(const ScheduleSet& pi, const Channel& c,
                            const OptimOptions& options = {});

// Finite-memory program over {G^E(i)}, shared (G^A, H^A); service rates come
// from the joint chain's stationary law. Nonconvex: solved by Nelder-Mead on
// softmax-parameterized rows with entries floored at kEntryFloor, seeded
// multistart, warm starts embedding the v0 witness and (optionally) a
// lower-memory witness. The result is best-found, a lower bound on the true
// supremum.
CapFactorResult optimize_vl(const ScheduleSet& pi, const Channel& c, int v,
                            const OptimOptions& options = {},
                            const std::optional<VlWitness>& warm_start = std::nullopt);

inline constexpr double kEntryFloor = 1e-6;

struct SimCapDirection {
  Schedule direction;
  double lo = 0.0;
  double hi = 1.0;
  double cap = 1.0;  // largest probe-able rho (Bernoulli rates cap at 1)
  bool conclusive = true;
};

struct SimCapResult {
  double rho_lo = 0.0;
  double rho_hi = 1.0;
  bool conclusive = true;
  std::vector<SimCapDirection> directions;
  double rho() const { return 0.5 * (rho_lo + rho_hi); }
};

using ProbeObserver = std::function<void(
    const ExperimentConfig&, const TrajectoryRecord&, const StabilityVerdict&)>;

// For each maximal extreme direction d, bisects rho on the stability verdict
// at lambda = rho (1 - margin) d; returns the minimum interval over
// directions (width <= tol). Inconclusive probes shrink from above and mark
// the result inconclusive. The base config supplies policy, channel, horizon,
// seed and thresholds; lambda is overwritten per probe.
SimCapResult simulate_capfactor(const ExperimentConfig& base, double tol,
                                double margin = 0.02,
                                const ProbeObserver& observer = nullptr);

struct EmwBuild {
  EMWState state;               // initialized encoder state (bank + 1/B)
  FiniteMemoryAllocation alloc; // the perturbed allocation policy psi
  double rho = 0.0;             // value found by the finite-memory program
  std::vector<Eigen::VectorXd> mu;
  std::vector<int> directions;
};

// Runs the finite-memory program, applies the lazy perturbation with
// delta = eps_slack / 4 for aperiodicity, recomputes the bank rates, and
// packages the episodic Max-Weight state. Throws if any perturbed bank rate
// falls below (rho - eps_slack) d^(i).
EmwBuild build_emw(const ScheduleSet& pi, const Channel& c, int v,
                   double eps_slack, long long episode_mean,
                   const OptimOptions& options = {});

}  // namespace spii
