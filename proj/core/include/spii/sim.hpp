#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "spii/channel.hpp"
#include "spii/markov.hpp"
#include "spii/policies.hpp"
#include "spii/schedule_set.hpp"

namespace spii {

// Trajectory execution, stability classification, parameter sweeps and
// persistence. One trajectory per worker, no shared mutable state; identical
// configs (seed included) give identical records for any worker count.

// --------------------------------------------------------------------------
// Policy pair declarations. Each kind couples an encoding policy with the
// allocation policy it is designed for.

struct MwPolicy {  // Max-Weight encoder over input symbols + memoryless Theta
  MemorylessAllocation theta;
};
struct IndexPolicy {  // sends the lowest non-empty queue index; D = e^(Y)
  MemorylessAllocation theta;
};
struct SimplePolicy {  // queue-oblivious encoder + finite-memory allocation
  SimpleEncoder encoder;
  FiniteMemoryAllocation alloc;
};
struct EmwPolicy {  // episodic Max-Weight over a simple-policy bank
  EMWState initial;
  FiniteMemoryAllocation alloc;
};
struct EglPolicy {  // episodic greedy learning receiver + round-robin probes
  EGLConfig cfg;
};

using PolicySpec =
    std::variant<MwPolicy, IndexPolicy, SimplePolicy, EmwPolicy, EglPolicy>;

std::string policy_kind_name(const PolicySpec& spec);

struct MemoryBits {
  long long encoder = 0;   // k
  long long receiver = 0;  // v
};
MemoryBits policy_memory_bits(const PolicySpec& spec, bool memory_feedback);

// --------------------------------------------------------------------------

struct StabilityParams {
  long long window = 5000;        // slots per drift window
  double slope_threshold = 0.002; // jobs/slot
};

struct ExperimentConfig {
  ScheduleSet schedules;
  Channel channel;
  Eigen::VectorXd lambda;  // Bernoulli arrival rates, each in [0,1]
  PolicySpec policy;
  bool memory_feedback = true;
  long long horizon = 200000;
  std::uint64_t seed = 1;
  StabilityParams stability;
  long long snapshot_stride = 0;  // 0 disables queue snapshots
  bool record_signals = false;    // keep the per-slot (x, m_r) trace
};

// Assembly-time checks (dimensions, alphabet compatibility, horizon vs
// window, EMW demands memory-feedback, ...). Empty when runnable.
std::vector<std::string> validate_experiment(const ExperimentConfig& cfg);

// The tuple W(t) = (Q, A, M_e, X, M_r) driving the simulation. Memory values
// are the policy-kind accounting representation (an index for the structured
// kinds).
struct SystemState {
  QueueState queues;
  ArrivalVec last_arrivals;
  long long encoder_memory = 0;
  int last_signal = 0;
  long long receiver_memory = 0;
};

struct TrajectoryRecord {
  long long slots = 0;
  long long window = 0;
  std::vector<double> window_l1_slopes;  // per completed window
  long long max_queue = 0;               // max over slots of max_i Q_i(t)
  SystemState final_state;
  std::vector<long long> cum_arrivals;    // per queue
  std::vector<long long> cum_offered;     // services offered
  std::vector<long long> cum_departures;  // services used (min(Q, D))
  long long snapshot_stride = 0;
  std::vector<QueueState> snapshots;
  std::vector<std::pair<int, int>> signal_memory_trace;  // (X(t), M_r(t))
  std::uint64_t variates_consumed = 0;
};

// Deterministic given cfg (seed included). Slot order: encode from
// (Q(t-1), A(t-1), memories), channel sample, allocation from
// (Y(t), M_r(t-1)), receiver memory update from the same message, arrivals,
// then the queue update.
TrajectoryRecord run_trajectory(const ExperimentConfig& cfg);

struct StabilityVerdict {
  enum class Label { kStable, kUnstable, kInconclusive };
  Label label = Label::kInconclusive;
  double median_slope = 0.0;  // jobs/slot over the last half of the windows
  long long max_queue = 0;
  long long slots_run = 0;
};

std::string to_string(StabilityVerdict::Label label);

// Stable: median slope over the last half of the windows <= threshold and
// max queue <= 50 N (1 + sqrt(horizon)/100). Unstable: slope >= 3x threshold.
// Anything else is inconclusive.
StabilityVerdict detect_stability(const TrajectoryRecord& rec, long long window,
                                  double threshold);

// --------------------------------------------------------------------------
// Sweeps.

struct SweepPoint {
  Eigen::VectorXd lambda;
  std::optional<double> rho;  // annotation carried into the results table
};

struct SweepRow {
  int point_id = 0;
  Eigen::VectorXd lambda;
  std::optional<double> rho;
  std::string policy;
  long long k_bits = 0;
  long long v_bits = 0;
  StabilityVerdict verdict;
  std::uint64_t seed = 0;
  long long slots = 0;
  std::string error;  // per-point failure; the sweep itself never aborts
};

// Runs every grid point with a per-point derived seed; output is sorted by
// point_id and independent of scheduling. workers <= 0 picks the hardware
// count (or SPII_WORKERS when set).
std::vector<SweepRow> sweep(const ExperimentConfig& base,
                            const std::vector<SweepPoint>& grid, int workers);

int default_worker_count();

enum class ResultFormat { kCsv, kJson };

// Fixed 12-significant-digit formatting so re-runs are byte-identical.
void emit_results(const std::vector<SweepRow>& rows,
                  const ExperimentConfig& base, const std::string& path,
                  ResultFormat format);
std::string format_g12(double v);

}  // namespace spii
