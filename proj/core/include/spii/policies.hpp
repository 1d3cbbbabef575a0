#pragma once

#include <Eigen/Dense>
#include <memory>
#include <utility>
#include <vector>

#include "spii/channel.hpp"
#include "spii/rng.hpp"
#include "spii/schedule_set.hpp"

namespace spii {

// Every policy step is a pure function of (state, inputs, explicit uniform
// variates); replaying a variate stream reproduces trajectories bit-exactly.
// The harness owns the random stream and the per-trajectory mutable state.

// Inverse-CDF sample from a stochastic row.
int sample_row(const Eigen::VectorXd& row, double u);

// ---------------------------------------------------------------------------
// Memoryless receiver: rate allocation matrix Theta, one row per message.

struct MemorylessAllocation {
  Eigen::MatrixXd theta;  // |Y| x |Pi|
};

MemorylessAllocation make_memoryless_allocation(Eigen::MatrixXd theta);
// Theta mapping message y to the schedule e^(y) (the direct index receiver);
// requires |Y| <= N and unit schedules present in Pi.
MemorylessAllocation direct_index_allocation(int out_symbols,
                                             const ScheduleSet& pi);

int allocate_memoryless(int y, const MemorylessAllocation& theta, double u);

// ---------------------------------------------------------------------------
// Finite-memory receiver: (G^A, H^A) row-stochastic pair, rows keyed (m, y).

struct FiniteMemoryAllocation {
  int mem_bits = 0;        // v; |M_r| = 2^v
  Eigen::MatrixXd g_a;     // (|M_r| |Y|) x |M_r|
  Eigen::MatrixXd h_a;     // (|M_r| |Y|) x |Pi|
  int mem_size() const { return 1 << mem_bits; }
  int row(int m, int y) const {
    return m * static_cast<int>(g_a.rows() / mem_size()) + y;
  }
};

FiniteMemoryAllocation make_finite_memory_allocation(int mem_bits,
                                                     Eigen::MatrixXd g_a,
                                                     Eigen::MatrixXd h_a);
// Lift a memoryless Theta to the degenerate v = 0 representation.
FiniteMemoryAllocation lift_memoryless(const MemorylessAllocation& theta);

struct FiniteAllocStep {
  int schedule;     // index into Pi
  int next_memory;  // next receiver memory value
};

// Schedule from H^A row (m_r, y), next memory from G^A row (m_r, y). Both
// legs consume the same message, matching the joint-chain construction.
FiniteAllocStep allocate_finite_memory(int y, int m_r,
                                       const FiniteMemoryAllocation& pol,
                                       double u_d, double u_m);

// ---------------------------------------------------------------------------
// Simple encoders: queue-oblivious, memory = last signal, rows keyed (m, x).

struct SimpleEncoder {
  int mem_size = 1;     // |M_r| of the paired allocation policy
  int sig_size = 1;     // |X|
  Eigen::MatrixXd g_e;  // (|M_r| |X|) x |X|
  int row(int m, int x) const { return m * sig_size + x; }
};

SimpleEncoder make_simple_encoder(int mem_size, int sig_size,
                                  Eigen::MatrixXd g_e);

// Sample from G^E row (m_r, x_prev); encoder memory becomes the emitted
// symbol.
int simple_encode(int x_prev, int m_r, const SimpleEncoder& enc, double u);

// Lazy perturbation: with probability delta hold the previous signal /
// memory, otherwise act as before. Guarantees aperiodicity of (X, M_r).
// delta = 1 freezes the chain and is rejected.
std::pair<SimpleEncoder, FiniteMemoryAllocation> perturb_simple(
    const SimpleEncoder& enc, const FiniteMemoryAllocation& pol, double delta);

// ---------------------------------------------------------------------------
// Max-Weight encoder for a memoryless receiver: deterministic in Q.

struct MWEncoderConfig {
  Eigen::MatrixXd rate_rows;  // |X| x N, row x = (C Theta S)_x
};

MWEncoderConfig make_mw_config(const Channel& c,
                               const MemorylessAllocation& theta,
                               const ScheduleSet& pi);

// argmax_x <Q, rate_rows[x]>, ties broken by lowest symbol index.
int mw_encode(const QueueState& q, const MWEncoderConfig& cfg);

// ---------------------------------------------------------------------------
// Episodic Max-Weight: re-selects a simple encoder from a bank at geometric
// episode boundaries, by Max-Weight over the bank's stationary rates.

struct EmwBank {
  struct Member {
    SimpleEncoder encoder;
    Eigen::VectorXd mu;  // stationary service rate under the paired policy
  };
  std::vector<Member> members;
};

struct EMWState {
  std::shared_ptr<const EmwBank> bank;
  double episode_rate = 0.0;  // 1/B
  int policy_index = 0;
  int last_signal = 0;
};

EMWState make_emw_state(std::shared_ptr<const EmwBank> bank, double episode_rate);

struct EmwStep {
  int symbol;
  EMWState state;
};

// With probability episode_rate re-select policy_index = argmax_i <Q, mu_i>
// (ties to the lowest index), then emit through the current bank member.
EmwStep emw_step(const EMWState& state, const QueueState& q, int m_r,
                 double u_episode, double u_signal);

// ---------------------------------------------------------------------------
// Episodic Greedy Learning: receiver estimates arrival rates from probe
// messages during a learning phase, then deploys a randomized schedule
// dominating the estimate.

struct EGLConfig {
  long long episode_len = 0;  // B
  long long learn_len = 0;    // B1, divisible by N
  double alpha = 0.0;         // additive cushion before projection
  int probe_x1 = 0;           // sent when the probed queue had an arrival
  int probe_x2 = 1;           // sent otherwise
  int marker_y = 0;           // y1
  double q1 = 0.0;            // P(marker | probe_x1)
  double q2 = 0.0;            // P(marker | probe_x2), q1 < q2
  int num_queues = 0;
};

// Selects the probe triple (x1, x2, y1) maximizing q2 - q1; throws if the
// channel is uninformative.
EGLConfig make_egl_config(const Channel& c, int num_queues,
                          long long episode_len, long long learn_len,
                          double alpha);

// Round-robin probe: with i = (t-1) mod N (queue indices 0-based), emit
// probe_x1 if A_i(t-1) = 1 else probe_x2.
int egl_encoder_step(long long t, const ArrivalVec& a_prev,
                     const EGLConfig& cfg);

struct EGLReceiverState {
  std::shared_ptr<const ScheduleSet> pi;
  std::vector<long long> marker_counts;  // per queue, current episode
  Eigen::VectorXd deploy_weights;        // over Pi; empty until first switch
  Eigen::VectorXd last_estimate;         // lambda-hat from the last learning phase
};

EGLReceiverState make_egl_receiver(std::shared_ptr<const ScheduleSet> pi,
                                   const EGLConfig& cfg);

// During the learning phase records the marker indicator and returns the zero
// schedule; at the phase switch computes lambda-hat, clamps negatives, forms
// proj(lambda-hat+ + alpha 1) and its convex decomposition over Pi; during
// deployment samples i.i.d. from that decomposition.
int egl_receiver_step(long long t, int y, EGLReceiverState& state,
                      const EGLConfig& cfg, double u);

// Estimator map: lambda-hat = (q2 - p-hat) / (q2 - q1).
double egl_estimate(double p_hat, double q1, double q2);

// Smallest learning length B1 (divisible by N) such that, empirically,
// P(||lambda-hat+ - lambda||_inf <= accuracy) >= confidence at the
// worst-case arrival rate. Monte Carlo with `replicas` estimator draws per
// candidate; deterministic given the rng seed.
long long egl_learning_len_bound(double q1, double q2, int num_queues,
                                 double accuracy, double confidence, Rng& rng,
                                 int replicas = 20000);

// ---------------------------------------------------------------------------
// Memory accounting (bits), as reported by `policy describe`.

int bits_for(int states);  // ceil(log2(states)), 0 for a single state

}  // namespace spii
