#include "spii/policies.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "spii/region.hpp"

namespace spii {

namespace {

void check_stochastic(const Eigen::MatrixXd& m, const char* what) {
  for (int i = 0; i < m.rows(); ++i) {
    double sum = 0.0;
    for (int j = 0; j < m.cols(); ++j) {
      if (m(i, j) < -1e-12)
        throw std::invalid_argument(std::string(what) + ": negative entry");
      sum += m(i, j);
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument(std::string(what) + ": row " +
                                  std::to_string(i) + " does not sum to 1");
  }
}

}  // namespace

int sample_row(const Eigen::VectorXd& row, double u) {
  double acc = 0.0;
  for (int j = 0; j < row.size(); ++j) {
    acc += row(j);
    if (u < acc) return j;
  }
  return static_cast<int>(row.size()) - 1;
}

MemorylessAllocation make_memoryless_allocation(Eigen::MatrixXd theta) {
  check_stochastic(theta, "theta");
  return MemorylessAllocation{std::move(theta)};
}

MemorylessAllocation direct_index_allocation(int out_symbols,
                                             const ScheduleSet& pi) {
  const int n = pi.num_queues();
  if (out_symbols > n)
    throw std::invalid_argument("direct_index_allocation: more symbols than queues");
  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(out_symbols, pi.size());
  for (int y = 0; y < out_symbols; ++y) {
    Schedule unit(n, 0);
    unit[y] = 1;
    int idx = pi.find(unit);
    if (idx < 0)
      throw std::invalid_argument("direct_index_allocation: unit schedule missing");
    theta(y, idx) = 1.0;
  }
  return MemorylessAllocation{std::move(theta)};
}

int allocate_memoryless(int y, const MemorylessAllocation& theta, double u) {
  if (y < 0 || y >= theta.theta.rows())
    throw std::invalid_argument("allocate_memoryless: message out of range");
  return sample_row(theta.theta.row(y), u);
}

FiniteMemoryAllocation make_finite_memory_allocation(int mem_bits,
                                                     Eigen::MatrixXd g_a,
                                                     Eigen::MatrixXd h_a) {
  if (mem_bits < 0) throw std::invalid_argument("mem_bits must be >= 0");
  const int msize = 1 << mem_bits;
  if (g_a.cols() != msize)
    throw std::invalid_argument("g_a must have 2^v columns");
  if (g_a.rows() != h_a.rows())
    throw std::invalid_argument("g_a and h_a must have matching rows");
  if (g_a.rows() % msize != 0)
    throw std::invalid_argument("g_a rows must be |M_r| * |Y|");
  check_stochastic(g_a, "g_a");
  check_stochastic(h_a, "h_a");
  return FiniteMemoryAllocation{mem_bits, std::move(g_a), std::move(h_a)};
}

FiniteMemoryAllocation lift_memoryless(const MemorylessAllocation& theta) {
  Eigen::MatrixXd g_a = Eigen::MatrixXd::Ones(theta.theta.rows(), 1);
  return FiniteMemoryAllocation{0, std::move(g_a), theta.theta};
}

FiniteAllocStep allocate_finite_memory(int y, int m_r,
                                       const FiniteMemoryAllocation& pol,
                                       double u_d, double u_m) {
  const int ny = static_cast<int>(pol.g_a.rows()) / pol.mem_size();
  if (y < 0 || y >= ny || m_r < 0 || m_r >= pol.mem_size())
    throw std::invalid_argument("allocate_finite_memory: index out of range");
  int r = pol.row(m_r, y);
  return FiniteAllocStep{sample_row(pol.h_a.row(r), u_d),
                         sample_row(pol.g_a.row(r), u_m)};
}

SimpleEncoder make_simple_encoder(int mem_size, int sig_size,
                                  Eigen::MatrixXd g_e) {
  if (g_e.rows() != static_cast<long>(mem_size) * sig_size ||
      g_e.cols() != sig_size)
    throw std::invalid_argument("simple encoder shape mismatch");
  check_stochastic(g_e, "g_e");
  return SimpleEncoder{mem_size, sig_size, std::move(g_e)};
}

int simple_encode(int x_prev, int m_r, const SimpleEncoder& enc, double u) {
  if (x_prev < 0 || x_prev >= enc.sig_size || m_r < 0 || m_r >= enc.mem_size)
    throw std::invalid_argument("simple_encode: index out of range");
  return sample_row(enc.g_e.row(enc.row(m_r, x_prev)), u);
}

std::pair<SimpleEncoder, FiniteMemoryAllocation> perturb_simple(
    const SimpleEncoder& enc, const FiniteMemoryAllocation& pol, double delta) {
  if (delta < 0.0 || delta >= 1.0)
    throw std::invalid_argument(
        "perturb_simple: delta must be in [0,1); delta = 1 freezes the chain");
  SimpleEncoder e = enc;
  for (int m = 0; m < enc.mem_size; ++m)
    for (int x = 0; x < enc.sig_size; ++x) {
      int r = enc.row(m, x);
      e.g_e.row(r) *= (1.0 - delta);
      e.g_e(r, x) += delta;
    }
  FiniteMemoryAllocation p = pol;
  const int ny = static_cast<int>(pol.g_a.rows()) / pol.mem_size();
  for (int m = 0; m < pol.mem_size(); ++m)
    for (int y = 0; y < ny; ++y) {
      int r = pol.row(m, y);
      p.g_a.row(r) *= (1.0 - delta);
      p.g_a(r, m) += delta;
    }
  return {std::move(e), std::move(p)};
}

MWEncoderConfig make_mw_config(const Channel& c,
                               const MemorylessAllocation& theta,
                               const ScheduleSet& pi) {
  if (c.output_size() != theta.theta.rows())
    throw std::invalid_argument("make_mw_config: |Y| mismatch");
  if (theta.theta.cols() != pi.size())
    throw std::invalid_argument("make_mw_config: |Pi| mismatch");
  return MWEncoderConfig{c.matrix * theta.theta * pi.service_matrix()};
}

int mw_encode(const QueueState& q, const MWEncoderConfig& cfg) {
  if (static_cast<int>(q.size()) != cfg.rate_rows.cols())
    throw std::invalid_argument("mw_encode: dimension mismatch");
  int best = 0;
  double best_val = -1.0;
  for (int x = 0; x < cfg.rate_rows.rows(); ++x) {
    double v = 0.0;
    for (int i = 0; i < cfg.rate_rows.cols(); ++i)
      v += static_cast<double>(q[i]) * cfg.rate_rows(x, i);
    if (v > best_val + 1e-15) {
      best_val = v;
      best = x;
    }
  }
  return best;
}

EMWState make_emw_state(std::shared_ptr<const EmwBank> bank,
                        double episode_rate) {
  if (!bank || bank->members.empty())
    throw std::invalid_argument("emw: empty policy bank");
  if (episode_rate <= 0.0 || episode_rate > 1.0)
    throw std::invalid_argument("emw: episode rate must be in (0,1]");
  return EMWState{std::move(bank), episode_rate, 0, 0};
}

EmwStep emw_step(const EMWState& state, const QueueState& q, int m_r,
                 double u_episode, double u_signal) {
  if (!state.bank || state.bank->members.empty())
    throw std::invalid_argument("emw_step: empty policy bank");
  EMWState next = state;
  if (u_episode < state.episode_rate) {
    int best = 0;
    double best_val = -1.0;
    for (std::size_t i = 0; i < state.bank->members.size(); ++i) {
      const Eigen::VectorXd& mu = state.bank->members[i].mu;
      double v = 0.0;
      for (int j = 0; j < mu.size(); ++j)
        v += static_cast<double>(q[j]) * mu(j);
      if (v > best_val + 1e-15) {
        best_val = v;
        best = static_cast<int>(i);
      }
    }
    next.policy_index = best;
  }
  const SimpleEncoder& enc = next.bank->members[next.policy_index].encoder;
  int symbol = simple_encode(next.last_signal, m_r, enc, u_signal);
  next.last_signal = symbol;
  return EmwStep{symbol, std::move(next)};
}

EGLConfig make_egl_config(const Channel& c, int num_queues,
                          long long episode_len, long long learn_len,
                          double alpha) {
  if (!is_informative(c))
    throw std::invalid_argument("egl: channel is uninformative");
  if (learn_len <= 0 || learn_len % num_queues != 0)
    throw std::invalid_argument("egl: learn_len must be a positive multiple of N");
  if (episode_len <= learn_len)
    throw std::invalid_argument("egl: episode_len must exceed learn_len");
  if (alpha <= 0.0) throw std::invalid_argument("egl: alpha must be > 0");

  // Probe pair maximizing q2 - q1 over ordered row pairs and columns.
  EGLConfig cfg;
  cfg.episode_len = episode_len;
  cfg.learn_len = learn_len;
  cfg.alpha = alpha;
  cfg.num_queues = num_queues;
  double best = 0.0;
  for (int y = 0; y < c.output_size(); ++y)
    for (int a = 0; a < c.input_size(); ++a)
      for (int b = 0; b < c.input_size(); ++b) {
        double gap = c.matrix(b, y) - c.matrix(a, y);
        if (gap > best) {
          best = gap;
          cfg.probe_x1 = a;
          cfg.probe_x2 = b;
          cfg.marker_y = y;
          cfg.q1 = c.matrix(a, y);
          cfg.q2 = c.matrix(b, y);
        }
      }
  if (best <= kRowSumTol)
    throw std::invalid_argument("egl: no probe pair with q1 < q2");
  return cfg;
}

int egl_encoder_step(long long t, const ArrivalVec& a_prev,
                     const EGLConfig& cfg) {
  if (static_cast<int>(a_prev.size()) != cfg.num_queues)
    throw std::invalid_argument("egl_encoder_step: arrival dimension mismatch");
  int i = static_cast<int>((t - 1) % cfg.num_queues);
  if (i < 0) i += cfg.num_queues;
  return a_prev[i] == 1 ? cfg.probe_x1 : cfg.probe_x2;
}

EGLReceiverState make_egl_receiver(std::shared_ptr<const ScheduleSet> pi,
                                   const EGLConfig& cfg) {
  if (!pi) throw std::invalid_argument("egl receiver needs a schedule set");
  EGLReceiverState st;
  st.pi = std::move(pi);
  st.marker_counts.assign(cfg.num_queues, 0);
  return st;
}

double egl_estimate(double p_hat, double q1, double q2) {
  if (q2 <= q1) throw std::invalid_argument("egl_estimate: need q1 < q2");
  return (q2 - p_hat) / (q2 - q1);
}

int egl_receiver_step(long long t, int y, EGLReceiverState& state,
                      const EGLConfig& cfg, double u) {
  const long long slot = (t - 1) % cfg.episode_len;  // 0-based within episode
  const int n = cfg.num_queues;
  if (slot == 0) std::fill(state.marker_counts.begin(), state.marker_counts.end(), 0);

  if (slot < cfg.learn_len) {
    int i = static_cast<int>((t - 1) % n);
    if (y == cfg.marker_y) ++state.marker_counts[i];
    if (slot == cfg.learn_len - 1) {
      // Phase switch: estimate, clamp, cushion, project, decompose.
      const double samples = static_cast<double>(cfg.learn_len / n);
      Eigen::VectorXd lam(n);
      for (int qi = 0; qi < n; ++qi) {
        double p_hat = static_cast<double>(state.marker_counts[qi]) / samples;
        lam(qi) = std::max(0.0, egl_estimate(p_hat, cfg.q1, cfg.q2));
      }
      state.last_estimate = lam;
      Eigen::VectorXd target =
          proj_boundary(lam + cfg.alpha * Eigen::VectorXd::Ones(n), *state.pi);
      state.deploy_weights = convex_decomposition(target, *state.pi);
    }
    return state.pi->zero_index();
  }
  if (state.deploy_weights.size() == 0)
    throw std::runtime_error("egl_receiver_step: deployment before learning");
  return sample_row(state.deploy_weights, u);
}

long long egl_learning_len_bound(double q1, double q2, int num_queues,
                                 double accuracy, double confidence, Rng& rng,
                                 int replicas) {
  if (q2 <= q1) throw std::invalid_argument("egl bound: need q1 < q2");
  if (accuracy <= 0.0 || confidence <= 0.0 || confidence >= 1.0)
    throw std::invalid_argument("egl bound: bad accuracy/confidence");

  // Worst case over lambda in [0,1]^N is lambda = 0.5 (maximum Bernoulli
  // variance of the probe outcome). One estimator draw per queue per replica.
  const double p = 0.5 * q1 + 0.5 * q2;
  auto success_rate = [&](long long m) {
    int good = 0;
    for (int r = 0; r < replicas; ++r) {
      bool ok = true;
      for (int i = 0; i < num_queues && ok; ++i) {
        long long hits = 0;
        for (long long s = 0; s < m; ++s)
          if (rng.next_unit() < p) ++hits;
        double lam_hat = std::max(
            0.0, egl_estimate(static_cast<double>(hits) / m, q1, q2));
        ok = std::abs(lam_hat - 0.5) <= accuracy;
      }
      if (ok) ++good;
    }
    return static_cast<double>(good) / replicas;
  };

  // Small cushion so the Monte Carlo answer errs on the safe side.
  const double needed = std::min(1.0, confidence + 2.0 * std::sqrt(confidence * (1 - confidence) / replicas));
  long long lo = 1, hi = 1;
  while (success_rate(hi) < needed) {
    lo = hi;
    hi *= 2;
    if (hi > (1LL << 26))
      throw std::runtime_error("egl bound: learning length diverged");
  }
  while (hi - lo > std::max<long long>(1, hi / 64)) {
    long long mid = (lo + hi) / 2;
    if (success_rate(mid) >= needed)
      hi = mid;
    else
      lo = mid;
  }
  return hi * num_queues;
}

int bits_for(int states) {
  int bits = 0;
  while ((1 << bits) < states) ++bits;
  return bits;
}

}  // namespace spii
