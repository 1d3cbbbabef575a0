#include "spii/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "spii/rng.hpp"

namespace spii {

std::string policy_kind_name(const PolicySpec& spec) {
  struct Visitor {
    std::string operator()(const MwPolicy&) const { return "mw"; }
    std::string operator()(const IndexPolicy&) const { return "index"; }
    std::string operator()(const SimplePolicy&) const { return "simple"; }
    std::string operator()(const EmwPolicy&) const { return "emw"; }
    std::string operator()(const EglPolicy&) const { return "egl"; }
  };
  return std::visit(Visitor{}, spec);
}

MemoryBits policy_memory_bits(const PolicySpec& spec, bool memory_feedback) {
  struct Visitor {
    bool feedback;
    MemoryBits operator()(const MwPolicy&) const { return {0, 0}; }
    MemoryBits operator()(const IndexPolicy&) const { return {0, 0}; }
    MemoryBits operator()(const SimplePolicy& p) const {
      return {bits_for(p.encoder.sig_size), p.alloc.mem_bits};
    }
    MemoryBits operator()(const EmwPolicy& p) const {
      int nx = p.initial.bank->members.front().encoder.sig_size;
      int nb = static_cast<int>(p.initial.bank->members.size());
      return {bits_for(nb) + bits_for(nx), p.alloc.mem_bits};
    }
    MemoryBits operator()(const EglPolicy& p) const {
      long long k = feedback ? 0 : bits_for(p.cfg.num_queues);
      long long v = p.cfg.learn_len + bits_for(static_cast<int>(
                        std::min<long long>(p.cfg.episode_len, 1 << 30)));
      return {k, v};
    }
  };
  return std::visit(Visitor{memory_feedback}, spec);
}

std::vector<std::string> validate_experiment(const ExperimentConfig& cfg) {
  std::vector<std::string> problems;
  const int n = cfg.schedules.num_queues();

  auto report = validate_schedule_set(cfg.schedules);
  for (const auto& v : report.violations) problems.push_back("schedule set: " + v);

  if (cfg.lambda.size() != n)
    problems.push_back("arrival rate dimension does not match queue count");
  for (int i = 0; i < cfg.lambda.size(); ++i)
    if (cfg.lambda(i) < 0.0 || cfg.lambda(i) > 1.0)
      problems.push_back("arrival rate " + std::to_string(i) +
                         " outside [0,1] (Bernoulli per-queue arrivals)");

  if (cfg.horizon < 10 * cfg.stability.window)
    problems.push_back("horizon must be at least 10 stability windows");
  if (cfg.stability.window < 2) problems.push_back("stability window too small");

  const int ny = cfg.channel.output_size();
  const int nx = cfg.channel.input_size();
  struct Visitor {
    const ExperimentConfig& cfg;
    int n, nx, ny;
    std::vector<std::string>& problems;
    void operator()(const MwPolicy& p) const {
      if (p.theta.theta.rows() != ny)
        problems.push_back("theta rows must equal |Y|");
      if (p.theta.theta.cols() != cfg.schedules.size())
        problems.push_back("theta columns must equal |Pi|");
    }
    void operator()(const IndexPolicy& p) const {
      if (nx != n) problems.push_back("index encoder needs |X| = N");
      if (p.theta.theta.rows() != ny)
        problems.push_back("theta rows must equal |Y|");
      if (p.theta.theta.cols() != cfg.schedules.size())
        problems.push_back("theta columns must equal |Pi|");
    }
    void operator()(const SimplePolicy& p) const {
      if (p.encoder.sig_size != nx)
        problems.push_back("simple encoder |X| mismatch");
      if (p.encoder.mem_size != p.alloc.mem_size())
        problems.push_back("simple encoder / allocation memory mismatch");
      if (static_cast<int>(p.alloc.g_a.rows()) != p.alloc.mem_size() * ny)
        problems.push_back("allocation G^A rows must be |M_r| |Y|");
      if (p.alloc.h_a.cols() != cfg.schedules.size())
        problems.push_back("allocation H^A columns must equal |Pi|");
    }
    void operator()(const EmwPolicy& p) const {
      if (!cfg.memory_feedback)
        problems.push_back(
            "emw requires memory-feedback (rejected at config validation)");
      for (const auto& m : p.initial.bank->members) {
        if (m.encoder.sig_size != nx)
          problems.push_back("emw bank encoder |X| mismatch");
        if (m.encoder.mem_size != p.alloc.mem_size())
          problems.push_back("emw bank encoder memory mismatch");
        if (m.mu.size() != n) problems.push_back("emw bank rate dimension mismatch");
      }
      if (p.alloc.h_a.cols() != cfg.schedules.size())
        problems.push_back("emw allocation H^A columns must equal |Pi|");
      if (static_cast<int>(p.alloc.g_a.rows()) != p.alloc.mem_size() * ny)
        problems.push_back("emw allocation G^A rows must be |M_r| |Y|");
    }
    void operator()(const EglPolicy& p) const {
      if (p.cfg.num_queues != n) problems.push_back("egl queue count mismatch");
      if (p.cfg.learn_len % n != 0)
        problems.push_back("egl learning length must be divisible by N");
      if (p.cfg.probe_x1 >= nx || p.cfg.probe_x2 >= nx ||
          p.cfg.marker_y >= ny)
        problems.push_back("egl probe symbols out of range");
      if (cfg.schedules.find(Schedule(n, 0)) < 0)
        problems.push_back("egl needs the zero schedule in Pi");
    }
  };
  std::visit(Visitor{cfg, n, nx, ny, problems}, cfg.policy);
  return problems;
}

namespace {

struct WindowSlope {
  // Streaming least-squares slope of |Q|_1 against the within-window index.
  long long window;
  double sx, sxx;
  double sy = 0.0, sxy = 0.0;
  long long k = 0;
  explicit WindowSlope(long long w) : window(w) {
    double n = static_cast<double>(w);
    sx = (n - 1.0) * n / 2.0;
    sxx = (n - 1.0) * n * (2.0 * n - 1.0) / 6.0;
  }
  // Returns the completed slope when the window closes.
  std::optional<double> push(double y) {
    sy += y;
    sxy += static_cast<double>(k) * y;
    if (++k < window) return std::nullopt;
    double n = static_cast<double>(window);
    double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    sy = sxy = 0.0;
    k = 0;
    return slope;
  }
};

}  // namespace

TrajectoryRecord run_trajectory(const ExperimentConfig& cfg) {
  auto problems = validate_experiment(cfg);
  if (!problems.empty()) {
    std::string msg = "invalid experiment:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw std::invalid_argument(msg);
  }

  const int n = cfg.schedules.num_queues();
  Rng rng(cfg.seed);

  QueueState q(n, 0);
  ArrivalVec a_prev(n, 0);
  int m_r = 0;          // receiver memory (finite-memory kinds)
  int x_prev = 0;       // last signal (initial signal = symbol 0)
  long long t = 0;

  // Per-kind runtime state.
  std::optional<MWEncoderConfig> mw_cfg;
  EMWState emw_state;
  std::optional<EGLReceiverState> egl_state;
  const MemorylessAllocation* theta = nullptr;
  const FiniteMemoryAllocation* falloc = nullptr;
  const SimpleEncoder* simple_enc = nullptr;
  const EGLConfig* egl_cfg = nullptr;

  if (const auto* p = std::get_if<MwPolicy>(&cfg.policy)) {
    theta = &p->theta;
    mw_cfg = make_mw_config(cfg.channel, p->theta, cfg.schedules);
  } else if (const auto* p = std::get_if<IndexPolicy>(&cfg.policy)) {
    theta = &p->theta;
  } else if (const auto* p = std::get_if<SimplePolicy>(&cfg.policy)) {
    simple_enc = &p->encoder;
    falloc = &p->alloc;
  } else if (const auto* p = std::get_if<EmwPolicy>(&cfg.policy)) {
    emw_state = p->initial;
    falloc = &p->alloc;
  } else if (const auto* p = std::get_if<EglPolicy>(&cfg.policy)) {
    egl_cfg = &p->cfg;
    egl_state = make_egl_receiver(
        std::make_shared<const ScheduleSet>(cfg.schedules), *egl_cfg);
  }

  TrajectoryRecord rec;
  rec.window = cfg.stability.window;
  rec.snapshot_stride = cfg.snapshot_stride;
  rec.cum_arrivals.assign(n, 0);
  rec.cum_offered.assign(n, 0);
  rec.cum_departures.assign(n, 0);
  if (cfg.record_signals)
    rec.signal_memory_trace.reserve(static_cast<std::size_t>(cfg.horizon));

  WindowSlope slope(cfg.stability.window);

  for (t = 1; t <= cfg.horizon; ++t) {
    // Signal from (Q(t-1), A(t-1), memories).
    int x = 0;
    if (mw_cfg) {
      x = mw_encode(q, *mw_cfg);
    } else if (std::holds_alternative<IndexPolicy>(cfg.policy)) {
      x = 0;
      for (int i = 0; i < n; ++i)
        if (q[i] > 0) {
          x = i;
          break;
        }
    } else if (simple_enc) {
      x = simple_encode(x_prev, m_r, *simple_enc, rng.next_unit());
    } else if (std::holds_alternative<EmwPolicy>(cfg.policy)) {
      double u_episode = rng.next_unit();
      double u_signal = rng.next_unit();
      EmwStep step = emw_step(emw_state, q, m_r, u_episode, u_signal);
      emw_state = std::move(step.state);
      x = step.symbol;
    } else if (egl_cfg) {
      x = egl_encoder_step(t, a_prev, *egl_cfg);
    }

    // Channel sample.
    int y = sample_output(cfg.channel, x, rng.next_unit());

    // Allocation from (Y(t), M_r(t-1)); memory update from the same message.
    int d_idx;
    if (theta) {
      d_idx = allocate_memoryless(y, *theta, rng.next_unit());
    } else if (falloc) {
      double u_d = rng.next_unit();
      double u_m = rng.next_unit();
      FiniteAllocStep step = allocate_finite_memory(y, m_r, *falloc, u_d, u_m);
      d_idx = step.schedule;
      m_r = step.next_memory;
    } else {
      d_idx = egl_receiver_step(t, y, *egl_state, *egl_cfg, rng.next_unit());
    }

    const Schedule& d = cfg.schedules.schedules[d_idx];

    // Arrivals, then the queue update (Q - D)^+ + A.
    long long l1 = 0;
    for (int i = 0; i < n; ++i) {
      long long used = std::min(q[i], d[i]);
      rec.cum_offered[i] += d[i];
      rec.cum_departures[i] += used;
      int a = rng.next_unit() < cfg.lambda(i) ? 1 : 0;
      rec.cum_arrivals[i] += a;
      a_prev[i] = a;
      q[i] = q[i] - used + a;
      l1 += q[i];
      rec.max_queue = std::max(rec.max_queue, q[i]);
    }

    x_prev = x;
    if (cfg.record_signals) rec.signal_memory_trace.emplace_back(x, m_r);
    if (auto s = slope.push(static_cast<double>(l1)))
      rec.window_l1_slopes.push_back(*s);
    if (cfg.snapshot_stride > 0 && t % cfg.snapshot_stride == 0)
      rec.snapshots.push_back(q);
  }

  rec.slots = cfg.horizon;
  rec.final_state.queues = q;
  rec.final_state.last_arrivals = a_prev;
  rec.final_state.last_signal = x_prev;
  rec.final_state.receiver_memory = m_r;
  if (std::holds_alternative<EmwPolicy>(cfg.policy))
    rec.final_state.encoder_memory =
        static_cast<long long>(emw_state.policy_index) *
            emw_state.bank->members.front().encoder.sig_size +
        emw_state.last_signal;
  else if (simple_enc)
    rec.final_state.encoder_memory = x_prev;
  else if (egl_cfg && !cfg.memory_feedback)
    rec.final_state.encoder_memory = (cfg.horizon - 1) % n;
  rec.variates_consumed = rng.count();
  return rec;
}

std::string to_string(StabilityVerdict::Label label) {
  switch (label) {
    case StabilityVerdict::Label::kStable: return "stable";
    case StabilityVerdict::Label::kUnstable: return "unstable";
    default: return "inconclusive";
  }
}

StabilityVerdict detect_stability(const TrajectoryRecord& rec,
                                  long long window, double threshold) {
  if (rec.window != window)
    throw std::invalid_argument("detect_stability: record used a different window");
  if (static_cast<long long>(rec.window_l1_slopes.size()) < 10)
    throw std::invalid_argument("detect_stability: record spans fewer than 10 windows");

  std::vector<double> tail(rec.window_l1_slopes.begin() +
                               rec.window_l1_slopes.size() / 2,
                           rec.window_l1_slopes.end());
  std::sort(tail.begin(), tail.end());
  double med = tail.size() % 2 == 1
                   ? tail[tail.size() / 2]
                   : 0.5 * (tail[tail.size() / 2 - 1] + tail[tail.size() / 2]);

  const double n = static_cast<double>(rec.final_state.queues.size());
  const double cap =
      50.0 * n * (1.0 + std::sqrt(static_cast<double>(rec.slots)) / 100.0);

  StabilityVerdict v;
  v.median_slope = med;
  v.max_queue = rec.max_queue;
  v.slots_run = rec.slots;
  if (med <= threshold && static_cast<double>(rec.max_queue) <= cap)
    v.label = StabilityVerdict::Label::kStable;
  else if (med >= 3.0 * threshold)
    v.label = StabilityVerdict::Label::kUnstable;
  else
    v.label = StabilityVerdict::Label::kInconclusive;
  return v;
}

int default_worker_count() {
  if (const char* env = std::getenv("SPII_WORKERS")) {
    int w = std::atoi(env);
    if (w > 0) return w;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::vector<SweepRow> sweep(const ExperimentConfig& base,
                            const std::vector<SweepPoint>& grid, int workers) {
  if (workers <= 0) workers = default_worker_count();
  workers = std::min<int>(workers, std::max<std::size_t>(grid.size(), 1));

  std::vector<SweepRow> rows(grid.size());
  std::atomic<std::size_t> next{0};

  auto work = [&]() {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= grid.size()) return;
      SweepRow& row = rows[i];
      row.point_id = static_cast<int>(i);
      row.lambda = grid[i].lambda;
      row.rho = grid[i].rho;
      row.policy = policy_kind_name(base.policy);
      MemoryBits bits = policy_memory_bits(base.policy, base.memory_feedback);
      row.k_bits = bits.encoder;
      row.v_bits = bits.receiver;
      row.seed = Rng::derive(base.seed, i);
      row.slots = base.horizon;
      try {
        ExperimentConfig cfg = base;
        cfg.lambda = grid[i].lambda;
        cfg.seed = row.seed;
        TrajectoryRecord rec = run_trajectory(cfg);
        row.verdict = detect_stability(rec, cfg.stability.window,
                                       cfg.stability.slope_threshold);
      } catch (const std::exception& e) {
        row.error = e.what();  // aggregated per point, no global abort
      }
    }
  };

  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  return rows;  // index order == point_id order
}

}  // namespace spii
