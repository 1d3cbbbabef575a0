#include "spii/markov.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace spii {

namespace {

constexpr double kEdgeTol = 0.0;  // transitions are built exactly; any mass counts

std::vector<std::vector<int>> strongly_connected_components(
    const Eigen::MatrixXd& t) {
  // Iterative Tarjan.
  const int n = static_cast<int>(t.rows());
  std::vector<int> index(n, -1), low(n, 0), on_stack(n, 0);
  std::vector<int> stack;
  std::vector<std::vector<int>> comps;
  int counter = 0;

  struct Frame {
    int v;
    int next;
  };
  for (int root = 0; root < n; ++root) {
    if (index[root] >= 0) continue;
    std::vector<Frame> call{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!call.empty()) {
      Frame& f = call.back();
      if (f.next < n) {
        int w = f.next++;
        if (t(f.v, w) <= kEdgeTol) continue;
        if (index[w] < 0) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = 1;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], index[w]);
        }
      } else {
        if (low[f.v] == index[f.v]) {
          std::vector<int> comp;
          while (true) {
            int w = stack.back();
            stack.pop_back();
            on_stack[w] = 0;
            comp.push_back(w);
            if (w == f.v) break;
          }
          std::sort(comp.begin(), comp.end());
          comps.push_back(std::move(comp));
        }
        int v = f.v;
        call.pop_back();
        if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
      }
    }
  }
  return comps;
}

}  // namespace

JointChain build_joint_chain(const SimpleEncoder& enc,
                             const FiniteMemoryAllocation& pol,
                             const Channel& c) {
  const int msize = pol.mem_size();
  const int nx = enc.sig_size;
  const int ny = c.output_size();
  const int nd = static_cast<int>(pol.h_a.cols());
  if (enc.mem_size != msize)
    throw std::invalid_argument("build_joint_chain: encoder/allocation memory mismatch");
  if (c.input_size() != nx)
    throw std::invalid_argument("build_joint_chain: |X| mismatch");
  if (static_cast<int>(pol.g_a.rows()) != msize * ny)
    throw std::invalid_argument("build_joint_chain: |Y| mismatch");

  JointChain chain;
  chain.mem_size = msize;
  chain.sig_size = nx;
  chain.sched_size = nd;
  const int ns = chain.num_states();
  chain.transition = Eigen::MatrixXd::Zero(ns, ns);

  for (int m = 0; m < msize; ++m)
    for (int x = 0; x < nx; ++x) {
      // Row contents do not depend on d; build one block and copy.
      Eigen::MatrixXd block = Eigen::MatrixXd::Zero(1, ns);
      for (int xp = 0; xp < nx; ++xp) {
        double ge = enc.g_e(enc.row(m, x), xp);
        if (ge == 0.0) continue;
        for (int y = 0; y < ny; ++y) {
          double cy = c.matrix(xp, y);
          if (cy == 0.0) continue;
          int ar = pol.row(m, y);
          for (int mp = 0; mp < msize; ++mp) {
            double ga = pol.g_a(ar, mp);
            if (ga == 0.0) continue;
            for (int dp = 0; dp < nd; ++dp) {
              double ha = pol.h_a(ar, dp);
              if (ha == 0.0) continue;
              block(0, chain.state_index(mp, xp, dp)) += ge * cy * ga * ha;
            }
          }
        }
      }
      for (int d = 0; d < nd; ++d)
        chain.transition.row(chain.state_index(m, x, d)) = block;
    }
  return chain;
}

Eigen::MatrixXd pair_chain(const SimpleEncoder& enc,
                           const FiniteMemoryAllocation& pol,
                           const Channel& c) {
  const int msize = pol.mem_size();
  const int nx = enc.sig_size;
  const int ny = c.output_size();
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(msize * nx, msize * nx);
  for (int m = 0; m < msize; ++m)
    for (int x = 0; x < nx; ++x)
      for (int xp = 0; xp < nx; ++xp) {
        double ge = enc.g_e(enc.row(m, x), xp);
        if (ge == 0.0) continue;
        for (int y = 0; y < ny; ++y) {
          double cy = c.matrix(xp, y);
          if (cy == 0.0) continue;
          for (int mp = 0; mp < msize; ++mp)
            t(m * nx + x, mp * nx + xp) += ge * cy * pol.g_a(pol.row(m, y), mp);
        }
      }
  return t;
}

std::vector<std::vector<int>> closed_communicating_classes(
    const Eigen::MatrixXd& t) {
  auto comps = strongly_connected_components(t);
  std::vector<std::vector<int>> closed;
  std::vector<int> comp_of(t.rows());
  for (std::size_t k = 0; k < comps.size(); ++k)
    for (int v : comps[k]) comp_of[v] = static_cast<int>(k);
  for (std::size_t k = 0; k < comps.size(); ++k) {
    bool out = false;
    for (int v : comps[k]) {
      for (int w = 0; w < t.cols() && !out; ++w)
        if (t(v, w) > kEdgeTol && comp_of[w] != static_cast<int>(k)) out = true;
      if (out) break;
    }
    if (!out) closed.push_back(comps[k]);
  }
  return closed;
}

bool check_irreducible(const Eigen::MatrixXd& t) {
  return strongly_connected_components(t).size() == 1;
}

bool check_aperiodic(const Eigen::MatrixXd& t) {
  if (!check_irreducible(t)) return false;
  // Period = gcd over edges u -> w of (level[u] + 1 - level[w]) from a BFS.
  const int n = static_cast<int>(t.rows());
  std::vector<int> level(n, -1);
  std::vector<int> queue{0};
  level[0] = 0;
  for (std::size_t h = 0; h < queue.size(); ++h) {
    int u = queue[h];
    for (int w = 0; w < n; ++w)
      if (t(u, w) > kEdgeTol && level[w] < 0) {
        level[w] = level[u] + 1;
        queue.push_back(w);
      }
  }
  int g = 0;
  for (int u = 0; u < n; ++u)
    for (int w = 0; w < n; ++w)
      if (t(u, w) > kEdgeTol) g = std::gcd(g, std::abs(level[u] + 1 - level[w]));
  return g == 1;
}

bool check_irreducible(const JointChain& chain) {
  return check_irreducible(chain.transition);
}
bool check_aperiodic(const JointChain& chain) {
  return check_aperiodic(chain.transition);
}

StationaryDistribution stationary(const Eigen::MatrixXd& t) {
  const int n = static_cast<int>(t.rows());
  if (t.cols() != n) throw std::invalid_argument("stationary: non-square matrix");
  // Transient states carry no stationary mass, so a unique closed class still
  // pins down the distribution; two or more closed classes do not.
  auto closed = closed_communicating_classes(t);
  if (closed.size() != 1)
    throw ReducibleChainError(
        "stationary: chain is reducible (" + std::to_string(closed.size()) +
            " closed communicating classes)",
        std::move(closed));
  const std::vector<int>& cls = closed.front();
  const int m = static_cast<int>(cls.size());

  Eigen::MatrixXd sub(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) sub(i, j) = t(cls[i], cls[j]);

  Eigen::VectorXd pi_sub;
  if (m <= kDenseStateLimit) {
    // Solve pi (G - I) = 0 with one equation replaced by sum(pi) = 1.
    Eigen::MatrixXd a = (sub.transpose() - Eigen::MatrixXd::Identity(m, m));
    a.row(m - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
    b(m - 1) = 1.0;
    pi_sub = a.partialPivLu().solve(b);
  } else {
    pi_sub = Eigen::VectorXd::Constant(m, 1.0 / m);
    for (long iter = 0; iter < 1000000; ++iter) {
      Eigen::VectorXd next = sub.transpose() * pi_sub;
      next /= next.sum();
      double delta = (next - pi_sub).lpNorm<Eigen::Infinity>();
      pi_sub = next;
      if (delta < 1e-12) break;
    }
  }
  // Clean tiny negatives from the solve and renormalize.
  for (int i = 0; i < m; ++i) pi_sub(i) = std::max(pi_sub(i), 0.0);
  pi_sub /= pi_sub.sum();

  Eigen::VectorXd pi = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < m; ++i) pi(cls[i]) = pi_sub(i);
  StationaryDistribution out;
  out.residual = (t.transpose() * pi - pi).lpNorm<Eigen::Infinity>();
  out.probs = std::move(pi);
  return out;
}

StationaryDistribution stationary(const JointChain& chain) {
  return stationary(chain.transition);
}

Eigen::VectorXd service_rate(const SimpleEncoder& enc,
                             const FiniteMemoryAllocation& pol,
                             const Channel& c, const ScheduleSet& pi_set) {
  if (static_cast<int>(pol.h_a.cols()) != pi_set.size())
    throw std::invalid_argument("service_rate: |Pi| mismatch");
  JointChain chain = build_joint_chain(enc, pol, c);
  StationaryDistribution sd = stationary(chain);
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(pi_set.num_queues());
  for (int m = 0; m < chain.mem_size; ++m)
    for (int x = 0; x < chain.sig_size; ++x)
      for (int d = 0; d < chain.sched_size; ++d) {
        double p = sd.probs(chain.state_index(m, x, d));
        if (p == 0.0) continue;
        for (int i = 0; i < pi_set.num_queues(); ++i)
          mu(i) += p * static_cast<double>(pi_set.schedules[d][i]);
      }
  return mu;
}

ProjectionResult project_to_simple(
    std::span<const std::pair<int, int>> trace, int mem_size, int sig_size,
    const ProjectionOptions& options) {
  if (trace.size() < 2)
    throw std::invalid_argument("project_to_simple: trajectory too short");
  const std::size_t burn =
      static_cast<std::size_t>(options.burn_in_fraction * trace.size());
  const int rows = mem_size * sig_size;

  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(rows, sig_size);
  for (std::size_t t = std::max<std::size_t>(burn, 0); t + 1 < trace.size(); ++t) {
    auto [x, m] = trace[t];
    int xn = trace[t + 1].first;
    if (x < 0 || x >= sig_size || m < 0 || m >= mem_size || xn < 0 ||
        xn >= sig_size)
      throw std::invalid_argument("project_to_simple: symbol out of range");
    counts(m * sig_size + x, xn) += 1.0;
  }

  ProjectionResult result;
  result.visit_counts = counts.rowwise().sum();
  Eigen::MatrixXd g_e(rows, sig_size);
  for (int m = 0; m < mem_size; ++m)
    for (int x = 0; x < sig_size; ++x) {
      int r = m * sig_size + x;
      double visits = result.visit_counts(r, 0);
      if (visits == 0.0) result.unvisited_rows.emplace_back(m, x);
      if (visits < static_cast<double>(options.min_visits))
        throw std::runtime_error(
            "project_to_simple: insufficient samples for row (m=" +
            std::to_string(m) + ", x=" + std::to_string(x) + ")");
      // Laplace pseudo-count 1 keeps rows stochastic even with no visits.
      for (int xn = 0; xn < sig_size; ++xn)
        g_e(r, xn) = (counts(r, xn) + 1.0) / (visits + sig_size);
    }
  result.encoder = make_simple_encoder(mem_size, sig_size, std::move(g_e));
  return result;
}

double least_squares_slope(std::span<const double> y) {
  const std::size_t n = y.size();
  if (n < 2) return 0.0;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double x = static_cast<double>(i);
    sx += x;
    sy += y[i];
    sxx += x * x;
    sxy += x * y[i];
  }
  double denom = n * sxx - sx * sx;
  return denom == 0.0 ? 0.0 : (n * sxy - sx * sy) / denom;
}

namespace {
double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}
}  // namespace

DriftEstimate drift_estimate(const std::vector<QueueState>& q_trace,
                             long long window) {
  if (window < 2) throw std::invalid_argument("drift_estimate: window too small");
  const long long total = static_cast<long long>(q_trace.size());
  if (total < 2 * window)
    throw std::invalid_argument("drift_estimate: trajectory shorter than 2 windows");

  DriftEstimate est;
  std::vector<double> l1(window), l2(window);
  for (long long start = 0; start + window <= total; start += window) {
    for (long long k = 0; k < window; ++k) {
      double s1 = 0.0, s2 = 0.0;
      for (long long q : q_trace[start + k]) {
        s1 += static_cast<double>(q);
        s2 += static_cast<double>(q) * static_cast<double>(q);
      }
      l1[k] = s1;
      l2[k] = s2;
    }
    est.l1_slopes.push_back(least_squares_slope(l1));
    est.l2_slopes.push_back(least_squares_slope(l2));
  }
  const std::size_t half = est.l1_slopes.size() / 2;
  est.median_l1_second_half = median(
      {est.l1_slopes.begin() + half, est.l1_slopes.end()});
  est.median_l2_second_half = median(
      {est.l2_slopes.begin() + half, est.l2_slopes.end()});
  return est;
}

}  // namespace spii
