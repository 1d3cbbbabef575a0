#include "spii/capfactor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "spii/lp.hpp"
#include "spii/markov.hpp"
#include "spii/nelder_mead.hpp"
#include "spii/region.hpp"
#include "spii/rng.hpp"

namespace spii {

double closed_form_parallel(int num_queues, double eps) {
  if (num_queues < 2)
    throw std::invalid_argument("closed_form_parallel: need N >= 2");
  if (eps <= 0.0 || eps >= 1.0)
    throw std::invalid_argument("closed_form_parallel: eps must be in (0,1)");
  return 1.0 - eps * (1.0 - 1.0 / num_queues);
}

UpperBoundResult upper_bound_epsmaj(const ScheduleSet& pi, double eps) {
  if (eps <= 0.0 || eps >= 1.0)
    throw std::invalid_argument("upper_bound_epsmaj: eps must be in (0,1)");
  auto dirs = maximal_extreme_indices(pi);
  const int n = pi.num_queues();
  const int k = pi.size();
  const int nf = static_cast<int>(dirs.size());

  // Variables: [p^(0) .. p^(nf-1) | q | rho], each p and q a point in the
  // simplex over Pi. Constraints per direction i, coordinate j:
  //   rho d_j - (1-eps) sum_d p^(i)_d S_dj - eps sum_d q_d S_dj <= 0.
  const int nvar = nf * k + k + 1;
  const int qoff = nf * k;
  const int rvar = nf * k + k;

  std::vector<double> obj(nvar, 0.0);
  obj[rvar] = 1.0;
  std::vector<LpRow> rows;
  for (int i = 0; i < nf; ++i) {
    const Schedule& d = pi.schedules[dirs[i]];
    for (int j = 0; j < n; ++j) {
      LpRow row;
      row.coeffs.assign(nvar, 0.0);
      for (int s = 0; s < k; ++s) {
        double sj = static_cast<double>(pi.schedules[s][j]);
        row.coeffs[i * k + s] = -(1.0 - eps) * sj;
        row.coeffs[qoff + s] += -eps * sj;
      }
      row.coeffs[rvar] = static_cast<double>(d[j]);
      row.rel = LpRel::kLe;
      row.rhs = 0.0;
      rows.push_back(std::move(row));
    }
  }
  for (int i = 0; i <= nf; ++i) {  // nf p-simplices plus the q simplex
    LpRow row;
    row.coeffs.assign(nvar, 0.0);
    for (int s = 0; s < k; ++s) row.coeffs[i * k + s] = 1.0;
    row.rel = LpRel::kEq;
    row.rhs = 1.0;
    rows.push_back(std::move(row));
  }

  LpSolution sol = lp_maximize(obj, rows);
  if (sol.status != LpStatus::kOptimal)
    throw std::runtime_error("upper_bound_epsmaj: LP failed");

  UpperBoundResult out;
  out.rho = sol.objective;
  out.mu0 = Eigen::VectorXd::Zero(n);
  for (int s = 0; s < k; ++s)
    for (int j = 0; j < n; ++j)
      out.mu0(j) += sol.x[qoff + s] * static_cast<double>(pi.schedules[s][j]);
  return out;
}

namespace {

Eigen::VectorXd random_simplex(int n, Rng& rng) {
  Eigen::VectorXd v(n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    v(i) = -std::log(std::max(rng.next_unit(), 1e-300));
    sum += v(i);
  }
  return v / sum;
}

// Step A of the alternating scheme: with Theta fixed, the best signal
// distribution (and its rho) per direction is an LP.
struct StepA {
  Eigen::VectorXd r;
  double rho;
};
StepA best_signal_distribution(const Eigen::MatrixXd& m, const Schedule& d) {
  const int nx = static_cast<int>(m.rows());
  const int n = static_cast<int>(m.cols());
  std::vector<double> obj(nx + 1, 0.0);
  obj[nx] = 1.0;
  std::vector<LpRow> rows;
  for (int j = 0; j < n; ++j) {
    LpRow row;
    row.coeffs.assign(nx + 1, 0.0);
    for (int x = 0; x < nx; ++x) row.coeffs[x] = m(x, j);
    row.coeffs[nx] = -static_cast<double>(d[j]);
    row.rel = LpRel::kGe;
    row.rhs = 0.0;
    rows.push_back(std::move(row));
  }
  LpRow simplex_row;
  simplex_row.coeffs.assign(nx + 1, 0.0);
  for (int x = 0; x < nx; ++x) simplex_row.coeffs[x] = 1.0;
  simplex_row.rel = LpRel::kEq;
  simplex_row.rhs = 1.0;
  rows.push_back(std::move(simplex_row));
  LpSolution sol = lp_maximize(obj, rows);
  if (sol.status != LpStatus::kOptimal)
    throw std::runtime_error("optimize_v0: signal LP failed");
  Eigen::VectorXd r(nx);
  for (int x = 0; x < nx; ++x) r(x) = sol.x[x];
  return {r, sol.objective};
}

// Step B: with the signal distributions fixed, (Theta, rho) is an LP.
struct StepB {
  Eigen::MatrixXd theta;
  double rho;
};
StepB best_theta(const std::vector<Eigen::VectorXd>& weights,  // r^(i) C
                 const std::vector<const Schedule*>& dirs,
                 const Eigen::MatrixXd& s, int ny) {
  const int nd = static_cast<int>(s.rows());
  const int n = static_cast<int>(s.cols());
  const int nvar = ny * nd + 1;
  const int rvar = ny * nd;
  std::vector<double> obj(nvar, 0.0);
  obj[rvar] = 1.0;
  std::vector<LpRow> rows;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    for (int j = 0; j < n; ++j) {
      LpRow row;
      row.coeffs.assign(nvar, 0.0);
      for (int y = 0; y < ny; ++y)
        for (int d = 0; d < nd; ++d)
          row.coeffs[y * nd + d] = weights[i](y) * s(d, j);
      row.coeffs[rvar] = -static_cast<double>((*dirs[i])[j]);
      row.rel = LpRel::kGe;
      row.rhs = 0.0;
      rows.push_back(std::move(row));
    }
  }
  for (int y = 0; y < ny; ++y) {
    LpRow row;
    row.coeffs.assign(nvar, 0.0);
    for (int d = 0; d < nd; ++d) row.coeffs[y * nd + d] = 1.0;
    row.rel = LpRel::kEq;
    row.rhs = 1.0;
    rows.push_back(std::move(row));
  }
  LpSolution sol = lp_maximize(obj, rows);
  if (sol.status != LpStatus::kOptimal)
    throw std::runtime_error("optimize_v0: theta LP failed");
  Eigen::MatrixXd theta(ny, nd);
  for (int y = 0; y < ny; ++y)
    for (int d = 0; d < nd; ++d) theta(y, d) = std::max(sol.x[y * nd + d], 0.0);
  for (int y = 0; y < ny; ++y) theta.row(y) /= theta.row(y).sum();
  return {theta, sol.objective};
}

Eigen::MatrixXd direct_theta_start(const ScheduleSet& pi, int ny) {
  Eigen::MatrixXd theta = Eigen::MatrixXd::Constant(
      ny, pi.size(), 1.0 / pi.size());
  const int n = pi.num_queues();
  for (int y = 0; y < ny && y < n; ++y) {
    Schedule unit(n, 0);
    unit[y] = 1;
    int idx = pi.find(unit);
    if (idx >= 0) {
      theta.row(y).setZero();
      theta(y, idx) = 1.0;
    }
  }
  return theta;
}

}  // namespace

CapFactorResult optimize_v0(const ScheduleSet& pi, const Channel& c,
                            const OptimOptions& options) {
  auto dir_idx = maximal_extreme_indices(pi);
  std::vector<const Schedule*> dirs;
  for (int i : dir_idx) dirs.push_back(&pi.schedules[i]);
  const int ny = c.output_size();
  const int nd = pi.size();
  const Eigen::MatrixXd s = pi.service_matrix();
  Rng rng(options.seed);

  CapFactorResult best;
  best.method = "optimize_v0";
  best.rho = -1.0;
  best.starts = options.starts;

  for (int start = 0; start < options.starts; ++start) {
    Eigen::MatrixXd theta;
    if (start == 0) {
      theta = direct_theta_start(pi, ny);
    } else if (start == 1) {
      theta = Eigen::MatrixXd::Constant(ny, nd, 1.0 / nd);
    } else {
      theta.resize(ny, nd);
      for (int y = 0; y < ny; ++y) theta.row(y) = random_simplex(nd, rng).transpose();
    }

    double rho = -1.0;
    std::vector<Eigen::VectorXd> r(dirs.size());
    for (int sweep = 0; sweep < 100; ++sweep) {
      Eigen::MatrixXd m = c.matrix * theta * s;
      std::vector<Eigen::VectorXd> weights(dirs.size());
      for (std::size_t i = 0; i < dirs.size(); ++i) {
        StepA a = best_signal_distribution(m, *dirs[i]);
        r[i] = a.r;
        weights[i] = (a.r.transpose() * c.matrix).transpose();
      }
      StepB b = best_theta(weights, dirs, s, ny);
      theta = b.theta;
      if (b.rho <= rho + 1e-12) {
        rho = std::max(rho, b.rho);
        break;
      }
      rho = b.rho;
    }

    if (rho > best.rho) {
      V0Witness w;
      w.theta = theta;
      w.r = r;
      w.directions = dir_idx;
      Eigen::MatrixXd m = c.matrix * theta * s;
      for (std::size_t i = 0; i < dirs.size(); ++i)
        w.mu.push_back((r[i].transpose() * m).transpose());
      best.rho = rho;
      best.v0 = std::move(w);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Finite-memory program.

namespace {

struct VlShape {
  int nf, msize, nx, ny, nd;
  int ge_len() const { return msize * nx * nx; }
  int ga_len() const { return msize * ny * msize; }
  int ha_len() const { return msize * ny * nd; }
  int total() const { return nf * ge_len() + ga_len() + ha_len(); }
};

Eigen::VectorXd softmax_row(const double* z, int n) {
  double mx = z[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, z[i]);
  Eigen::VectorXd p(n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    p(i) = std::exp(z[i] - mx);
    sum += p(i);
  }
  p /= sum;
  // Entry floor keeps every row strictly positive so the joint chain stays
  // irreducible for any channel.
  p = (p.array() + kEntryFloor) / (1.0 + n * kEntryFloor);
  return p;
}

Eigen::MatrixXd unpack_matrix(const std::vector<double>& raw, int offset,
                              int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    m.row(r) = softmax_row(raw.data() + offset + r * cols, cols).transpose();
  return m;
}

struct VlCandidate {
  std::vector<SimpleEncoder> encoders;
  FiniteMemoryAllocation alloc;
};

VlCandidate unpack(const std::vector<double>& raw, const VlShape& sh, int v) {
  VlCandidate cand;
  int off = 0;
  for (int i = 0; i < sh.nf; ++i) {
    cand.encoders.push_back(make_simple_encoder(
        sh.msize, sh.nx, unpack_matrix(raw, off, sh.msize * sh.nx, sh.nx)));
    off += sh.ge_len();
  }
  Eigen::MatrixXd ga = unpack_matrix(raw, off, sh.msize * sh.ny, sh.msize);
  off += sh.ga_len();
  Eigen::MatrixXd ha = unpack_matrix(raw, off, sh.msize * sh.ny, sh.nd);
  cand.alloc = make_finite_memory_allocation(v, std::move(ga), std::move(ha));
  return cand;
}

void pack_row(std::vector<double>& raw, int offset, const Eigen::VectorXd& p) {
  for (int i = 0; i < p.size(); ++i)
    raw[offset + i] = std::log(std::max(p(i), 1e-12));
}

// Raw parameters reproducing a witness (of equal or smaller memory) within
// the entry floor. Smaller-memory witnesses are embedded on the low memory
// states; the extra states get negligible inbound mass.
std::vector<double> pack_witness(const VlShape& sh,
                                 const std::vector<Eigen::MatrixXd>& ge_rows,
                                 const Eigen::MatrixXd& ga,
                                 const Eigen::MatrixXd& ha, int old_msize) {
  std::vector<double> raw(sh.total(), std::log(1e-12));
  int off = 0;
  for (int i = 0; i < sh.nf; ++i) {
    for (int m = 0; m < sh.msize; ++m)
      for (int x = 0; x < sh.nx; ++x) {
        Eigen::VectorXd row = ge_rows[i].row((m % old_msize) * sh.nx + x);
        pack_row(raw, off + (m * sh.nx + x) * sh.nx, row);
      }
    off += sh.ge_len();
  }
  for (int m = 0; m < sh.msize; ++m)
    for (int y = 0; y < sh.ny; ++y) {
      int r = (m % old_msize) * sh.ny + y;
      for (int mp = 0; mp < sh.msize; ++mp)
        raw[off + (m * sh.ny + y) * sh.msize + mp] =
            mp < old_msize ? std::log(std::max(ga(r, mp), 1e-12))
                           : std::log(1e-12);
    }
  off += sh.ga_len();
  for (int m = 0; m < sh.msize; ++m)
    for (int y = 0; y < sh.ny; ++y)
      pack_row(raw, off + (m * sh.ny + y) * sh.nd,
               ha.row((m % old_msize) * sh.ny + y));
  return raw;
}

}  // namespace

CapFactorResult optimize_vl(const ScheduleSet& pi, const Channel& c, int v,
                            const OptimOptions& options,
                            const std::optional<VlWitness>& warm_start) {
  if (v < 1) throw std::invalid_argument("optimize_vl: need v >= 1");
  auto dir_idx = maximal_extreme_indices(pi);
  VlShape sh{static_cast<int>(dir_idx.size()), 1 << v, c.input_size(),
             c.output_size(), pi.size()};

  std::vector<Eigen::VectorXd> dir_vec;
  for (int i : dir_idx) {
    Eigen::VectorXd d(pi.num_queues());
    for (int j = 0; j < pi.num_queues(); ++j)
      d(j) = static_cast<double>(pi.schedules[i][j]);
    dir_vec.push_back(d);
  }

  long long evals = 0;
  auto objective = [&](const std::vector<double>& raw) {
    ++evals;
    VlCandidate cand = unpack(raw, sh, v);
    double rho = std::numeric_limits<double>::infinity();
    for (int i = 0; i < sh.nf; ++i) {
      Eigen::VectorXd mu = service_rate(cand.encoders[i], cand.alloc, c, pi);
      for (int j = 0; j < mu.size(); ++j)
        if (dir_vec[i](j) > 0.0) rho = std::min(rho, mu(j) / dir_vec[i](j));
    }
    return -rho;  // Nelder-Mead minimizes
  };

  // Warm starts: the memoryless witness always embeds; a caller-provided
  // lower-memory witness embeds when its shapes divide ours.
  std::vector<std::vector<double>> seeds;
  {
    CapFactorResult v0 = optimize_v0(pi, c, options);
    std::vector<Eigen::MatrixXd> ge_rows;
    for (int i = 0; i < sh.nf; ++i) {
      Eigen::MatrixXd g(sh.nx, sh.nx);
      for (int x = 0; x < sh.nx; ++x) g.row(x) = v0.v0->r[i].transpose();
      ge_rows.push_back(std::move(g));
    }
    Eigen::MatrixXd ga = Eigen::MatrixXd::Zero(sh.ny, 1);
    ga.col(0).setOnes();
    seeds.push_back(pack_witness(sh, ge_rows, ga, v0.v0->theta, 1));
  }
  if (warm_start && static_cast<int>(warm_start->encoders.size()) == sh.nf &&
      sh.msize % warm_start->alloc.mem_size() == 0) {
    std::vector<Eigen::MatrixXd> ge_rows;
    for (const auto& e : warm_start->encoders) ge_rows.push_back(e.g_e);
    seeds.push_back(pack_witness(sh, ge_rows, warm_start->alloc.g_a,
                                 warm_start->alloc.h_a,
                                 warm_start->alloc.mem_size()));
  }

  Rng rng(options.seed ^ 0xabcdef12345ULL);
  NelderMeadOptions nm;
  nm.max_evals = std::min(options.nm_evals_per_dim * sh.total(), 60000);
  nm.init_step = 0.8;

  CapFactorResult best;
  best.method = "optimize_vl (best-found lower bound)";
  best.rho = -1.0;
  best.starts = options.starts;
  std::vector<double> best_raw;

  for (int start = 0; start < options.starts; ++start) {
    std::vector<double> raw;
    if (start < static_cast<int>(seeds.size())) {
      raw = seeds[start];
    } else if (start == static_cast<int>(seeds.size())) {
      raw.assign(sh.total(), 0.0);  // uniform rows
    } else {
      raw.resize(sh.total());
      for (auto& z : raw) z = 3.0 * (2.0 * rng.next_unit() - 1.0);
    }
    NelderMeadResult res = nelder_mead_minimize(objective, raw, nm);
    if (-res.f > best.rho) {
      best.rho = -res.f;
      best_raw = res.x;
    }
  }

  VlCandidate cand = unpack(best_raw, sh, v);
  VlWitness w;
  w.alloc = cand.alloc;
  w.encoders = cand.encoders;
  w.directions = dir_idx;
  for (int i = 0; i < sh.nf; ++i)
    w.mu.push_back(service_rate(cand.encoders[i], cand.alloc, c, pi));
  best.vl = std::move(w);
  best.evals = evals;
  return best;
}

// ---------------------------------------------------------------------------

SimCapResult simulate_capfactor(const ExperimentConfig& base, double tol,
                                double margin, const ProbeObserver& observer) {
  if (tol <= 0.0 || tol >= 1.0)
    throw std::invalid_argument("simulate_capfactor: tol must be in (0,1)");
  auto dir_idx = maximal_extreme_indices(base.schedules);
  const int n = base.schedules.num_queues();

  SimCapResult result;
  result.directions.resize(dir_idx.size());
  std::mutex observer_mutex;

  auto probe_direction = [&](std::size_t di) {
    const Schedule& d = base.schedules.schedules[dir_idx[di]];
    SimCapDirection& out = result.directions[di];
    out.direction = d;
    long long dmax = *std::max_element(d.begin(), d.end());
    out.cap = std::min(1.0, 1.0 / ((1.0 - margin) * static_cast<double>(dmax)));

    long long iter = 0;
    auto probe = [&](double rho) {
      ExperimentConfig cfg = base;
      cfg.lambda = Eigen::VectorXd(n);
      for (int j = 0; j < n; ++j)
        cfg.lambda(j) = rho * (1.0 - margin) * static_cast<double>(d[j]);
      cfg.seed = Rng::derive(base.seed, 7919 * (di + 1) + iter++);
      TrajectoryRecord rec = run_trajectory(cfg);
      StabilityVerdict verdict = detect_stability(
          rec, cfg.stability.window, cfg.stability.slope_threshold);
      if (observer) {
        std::lock_guard<std::mutex> lock(observer_mutex);
        observer(cfg, rec, verdict);
      }
      return verdict.label;
    };

    double lo = 0.0, hi = out.cap;
    auto top = probe(out.cap);
    if (top == StabilityVerdict::Label::kStable) {
      lo = out.cap;
    } else {
      if (top == StabilityVerdict::Label::kInconclusive) out.conclusive = false;
      while (hi - lo > tol) {
        double mid = 0.5 * (lo + hi);
        auto label = probe(mid);
        if (label == StabilityVerdict::Label::kStable) {
          lo = mid;
        } else {
          if (label == StabilityVerdict::Label::kInconclusive)
            out.conclusive = false;
          hi = mid;
        }
      }
    }
    out.lo = lo;
    out.hi = hi;
  };

  std::vector<std::thread> pool;
  for (std::size_t di = 0; di < dir_idx.size(); ++di)
    pool.emplace_back(probe_direction, di);
  for (auto& th : pool) th.join();

  result.rho_lo = result.directions.front().lo;
  result.rho_hi = result.directions.front().hi;
  result.conclusive = true;
  for (const auto& d : result.directions) {
    result.rho_lo = std::min(result.rho_lo, d.lo);
    result.rho_hi = std::min(result.rho_hi, d.hi);
    result.conclusive = result.conclusive && d.conclusive;
  }
  return result;
}

EmwBuild build_emw(const ScheduleSet& pi, const Channel& c, int v,
                   double eps_slack, long long episode_mean,
                   const OptimOptions& options) {
  if (eps_slack <= 0.0)
    throw std::invalid_argument("build_emw: eps_slack must be > 0");
  if (episode_mean < 1)
    throw std::invalid_argument("build_emw: episode mean must be >= 1");

  CapFactorResult res = optimize_vl(pi, c, v, options);
  const VlWitness& w = *res.vl;

  EmwBuild build;
  build.rho = res.rho;
  build.directions = w.directions;
  const double delta = eps_slack / 4.0;

  auto bank = std::make_shared<EmwBank>();
  FiniteMemoryAllocation alloc_pert = w.alloc;
  bool first = true;
  for (std::size_t i = 0; i < w.encoders.size(); ++i) {
    auto [enc_p, alloc_p] = perturb_simple(w.encoders[i], w.alloc, delta);
    if (first) {
      alloc_pert = alloc_p;  // shared psi; identical for every bank member
      first = false;
    }
    Eigen::VectorXd mu = service_rate(enc_p, alloc_pert, c, pi);
    const Schedule& d = pi.schedules[w.directions[i]];
    for (int j = 0; j < mu.size(); ++j)
      if (mu(j) + 1e-9 < (res.rho - eps_slack) * static_cast<double>(d[j]))
        throw std::runtime_error(
            "build_emw: perturbed bank rate falls short of (rho - eps_slack) d "
            "for direction " + std::to_string(i));
    bank->members.push_back({std::move(enc_p), std::move(mu)});
    build.mu.push_back(bank->members.back().mu);
  }

  build.state = make_emw_state(bank, 1.0 / static_cast<double>(episode_mean));
  build.alloc = std::move(alloc_pert);
  return build;
}

}  // namespace spii
