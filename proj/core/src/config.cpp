#include "spii/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "spii/capfactor.hpp"

namespace spii {

namespace {

namespace fs = std::filesystem;

[[noreturn]] void fail(const std::string& msg) {
  throw std::runtime_error("config: " + msg);
}

YAML::Node require(const YAML::Node& node, const std::string& key) {
  YAML::Node child = node[key];
  if (!child) fail("missing key '" + key + "'");
  return child;
}

Eigen::MatrixXd read_matrix_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open matrix file " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::vector<double> row;
    double v;
    while (ss >> v) row.push_back(v);
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) fail("empty matrix file " + path.string());
  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size())
      fail("ragged matrix file " + path.string());
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

struct MatrixValue {
  Eigen::MatrixXd values;
  std::optional<RatMatrix> exact;  // set when every entry was a rational string
};

MatrixValue read_matrix(const YAML::Node& node, const fs::path& base_dir) {
  MatrixValue out;
  if (node.IsMap()) {
    out.values = read_matrix_file(base_dir / require(node, "file").as<std::string>());
    return out;
  }
  if (!node.IsSequence() || node.size() == 0) fail("expected matrix rows");
  const std::size_t nrows = node.size();
  const std::size_t ncols = node[0].size();
  out.values.resize(nrows, ncols);
  RatMatrix exact(nrows, std::vector<Rat>(ncols));
  bool all_rational = true;
  for (std::size_t i = 0; i < nrows; ++i) {
    if (node[i].size() != ncols) fail("ragged inline matrix");
    for (std::size_t j = 0; j < ncols; ++j) {
      const YAML::Node& cell = node[i][j];
      std::string text = cell.as<std::string>();
      if (text.find('/') != std::string::npos) {
        Rat r = parse_rational(text);
        exact[i][j] = r;
        out.values(i, j) = boost::rational_cast<double>(r);
      } else {
        all_rational = false;
        out.values(i, j) = cell.as<double>();
      }
    }
  }
  if (all_rational) out.exact = std::move(exact);
  return out;
}

Eigen::VectorXd read_vector(const YAML::Node& node) {
  if (!node.IsSequence()) fail("expected a numeric sequence");
  Eigen::VectorXd v(node.size());
  for (std::size_t i = 0; i < node.size(); ++i) v(i) = node[i].as<double>();
  return v;
}

ScheduleSet read_schedule_set(const YAML::Node& node) {
  if (YAML::Node preset = node["preset"]) {
    std::string name = preset.as<std::string>();
    if (name == "single_server")
      return single_server_set(require(node, "queues").as<int>());
    fail("unknown schedule preset '" + name + "'");
  }
  auto read_list = [](const YAML::Node& list) {
    std::vector<Schedule> scheds;
    for (const auto& row : list) {
      Schedule d;
      for (const auto& cell : row) d.push_back(cell.as<long long>());
      scheds.push_back(std::move(d));
    }
    return scheds;
  };
  if (YAML::Node gen = node["closure_of"])
    return make_schedule_set(monotone_closure(read_list(gen)));
  return make_schedule_set(read_list(require(node, "schedules")));
}

Channel read_channel(const YAML::Node& node, const fs::path& base_dir) {
  std::string kind = require(node, "kind").as<std::string>();
  if (kind == "symmetric") {
    int n = require(node, "n").as<int>();
    YAML::Node eps = require(node, "eps");
    std::string text = eps.as<std::string>();
    if (text.find('/') != std::string::npos)
      return symmetric_channel_exact(n, parse_rational(text));
    return symmetric_channel(n, eps.as<double>());
  }
  if (kind == "identity") return identity_channel(require(node, "n").as<int>());
  if (kind == "matrix") {
    MatrixValue m = read_matrix(require(node, "rows"), base_dir);
    return make_channel(std::move(m.values), std::move(m.exact));
  }
  if (kind == "uniform_rows") {
    Eigen::VectorXd row = read_vector(require(node, "row"));
    return uniform_row_channel(require(node, "inputs").as<int>(), row);
  }
  fail("unknown channel kind '" + kind + "'");
}

MemorylessAllocation read_theta(const YAML::Node& node, const Channel& c,
                                const ScheduleSet& pi, const fs::path& dir) {
  if (node && node.IsScalar()) {
    std::string name = node.as<std::string>();
    if (name == "direct") return direct_index_allocation(c.output_size(), pi);
    if (name == "uniform")
      return make_memoryless_allocation(Eigen::MatrixXd::Constant(
          c.output_size(), pi.size(), 1.0 / pi.size()));
    fail("unknown theta preset '" + name + "'");
  }
  if (!node) return direct_index_allocation(c.output_size(), pi);
  return make_memoryless_allocation(read_matrix(node, dir).values);
}

PolicySpec read_policy(const YAML::Node& node, const Channel& c,
                       const ScheduleSet& pi, const fs::path& dir) {
  std::string kind = require(node, "kind").as<std::string>();
  if (kind == "mw") return MwPolicy{read_theta(node["theta"], c, pi, dir)};
  if (kind == "index") return IndexPolicy{read_theta(node["theta"], c, pi, dir)};
  if (kind == "simple") {
    Eigen::MatrixXd ge = read_matrix(require(node, "g_e"), dir).values;
    FiniteMemoryAllocation alloc;
    if (YAML::Node va = node["v"]; va && va.as<int>() > 0) {
      alloc = make_finite_memory_allocation(
          va.as<int>(), read_matrix(require(node, "g_a"), dir).values,
          read_matrix(require(node, "h_a"), dir).values);
    } else {
      alloc = lift_memoryless(read_theta(node["theta"], c, pi, dir));
    }
    return SimplePolicy{
        make_simple_encoder(alloc.mem_size(), c.input_size(), std::move(ge)),
        std::move(alloc)};
  }
  if (kind == "emw") {
    OptimOptions opt;
    if (YAML::Node s = node["starts"]) opt.starts = s.as<int>();
    if (YAML::Node s = node["opt_seed"]) opt.seed = s.as<std::uint64_t>();
    if (YAML::Node s = node["nm_evals_per_dim"])
      opt.nm_evals_per_dim = s.as<int>();
    EmwBuild build = build_emw(pi, c, require(node, "v").as<int>(),
                               require(node, "eps_slack").as<double>(),
                               require(node, "episode_mean").as<long long>(), opt);
    return EmwPolicy{std::move(build.state), std::move(build.alloc)};
  }
  if (kind == "egl") {
    double alpha = require(node, "alpha").as<double>();
    int n = pi.num_queues();
    long long learn = 0;
    YAML::Node learn_node = require(node, "learn_len");
    if (learn_node.as<std::string>() == "auto") {
      double target_eps = require(node, "target_eps").as<double>();
      double cap = 0.0;  // largest coordinate over conv(Pi) = member maximum
      for (const auto& d : pi.schedules)
        for (long long v : d) cap = std::max(cap, static_cast<double>(v));
      int replicas = node["bound_replicas"] ? node["bound_replicas"].as<int>() : 4000;
      Rng rng(node["bound_seed"] ? node["bound_seed"].as<std::uint64_t>() : 99991);
      // Probe pair comes from a draft config on a dummy episode split.
      EGLConfig draft = make_egl_config(c, n, 2 * n + 1, n, alpha);
      learn = egl_learning_len_bound(draft.q1, draft.q2, n,
                                     target_eps / (3.0 * n),
                                     1.0 - target_eps / (12.0 * cap * n), rng,
                                     replicas);
    } else {
      learn = learn_node.as<long long>();
    }
    long long episode = 0;
    YAML::Node ep_node = require(node, "episode_len");
    if (ep_node.as<std::string>() == "auto") {
      double target_eps = require(node, "target_eps").as<double>();
      double cap = 0.0;
      for (const auto& d : pi.schedules)
        for (long long v : d) cap = std::max(cap, static_cast<double>(v));
      episode = static_cast<long long>(std::ceil(8.0 * cap * n / target_eps)) * learn;
    } else {
      episode = ep_node.as<long long>();
    }
    return EglPolicy{make_egl_config(c, n, episode, learn, alpha)};
  }
  fail("unknown policy kind '" + kind + "'");
}

}  // namespace

ExperimentConfig load_experiment(const std::string& path) {
  YAML::Node root = YAML::LoadFile(path);
  fs::path dir = fs::path(path).parent_path();

  ExperimentConfig cfg;
  cfg.schedules = read_schedule_set(require(root, "schedule_set"));
  cfg.channel = read_channel(require(root, "channel"), dir);
  cfg.lambda = read_vector(require(root, "arrivals"));
  if (YAML::Node fb = root["feedback"]) cfg.memory_feedback = fb.as<bool>();
  cfg.policy = read_policy(require(root, "policy"), cfg.channel, cfg.schedules, dir);
  if (YAML::Node h = root["horizon"]) cfg.horizon = h.as<long long>();
  if (YAML::Node s = root["seed"]) cfg.seed = s.as<std::uint64_t>();
  if (YAML::Node st = root["stability"]) {
    if (YAML::Node w = st["window"]) cfg.stability.window = w.as<long long>();
    if (YAML::Node th = st["slope_threshold"])
      cfg.stability.slope_threshold = th.as<double>();
  }
  if (YAML::Node s = root["snapshot_stride"])
    cfg.snapshot_stride = s.as<long long>();
  if (YAML::Node r = root["record_signals"]) cfg.record_signals = r.as<bool>();
  return cfg;
}

std::vector<SweepPoint> load_grid(const std::string& path) {
  YAML::Node root = YAML::LoadFile(path);
  std::vector<SweepPoint> points;
  if (YAML::Node list = root["points"]) {
    for (const auto& p : list) {
      SweepPoint point;
      if (YAML::Node lam = p["lambda"]) {
        point.lambda = read_vector(lam);
        if (YAML::Node r = p["rho"]) point.rho = r.as<double>();
      } else {
        double rho = require(p, "rho").as<double>();
        Eigen::VectorXd d = read_vector(require(p, "direction"));
        point.lambda = rho * d;
        point.rho = rho;
      }
      points.push_back(std::move(point));
    }
    return points;
  }
  Eigen::VectorXd d = read_vector(require(root, "direction"));
  for (const auto& r : require(root, "rho_values")) {
    SweepPoint point;
    point.rho = r.as<double>();
    point.lambda = *point.rho * d;
    points.push_back(std::move(point));
  }
  return points;
}

}  // namespace spii
