#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

#include "spii/capfactor.hpp"
#include "spii/config.hpp"
#include "spii/markov.hpp"
#include "spii/region.hpp"
#include "spii/sim.hpp"

namespace {

using nlohmann::json;

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json capfactor_record(const spii::CapFactorResult& res) {
  json doc;
  doc["method"] = res.method;
  doc["rho"] = res.rho;
  doc["diagnostics"] = {{"starts", res.starts}, {"evals", res.evals}};
  if (res.v0) {
    json w;
    w["theta"] = matrix_json(res.v0->theta);
    w["directions"] = res.v0->directions;
    json rs = json::array(), mus = json::array();
    for (const auto& r : res.v0->r) rs.push_back(vector_json(r));
    for (const auto& mu : res.v0->mu) mus.push_back(vector_json(mu));
    w["r"] = std::move(rs);
    w["mu"] = std::move(mus);
    doc["witness"] = std::move(w);
  }
  if (res.vl) {
    json w;
    w["v"] = res.vl->alloc.mem_bits;
    w["g_a"] = matrix_json(res.vl->alloc.g_a);
    w["h_a"] = matrix_json(res.vl->alloc.h_a);
    w["directions"] = res.vl->directions;
    json ges = json::array(), mus = json::array();
    for (const auto& e : res.vl->encoders) ges.push_back(matrix_json(e.g_e));
    for (const auto& mu : res.vl->mu) mus.push_back(vector_json(mu));
    w["g_e"] = std::move(ges);
    w["mu"] = std::move(mus);
    doc["witness"] = std::move(w);
  }
  return doc;
}

void write_record(const json& doc, const std::string& path) {
  if (path.empty()) {
    std::cout << doc.dump(2) << "\n";
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output " + path);
  out << doc.dump(2) << "\n";
  std::cout << "wrote " << path << "\n";
}

int run_validate(const std::string& config_path) {
  spii::ExperimentConfig cfg = spii::load_experiment(config_path);
  auto schedule_report = spii::validate_schedule_set(cfg.schedules);
  auto problems = spii::validate_experiment(cfg);
  if (schedule_report.ok() && problems.empty()) {
    std::cout << "ok: config is runnable\n";
    return 0;
  }
  for (const auto& v : schedule_report.violations)
    std::cout << "schedule set: " << v << "\n";
  if (!schedule_report.ok() && !schedule_report.closure_suggestion.empty()) {
    std::cout << "suggested monotone closure:";
    for (const auto& d : schedule_report.closure_suggestion) {
      std::cout << " (";
      for (std::size_t i = 0; i < d.size(); ++i)
        std::cout << (i ? "," : "") << d[i];
      std::cout << ")";
    }
    std::cout << "\n";
  }
  for (const auto& p : problems) std::cout << p << "\n";
  return 1;
}

int run_simulate(const std::string& config_path, std::uint64_t seed,
                 bool seed_set, const std::string& out,
                 const std::string& format) {
  spii::ExperimentConfig cfg = spii::load_experiment(config_path);
  if (seed_set) cfg.seed = seed;
  spii::TrajectoryRecord rec = spii::run_trajectory(cfg);
  spii::StabilityVerdict v = spii::detect_stability(
      rec, cfg.stability.window, cfg.stability.slope_threshold);
  std::cout << "verdict: " << spii::to_string(v.label)
            << "  median_slope: " << spii::format_g12(v.median_slope)
            << "  max_queue: " << v.max_queue << "  slots: " << v.slots_run
            << "\n";
  if (!out.empty()) {
    spii::SweepRow row;
    row.point_id = 0;
    row.lambda = cfg.lambda;
    row.policy = spii::policy_kind_name(cfg.policy);
    spii::MemoryBits bits =
        spii::policy_memory_bits(cfg.policy, cfg.memory_feedback);
    row.k_bits = bits.encoder;
    row.v_bits = bits.receiver;
    row.verdict = v;
    row.seed = cfg.seed;
    row.slots = rec.slots;
    spii::emit_results({row}, cfg, out,
                       format == "json" ? spii::ResultFormat::kJson
                                        : spii::ResultFormat::kCsv);
    std::cout << "wrote " << out << "\n";
  }
  return 0;
}

int run_sweep(const std::string& config_path, const std::string& grid_path,
              int workers, const std::string& out, const std::string& format) {
  spii::ExperimentConfig cfg = spii::load_experiment(config_path);
  auto grid = spii::load_grid(grid_path);
  auto rows = spii::sweep(cfg, grid, workers);
  int errors = 0;
  for (const auto& row : rows) {
    std::cout << row.point_id << ": "
              << (row.error.empty() ? spii::to_string(row.verdict.label)
                                    : "error (" + row.error + ")")
              << "\n";
    if (!row.error.empty()) ++errors;
  }
  if (!out.empty()) {
    spii::emit_results(rows, cfg, out,
                       format == "json" ? spii::ResultFormat::kJson
                                        : spii::ResultFormat::kCsv);
    std::cout << "wrote " << out << "\n";
  }
  return errors == 0 ? 0 : 1;
}

int run_capfactor(const std::string& config_path, const std::string& method,
                  int v, double eps, bool eps_set, double tol,
                  std::uint64_t seed, bool seed_set, int starts,
                  const std::string& out) {
  spii::ExperimentConfig cfg = spii::load_experiment(config_path);
  const spii::ScheduleSet& pi = cfg.schedules;
  const spii::Channel& channel = cfg.channel;

  auto channel_eps = [&]() {
    if (eps_set) return eps;
    auto dec = spii::max_eps_decompose(channel);
    if (!dec.ok())
      throw std::runtime_error(
          "channel has no positive eps-majorizing decomposition; pass --eps");
    return dec.decomposition->epsilon;
  };

  spii::OptimOptions opt;
  opt.starts = starts;
  if (seed_set) opt.seed = seed;

  json doc;
  if (method == "closed") {
    double e = channel_eps();
    double rho = spii::closed_form_parallel(pi.num_queues(), e);
    doc["method"] = "closed-form parallel queues";
    doc["rho"] = rho;
    doc["eps"] = e;
  } else if (method == "bound") {
    double e = channel_eps();
    spii::UpperBoundResult res = spii::upper_bound_epsmaj(pi, e);
    doc["method"] = "eps-majorizing upper bound";
    doc["rho"] = res.rho;
    doc["eps"] = e;
    doc["witness"] = {{"mu0", vector_json(res.mu0)}};
  } else if (method == "opt0") {
    doc = capfactor_record(spii::optimize_v0(pi, channel, opt));
  } else if (method == "optv") {
    spii::CapFactorResult res = spii::optimize_vl(pi, channel, v, opt);
    doc = capfactor_record(res);
    // Joint chains and stationary vectors for external verification.
    json chains = json::array();
    for (const auto& enc : res.vl->encoders) {
      spii::JointChain chain =
          spii::build_joint_chain(enc, res.vl->alloc, channel);
      spii::StationaryDistribution sd = spii::stationary(chain);
      json cj;
      cj["states"] = chain.num_states();
      cj["transition"] = matrix_json(chain.transition);
      cj["stationary"] = vector_json(sd.probs);
      chains.push_back(std::move(cj));
    }
    doc["chains"] = std::move(chains);
  } else if (method == "sim") {
    if (seed_set) cfg.seed = seed;
    spii::SimCapResult res = spii::simulate_capfactor(cfg, tol);
    doc["method"] = "simulation bisection";
    doc["rho"] = res.rho();
    doc["rho_lo"] = res.rho_lo;
    doc["rho_hi"] = res.rho_hi;
    doc["conclusive"] = res.conclusive;
    json dirs = json::array();
    for (const auto& d : res.directions) {
      json dj;
      dj["direction"] = d.direction;
      dj["lo"] = d.lo;
      dj["hi"] = d.hi;
      dj["cap"] = d.cap;
      dj["conclusive"] = d.conclusive;
      dirs.push_back(std::move(dj));
    }
    doc["directions"] = std::move(dirs);
  } else {
    throw std::runtime_error("unknown method '" + method + "'");
  }
  std::cout << "rho: " << spii::format_g12(doc["rho"].get<double>()) << "\n";
  write_record(doc, out);
  return 0;
}

int run_describe(const std::string& config_path) {
  spii::ExperimentConfig cfg = spii::load_experiment(config_path);
  spii::MemoryBits bits =
      spii::policy_memory_bits(cfg.policy, cfg.memory_feedback);
  std::cout << "policy: " << spii::policy_kind_name(cfg.policy) << "\n"
            << "encoder memory k: " << bits.encoder << " bits\n"
            << "receiver memory v: " << bits.receiver << " bits\n"
            << "memory feedback: " << (cfg.memory_feedback ? "on" : "off")
            << "\n"
            << "alphabets: |X| = " << cfg.channel.input_size()
            << ", |Y| = " << cfg.channel.output_size() << "\n"
            << "schedules: " << cfg.schedules.size()
            << " (N = " << cfg.schedules.num_queues() << " queues)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Queueing-under-noisy-channel simulator and capacity-factor tool"};
  app.require_subcommand(1);

  std::string config_path, grid_path, out_path, format = "csv";
  std::string method = "opt0";
  std::uint64_t seed = 0;
  double eps = 0.0, tol = 0.05;
  int v = 1, workers = 0, starts = 20;

  auto* validate = app.add_subcommand("validate", "Check a config for problems");
  validate->add_option("config", config_path)->required();

  auto* simulate = app.add_subcommand("simulate", "Run one trajectory");
  simulate->add_option("config", config_path)->required();
  auto* sim_seed = simulate->add_option("--seed", seed, "Override the config seed");
  simulate->add_option("--out", out_path, "Write the verdict row to a file");
  simulate->add_option("--format", format, "csv or json");

  auto* sweep_cmd = app.add_subcommand("sweep", "Run a grid of arrival points");
  sweep_cmd->add_option("config", config_path)->required();
  sweep_cmd->add_option("--grid", grid_path, "Grid file")->required();
  sweep_cmd->add_option("--workers", workers,
                        "Worker threads (default: SPII_WORKERS or hardware)");
  sweep_cmd->add_option("--out", out_path, "Results file");
  sweep_cmd->add_option("--format", format, "csv or json");

  auto* cap =
      app.add_subcommand("capfactor", "Compute or estimate the capacity factor");
  cap->add_option("config", config_path)->required();
  cap->add_option("--method", method, "closed | bound | opt0 | optv | sim");
  cap->add_option("--v", v, "Receiver memory bits for optv");
  auto* cap_eps =
      cap->add_option("--eps", eps, "Noise level (default: channel eps*)");
  cap->add_option("--tol", tol, "Bisection tolerance for sim");
  auto* cap_seed = cap->add_option("--seed", seed, "Solver / simulation seed");
  cap->add_option("--starts", starts, "Multistart count");
  cap->add_option("--out", out_path, "Result record path (JSON)");

  auto* policy = app.add_subcommand("policy", "Policy utilities");
  auto* describe = policy->add_subcommand("describe", "Print memory usage (k, v)");
  describe->add_option("config", config_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(validate)) return run_validate(config_path);
    if (app.got_subcommand(simulate))
      return run_simulate(config_path, seed, sim_seed->count() > 0, out_path,
                          format);
    if (app.got_subcommand(sweep_cmd))
      return run_sweep(config_path, grid_path, workers, out_path, format);
    if (app.got_subcommand(cap))
      return run_capfactor(config_path, method, v, eps, cap_eps->count() > 0,
                           tol, seed, cap_seed->count() > 0, starts, out_path);
    if (app.got_subcommand(policy)) {
      if (policy->got_subcommand(describe)) return run_describe(config_path);
      std::cerr << "policy: expected a subcommand (describe)\n";
      return 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
