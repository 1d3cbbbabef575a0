#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "spii/sim.hpp"

namespace spii {

std::string format_g12(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

namespace {

std::string join_lambda(const Eigen::VectorXd& lambda) {
  std::string out;
  for (int i = 0; i < lambda.size(); ++i) {
    if (i) out += ";";
    out += format_g12(lambda(i));
  }
  return out;
}

std::string verdict_word(const SweepRow& row) {
  return row.error.empty() ? to_string(row.verdict.label) : "error";
}

nlohmann::json config_json(const ExperimentConfig& base) {
  nlohmann::json cfg;
  cfg["policy"] = policy_kind_name(base.policy);
  cfg["horizon"] = base.horizon;
  cfg["seed"] = base.seed;
  cfg["memory_feedback"] = base.memory_feedback;
  cfg["stability"] = {{"window", base.stability.window},
                      {"slope_threshold", base.stability.slope_threshold}};
  cfg["channel"] = {{"inputs", base.channel.input_size()},
                    {"outputs", base.channel.output_size()}};
  nlohmann::json scheds = nlohmann::json::array();
  for (const auto& d : base.schedules.schedules) scheds.push_back(d);
  cfg["schedule_set"] = scheds;
  return cfg;
}

}  // namespace

void emit_results(const std::vector<SweepRow>& rows,
                  const ExperimentConfig& base, const std::string& path,
                  ResultFormat format) {
  if (rows.empty()) throw std::invalid_argument("emit_results: empty table");
  std::ofstream out(path, std::ios::binary);  // binary: identical bytes everywhere
  if (!out) throw std::runtime_error("emit_results: cannot open " + path);

  if (format == ResultFormat::kCsv) {
    out << "point_id,lambda,rho,policy,k,v,verdict,median_slope,max_queue,seed,"
           "slots\n";
    for (const auto& row : rows) {
      out << row.point_id << ',' << join_lambda(row.lambda) << ','
          << (row.rho ? format_g12(*row.rho) : "") << ',' << row.policy << ','
          << row.k_bits << ',' << row.v_bits << ',' << verdict_word(row) << ','
          << format_g12(row.verdict.median_slope) << ',' << row.verdict.max_queue
          << ',' << row.seed << ',' << row.slots << '\n';
    }
    return;
  }

  nlohmann::json doc;
  doc["config"] = config_json(base);
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json r;
    r["point_id"] = row.point_id;
    std::vector<double> lam(row.lambda.data(), row.lambda.data() + row.lambda.size());
    r["lambda"] = lam;
    if (row.rho) r["rho"] = *row.rho;
    r["policy"] = row.policy;
    r["k"] = row.k_bits;
    r["v"] = row.v_bits;
    r["verdict"] = verdict_word(row);
    r["median_slope"] = row.verdict.median_slope;
    r["max_queue"] = row.verdict.max_queue;
    r["seed"] = row.seed;
    r["slots"] = row.slots;
    if (!row.error.empty()) r["error"] = row.error;
    arr.push_back(std::move(r));
  }
  doc["rows"] = std::move(arr);
  out << doc.dump(2) << '\n';
}

}  // namespace spii
