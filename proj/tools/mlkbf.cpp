// Command line front end: data generation, reference filtering, single- and
// multilevel normalizing-constant estimation, rate sweeps and online
// parameter estimation. All outputs are CSV with a mandatory header row and
// 17-significant-digit floats; identical configs and seeds give
// byte-identical files for any MLKBF_THREADS.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "mlkbf/config.hpp"
#include "mlkbf/harness.hpp"
#include "mlkbf/io.hpp"
#include "mlkbf/kalman_ref.hpp"
#include "mlkbf/ml_nc.hpp"
#include "mlkbf/spsa.hpp"

namespace fs = std::filesystem;
using namespace mlkbf;

namespace {

int log_level() {
  if (const char* env = std::getenv("MLKBF_LOG")) return std::atoi(env);
  return 0;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::fprintf(stderr, "[mlkbf] %s\n", msg.c_str());
}

ModelSpec load_model_arg(const std::string& arg, std::uint64_t seed) {
  if (fs::exists(arg)) {
    const Json j = load_json_file(arg);
    return model_from_config(j.contains("model") ? j.at("model") : j, seed);
  }
  return model_from_config(Json(arg), seed);
}

struct DataDir {
  ModelSpec model;
  IncrementPath obs;
  Json meta;
};

DataDir load_data_dir(const std::string& dir) {
  DataDir d;
  d.meta = load_json_file((fs::path(dir) / "meta.json").string());
  d.model = model_from_json(d.meta.at("model"));
  const CsvTable table = read_csv((fs::path(dir) / "obs.csv").string());
  d.obs.level = d.meta.at("l_data").get<int>();
  d.obs.horizon = d.meta.at("horizon").get<int>();
  const std::int64_t steps = std::int64_t(table.rows.size());
  d.obs.data.resize(d.model.dy, steps);
  for (std::int64_t k = 0; k < steps; ++k) {
    const auto& row = table.rows[size_t(k)];
    for (int j = 0; j < d.model.dy; ++j) {
      d.obs.data(j, k) = std::strtod(row.at(size_t(j + 1)).c_str(), nullptr);
    }
  }
  return d;
}

int cmd_gen_data(const std::string& model_arg, int level, int horizon, std::uint64_t seed,
                 const std::string& out_dir) {
  const ModelSpec model = load_model_arg(model_arg, seed);
  auto [sig, obs] = simulate_truth_and_obs(model, level, horizon, seed);
  fs::create_directories(out_dir);

  CsvTable obs_table;
  obs_table.header = {"step"};
  for (int j = 1; j <= model.dy; ++j) obs_table.header.push_back("dY_" + std::to_string(j));
  obs_table.rows.reserve(size_t(obs.steps()));
  for (std::int64_t k = 0; k < obs.steps(); ++k) {
    std::vector<std::string> row{std::to_string(k)};
    for (int j = 0; j < model.dy; ++j) row.push_back(format_double(obs.data(j, k)));
    obs_table.rows.push_back(std::move(row));
  }
  write_csv((fs::path(out_dir) / "obs.csv").string(), obs_table);

  CsvTable truth_table;
  truth_table.header = {"step"};
  for (int j = 1; j <= model.dx; ++j) truth_table.header.push_back("x_" + std::to_string(j));
  for (std::int64_t k = 0; k < sig.states.cols(); ++k) {
    std::vector<std::string> row{std::to_string(k)};
    for (int j = 0; j < model.dx; ++j) row.push_back(format_double(sig.states(j, k)));
    truth_table.rows.push_back(std::move(row));
  }
  write_csv((fs::path(out_dir) / "truth.csv").string(), truth_table);

  Json meta;
  meta["model"] = model_to_json(model);
  meta["model_arg"] = model_arg;
  meta["l_data"] = level;
  meta["horizon"] = horizon;
  meta["master_seed"] = seed;
  std::ofstream mf(fs::path(out_dir) / "meta.json");
  mf << meta.dump(2) << '\n';

  log_info("wrote " + out_dir);
  std::printf("gen-data: %s steps=%lld dy=%d\n", out_dir.c_str(),
              (long long)obs.steps(), model.dy);
  return 0;
}

int cmd_kbf(const std::string& data_dir, int level, const std::string& out,
            const std::string& dump) {
  const DataDir d = load_data_dir(data_dir);
  if (!d.model.is_linear()) {
    std::fprintf(stderr, "kbf: the reference filter needs a linear model\n");
    return 1;
  }
  const KbfRunResult r = kbf_run(d.model, d.obs, level);
  const double u = exact_log_nc(r.means, d.obs, d.model, level);
  std::printf("kbf level=%d log_nc=%s\n", level, format_double(u).c_str());
  if (!out.empty()) {
    CsvTable t;
    t.header = {"level", "log_nc"};
    t.rows = {{std::to_string(level), format_double(u)}};
    write_csv(out, t);
  }
  if (!dump.empty()) {
    CsvTable t;
    t.header = {"k"};
    for (int j = 1; j <= d.model.dx; ++j) t.header.push_back("m_" + std::to_string(j));
    for (int j = 1; j <= d.model.dx; ++j) t.header.push_back("P_" + std::to_string(j));
    for (std::int64_t k = 0; k < r.means.cols(); ++k) {
      std::vector<std::string> row{std::to_string(k)};
      for (int j = 0; j < d.model.dx; ++j) row.push_back(format_double(r.means(j, k)));
      for (int j = 0; j < d.model.dx; ++j) {
        row.push_back(format_double(r.covs[size_t(k)](j, j)));
      }
      t.rows.push_back(std::move(row));
    }
    write_csv(dump, t);
  }
  return 0;
}

int cmd_nc(const std::string& data_dir, const std::string& variant, int level, int particles,
           std::uint64_t seed, std::uint32_t rep, const std::string& out,
           const std::string& trace) {
  const DataDir d = load_data_dir(data_dir);
  const VariantId v = variant_from_string(variant);
  const EnkbfRunResult r = enkbf_run(d.model, d.obs, level, particles, v, {seed, rep});
  std::printf("nc variant=%s level=%d particles=%d u=%s cost=%s\n", variant.c_str(), level,
              particles, format_double(r.log_nc.u).c_str(), format_double(r.cost).c_str());
  if (!out.empty()) {
    CsvTable t;
    t.header = {"variant", "level", "particles", "seed", "rep", "u", "cost"};
    t.rows = {{variant, std::to_string(level), std::to_string(particles), std::to_string(seed),
               std::to_string(rep), format_double(r.log_nc.u), format_double(r.cost)}};
    write_csv(out, t);
  }
  if (!trace.empty()) {
    // Re-run accumulating the per-step trace; the run itself is cheap
    // relative to keeping the option always-on.
    const IncrementPath obs_l = coarsen_increments(d.obs, level);
    const double delta = level_delta(level);
    CsvTable t;
    t.header = {"step", "u"};
    for (int j = 1; j <= d.model.dx; ++j) t.header.push_back("m_" + std::to_string(j));
    double u = 0.0;
    for (std::int64_t k = 0; k < obs_l.steps(); ++k) {
      u += log_nc_increment(r.mean_path.col(k), obs_l.data.col(k), d.model, delta);
      std::vector<std::string> row{std::to_string(k), format_double(u)};
      for (int j = 0; j < d.model.dx; ++j) row.push_back(format_double(r.mean_path(j, k)));
      t.rows.push_back(std::move(row));
    }
    write_csv(trace, t);
    Json side;
    side["variant"] = variant;
    side["level"] = level;
    side["particles"] = particles;
    side["seed"] = seed;
    side["rep"] = rep;
    std::ofstream sf(trace + ".meta.json");
    sf << side.dump(2) << '\n';
  }
  return 0;
}

int cmd_ml_nc(const std::string& data_dir, const std::string& variant, int l_star, int L,
              double c0, std::uint64_t seed, std::uint32_t rep, const std::string& out) {
  const DataDir d = load_data_dir(data_dir);
  MLConfig cfg{l_star, L, sample_allocation(c0, l_star, L), variant_from_string(variant)};
  const MlLogNcResult r = ml_log_nc(d.model, d.obs, cfg, {seed, rep});
  std::printf("ml-nc variant=%s l_star=%d L=%d u_ml=%s cost=%s\n", variant.c_str(), l_star, L,
              format_double(r.u_ml).c_str(), format_double(r.cost_fine_steps).c_str());
  if (!out.empty()) {
    CsvTable t;
    t.header = {"level", "u_fine", "u_coarse", "contribution", "cost"};
    for (const auto& row : r.per_level) {
      t.rows.push_back({std::to_string(row.level), format_double(row.u_fine),
                        row.level == l_star ? "" : format_double(row.u_coarse),
                        format_double(row.contribution), format_double(row.cost)});
    }
    t.rows.push_back({"total", "", "", format_double(r.u_ml),
                      format_double(r.cost_fine_steps)});
    write_csv(out, t);
  }
  return 0;
}

int cmd_rates(const std::string& config_path, const std::string& out) {
  const Json j = load_json_file(config_path);
  const RateExperimentConfig cfg = rates_config_from_json(j.at("rates"));
  const ModelSpec model = model_from_config(j.at("model"), cfg.seed);
  log_info("rate sweep: " + std::to_string(cfg.L_list.size()) + " target levels, R=" +
           std::to_string(cfg.repetitions));
  const auto records = run_rate_experiment(cfg, model);
  CsvTable t;
  t.header = {"estimator", "variant", "L", "repetitions", "mse", "cost"};
  for (const auto& r : records) {
    t.rows.push_back({r.estimator, to_string(r.variant), std::to_string(r.L),
                      std::to_string(r.repetitions), format_double(r.mse),
                      format_double(r.cost)});
  }
  write_csv(out, t);
  std::printf("rates: %zu records -> %s\n", records.size(), out.c_str());
  return 0;
}

int cmd_estimate(const std::string& config_path, const std::string& out) {
  const Json j = load_json_file(config_path);
  const EstimateConfig cfg = estimate_config_from_json(j.at("spsa"));
  const ModelSpec truth = cfg.family.build(cfg.theta_star);
  auto [sig, obs] =
      simulate_truth_and_obs(truth, cfg.data_level(), cfg.spsa.iterations, cfg.spsa.seed);
  (void)sig;
  log_info("estimate: M=" + std::to_string(cfg.spsa.iterations));
  const SpsaRunResult r = rml_spsa_run(cfg.family, obs, cfg.spsa);

  const int d = cfg.family.d_theta;
  CsvTable t;
  t.header = {"iter"};
  for (int k = 1; k <= d; ++k) t.header.push_back("theta_" + std::to_string(k));
  t.header.insert(t.header.end(), {"a_t", "b_t", "U_plus", "U_minus"});
  for (int it = 0; it < r.completed; ++it) {
    std::vector<std::string> row{std::to_string(it + 1)};
    for (int k = 0; k < d; ++k) row.push_back(format_double(r.theta_path(k, it + 1)));
    row.push_back(format_double(r.a_used(0, it)));
    row.push_back(format_double(r.b_used[size_t(it)]));
    row.push_back(format_double(r.u_plus[size_t(it)]));
    row.push_back(format_double(r.u_minus[size_t(it)]));
    t.rows.push_back(std::move(row));
  }
  write_csv(out, t);
  std::printf("estimate: %d iterations -> %s%s\n", r.completed, out.c_str(),
              r.diverged ? " (diverged)" : "");
  return r.diverged ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilevel ensemble Kalman-Bucy normalizing-constant toolkit"};
  app.require_subcommand(1);

  // gen-data
  std::string gd_model = "ou5", gd_out = "data";
  int gd_level = 10, gd_horizon = 1;
  std::uint64_t gd_seed = 1;
  auto* gen = app.add_subcommand("gen-data", "Simulate a truth/observation record");
  gen->add_option("--model", gd_model, "Preset (ou5|ou1|l63|l96) or JSON file");
  gen->add_option("--level", gd_level, "Simulation level l_data")->required();
  gen->add_option("--horizon", gd_horizon, "Time units T")->required();
  gen->add_option("--seed", gd_seed, "Master seed")->required();
  gen->add_option("--out", gd_out, "Output directory")->required();

  // kbf
  std::string kbf_data, kbf_out, kbf_dump;
  int kbf_level = 0;
  auto* kbf = app.add_subcommand("kbf", "Exact Kalman-Bucy reference filter and log-NC");
  kbf->add_option("--data", kbf_data, "Data directory from gen-data")->required();
  kbf->add_option("--level", kbf_level, "Filter level")->required();
  kbf->add_option("--out", kbf_out, "Result CSV");
  kbf->add_option("--dump", kbf_dump, "Per-step CSV of (k, mean, diag(P))");

  // nc
  std::string nc_data, nc_variant = "f1", nc_out, nc_trace;
  int nc_level = 0, nc_particles = 0;
  std::uint64_t nc_seed = 1;
  std::uint32_t nc_rep = 0;
  auto* nc = app.add_subcommand("nc", "Single-level EnKBF log-NC estimate");
  nc->add_option("--data", nc_data)->required();
  nc->add_option("--variant", nc_variant, "f1|f2|f3");
  nc->add_option("--level", nc_level)->required();
  nc->add_option("--particles", nc_particles)->required();
  nc->add_option("--seed", nc_seed)->required();
  nc->add_option("--rep", nc_rep, "Repetition label");
  nc->add_option("--out", nc_out, "Summary CSV");
  nc->add_option("--trace", nc_trace, "Per-step CSV of (step, u, mean)");

  // ml-nc
  std::string ml_data, ml_variant = "f1", ml_out;
  int ml_lstar = 0, ml_L = 0;
  double ml_c0 = 0.5;
  std::uint64_t ml_seed = 1;
  std::uint32_t ml_rep = 0;
  auto* ml = app.add_subcommand("ml-nc", "Multilevel EnKBF log-NC estimate");
  ml->add_option("--data", ml_data)->required();
  ml->add_option("--variant", ml_variant, "f1|f2|f3");
  ml->add_option("--lstar", ml_lstar)->required();
  ml->add_option("--L", ml_L)->required();
  ml->add_option("--c0", ml_c0, "Allocation constant");
  ml->add_option("--seed", ml_seed)->required();
  ml->add_option("--rep", ml_rep, "Repetition label");
  ml->add_option("--out", ml_out, "Per-level CSV with a trailing total row");

  // rates
  std::string rates_config, rates_out;
  auto* rates = app.add_subcommand("rates", "MSE-vs-cost rate sweep");
  rates->add_option("--config", rates_config)->required();
  rates->add_option("--out", rates_out)->required();

  // estimate
  std::string est_config, est_out;
  auto* est = app.add_subcommand("estimate", "Online RML-SPSA parameter estimation");
  est->add_option("--config", est_config)->required();
  est->add_option("--out", est_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(gd_model, gd_level, gd_horizon, gd_seed, gd_out);
    if (kbf->parsed()) return cmd_kbf(kbf_data, kbf_level, kbf_out, kbf_dump);
    if (nc->parsed())
      return cmd_nc(nc_data, nc_variant, nc_level, nc_particles, nc_seed, nc_rep, nc_out,
                    nc_trace);
    if (ml->parsed())
      return cmd_ml_nc(ml_data, ml_variant, ml_lstar, ml_L, ml_c0, ml_seed, ml_rep, ml_out);
    if (rates->parsed()) return cmd_rates(rates_config, rates_out);
    if (est->parsed()) return cmd_estimate(est_config, est_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "mlkbf: %s\n", e.what());
    return 1;
  }
  return 0;
}
