// Command-line front end for the mcx shared library. Talks to the library
// exclusively through the C API in mcx/mcx.h.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mcx/mcx.h"

namespace {

using nlohmann::json;

int status_to_exit(mcx_status status) {
  switch (status) {
    case MCX_OK: return 0;
    case MCX_ERR_INVALID: return 1;
    case MCX_ERR_DATA: return 2;
    case MCX_ERR_NUMERIC: return 3;
    case MCX_ERR_IO: return 2;
  }
  return 1;
}

[[noreturn]] void fail(mcx_status status) {
  std::cerr << "error: " << mcx_last_error() << "\n";
  std::exit(status_to_exit(status));
}

void check(mcx_status status) {
  if (status != MCX_OK) fail(status);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot open '" << path << "'\n";
    std::exit(2);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(double v, const char* spec = "%.6g") {
  if (std::isnan(v)) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string fmt_p(double p) {
  if (std::isnan(p)) return "-";
  if (p < 1e-4) return "<0.0001";
  return fmt(p, "%.4f");
}

// Aligned text table: first row is the header.
std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    if (widths.size() < row.size()) widths.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  std::ostringstream out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      out << rows[r][c];
      if (c + 1 < rows[r].size())
        out << std::string(widths[c] - rows[r][c].size() + 2, ' ');
    }
    out << "\n";
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t c = 0; c < rows[0].size(); ++c) total += widths[c] + (c + 1 < rows[0].size() ? 2 : 0);
      out << std::string(total, '-') << "\n";
    }
  }
  return out.str();
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char ch : s) {
    if (ch == '"') quoted += '"';
    quoted += ch;
  }
  quoted += '"';
  return quoted;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) {
    std::cerr << "error: cannot write '" << path.string() << "'\n";
    std::exit(2);
  }
  out << text;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) {
    std::cerr << "error: cannot write '" << path.string() << "'\n";
    std::exit(2);
  }
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out << csv_quote(row[c]);
      if (c + 1 < row.size()) out << ',';
    }
    out << '\n';
  }
}

void write_manifest(const std::filesystem::path& path, const std::string& subcommand, const json& config,
                    const std::vector<std::string>& outputs) {
  json manifest;
  manifest["tool"] = "mcx";
  manifest["version"] = mcx_version();
  manifest["subcommand"] = subcommand;
  manifest["config"] = config;
  manifest["outputs"] = outputs;
  std::ofstream out(path);
  if (!out) {
    std::cerr << "error: cannot write '" << path.string() << "'\n";
    std::exit(2);
  }
  out << manifest.dump(2) << "\n";
}

double wald_p(double estimate, double se) {
  if (!(se > 0.0) || std::isnan(estimate)) return std::nan("");
  const double z = std::fabs(estimate / se);
  return std::erfc(z / std::sqrt(2.0));
}

struct CommonFitFlags {
  std::uint64_t seed = 0;
  bool seed_set = false;
  int mc_samples = 0;
  int threads = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--seed", seed, "RNG seed")->each([this](const std::string&) { seed_set = true; });
    cmd->add_option("--mc-samples", mc_samples, "Monte Carlo samples per E-step (after warmup)");
    cmd->add_option("--threads", threads, "worker threads (0 = hardware default)");
  }

  void apply(mcx_fit_options* o) const {
    if (seed_set) o->seed = seed;
    if (mc_samples > 0) {
      o->mc_main = mc_samples;
      if (o->mc_initial > mc_samples) o->mc_initial = mc_samples;
      if (o->mc_polish < mc_samples) o->mc_polish = mc_samples;
    }
  }

  json to_json(const mcx_fit_options& o) const {
    return json{{"seed", o.seed},       {"mc_initial", o.mc_initial}, {"warmup_iters", o.warmup_iters},
                {"mc_main", o.mc_main}, {"mc_polish", o.mc_polish},   {"max_iter", o.max_iter},
                {"tol", o.tol},         {"tol_window", o.tol_window}, {"var_floor", o.var_floor}};
  }
};

struct DesignHandle {
  mcx_design* ptr = nullptr;
  ~DesignHandle() { mcx_design_free(ptr); }
};
struct DataHandle {
  mcx_data* ptr = nullptr;
  ~DataHandle() { mcx_data_free(ptr); }
};
struct FitHandle {
  mcx_fit* ptr = nullptr;
  ~FitHandle() { mcx_fit_free(ptr); }
};

std::string coef_name(const mcx_design* design, int index) {
  char buf[128];
  check(mcx_design_coef_name(design, index, buf, sizeof buf));
  return buf;
}

int run_fit(const std::string& design_path, const std::string& data_path, bool log_response,
            const CommonFitFlags& flags, int imputations, int burn_in, int m0,
            const std::string& out_dir) {
  DesignHandle design;
  check(mcx_design_from_json(read_file(design_path).c_str(), &design.ptr));
  DataHandle data;
  check(mcx_data_read_csv(design.ptr, data_path.c_str(), log_response ? 1 : 0, &data.ptr));

  mcx_fit_options fopts;
  mcx_fit_options_default(&fopts);
  flags.apply(&fopts);
  mcx_mi_options miopts;
  mcx_mi_options_default(&miopts);
  miopts.seed = fopts.seed ^ 0x5eedULL;
  if (imputations > 0) miopts.imputations = imputations;
  if (burn_in > 0) miopts.burn_in = burn_in;
  if (m0 > 0) miopts.repetitions = m0;

  FitHandle fit;
  check(mcx_fit_run(design.ptr, data.ptr, &fopts, nullptr, &fit.ptr));
  check(mcx_fit_mi_se(fit.ptr, &miopts));
  check(mcx_fit_lrt_pvalues(fit.ptr, &fopts, flags.threads));

  const int n_coef = mcx_fit_n_coef(fit.ptr);
  std::vector<std::vector<std::string>> table{{"Variable", "MLE", "SE", "p-value"}};
  std::vector<std::vector<std::string>> csv{{"variable", "estimate", "se", "p_value"}};
  for (int j = 0; j < n_coef; ++j) {
    const std::string name = coef_name(design.ptr, j);
    const double est = mcx_fit_coef(fit.ptr, j);
    const double se = mcx_fit_se(fit.ptr, j);
    // Drop-one LRT p-values everywhere except the intercept, which cannot be
    // dropped and gets a Wald test instead.
    const double p = j == 0 ? wald_p(est, se) : mcx_fit_pvalue(fit.ptr, j);
    table.push_back({name, fmt(est, "%.4f"), fmt(se, "%.4f"), fmt_p(p)});
    csv.push_back({name, fmt(est, "%.10g"), fmt(se, "%.10g"), std::isnan(p) ? "" : fmt(p, "%.10g")});
  }
  table.push_back({"sigma_e2", fmt(mcx_fit_sigma_e2(fit.ptr), "%.4f"), fmt(mcx_fit_se_sigma_e2(fit.ptr), "%.4f"), "-"});
  table.push_back({"sigma_s2", fmt(mcx_fit_sigma_s2(fit.ptr), "%.4f"), fmt(mcx_fit_se_sigma_s2(fit.ptr), "%.4f"), "-"});
  csv.push_back({"sigma_e2", fmt(mcx_fit_sigma_e2(fit.ptr), "%.10g"), fmt(mcx_fit_se_sigma_e2(fit.ptr), "%.10g"), ""});
  csv.push_back({"sigma_s2", fmt(mcx_fit_sigma_s2(fit.ptr), "%.10g"), fmt(mcx_fit_se_sigma_s2(fit.ptr), "%.10g"), ""});

  std::ostringstream text;
  text << "Model fit" << (log_response ? " (log responses)" : "") << "\n";
  text << "observed entries: " << mcx_data_observed(data.ptr)
       << ", missing: " << mcx_data_missing(data.ptr) << " ("
       << fmt(100.0 * mcx_data_missing_fraction(data.ptr, -1), "%.1f") << "%)\n";
  for (int i = 0; i < mcx_design_sequences(design.ptr); ++i)
    text << "  sequence " << (i + 1) << ": " << mcx_data_subjects(data.ptr, i) << " subjects, "
         << fmt(100.0 * mcx_data_missing_fraction(data.ptr, i), "%.1f") << "% missing\n";
  text << "converged: " << (mcx_fit_converged(fit.ptr) ? "yes" : "NO") << " ("
       << mcx_fit_iterations(fit.ptr) << " iterations)\n\n";
  text << render_table(table) << "\n";
  text << "log-likelihood  " << fmt(mcx_fit_loglik(fit.ptr), "%.4f") << "\n";
  text << "AIC             " << fmt(mcx_fit_aic(fit.ptr), "%.4f") << "\n";
  text << "BIC             " << fmt(mcx_fit_bic(fit.ptr), "%.4f") << "\n";
  text << "RMSE            " << fmt(mcx_fit_rmse(fit.ptr), "%.4f") << "\n";

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  write_text(dir / "fit.txt", text.str());
  write_csv(dir / "fit.csv", csv);
  write_csv(dir / "fit_stats.csv",
            {{"loglik", "aic", "bic", "rmse", "converged", "iterations", "observed", "missing"},
             {fmt(mcx_fit_loglik(fit.ptr), "%.10g"), fmt(mcx_fit_aic(fit.ptr), "%.10g"),
              fmt(mcx_fit_bic(fit.ptr), "%.10g"), fmt(mcx_fit_rmse(fit.ptr), "%.10g"),
              mcx_fit_converged(fit.ptr) ? "1" : "0", std::to_string(mcx_fit_iterations(fit.ptr)),
              std::to_string(mcx_data_observed(data.ptr)), std::to_string(mcx_data_missing(data.ptr))}});
  json config;
  config["design"] = design_path;
  config["data"] = data_path;
  config["log_response"] = log_response;
  config["fit"] = flags.to_json(fopts);
  config["mi"] = {{"seed", miopts.seed},
                  {"imputations", miopts.imputations},
                  {"burn_in", miopts.burn_in},
                  {"repetitions", miopts.repetitions}};
  config["threads"] = flags.threads;
  write_manifest(dir / "fit_manifest.json", "fit", config, {"fit.txt", "fit.csv", "fit_stats.csv"});

  std::cout << text.str();
  return 0;
}

int run_lrt(const std::string& design_path, const std::string& data_path, bool log_response,
            const std::string& restriction, const std::string& stat, const CommonFitFlags& flags,
            const std::string& out_dir) {
  DesignHandle design;
  check(mcx_design_from_json(read_file(design_path).c_str(), &design.ptr));
  DataHandle data;
  check(mcx_data_read_csv(design.ptr, data_path.c_str(), log_response ? 1 : 0, &data.ptr));

  mcx_fit_options fopts;
  mcx_fit_options_default(&fopts);
  flags.apply(&fopts);

  FitHandle full, reduced;
  check(mcx_fit_run(design.ptr, data.ptr, &fopts, nullptr, &full.ptr));
  mcx_fit_options ropts = fopts;
  ropts.seed = fopts.seed + 1;
  check(mcx_fit_run(design.ptr, data.ptr, &ropts, restriction.c_str(), &reduced.ptr));

  mcx_test_result test;
  if (stat == "q") check(mcx_lrt_q(full.ptr, reduced.ptr, &fopts, &test));
  else check(mcx_lrt(full.ptr, reduced.ptr, &test));

  std::ostringstream text;
  text << "Likelihood ratio test (" << (stat == "q" ? "Q statistic" : "observed log-likelihood")
       << ")\n";
  text << "restriction: " << restriction << "\n\n";
  text << render_table({{"statistic", "df", "p-value", "loglik(full)", "loglik(reduced)"},
                        {fmt(test.statistic, "%.4f"), std::to_string(test.df), fmt_p(test.p_value),
                         fmt(test.full_loglik, "%.4f"), fmt(test.reduced_loglik, "%.4f")}});

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  write_text(dir / "lrt.txt", text.str());
  write_csv(dir / "lrt.csv", {{"statistic", "df", "p_value", "full_loglik", "reduced_loglik", "kind"},
                              {fmt(test.statistic, "%.10g"), std::to_string(test.df),
                               fmt(test.p_value, "%.10g"), fmt(test.full_loglik, "%.10g"),
                               fmt(test.reduced_loglik, "%.10g"), stat}});
  json config;
  config["design"] = design_path;
  config["data"] = data_path;
  config["log_response"] = log_response;
  config["restriction"] = restriction;
  config["statistic"] = stat;
  config["fit"] = flags.to_json(fopts);
  write_manifest(dir / "lrt_manifest.json", "lrt", config, {"lrt.txt", "lrt.csv"});

  std::cout << text.str();
  return 0;
}

// Applies CLI overrides to a scenario/power config JSON before handing it to
// the library.
json merged_config(const std::string& path, const CommonFitFlags& flags, int imputations, int burn_in,
                   int m0, const std::string& miss_mode, const std::string& stat) {
  json cfg = json::parse(read_file(path), nullptr, false);
  if (cfg.is_discarded()) {
    std::cerr << "error: '" << path << "' is not valid JSON\n";
    std::exit(2);
  }
  if (flags.seed_set) cfg["seed"] = flags.seed;
  if (flags.mc_samples > 0) cfg["mcem"]["mc_main"] = flags.mc_samples;
  if (imputations > 0) cfg["mi"]["imputations"] = imputations;
  if (burn_in > 0) cfg["mi"]["burn_in"] = burn_in;
  if (m0 > 0) cfg["mi"]["repetitions"] = m0;
  if (!miss_mode.empty()) cfg["miss_mode"] = miss_mode;
  if (!stat.empty()) cfg["statistic"] = stat;
  return cfg;
}

int run_simulate(const std::string& config_path, const CommonFitFlags& flags, int imputations,
                 int burn_in, int m0, const std::string& miss_mode, const std::string& out_dir) {
  const json cfg = merged_config(config_path, flags, imputations, burn_in, m0, miss_mode, "");
  mcx_sim_result* raw = nullptr;
  check(mcx_simulate_run(cfg.dump().c_str(), flags.threads, &raw));
  std::unique_ptr<mcx_sim_result, decltype(&mcx_sim_result_free)> result(raw, &mcx_sim_result_free);

  const int n = mcx_sim_result_n_params(result.get());
  std::vector<std::vector<std::string>> table{{"Parameter", "True", "MLE", "SE", "Bias", "MSE", "ECP"}};
  std::vector<std::vector<std::string>> csv{{"parameter", "truth", "mean_mle", "mean_se", "bias", "mse", "ecp"}};
  char buf[128];
  for (int j = 0; j < n; ++j) {
    check(mcx_sim_result_param_name(result.get(), j, buf, sizeof buf));
    table.push_back({buf, fmt(mcx_sim_result_truth(result.get(), j), "%.2f"),
                     fmt(mcx_sim_result_mean_estimate(result.get(), j), "%.2f"),
                     fmt(mcx_sim_result_mean_se(result.get(), j), "%.2f"),
                     fmt(mcx_sim_result_bias(result.get(), j), "%.2f"),
                     fmt(mcx_sim_result_mse(result.get(), j), "%.2f"),
                     fmt(mcx_sim_result_ecp(result.get(), j), "%.2f")});
    csv.push_back({buf, fmt(mcx_sim_result_truth(result.get(), j), "%.10g"),
                   fmt(mcx_sim_result_mean_estimate(result.get(), j), "%.10g"),
                   fmt(mcx_sim_result_mean_se(result.get(), j), "%.10g"),
                   fmt(mcx_sim_result_bias(result.get(), j), "%.10g"),
                   fmt(mcx_sim_result_mse(result.get(), j), "%.10g"),
                   fmt(mcx_sim_result_ecp(result.get(), j), "%.10g")});
  }

  std::ostringstream text;
  text << "Replication study: " << mcx_sim_result_reps_used(result.get()) << "/"
       << mcx_sim_result_reps_requested(result.get()) << " replications converged, "
       << mcx_sim_result_mask_redraws(result.get()) << " mask redraws\n\n";
  text << render_table(table);

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  write_text(dir / "simulate.txt", text.str());
  write_csv(dir / "simulate.csv", csv);

  // Per-replication estimates plus standardized values for density plots.
  std::vector<std::vector<std::string>> est_rows;
  {
    std::vector<std::string> head{"rep"};
    for (int j = 0; j < n; ++j) {
      check(mcx_sim_result_param_name(result.get(), j, buf, sizeof buf));
      head.emplace_back(buf);
      head.push_back(std::string(buf) + "_std");
    }
    est_rows.push_back(std::move(head));
    for (int r = 0; r < mcx_sim_result_reps_used(result.get()); ++r) {
      std::vector<std::string> row{std::to_string(r + 1)};
      for (int j = 0; j < n; ++j) {
        row.push_back(fmt(mcx_sim_result_estimate(result.get(), r, j), "%.10g"));
        row.push_back(fmt(mcx_sim_result_standardized(result.get(), r, j), "%.10g"));
      }
      est_rows.push_back(std::move(row));
    }
  }
  write_csv(dir / "simulate_estimates.csv", est_rows);

  std::vector<std::vector<std::string>> ks_rows{{"parameter", "ks_distance"}};
  for (int j = 0; j < n; ++j) {
    check(mcx_sim_result_param_name(result.get(), j, buf, sizeof buf));
    ks_rows.push_back({buf, fmt(mcx_sim_result_ks(result.get(), j), "%.10g")});
  }
  write_csv(dir / "simulate_normality.csv", ks_rows);

  json manifest_cfg = cfg;
  manifest_cfg["threads"] = flags.threads;
  write_manifest(dir / "simulate_manifest.json", "simulate", manifest_cfg,
                 {"simulate.txt", "simulate.csv", "simulate_estimates.csv", "simulate_normality.csv"});

  std::cout << text.str();
  return 0;
}

int run_power(const std::string& config_path, const CommonFitFlags& flags, const std::string& stat,
              const std::string& miss_mode, const std::string& out_dir) {
  const json cfg = merged_config(config_path, flags, 0, 0, 0, miss_mode, stat);
  mcx_power_result* raw = nullptr;
  check(mcx_power_run(cfg.dump().c_str(), flags.threads, &raw));
  std::unique_ptr<mcx_power_result, decltype(&mcx_power_result_free)> result(raw, &mcx_power_result_free);

  char hyp[128];
  check(mcx_power_result_hypothesis(result.get(), hyp, sizeof hyp));
  const int n = mcx_power_result_n_points(result.get());
  std::vector<std::vector<std::string>> table{{"Subjects", "Missing", "Effect", "Reps", "Power"}};
  std::vector<std::vector<std::string>> csv{
      {"hypothesis", "df", "subjects", "miss_prob", "effect", "reps_used", "failures", "power"}};
  for (int k = 0; k < n; ++k) {
    table.push_back({std::to_string(mcx_power_result_subjects(result.get(), k)),
                     fmt(mcx_power_result_miss_prob(result.get(), k), "%.2f"),
                     fmt(mcx_power_result_effect(result.get(), k), "%.2f"),
                     std::to_string(mcx_power_result_reps_used(result.get(), k)),
                     fmt(mcx_power_result_power(result.get(), k), "%.3f")});
    csv.push_back({hyp, std::to_string(mcx_power_result_df(result.get())),
                   std::to_string(mcx_power_result_subjects(result.get(), k)),
                   fmt(mcx_power_result_miss_prob(result.get(), k), "%.10g"),
                   fmt(mcx_power_result_effect(result.get(), k), "%.10g"),
                   std::to_string(mcx_power_result_reps_used(result.get(), k)),
                   std::to_string(mcx_power_result_failures(result.get(), k)),
                   fmt(mcx_power_result_power(result.get(), k), "%.10g")});
  }

  std::ostringstream text;
  text << "Power study: hypothesis " << hyp << " (df " << mcx_power_result_df(result.get()) << ")\n\n";
  text << render_table(table);

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  write_text(dir / "power.txt", text.str());
  write_csv(dir / "power.csv", csv);
  json manifest_cfg = cfg;
  manifest_cfg["threads"] = flags.threads;
  write_manifest(dir / "power_manifest.json", "power", manifest_cfg, {"power.txt", "power.csv"});

  std::cout << text.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mixed-model analysis of multivariate crossover trials with missing responses"};
  app.require_subcommand(1);
  app.set_version_flag("--version", mcx_version());

  std::string design_path, data_path, config_path, out_dir = ".", restriction, stat = "loglik",
              miss_mode;
  bool log_response = false;
  int imputations = 0, burn_in = 0, m0 = 0;
  CommonFitFlags fit_flags, lrt_flags, sim_flags, power_flags;

  auto* fit = app.add_subcommand("fit", "fit the crossover mixed model to a dataset");
  fit->add_option("--design", design_path, "design JSON")->required();
  fit->add_option("--data", data_path, "dataset CSV")->required();
  fit->add_flag("--log-response", log_response, "model log(responses)");
  fit->add_option("--imputations", imputations, "imputations per repetition for SEs");
  fit->add_option("--burn-in", burn_in, "Gibbs burn-in sweeps");
  fit->add_option("--m0", m0, "imputation repetitions");
  fit->add_option("--out", out_dir, "output directory");
  fit_flags.attach(fit);

  auto* lrt = app.add_subcommand("lrt", "likelihood ratio test of a linear restriction");
  lrt->add_option("--design", design_path, "design JSON")->required();
  lrt->add_option("--data", data_path, "dataset CSV")->required();
  lrt->add_option("--restriction", restriction,
                  "treatment | period | response | response:A=B | cols:J,K,...")
      ->required();
  lrt->add_flag("--log-response", log_response, "model log(responses)");
  lrt->add_option("--stat", stat, "test statistic: loglik | q")
      ->check(CLI::IsMember({"loglik", "q"}));
  lrt->add_option("--out", out_dir, "output directory");
  lrt_flags.attach(lrt);

  auto* sim = app.add_subcommand("simulate", "replication study for bias / SE / coverage");
  sim->add_option("--config", config_path, "scenario JSON")->required();
  sim->add_option("--imputations", imputations, "imputations per repetition for SEs");
  sim->add_option("--burn-in", burn_in, "Gibbs burn-in sweeps");
  sim->add_option("--m0", m0, "imputation repetitions");
  sim->add_option("--miss-mode", miss_mode, "element | block")
      ->check(CLI::IsMember({"element", "block"}));
  sim->add_option("--out", out_dir, "output directory");
  sim_flags.attach(sim);

  auto* power = app.add_subcommand("power", "empirical power over a scenario grid");
  power->add_option("--config", config_path, "power study JSON")->required();
  power->add_option("--stat", stat, "test statistic: loglik | q")
      ->check(CLI::IsMember({"loglik", "q"}));
  power->add_option("--miss-mode", miss_mode, "element | block")
      ->check(CLI::IsMember({"element", "block"}));
  power->add_option("--out", out_dir, "output directory");
  power_flags.attach(power);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (fit->parsed())
      return run_fit(design_path, data_path, log_response, fit_flags, imputations, burn_in, m0, out_dir);
    if (lrt->parsed())
      return run_lrt(design_path, data_path, log_response, restriction, stat, lrt_flags, out_dir);
    if (sim->parsed())
      return run_simulate(config_path, sim_flags, imputations, burn_in, m0, miss_mode, out_dir);
    if (power->parsed()) return run_power(config_path, power_flags, stat, miss_mode, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
