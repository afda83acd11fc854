#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "dynvine/io.hpp"
#include "dynvine/study.hpp"

namespace fs = std::filesystem;
using namespace dynvine;
using nlohmann::json;

namespace {

struct FitFlags {
  std::string input, config, out, families, structure_class, structure;
  std::optional<std::uint64_t> seed, edge_order_seed;
  std::optional<unsigned> threads;
  std::optional<int> R, k, burnin, truncate;
  std::optional<double> se_mult;
  bool static_only = false, keep_loglik = false;
};

void add_sampler_flags(CLI::App* app, FitFlags& f) {
  app->add_option("--seed", f.seed, "Master seed");
  app->add_option("--threads", f.threads, "Worker cap (default: DYNVINE_THREADS or all cores)")->check(CLI::PositiveNumber);
  app->add_option("--R", f.R, "Stored iterations per edge");
  app->add_option("--k", f.k, "Sweeps between stored iterations");
  app->add_option("--burnin", f.burnin, "Stored iterations discarded from summaries");
  app->add_option("--families", f.families, "Candidate families, e.g. indep,gaussian,t4,eclayton,egumbel");
}

FitConfig resolve_fit_config(const FitFlags& f) {
  FitConfig cfg;
  if (!f.config.empty()) cfg = fit_config_from_json(read_json(f.config), cfg);
  if (f.seed) cfg.sampler.seed = *f.seed;
  if (f.threads) cfg.threads = *f.threads;
  if (f.R) cfg.sampler.R = *f.R;
  if (f.k) cfg.sampler.k = *f.k;
  if (f.burnin) cfg.sampler.burnin = *f.burnin;
  if (!f.families.empty()) cfg.sampler.families = parse_family_list(f.families);
  if (!f.structure_class.empty()) cfg.structure_class = parse_structure_class(f.structure_class);
  if (f.truncate) cfg.truncation_level = *f.truncate;
  if (f.se_mult) cfg.se_multiplier = *f.se_mult;
  if (f.static_only) cfg.allow_dynamic = false;
  if (f.edge_order_seed) cfg.edge_order_seed = *f.edge_order_seed;
  if (f.keep_loglik) cfg.keep_loglik = true;
  if (!f.structure.empty()) {
    std::ifstream in(f.structure);
    if (!in) throw std::runtime_error("cannot open " + f.structure);
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    cfg.fixed_structure = f.structure.ends_with(".json") ? structure_from_json(json::parse(text)) : parse_matrix(text);
  }
  return cfg;
}

void check(bool ok, const std::string& what) {
  if (!ok) throw std::runtime_error("output validation failed: " + what);
}

int cmd_fit(const FitFlags& f) {
  const FitConfig cfg = resolve_fit_config(f);
  const DataMatrix U = read_csv(f.input);
  const VineFitResult res = fit(U, cfg);
  for (const std::string& w : res.warnings) std::cerr << "dynvine: warning: " << w << '\n';
  write_fit_dir(f.out, res, U, {{"command", "fit"}, {"input", f.input}});

  const LoadedFit back = read_fit_dir(f.out);
  check(back.train == U, "train.csv");
  check(back.fit.structure == res.structure, "structure");
  for (std::size_t l = 0; l < res.edges.size(); ++l)
    for (std::size_t i = 0; i < res.edges[l].size(); ++i)
      check(back.fit.edges[l][i].draws == res.edges[l][i].draws, "draws of edge " + res.edges[l][i].edge.label());

  std::cout << format_matrix(res.structure);
  for (const auto& tree : res.edges)
    for (const EdgeFit& e : tree) {
      std::cout << e.edge.label() << ' ' << to_string(e.type);
      if (e.type != DependenceType::Zero)
        std::cout << ' ' << family_mode(e.draws, static_cast<std::size_t>(cfg.sampler.burnin)).name();
      std::cout << '\n';
    }
  return 0;
}

struct SimFlags {
  std::string input, out;
  std::size_t T = 1000, reps = 1;
  std::uint64_t seed = 1;
  bool fresh_paths = false;
};

int cmd_simulate(const SimFlags& f) {
  const GenerativeSpec spec = read_spec(f.input);
  Rng rng(f.seed);
  fs::create_directories(f.out);
  std::vector<DataMatrix> samples;
  std::optional<VinePath> path;
  if (f.fresh_paths) {
    samples = simulate(spec, f.T, f.reps, rng);
  } else {
    path = spec.realize(f.T, rng);
    samples = simulate(*path, f.T, f.reps, rng);
  }
  const int width = static_cast<int>(std::to_string(f.reps).size());
  std::vector<std::string> files;
  for (std::size_t r = 0; r < samples.size(); ++r) {
    std::string num = std::to_string(r + 1);
    num.insert(0, static_cast<std::size_t>(width) - num.size(), '0');
    files.push_back("sample_" + num + ".csv");
    write_csv(fs::path(f.out) / files.back(), samples[r]);
    check(read_csv(fs::path(f.out) / files.back()) == samples[r], files.back());
  }
  const int d = spec.structure.dim();
  if (path) {
    std::ofstream out(fs::path(f.out) / "true_tau.csv");
    out << 't';
    for (const auto& tree : spec.structure.trees())
      for (const VineEdge& e : tree) out << ",\"" << e.label() << '"';
    out << '\n';
    for (std::size_t t = 0; t < f.T; ++t) {
      out << t + 1;
      for (const auto& tree : path->edges)
        for (const PairPath& p : tree) out << ',' << p.tau_at(t);
      out << '\n';
    }
    check(static_cast<bool>(out), "true_tau.csv");
  }
  if (f.reps >= 2) {
    std::vector<std::vector<double>> cols;
    std::ofstream out(fs::path(f.out) / "cross_tau.csv");
    out << 't';
    for (int i = 1; i <= d; ++i)
      for (int j = i + 1; j <= d; ++j) {
        out << ",\"" << i << ',' << j << '"';
        cols.push_back(cross_sectional_tau(samples, i, j));
      }
    out << '\n';
    for (std::size_t t = 0; t < f.T; ++t) {
      out << t + 1;
      for (const auto& c : cols) out << ',' << c[t];
      out << '\n';
    }
    check(static_cast<bool>(out), "cross_tau.csv");
  }
  write_json(fs::path(f.out) / "manifest.json", {{"software", {{"name", kSoftwareName}, {"version", kSoftwareVersion}}},
                                                 {"command", "simulate"},
                                                 {"spec", spec_to_json(spec)},
                                                 {"T", f.T},
                                                 {"reps", f.reps},
                                                 {"seed", f.seed},
                                                 {"fresh_paths", f.fresh_paths},
                                                 {"samples", files}});
  std::cout << "wrote " << samples.size() << " samples of " << f.T << " x " << d << " to " << f.out << '\n';
  return 0;
}

struct ForecastFlags {
  std::string fit_dir, input, out;
  std::string update = "filter";
  int update_sweeps = 10;
  std::uint64_t seed = 1;
};

int cmd_forecast(const ForecastFlags& f) {
  const LoadedFit lf = read_fit_dir(f.fit_dir);
  const DataMatrix test = read_csv(f.input);
  ForecastConfig fc;
  fc.update = parse_state_update(f.update);
  fc.update_sweeps = f.update_sweeps;
  fc.seed = f.seed;
  const PlpsResult p = copula_plps(lf.fit, lf.train, test, fc);
  fs::create_directories(f.out);
  {
    std::ofstream out(fs::path(f.out) / "plps.csv");
    out << "step,t,plps,cumulative\n";
    for (std::size_t h = 0; h < p.per_step.size(); ++h)
      out << h + 1 << ',' << lf.fit.T + h + 1 << ',' << p.per_step[h] << ',' << p.cumulative[h] << '\n';
    check(static_cast<bool>(out), "plps.csv");
  }
  {
    std::ofstream out(fs::path(f.out) / "plps_edges.csv");
    out << "step";
    for (const auto& tree : lf.fit.structure.trees())
      for (const VineEdge& e : tree) out << ",\"" << e.label() << '"';
    out << '\n';
    for (std::size_t h = 0; h < p.per_step.size(); ++h) {
      out << h + 1;
      for (const auto& tree : p.per_edge)
        for (const auto& e : tree) out << ',' << e[h];
      out << '\n';
    }
    check(static_cast<bool>(out), "plps_edges.csv");
  }
  write_json(fs::path(f.out) / "manifest.json", {{"software", {{"name", kSoftwareName}, {"version", kSoftwareVersion}}},
                                                 {"command", "forecast"},
                                                 {"fit", f.fit_dir},
                                                 {"input", f.input},
                                                 {"steps", p.per_step.size()},
                                                 {"update", to_string(fc.update)},
                                                 {"update_sweeps", f.update_sweeps},
                                                 {"seed", f.seed},
                                                 {"cumulative_plps", p.cumulative.empty() ? 0.0 : p.cumulative.back()}});
  std::cout << "cumulative copula plps over " << p.per_step.size()
            << " steps: " << (p.cumulative.empty() ? 0.0 : p.cumulative.back()) << '\n';
  return 0;
}

struct StudyFlags {
  std::string scenario, out;
  int reps = 10;
  std::size_t T = 1000;
  FitFlags sampler;
};

int cmd_study(const StudyFlags& f) {
  StudyOptions opt;
  opt.reps = f.reps;
  opt.T = f.T;
  const FitFlags& s = f.sampler;
  if (s.seed) opt.seed = *s.seed;
  if (s.threads) opt.threads = *s.threads;
  opt.sampler.R = s.R.value_or(600);
  opt.sampler.k = s.k.value_or(25);
  opt.sampler.burnin = s.burnin.value_or(100);
  if (!s.families.empty()) {
    opt.sampler.families = parse_family_list(s.families);
    opt.families_set = true;
  }
  json tables = run_study(f.scenario, opt);
  const double seconds = tables["seconds"];
  tables.erase("seconds");
  fs::create_directories(f.out);
  write_json(fs::path(f.out) / "tables.json", tables);
  check(read_json(fs::path(f.out) / "tables.json") == tables, "tables.json");
  if (tables.contains("type_counts")) {
    std::cout << "scenario " << f.scenario << " (truth: " << tables["true_type"].get<std::string>() << ", "
              << tables["true_family"].get<std::string>() << "), " << f.reps << " reps\n";
    for (const auto& [k, v] : tables["type_counts"].items()) std::cout << "  " << k << " selected: " << v << '\n';
    for (const auto& [k, v] : tables["family_counts"].items()) std::cout << "  " << k << ": " << v << '\n';
  } else {
    std::cout << "scenario " << f.scenario << ", " << f.reps
              << " reps, mean log-likelihood ratio fitted/true: " << tables["mean_loglik_ratio"].get<double>() << '\n';
  }
  std::cout << "  (" << seconds << " s)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic vine copulas: sequential Bayesian estimation, simulation and forecasting"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kSoftwareVersion));

  FitFlags ff;
  CLI::App* fit_cmd = app.add_subcommand("fit", "Estimate a dynamic vine copula from copula data");
  fit_cmd->add_option("--input", ff.input, "Headerless CSV, T rows x d columns in (0,1)")->required();
  fit_cmd->add_option("--config", ff.config, "JSON configuration");
  fit_cmd->add_option("--out", ff.out, "Output directory")->required();
  add_sampler_flags(fit_cmd, ff);
  fit_cmd->add_option("--structure-class", ff.structure_class, "general, cvine or dvine")
      ->check(CLI::IsMember({"general", "cvine", "dvine"}));
  fit_cmd->add_option("--truncate", ff.truncate, "Fit trees 1..L only");
  fit_cmd->add_option("--se-mult", ff.se_mult, "WAIC standard-error multiplier")->check(CLI::NonNegativeNumber);
  fit_cmd->add_option("--structure", ff.structure, "Fixed structure (matrix text or JSON tree list)");
  fit_cmd->add_flag("--static-only", ff.static_only, "Restrict every edge to static or zero dependence");
  fit_cmd->add_option("--edge-order-seed", ff.edge_order_seed, "Shuffle edge processing order within trees");
  fit_cmd->add_flag("--keep-loglik", ff.keep_loglik, "Store pointwise log-likelihoods with the draws");

  SimFlags sf;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "Simulate copula data from a generative spec");
  sim_cmd->add_option("--input,--spec", sf.input, "Spec JSON")->required();
  sim_cmd->add_option("--out", sf.out, "Output directory")->required();
  sim_cmd->add_option("--T", sf.T, "Rows per sample")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--reps", sf.reps, "Number of samples")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", sf.seed, "Seed");
  sim_cmd->add_flag("--fresh-paths", sf.fresh_paths, "Draw new tau paths for every sample");

  ForecastFlags ef;
  CLI::App* fc_cmd = app.add_subcommand("forecast", "One-step-ahead copula log predictive scores");
  fc_cmd->add_option("--fit", ef.fit_dir, "Directory written by 'fit'")->required();
  fc_cmd->add_option("--input", ef.input, "New copula data following the training rows")->required();
  fc_cmd->add_option("--out", ef.out, "Output directory")->required();
  fc_cmd->add_option("--update", ef.update, "Dynamic state update: filter (grid filter) or ess (slice sweeps)")
      ->check(CLI::IsMember({"filter", "ess"}));
  fc_cmd->add_option("--update-sweeps", ef.update_sweeps, "Slice sweeps per step (ess only)")->check(CLI::PositiveNumber);
  fc_cmd->add_option("--seed", ef.seed, "Seed of the slice sweeps (ess only)");

  StudyFlags stf;
  CLI::App* st_cmd = app.add_subcommand("study", "Run a simulation study scenario");
  st_cmd->add_option("--scenario", stf.scenario, "biv1..biv5, vine6_known, vine6_selected, vine6_cvine, vine6_dvine")
      ->required();
  st_cmd->add_option("--reps", stf.reps, "Replicates");
  st_cmd->add_option("--T", stf.T, "Observations per replicate")->check(CLI::PositiveNumber);
  st_cmd->add_option("--out", stf.out, "Output directory")->required();
  add_sampler_flags(st_cmd, stf.sampler);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*fit_cmd) return cmd_fit(ff);
    if (*sim_cmd) return cmd_simulate(sf);
    if (*fc_cmd) return cmd_forecast(ef);
    if (*st_cmd) return cmd_study(stf);
  } catch (const std::exception& e) {
    std::cerr << "dynvine: error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
