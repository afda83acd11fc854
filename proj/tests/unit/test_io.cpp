#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "dynvine/io.hpp"
#include "dynvine/study.hpp"

using namespace dynvine;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dynvine_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

VineFitResult small_fit(const DataMatrix& U, bool keep_loglik) {
  FitConfig cfg;
  cfg.sampler.R = 20;
  cfg.sampler.k = 1;
  cfg.sampler.burnin = 5;
  cfg.threads = 1;
  cfg.keep_loglik = keep_loglik;
  return fit(U, cfg);
}

}  // namespace

TEST_CASE("CSV reading and writing") {
  std::istringstream ok("0.1, 0.2,0.3\n\n4e-1,0.5,0.6\r\n");
  const DataMatrix m = parse_csv(ok);
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m(1, 0) == 0.4);

  std::istringstream ragged("0.1,0.2\n0.3\n");
  CHECK_THROWS_WITH_AS(parse_csv(ragged, "x.csv"), "x.csv: line 2 has 1 fields, expected 2", FormatError);
  std::istringstream text("0.1,0.2\n0.3,0.4\n0.5,oops\n");
  CHECK_THROWS_WITH_AS(parse_csv(text, "x.csv"), "x.csv: line 3, field 2: 'oops' is not a number", FormatError);
  std::istringstream empty_field("0.1,,0.2\n");
  CHECK_THROWS_AS(parse_csv(empty_field), FormatError);
  std::istringstream nothing("\n\n");
  CHECK_THROWS_AS(parse_csv(nothing), FormatError);

  Rng rng(1);
  DataMatrix r(50, 4);
  for (double& x : r.data()) x = rng.uniform_open();
  r(3, 2) = 1e-300;
  std::stringstream ss;
  write_csv(ss, r);
  CHECK(parse_csv(ss) == r);
}

TEST_CASE("structure and spec serialization") {
  const RVineStructure s = six_dim_example_structure();
  CHECK(structure_from_json(structure_to_json(s)) == s);
  nlohmann::json broken = structure_to_json(s);
  broken["trees"][1][0]["a"] = 99;
  CHECK_THROWS_AS(structure_from_json(broken), FormatError);

  const GenerativeSpec spec = six_dim_example_spec();
  CHECK(read_spec(DYNVINE_FIXTURE_DIR "/six_dim_dynamic_vine.json") == spec);
  CHECK(spec_from_json(spec_to_json(spec)) == spec);

  nlohmann::json bad = spec_to_json(spec);
  bad["mu"][3] = {0.0};
  CHECK_THROWS_WITH_AS(spec_from_json(bad), "spec: row 4 of 'mu' must have 3 entries", FormatError);
  bad = spec_to_json(spec);
  bad["family"][5][0] = "frank";
  CHECK_THROWS_AS(spec_from_json(bad), FormatError);
}

TEST_CASE("fit configuration files") {
  const nlohmann::json j = {{"R", 50},         {"k", 3},          {"burnin", 7},        {"seed", 99},
                            {"families", "indep,gaussian"}, {"structure_class", "dvine"}, {"truncate", 2},
                            {"se_mult", 1.5},  {"static_only", true}, {"edge_order_seed", 4}};
  const FitConfig c = fit_config_from_json(j);
  CHECK(c.sampler.R == 50);
  CHECK(c.sampler.k == 3);
  CHECK(c.sampler.burnin == 7);
  CHECK(c.sampler.seed == 99);
  CHECK(c.sampler.families == FamilySet{FamilyId::independence(), FamilyId::gaussian()});
  CHECK(c.structure_class == StructureClass::DVine);
  CHECK(*c.truncation_level == 2);
  CHECK(c.se_multiplier == 1.5);
  CHECK(!c.allow_dynamic);
  CHECK(*c.edge_order_seed == 4);
  const FitConfig back = fit_config_from_json(fit_config_to_json(c));
  CHECK(fit_config_to_json(back) == fit_config_to_json(c));
  CHECK_THROWS_WITH_AS(fit_config_from_json({{"R", 5}, {"sweeps", 2}}), "config: unknown key 'sweeps'", FormatError);
  CHECK_THROWS_AS(fit_config_from_json({{"families", "indep,frank"}}), FormatError);
}

TEST_CASE("draw files round trip") {
  Rng rng(2);
  const GenerativeSpec spec = six_dim_example_spec();
  const DataMatrix U = simulate(spec, 120, 1, rng).front();
  const fs::path dir = scratch("draws");
  for (bool ll : {false, true}) {
    const VineFitResult f = small_fit(U, ll);
    int written = 0;
    for (const auto& tree : f.edges)
      for (const EdgeFit& e : tree) {
        if (e.type == DependenceType::Zero) continue;
        const fs::path p = dir / ("e" + std::to_string(written++) + ".bin");
        write_draws(p, e);
        const BivariateDraws back = read_draws(p);
        CHECK(back == e.draws);
        CHECK(back.has_loglik() == ll);
      }
    CHECK(written > 0);
  }
  // truncated binary is rejected
  const fs::path p = dir / "e0.bin";
  const std::string bytes = slurp(p);
  std::ofstream(p, std::ios::binary) << bytes.substr(0, bytes.size() - 8);
  CHECK_THROWS_AS(read_draws(p), FormatError);
}

TEST_CASE("fit directories round trip") {
  Rng rng(3);
  const DataMatrix U = simulate(six_dim_example_spec(), 100, 1, rng).front();
  const VineFitResult f = small_fit(U, false);
  const fs::path a = scratch("fit_a"), b = scratch("fit_b");
  write_fit_dir(a, f, U);
  const LoadedFit back = read_fit_dir(a);
  CHECK(back.train == U);
  CHECK(back.fit.structure == f.structure);
  CHECK(back.fit.T == f.T);
  CHECK(fit_config_to_json(back.fit.config) == fit_config_to_json(f.config));
  for (std::size_t l = 0; l < f.edges.size(); ++l)
    for (std::size_t i = 0; i < f.edges[l].size(); ++i) {
      const EdgeFit &x = f.edges[l][i], &y = back.fit.edges[l][i];
      CHECK(x.type == y.type);
      CHECK(x.seed == y.seed);
      CHECK(x.draws == y.draws);
      CHECK(x.waic_stat->total == y.waic_stat->total);
    }
  CHECK(loglik_at_point_estimates(back.fit, U) == loglik_at_point_estimates(f, U));

  // same seed, separate run: identical draw files
  write_fit_dir(b, small_fit(U, false), U);
  for (const auto& entry : fs::directory_iterator(a / "draws"))
    if (entry.path().extension() == ".bin")
      CHECK(slurp(entry.path()) == slurp(b / "draws" / entry.path().filename()));
}

TEST_CASE("study scenarios") {
  StudyOptions opt;
  opt.reps = 2;
  opt.T = 150;
  opt.sampler.R = 20;
  opt.sampler.k = 1;
  opt.sampler.burnin = 5;
  opt.threads = 1;
  nlohmann::json a = run_study("biv5", opt), b = run_study("biv5", opt);
  a.erase("seconds");
  b.erase("seconds");
  CHECK(a == b);
  CHECK(a["type_counts"]["zero"].get<int>() + a["type_counts"]["static"].get<int>() +
            a["type_counts"]["dynamic"].get<int>() == 2);
  CHECK(a.contains("correct_family"));

  opt.reps = 1;
  const nlohmann::json v = run_study("vine6_known", opt);
  CHECK(v["edges"].size() == 15);
  CHECK(v["per_rep"][0]["ratio"].get<double>() > 0.0);

  CHECK_THROWS_AS(run_study("biv9", opt), std::invalid_argument);
  opt.reps = 0;
  CHECK_THROWS_AS(run_study("biv1", opt), std::invalid_argument);

  CHECK(bivariate_scenario("biv1").edges[0][0].params == Ar1Params{0.4, 0.95, 0.1});
  CHECK(bivariate_scenario("biv2").edges[0][0].family == FamilyId::eclayton());
  CHECK(bivariate_scenario("biv3").edges[0][0].s == 1.0);
  CHECK(bivariate_scenario("biv4").edges[0][0].family == FamilyId::egumbel());
}
