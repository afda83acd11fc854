#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "dynvine/sequential_fit.hpp"
#include "dynvine/simulate_forecast.hpp"

namespace dynvine {

/// Names accepted by run_study.
const std::vector<std::string>& study_scenarios();
bool is_bivariate_scenario(const std::string& name);

/// Generating law of the bivariate scenarios biv1..biv5.
GenerativeSpec bivariate_scenario(const std::string& name);

struct BivariateRep {
  DependenceType type = DependenceType::Zero;
  FamilyId family;  // family mode of the selected model; independence for Zero
};

/// One replicate: simulate T observations, fit both samplers, select.
BivariateRep run_bivariate_rep(const GenerativeSpec& scenario, std::size_t T, const SamplerConfig& sampler,
                               std::uint64_t seed, int rep);

/// The six-dimensional study keeps one tau trajectory per edge fixed across
/// replicates; only the copula data are redrawn.
VinePath vine_study_truth(std::uint64_t seed, std::size_t T);
DataMatrix vine_study_data(const VinePath& truth, std::uint64_t seed, int rep, std::size_t T);
/// Fit settings of vine6_known / vine6_selected / vine6_cvine / vine6_dvine.
FitConfig vine_study_config(const std::string& scenario, const FitConfig& base, std::uint64_t seed, int rep);

struct VineRep {
  VineFitResult fit;
  double loglik_fit = 0.0;
  double loglik_true = 0.0;
  double ratio() const { return loglik_fit / loglik_true; }
};
VineRep run_vine_rep(const VinePath& truth, const DataMatrix& U, const FitConfig& cfg);

/// For each edge of `truth` in trees up to max_level, whether the fit (with
/// the same structure) found its family; zero edges count as independence.
std::vector<std::vector<bool>> family_hits(const VineFitResult& fit, const GenerativeSpec& truth, int max_level);

struct StudyOptions {
  int reps = 10;
  std::uint64_t seed = 1;
  std::size_t T = 1000;
  /// Sampler settings; families default to the scenario's candidate set when
  /// `families_set` is false.
  SamplerConfig sampler;
  bool families_set = false;
  unsigned threads = 0;
};

/// Runs a scenario and returns its tables: selection counts per family and
/// dependence type (bivariate), or log-likelihood ratios and per-edge
/// selection counts (vine). Deterministic given the options, apart from the
/// "seconds" entry.
nlohmann::json run_study(const std::string& scenario, const StudyOptions& options);

}  // namespace dynvine
