#include "dynvine/study.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <numeric>
#include <stdexcept>

namespace dynvine {

using nlohmann::json;

namespace {

constexpr std::uint64_t kPathTag = 0x50415448;  // "PATH"
constexpr std::uint64_t kDataTag = 0x44415441;  // "DATA"
constexpr std::uint64_t kFitTag = 0x46495420;   // "FIT "

VinePath head(const VinePath& m, std::size_t T) {
  VinePath out = m;
  for (auto& tree : out.edges)
    for (PairPath& p : tree)
      if (p.tau.size() > 1) {
        if (p.tau.size() < T) throw std::invalid_argument("study: tau path shorter than the data");
        p.tau.resize(T);
      }
  return out;
}

FamilyId selected_family(const EdgeFit& e, std::size_t burnin) {
  return e.type == DependenceType::Zero ? FamilyId::independence() : family_mode(e.draws, burnin);
}

json count_table(const std::map<std::string, int>& counts) {
  json j = json::object();
  for (const auto& [k, v] : counts) j[k] = v;
  return j;
}

}  // namespace

const std::vector<std::string>& study_scenarios() {
  static const std::vector<std::string> names = {"biv1",        "biv2",           "biv3",        "biv4",       "biv5",
                                                 "vine6_known", "vine6_selected", "vine6_cvine", "vine6_dvine"};
  return names;
}

bool is_bivariate_scenario(const std::string& name) { return name.rfind("biv", 0) == 0; }

GenerativeSpec bivariate_scenario(const std::string& name) {
  GenerativeSpec spec;
  spec.structure = RVineStructure(2);
  spec.structure.add_tree({VineEdge{1, 1, 2, {}, 1, 2}});
  EdgeSpec e;
  if (name == "biv1") {
    e = {DependenceType::Dynamic, FamilyId::gaussian(), {0.4, 0.95, 0.1}, 0.0, {}};
  } else if (name == "biv2") {
    e = {DependenceType::Dynamic, FamilyId::eclayton(), {0.4, 0.8, 0.2}, 0.0, {}};
  } else if (name == "biv3") {
    e = {DependenceType::Static, FamilyId::student_t(4), {}, 1.0, {}};
  } else if (name == "biv4") {
    e = {DependenceType::Static, FamilyId::egumbel(), {}, 0.4, {}};
  } else if (name == "biv5") {
    e = {DependenceType::Zero, FamilyId::independence(), {}, 0.0, {}};
  } else {
    throw std::invalid_argument("unknown bivariate scenario '" + name + "'");
  }
  spec.edges = {{e}};
  return spec;
}

BivariateRep run_bivariate_rep(const GenerativeSpec& scenario, std::size_t T, const SamplerConfig& sampler,
                               std::uint64_t seed, int rep) {
  Rng rng(derive_seed(seed, {kDataTag, static_cast<std::uint64_t>(rep)}));
  const DataMatrix U = simulate(scenario, T, 1, rng).front();
  FitConfig cfg;
  cfg.sampler = sampler;
  cfg.sampler.seed = derive_seed(seed, {kFitTag, static_cast<std::uint64_t>(rep)});
  cfg.threads = 1;
  const VineFitResult f = fit(U, cfg);
  const EdgeFit& e = f.edge(1, 0);
  return {e.type, selected_family(e, static_cast<std::size_t>(sampler.burnin))};
}

VinePath vine_study_truth(std::uint64_t seed, std::size_t T) {
  Rng rng(derive_seed(seed, {kPathTag}));
  return six_dim_example_spec().realize(T, rng);
}

DataMatrix vine_study_data(const VinePath& truth, std::uint64_t seed, int rep, std::size_t T) {
  Rng rng(derive_seed(seed, {kDataTag, static_cast<std::uint64_t>(rep)}));
  return simulate(head(truth, T), T, 1, rng).front();
}

FitConfig vine_study_config(const std::string& scenario, const FitConfig& base, std::uint64_t seed, int rep) {
  FitConfig cfg = base;
  cfg.sampler.seed = derive_seed(seed, {kFitTag, static_cast<std::uint64_t>(rep)});
  if (scenario == "vine6_known") {
    cfg.fixed_structure = six_dim_example_structure();
  } else if (scenario == "vine6_selected") {
    cfg.structure_class = StructureClass::General;
  } else if (scenario == "vine6_cvine") {
    cfg.structure_class = StructureClass::CVine;
  } else if (scenario == "vine6_dvine") {
    cfg.structure_class = StructureClass::DVine;
  } else {
    throw std::invalid_argument("unknown vine scenario '" + scenario + "'");
  }
  return cfg;
}

VineRep run_vine_rep(const VinePath& truth, const DataMatrix& U, const FitConfig& cfg) {
  VineRep r;
  r.fit = fit(U, cfg);
  r.loglik_fit = loglik_at_point_estimates(r.fit, U);
  const std::vector<double> ll = vine_log_density(head(truth, U.rows()), U);
  r.loglik_true = std::accumulate(ll.begin(), ll.end(), 0.0);
  return r;
}

std::vector<std::vector<bool>> family_hits(const VineFitResult& fit, const GenerativeSpec& truth, int max_level) {
  if (!(fit.structure == truth.structure)) throw std::invalid_argument("family_hits: structures differ");
  const auto burnin = static_cast<std::size_t>(fit.config.sampler.burnin);
  std::vector<std::vector<bool>> hits;
  for (int l = 1; l <= std::min(max_level, truth.structure.levels()); ++l) {
    hits.emplace_back();
    for (std::size_t i = 0; i < truth.edges[l - 1].size(); ++i) {
      const EdgeSpec& t = truth.edges[l - 1][i];
      const FamilyId want = t.type == DependenceType::Zero ? FamilyId::independence() : t.family;
      hits.back().push_back(selected_family(fit.edge(l, i), burnin) == want);
    }
  }
  return hits;
}

json run_study(const std::string& scenario, const StudyOptions& opt) {
  if (std::find(study_scenarios().begin(), study_scenarios().end(), scenario) == study_scenarios().end())
    throw std::invalid_argument("unknown scenario '" + scenario + "'");
  if (opt.reps < 1) throw std::invalid_argument("study: reps must be at least 1");
  const auto t0 = std::chrono::steady_clock::now();
  SamplerConfig sampler = opt.sampler;
  const bool bivariate = is_bivariate_scenario(scenario);
  if (!opt.families_set) sampler.families = bivariate ? default_family_set() : extended_family_set();
  sampler.validate();

  json out = {{"scenario", scenario},
              {"reps", opt.reps},
              {"seed", opt.seed},
              {"T", opt.T},
              {"R", sampler.R},
              {"k", sampler.k},
              {"burnin", sampler.burnin},
              {"families", format_family_list(sampler.families)}};

  if (bivariate) {
    const GenerativeSpec spec = bivariate_scenario(scenario);
    const EdgeSpec& truth = spec.edges[0][0];
    std::map<std::string, int> fam, type;
    for (FamilyId f : sampler.families) fam[f.name()] = 0;
    for (auto t : {DependenceType::Zero, DependenceType::Static, DependenceType::Dynamic}) type[to_string(t)] = 0;
    int good_family = 0, good_type = 0;
    json per_rep = json::array();
    for (int rep = 0; rep < opt.reps; ++rep) {
      const BivariateRep r = run_bivariate_rep(spec, opt.T, sampler, opt.seed, rep);
      ++fam[r.family.name()];
      ++type[to_string(r.type)];
      if (r.family == truth.family) ++good_family;
      if (r.type == truth.type) ++good_type;
      per_rep.push_back({{"rep", rep}, {"type", to_string(r.type)}, {"family", r.family.name()}});
    }
    out["true_family"] = truth.family.name();
    out["true_type"] = to_string(truth.type);
    out["family_counts"] = count_table(fam);
    out["type_counts"] = count_table(type);
    out["correct_family"] = good_family;
    out["correct_type"] = good_type;
    out["per_rep"] = per_rep;
  } else {
    const VinePath truth = vine_study_truth(opt.seed, opt.T);
    const GenerativeSpec spec = six_dim_example_spec();
    FitConfig base;
    base.sampler = sampler;
    base.threads = opt.threads;
    const bool known = scenario == "vine6_known";
    std::vector<std::vector<std::map<std::string, int>>> fam(spec.edges.size()), type(spec.edges.size());
    for (std::size_t l = 0; l < spec.edges.size(); ++l) {
      fam[l].resize(spec.edges[l].size());
      type[l].resize(spec.edges[l].size());
    }
    json per_rep = json::array();
    std::vector<double> ratios;
    for (int rep = 0; rep < opt.reps; ++rep) {
      const DataMatrix U = vine_study_data(truth, opt.seed, rep, opt.T);
      const VineRep r = run_vine_rep(truth, U, vine_study_config(scenario, base, opt.seed, rep));
      ratios.push_back(r.ratio());
      json row = {{"rep", rep},
                  {"loglik_fit", r.loglik_fit},
                  {"loglik_true", r.loglik_true},
                  {"ratio", r.ratio()},
                  {"structure", format_matrix(r.fit.structure)}};
      if (known) {
        const auto burnin = static_cast<std::size_t>(sampler.burnin);
        for (std::size_t l = 0; l < spec.edges.size(); ++l)
          for (std::size_t i = 0; i < spec.edges[l].size(); ++i) {
            const EdgeFit& e = r.fit.edges[l][i];
            ++fam[l][i][selected_family(e, burnin).name()];
            ++type[l][i][to_string(e.type)];
          }
      }
      per_rep.push_back(std::move(row));
    }
    out["per_rep"] = per_rep;
    out["mean_loglik_ratio"] = std::accumulate(ratios.begin(), ratios.end(), 0.0) / ratios.size();
    if (known) {
      json edges = json::array();
      for (std::size_t l = 0; l < spec.edges.size(); ++l)
        for (std::size_t i = 0; i < spec.edges[l].size(); ++i) {
          const EdgeSpec& t = spec.edges[l][i];
          edges.push_back({{"edge", spec.structure.edge(static_cast<int>(l + 1), i).label()},
                           {"true_family", t.type == DependenceType::Zero ? "indep" : t.family.name()},
                           {"true_type", to_string(t.type)},
                           {"family_counts", count_table(fam[l][i])},
                           {"type_counts", count_table(type[l][i])}});
        }
      out["edges"] = edges;
    }
  }
  out["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace dynvine
