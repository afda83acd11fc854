#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dynvine/bivariate_samplers.hpp"
#include "dynvine/matrix.hpp"
#include "dynvine/model_selection.hpp"
#include "dynvine/vine_model.hpp"
#include "dynvine/vine_structure.hpp"

namespace dynvine {

struct FitConfig {
  SamplerConfig sampler;
  StructureClass structure_class = StructureClass::General;
  std::optional<int> truncation_level;
  double se_multiplier = 2.0;
  bool parallel_edges = true;
  /// Worker cap; 0 means default_thread_count().
  unsigned threads = 0;
  /// false restricts every edge to the static or zero type.
  bool allow_dynamic = true;
  /// Use this structure instead of selecting one.
  std::optional<RVineStructure> fixed_structure;
  /// When set, edges of a tree are processed in an order shuffled with this seed.
  std::optional<std::uint64_t> edge_order_seed;
  /// Keep the pointwise log-likelihood rows of the selected draws.
  bool keep_loglik = false;

  void validate(int d) const;
};

/// Default worker count: DYNVINE_THREADS if set, else the hardware concurrency.
unsigned default_thread_count();

/// Pseudo-observations of one node: rows x T values, row-major. A single row
/// stands for data that is identical across draws.
struct PseudoSeries {
  std::size_t rows = 0;
  std::size_t T = 0;
  std::vector<double> values;

  static PseudoSeries constant(std::span<const double> u);
  std::span<const double> row(std::size_t r) const {
    return {values.data() + (rows == 1 ? 0 : r) * T, T};
  }
  double at(std::size_t r, std::size_t t) const { return row(r)[t]; }
  friend bool operator==(const PseudoSeries&, const PseudoSeries&) = default;
};

struct EdgeFit {
  VineEdge edge;
  DependenceType type = DependenceType::Zero;
  /// Draws of the selected model; empty for Zero.
  BivariateDraws draws;
  std::optional<WaicResult> waic_dyn;
  std::optional<WaicResult> waic_stat;
  std::uint64_t seed = 0;
  long long sweeps_dynamic = 0;
  long long sweeps_static = 0;
  double seconds = 0.0;
};

struct VineFitResult {
  RVineStructure structure;
  std::vector<std::vector<EdgeFit>> edges;  // [level - 1][edge index]
  FitConfig config;
  std::size_t T = 0;
  std::vector<double> tree_seconds;
  std::vector<std::string> warnings;

  const EdgeFit& edge(int level, std::size_t i) const { return edges.at(level - 1).at(i); }
};

/// Seed of an edge's sampler pair, a hash of the master seed, the tree level
/// and the edge's conditioned/conditioning sets.
std::uint64_t edge_seed(std::uint64_t master, const VineEdge& e);

/// Tree-by-tree estimation on copula data U (T x d).
VineFitResult fit(const DataMatrix& U, const FitConfig& config);
/// Same, starting from R copula data sets; every tree uses the burst pattern.
VineFitResult fit_from_pseudo_collection(std::span<const DataMatrix> U, const FitConfig& config);

/// Next-tree pseudo-observations (u_{a|b}, u_{b|a}) of an edge, one row per
/// stored draw. Zero edges pass their inputs through.
std::pair<PseudoSeries, PseudoSeries> propagate_pseudo(const EdgeFit& fit, const PseudoSeries& ua,
                                                       const PseudoSeries& ub);

/// Mode of a Gaussian kernel density estimate (Silverman bandwidth) over a
/// `grid`-point midpoint grid on [lo, hi]. Identical values return that value.
double kde_mode(std::span<const double> values, double lo = 0.0, double hi = 1.0, int grid = 512);

/// Per-t kde_mode over rows r >= burnin.
std::vector<double> posterior_mode_pseudo(const PseudoSeries& u, std::size_t burnin);

/// Marginal posterior-mode model: most frequent family, per-t mode of tau for
/// dynamic edges and the mode of tau for static edges.
VinePath point_estimates(const VineFitResult& fit);
/// Most frequent family among draws r >= burnin (ties go to the lower index).
FamilyId family_mode(const BivariateDraws& draws, std::size_t burnin);

double loglik_at_point_estimates(const VineFitResult& fit, const DataMatrix& U);

}  // namespace dynvine
