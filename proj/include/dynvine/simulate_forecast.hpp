#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dynvine/latent_ar1.hpp"
#include "dynvine/matrix.hpp"
#include "dynvine/model_selection.hpp"
#include "dynvine/rng.hpp"
#include "dynvine/sequential_fit.hpp"
#include "dynvine/vine_model.hpp"

namespace dynvine {

/// Generating law of one pair copula. Dynamic edges follow the AR(1) with
/// `params`; static edges use tau = tanh(s); a non-empty `tau_path` overrides
/// both with a fixed trajectory.
struct EdgeSpec {
  DependenceType type = DependenceType::Zero;
  FamilyId family = FamilyId::independence();
  Ar1Params params{0.0, 0.0, 1.0};
  double s = 0.0;
  std::vector<double> tau_path;

  friend bool operator==(const EdgeSpec&, const EdgeSpec&) = default;
};

struct GenerativeSpec {
  RVineStructure structure;
  std::vector<std::vector<EdgeSpec>> edges;  // [level - 1][edge index]

  /// Draws one tau trajectory of length T per edge (s_1..s_T of a stationary
  /// AR(1) path for dynamic edges).
  VinePath realize(std::size_t T, Rng& rng) const;
  void check() const;

  friend bool operator==(const GenerativeSpec&, const GenerativeSpec&) = default;
};

/// Lower-triangular parameter matrices (d x d, row-major) laid out like a
/// structure matrix: entry (i, j), i > j, describes the edge between M[j][j]
/// and M[i][j], so the last row holds tree 1. Families are names accepted by
/// FamilyId::parse. Independence gives a zero edge, phi = sigma = 0 a static
/// edge with s = mu, anything else a dynamic edge.
struct SpecMatrices {
  int d = 0;
  std::vector<int> structure;
  std::vector<std::string> family;
  std::vector<double> mu, phi, sigma;

  friend bool operator==(const SpecMatrices&, const SpecMatrices&) = default;
};
GenerativeSpec spec_from_matrices(const SpecMatrices& m);
/// Inverse of spec_from_matrices in the to_matrix layout. Fixed tau paths are
/// not representable and raise std::invalid_argument.
SpecMatrices spec_to_matrices(const GenerativeSpec& spec);

/// The six-dimensional dynamic vine of the simulation study.
GenerativeSpec six_dim_example_spec();

/// Precompiled inverse-Rosenblatt sampler for a structure.
class RosenblattPlan {
 public:
  explicit RosenblattPlan(const RVineStructure& s);

  /// Maps independent uniforms w (one per variable, in sampling order) to a
  /// draw of the vine; thetas[level - 1][edge] are native parameters.
  void apply(const std::vector<std::vector<CopulaParam>>& thetas, std::span<const double> w,
             std::span<double> u) const;
  /// Variables in the order they are sampled (1-based labels).
  const std::vector<int>& order() const { return order_; }

 private:
  struct Op {
    enum Kind { Inverse, Forward } kind;
    int level, index;
    bool first_is_a;  // the output variable is the edge's a
    int out, in_main, in_other;
  };
  int d_ = 0;
  std::vector<int> order_;
  std::vector<int> uniform_slot_;  // slot fed by w[k]
  std::vector<int> result_slot_;   // slot holding u of variable v (index v - 1)
  std::vector<Op> ops_;
  int n_slots_ = 0;
};

/// n_reps draws of a T x d copula sample with fixed tau paths.
std::vector<DataMatrix> simulate(const VinePath& model, std::size_t T, std::size_t n_reps, Rng& rng);
/// Same, drawing fresh tau paths from the spec for every replicate.
std::vector<DataMatrix> simulate(const GenerativeSpec& spec, std::size_t T, std::size_t n_reps, Rng& rng);

/// Per-t empirical Kendall's tau of variables i and j (1-based) across replicates.
std::vector<double> cross_sectional_tau(const std::vector<DataMatrix>& samples, int i, int j);

/// How dynamic states are carried forward during forecasting.
///  - Filter: exact forward filtering of the state on a fine grid, with the
///    family and AR(1) hyperparameters frozen. Deterministic.
///  - Ess: `update_sweeps` elliptical slice sweeps over the whole state path
///    per step, started from the fitted per-t modes.
enum class StateUpdate { Filter, Ess };
std::string to_string(StateUpdate u);
StateUpdate parse_state_update(std::string_view name);

struct ForecastConfig {
  StateUpdate update = StateUpdate::Filter;
  int update_sweeps = 10;  // Ess only
  std::uint64_t seed = 1;  // Ess only
};

struct PlpsResult {
  std::vector<double> per_step;    // copula log score of each new row
  std::vector<double> cumulative;  // running sum of per_step
  std::vector<std::vector<std::vector<double>>> per_edge;  // [level - 1][edge][step]
};

/// One-step-ahead copula log predictive scores of the rows of `test`, which
/// follow the rows of `train` (the data the fit was computed on). Families and
/// static parameters are frozen at posterior modes. Each dynamic edge predicts
/// with the mode of its state's one-step predictive distribution given all
/// earlier rows, hyperparameters frozen at their posterior modes.
PlpsResult copula_plps(const VineFitResult& fit, const DataMatrix& train, const DataMatrix& test,
                       const ForecastConfig& config = {});

}  // namespace dynvine
