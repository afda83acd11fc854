#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dynvine/families.hpp"
#include "dynvine/latent_ar1.hpp"
#include "dynvine/rng.hpp"

namespace dynvine {

enum class SamplerKind { Dynamic, Static };

struct SamplerConfig {
  int R = 1100;      // stored iterations
  int k = 25;        // sweeps per stored iteration
  int burnin = 100;  // stored iterations discarded before summaries
  std::uint64_t seed = 1;
  FamilySet families = default_family_set();
  double adapt_target = 0.44;

  /// Throws std::invalid_argument unless R > burnin >= 0, k >= 1 and the
  /// family set is valid.
  void validate() const;
};

/// Random-walk proposal scale tuned by a Robbins-Monro recursion on its
/// logarithm: log_scale += (alpha - target) / (target (1 - target) (n + 10)).
struct AdaptiveScale {
  double log_scale = std::log(0.1);
  long long proposals = 0;
  long long accepted = 0;

  explicit AdaptiveScale(double scale = 0.1) : log_scale(std::log(scale)) {}
  double scale() const { return std::exp(log_scale); }
  void adapt(double accept_prob, double target);
  double acceptance_rate() const {
    return proposals ? static_cast<double>(accepted) / static_cast<double>(proposals) : 0.0;
  }
  friend bool operator==(const AdaptiveScale&, const AdaptiveScale&) = default;
};

/// Selects which hyperparameter moves run inside update_hyper_interweaved.
struct HyperUpdateMask {
  bool centered_mu = true;
  bool centered_phi = true;
  bool centered_sigma = true;
  bool noncentered_mu = true;
  bool noncentered_sigma = true;
  bool noncentered_phi = true;
};

struct DynamicChainState {
  StateTrajectory states;  // s_0..s_T
  Ar1Params params;
  FamilyId family;
  AdaptiveScale c_mu{0.1}, c_phi{0.3}, c_sigma{0.3};
  AdaptiveScale nc_mu{0.05}, nc_sigma{0.1}, nc_phi{0.3};
  Rng rng;
  long long sweeps = 0;
  double adapt_target = 0.44;
  long long ess_evaluations = 0;

  std::size_t T() const { return states.empty() ? 0 : states.size() - 1; }
};

struct StaticChainState {
  double s = 0.0;
  FamilyId family;
  AdaptiveScale scale{0.1};
  Rng rng;
  long long sweeps = 0;
  double adapt_target = 0.44;
};

/// Stored draws of one bivariate chain. Row r holds the family, the state
/// (s_0..s_T for the dynamic model, the scalar s for the static model), the
/// AR(1) hyperparameters (dynamic only) and optionally the pointwise
/// log-likelihood log c(u_t; tau_t) of the data the draw was generated on.
class BivariateDraws {
 public:
  BivariateDraws() = default;
  BivariateDraws(SamplerKind kind, std::size_t T, FamilySet families);

  SamplerKind kind() const { return kind_; }
  std::size_t T() const { return T_; }
  std::size_t size() const { return family_index_.size(); }
  const FamilySet& families() const { return families_; }
  std::size_t state_width() const { return kind_ == SamplerKind::Dynamic ? T_ + 1 : 1; }

  int family_index(std::size_t r) const { return family_index_[r]; }
  FamilyId family(std::size_t r) const { return families_[family_index_[r]]; }
  std::span<const double> state_row(std::size_t r) const {
    return {states_.data() + r * state_width(), state_width()};
  }
  /// Kendall's tau driving observation t (0-based) in draw r.
  double tau(std::size_t r, std::size_t t) const;
  Ar1Params params(std::size_t r) const { return {mu_[r], phi_[r], sigma_[r]}; }
  const std::vector<double>& mu() const { return mu_; }
  const std::vector<double>& phi() const { return phi_; }
  const std::vector<double>& sigma() const { return sigma_; }
  const std::vector<double>& states() const { return states_; }
  const std::vector<int>& family_indices() const { return family_index_; }

  bool has_loglik() const { return !loglik_.empty() || size() == 0; }
  std::span<const double> loglik_row(std::size_t r) const { return {loglik_.data() + r * T_, T_}; }
  const std::vector<double>& loglik() const { return loglik_; }
  void drop_loglik() { loglik_.clear(); loglik_.shrink_to_fit(); }
  /// Replaces the pointwise log-likelihood (size() x T values, row-major).
  void set_loglik(std::vector<double> loglik);

  void reserve(std::size_t R);
  void append(const DynamicChainState& chain, const PairData& data, bool with_loglik = true);
  void append(const StaticChainState& chain, const PairData& data, bool with_loglik = true);
  /// Appends a raw row; used when reading draws back from disk.
  void append_raw(int family_index, std::span<const double> state, Ar1Params params);

  friend bool operator==(const BivariateDraws&, const BivariateDraws&) = default;

 private:
  SamplerKind kind_ = SamplerKind::Static;
  std::size_t T_ = 0;
  FamilySet families_;
  std::vector<int> family_index_;
  std::vector<double> states_;
  std::vector<double> mu_, phi_, sigma_;
  std::vector<double> loglik_;
};

/// Normalizes log weights with max subtraction. Throws std::domain_error when
/// every weight is -inf or NaN.
std::vector<double> normalize_log_weights(std::span<const double> log_weights);

/// P(m | u, tau) over data.families() for a per-observation tau path (length T)
/// or a constant tau.
std::vector<double> family_full_conditional(const PairData& data, std::span<const double> tau);
std::vector<double> family_full_conditional(const PairData& data, double tau);

/// tau_t = tanh(s_t) for t = 1..T written to out[0..T-1].
void states_to_tau(std::span<const double> states, std::span<double> out);

/// Fisher's Z of a centered rolling-window (width 50) empirical Kendall's tau,
/// clamped to |tau| <= 0.95. Returns T values.
std::vector<double> rolling_fisher_z(std::span<const double> u1, std::span<const double> u2,
                                     std::size_t window = 50);

DynamicChainState init_dynamic_chain(const PairData& data, std::uint64_t seed,
                                     double adapt_target = 0.44);
StaticChainState init_static_chain(const PairData& data, std::uint64_t seed,
                                   double adapt_target = 0.44);

/// Sum over t of log c for the chain's current family and states.
double dynamic_loglik(const DynamicChainState& chain, const PairData& data);
double static_loglik(const StaticChainState& chain, const PairData& data);

// Individual Gibbs steps of the dynamic sampler.
void update_family(DynamicChainState& chain, const PairData& data);
void update_states_ess(DynamicChainState& chain, const PairData& data);
void update_hyper_interweaved(DynamicChainState& chain, const PairData& data,
                              const HyperUpdateMask& mask = {});

/// One sweep: family, then states by elliptical slice sampling, then the
/// interweaved hyperparameter moves.
void dynamic_sweep(DynamicChainState& chain, const PairData& data, const HyperUpdateMask& mask = {});
/// One sweep: family, then a random-walk move on s.
void static_sweep(StaticChainState& chain, const PairData& data);

/// Runs exactly k sweeps and appends the final state to out.
void resume_k_steps(DynamicChainState& chain, const PairData& data, int k, BivariateDraws& out,
                    bool with_loglik = true);
void resume_k_steps(StaticChainState& chain, const PairData& data, int k, BivariateDraws& out,
                    bool with_loglik = true);

/// R stored draws separated by k sweeps each. The chain overloads continue from
/// (and update) the given state; the others initialize from config.seed.
BivariateDraws run_dynamic_sampler(const PairData& data, const SamplerConfig& config);
BivariateDraws run_dynamic_sampler(const PairData& data, const SamplerConfig& config,
                                   DynamicChainState& chain);
BivariateDraws run_static_sampler(const PairData& data, const SamplerConfig& config);
BivariateDraws run_static_sampler(const PairData& data, const SamplerConfig& config,
                                  StaticChainState& chain);

}  // namespace dynvine
