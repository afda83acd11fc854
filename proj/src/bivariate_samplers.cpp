#include "dynvine/bivariate_samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include "dynvine/kendall.hpp"

namespace dynvine {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kInitTauBound = 0.95;

// log(0.5 (1 - tanh^2 s)), the prior of s implied by a uniform tau.
double log_static_prior(double s) {
  const double a = std::abs(s);
  return std::numbers::ln2 - 2.0 * a - 2.0 * std::log1p(std::exp(-2.0 * a));
}

bool mh_accept(AdaptiveScale& scale, double log_ratio, Rng& rng, double target) {
  double alpha = 0.0;
  if (log_ratio >= 0.0)
    alpha = 1.0;
  else if (log_ratio > kNegInf)  // NaN compares false and leaves alpha = 0
    alpha = std::exp(log_ratio);
  const bool accept = rng.uniform() < alpha;
  scale.adapt(alpha, target);
  if (accept) ++scale.accepted;
  return accept;
}

std::size_t sample_index(std::span<const double> probs, Rng& rng) {
  const double u = rng.uniform();
  double c = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    c += probs[i];
    if (u < c) return i;
  }
  // rounding left u above the total; fall back to the last positive entry
  for (std::size_t i = probs.size(); i-- > 0;)
    if (probs[i] > 0.0) return i;
  return probs.size() - 1;
}

std::size_t family_position(const PairData& data, FamilyId f) {
  const int i = data.index_of(f);
  if (i < 0) throw std::invalid_argument("chain family '" + f.name() + "' is not in the data's family set");
  return static_cast<std::size_t>(i);
}

void check_chain_data(const DynamicChainState& chain, const PairData& data) {
  if (chain.states.size() != data.size() + 1)
    throw std::invalid_argument("dynamic chain has " + std::to_string(chain.T()) +
                                " states but the data has " + std::to_string(data.size()) + " rows");
}

// Per-thread scratch buffers for the dynamic sweep.
struct Scratch {
  std::vector<double> tau, nu, prop, z;
  void resize(std::size_t T) {
    tau.resize(T);
    nu.resize(T + 1);
    prop.resize(T + 1);
    z.resize(T + 1);
  }
};

Scratch& scratch(std::size_t T) {
  thread_local Scratch s;
  s.resize(T);
  return s;
}

double loglik_states(const PairData& data, std::size_t fi, std::span<const double> states,
                     std::vector<double>& tau) {
  if (data.families()[fi].kind == FamilyKind::Independence) return 0.0;
  states_to_tau(states, tau);
  const double l = data.sum_log_density(fi, tau);
  return std::isnan(l) ? kNegInf : l;
}

// Family step; returns the log-likelihood of the selected family.
double family_step(DynamicChainState& chain, const PairData& data, Scratch& w) {
  const std::size_t M = data.families().size();
  if (M == 1) {
    chain.family = data.families()[0];
    return loglik_states(data, 0, chain.states, w.tau);
  }
  states_to_tau(chain.states, w.tau);
  std::vector<double> ll(M);
  for (std::size_t m = 0; m < M; ++m) {
    const double l = data.families()[m].kind == FamilyKind::Independence ? 0.0
                                                                           : data.sum_log_density(m, w.tau);
    ll[m] = std::isnan(l) ? kNegInf : l;
  }
  const std::vector<double> p = normalize_log_weights(ll);
  const std::size_t pick = sample_index(p, chain.rng);
  chain.family = data.families()[pick];
  return ll[pick];
}

double ess_step(DynamicChainState& chain, const PairData& data, std::size_t fi, double loglik,
                Scratch& w) {
  const std::size_t n = chain.states.size();
  const Ar1Params centered{0.0, chain.params.phi, chain.params.sigma};
  sample_prior_trajectory(centered, w.nu, chain.rng);
  const double log_y = loglik + std::log(chain.rng.uniform_open());
  double theta = 2.0 * std::numbers::pi * chain.rng.uniform();
  double lo = theta - 2.0 * std::numbers::pi, hi = theta;
  const double mu = chain.params.mu;
  for (int it = 0; it < 10000; ++it) {
    const double c = std::cos(theta), s = std::sin(theta);
    for (std::size_t t = 0; t < n; ++t) w.prop[t] = mu + (chain.states[t] - mu) * c + w.nu[t] * s;
    const double l = loglik_states(data, fi, w.prop, w.tau);
    ++chain.ess_evaluations;
    if (l > log_y) {
      std::copy(w.prop.begin(), w.prop.end(), chain.states.begin());
      return l;
    }
    if (theta < 0.0)
      lo = theta;
    else
      hi = theta;
    theta = lo + (hi - lo) * chain.rng.uniform();
    if (hi - lo < 1e-300) break;
  }
  return loglik;  // bracket collapsed onto the current state
}

double hyper_step(DynamicChainState& chain, const PairData& data, std::size_t fi, double loglik,
                  const HyperUpdateMask& mask, Scratch& w) {
  Rng& rng = chain.rng;
  const double target = chain.adapt_target;
  Ar1Params& p = chain.params;

  // centered parameterization: states fixed, only the AR(1) prior changes
  if (mask.centered_mu || mask.centered_phi || mask.centered_sigma) {
    const Ar1SuffStats st = Ar1SuffStats::from(chain.states);
    double cur = st.log_density(p);
    if (mask.centered_mu) {
      Ar1Params q = p;
      q.mu = p.mu + chain.c_mu.scale() * rng.normal();
      const double prop = st.log_density(q);
      if (mh_accept(chain.c_mu, prop + log_prior_mu(q.mu) - cur - log_prior_mu(p.mu), rng, target)) {
        p = q;
        cur = prop;
      }
    }
    if (mask.centered_phi) {
      Ar1Params q = p;
      const double eta = std::atanh(p.phi);
      const double eta_q = eta + chain.c_phi.scale() * rng.normal();
      q.phi = std::tanh(eta_q);
      const double prop = std::abs(q.phi) < 1.0 ? st.log_density(q) : kNegInf;
      if (mh_accept(chain.c_phi,
                    prop + log_prior_atanh_phi(eta_q) - cur - log_prior_atanh_phi(eta), rng, target)) {
        p = q;
        cur = prop;
      }
    }
    if (mask.centered_sigma) {
      Ar1Params q = p;
      const double ell = std::log(p.sigma);
      const double ell_q = ell + chain.c_sigma.scale() * rng.normal();
      q.sigma = std::exp(ell_q);
      const double prop = q.sigma > 0.0 ? st.log_density(q) : kNegInf;
      if (mh_accept(chain.c_sigma,
                    prop + log_prior_log_sigma(ell_q) - cur - log_prior_log_sigma(ell), rng, target)) {
        p = q;
        cur = prop;
      }
    }
  }

  // non-centered parameterization: z = (s - mu) / sigma fixed
  if (mask.noncentered_mu || mask.noncentered_sigma || mask.noncentered_phi) {
    const std::size_t n = chain.states.size();
    for (std::size_t t = 0; t < n; ++t) w.z[t] = (chain.states[t] - p.mu) / p.sigma;
    if (mask.noncentered_mu) {
      const double mu_q = p.mu + chain.nc_mu.scale() * rng.normal();
      for (std::size_t t = 0; t < n; ++t) w.prop[t] = mu_q + p.sigma * w.z[t];
      const double l = loglik_states(data, fi, w.prop, w.tau);
      if (mh_accept(chain.nc_mu, l - loglik + log_prior_mu(mu_q) - log_prior_mu(p.mu), rng, target)) {
        p.mu = mu_q;
        loglik = l;
        std::copy(w.prop.begin(), w.prop.end(), chain.states.begin());
      }
    }
    if (mask.noncentered_sigma) {
      const double ell = std::log(p.sigma);
      const double ell_q = ell + chain.nc_sigma.scale() * rng.normal();
      const double sigma_q = std::exp(ell_q);
      for (std::size_t t = 0; t < n; ++t) w.prop[t] = p.mu + sigma_q * w.z[t];
      const double l = sigma_q > 0.0 ? loglik_states(data, fi, w.prop, w.tau) : kNegInf;
      if (mh_accept(chain.nc_sigma,
                    l - loglik + log_prior_log_sigma(ell_q) - log_prior_log_sigma(ell), rng, target)) {
        p.sigma = sigma_q;
        loglik = l;
        std::copy(w.prop.begin(), w.prop.end(), chain.states.begin());
      }
    }
    if (mask.noncentered_phi) {
      const Ar1SuffStats st = Ar1SuffStats::from(w.z);
      const double eta = std::atanh(p.phi);
      const double eta_q = eta + chain.nc_phi.scale() * rng.normal();
      const double phi_q = std::tanh(eta_q);
      const double cur = st.log_density({0.0, p.phi, 1.0});
      const double prop = std::abs(phi_q) < 1.0 ? st.log_density({0.0, phi_q, 1.0}) : kNegInf;
      if (mh_accept(chain.nc_phi,
                    prop + log_prior_atanh_phi(eta_q) - cur - log_prior_atanh_phi(eta), rng, target))
        p.phi = phi_q;
    }
  }
  return loglik;
}

}  // namespace

void SamplerConfig::validate() const {
  if (k < 1) throw std::invalid_argument("sampler: k must be >= 1");
  if (burnin < 0) throw std::invalid_argument("sampler: burnin must be >= 0");
  if (R <= burnin) throw std::invalid_argument("sampler: R must exceed burnin");
  if (!(adapt_target > 0.0 && adapt_target < 1.0))
    throw std::invalid_argument("sampler: adapt_target must lie in (0, 1)");
  validate_family_set(families);
}

void AdaptiveScale::adapt(double accept_prob, double target) {
  ++proposals;
  log_scale += (accept_prob - target) /
               (target * (1.0 - target) * (static_cast<double>(proposals) + 10.0));
  log_scale = std::clamp(log_scale, -20.0, 5.0);
}

// ---------------------------------------------------------------------------
// BivariateDraws

BivariateDraws::BivariateDraws(SamplerKind kind, std::size_t T, FamilySet families)
    : kind_(kind), T_(T), families_(std::move(families)) {}

double BivariateDraws::tau(std::size_t r, std::size_t t) const {
  if (kind_ == SamplerKind::Dynamic) return std::tanh(states_[r * (T_ + 1) + t + 1]);
  return std::tanh(states_[r]);
}

void BivariateDraws::reserve(std::size_t R) {
  family_index_.reserve(R);
  states_.reserve(R * state_width());
  if (kind_ == SamplerKind::Dynamic) {
    mu_.reserve(R);
    phi_.reserve(R);
    sigma_.reserve(R);
  }
}

void BivariateDraws::append(const DynamicChainState& chain, const PairData& data, bool with_loglik) {
  if (kind_ != SamplerKind::Dynamic) throw std::logic_error("append: dynamic draw into static draws");
  if (chain.states.size() != T_ + 1 || data.size() != T_)
    throw std::invalid_argument("append: length mismatch");
  const std::size_t fi = family_position(data, chain.family);
  if (data.families() != families_) throw std::invalid_argument("append: family set mismatch");
  if (with_loglik && !has_loglik()) throw std::logic_error("append: log-likelihood rows were dropped");
  family_index_.push_back(static_cast<int>(fi));
  states_.insert(states_.end(), chain.states.begin(), chain.states.end());
  mu_.push_back(chain.params.mu);
  phi_.push_back(chain.params.phi);
  sigma_.push_back(chain.params.sigma);
  if (with_loglik) {
    std::vector<double> tau(T_);
    states_to_tau(chain.states, tau);
    const std::size_t off = loglik_.size();
    loglik_.resize(off + T_);
    data.pointwise_log_density(fi, tau, std::span<double>(loglik_.data() + off, T_));
  }
}

void BivariateDraws::append(const StaticChainState& chain, const PairData& data, bool with_loglik) {
  if (kind_ != SamplerKind::Static) throw std::logic_error("append: static draw into dynamic draws");
  if (data.size() != T_) throw std::invalid_argument("append: length mismatch");
  if (data.families() != families_) throw std::invalid_argument("append: family set mismatch");
  const std::size_t fi = family_position(data, chain.family);
  if (with_loglik && !has_loglik()) throw std::logic_error("append: log-likelihood rows were dropped");
  family_index_.push_back(static_cast<int>(fi));
  states_.push_back(chain.s);
  if (with_loglik) {
    const std::size_t off = loglik_.size();
    loglik_.resize(off + T_);
    data.pointwise_log_density(fi, std::tanh(chain.s), std::span<double>(loglik_.data() + off, T_));
  }
}

void BivariateDraws::append_raw(int family_index, std::span<const double> state, Ar1Params params) {
  if (family_index < 0 || static_cast<std::size_t>(family_index) >= families_.size())
    throw std::invalid_argument("append_raw: family index out of range");
  if (state.size() != state_width()) throw std::invalid_argument("append_raw: state width mismatch");
  family_index_.push_back(family_index);
  states_.insert(states_.end(), state.begin(), state.end());
  if (kind_ == SamplerKind::Dynamic) {
    mu_.push_back(params.mu);
    phi_.push_back(params.phi);
    sigma_.push_back(params.sigma);
  }
}

void BivariateDraws::set_loglik(std::vector<double> loglik) {
  if (loglik.size() != size() * T_) throw std::invalid_argument("set_loglik: expected R x T values");
  loglik_ = std::move(loglik);
}

// ---------------------------------------------------------------------------

std::vector<double> normalize_log_weights(std::span<const double> log_weights) {
  double mx = kNegInf;
  for (double w : log_weights)
    if (w > mx) mx = w;
  if (!(mx > kNegInf) || !std::isfinite(mx))
    throw std::domain_error("family full conditional: no family has a finite likelihood");
  std::vector<double> p(log_weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = log_weights[i] > kNegInf ? std::exp(log_weights[i] - mx) : 0.0;
    total += p[i];
  }
  for (double& x : p) x /= total;
  return p;
}

std::vector<double> family_full_conditional(const PairData& data, std::span<const double> tau) {
  if (tau.size() != data.size()) throw std::invalid_argument("family_full_conditional: tau length mismatch");
  std::vector<double> ll(data.families().size());
  for (std::size_t m = 0; m < ll.size(); ++m) {
    const double l = data.sum_log_density(m, tau);
    ll[m] = std::isnan(l) ? kNegInf : l;
  }
  return normalize_log_weights(ll);
}

std::vector<double> family_full_conditional(const PairData& data, double tau) {
  std::vector<double> ll(data.families().size());
  for (std::size_t m = 0; m < ll.size(); ++m) {
    const double l = data.sum_log_density(m, tau);
    ll[m] = std::isnan(l) ? kNegInf : l;
  }
  return normalize_log_weights(ll);
}

void states_to_tau(std::span<const double> states, std::span<double> out) {
  const std::size_t T = states.size() - 1;
  for (std::size_t t = 0; t < T; ++t) out[t] = std::tanh(states[t + 1]);
}

std::vector<double> rolling_fisher_z(std::span<const double> u1, std::span<const double> u2,
                                     std::size_t window) {
  const std::size_t T = u1.size();
  std::vector<double> z(T);
  const std::size_t w = std::min(std::max<std::size_t>(window, 2), T);
  for (std::size_t t = 0; t < T; ++t) {
    std::size_t lo = t >= w / 2 ? t - w / 2 : 0;
    if (lo + w > T) lo = T - w;
    const double tau = empirical_kendall_tau(u1.subspan(lo, w), u2.subspan(lo, w));
    z[t] = std::atanh(std::clamp(tau, -kInitTauBound, kInitTauBound));
  }
  return z;
}

DynamicChainState init_dynamic_chain(const PairData& data, std::uint64_t seed, double adapt_target) {
  const std::size_t T = data.size();
  if (T < 2) throw std::invalid_argument("dynamic sampler needs at least two observations");
  DynamicChainState chain;
  chain.rng = Rng(seed);
  chain.adapt_target = adapt_target;
  const std::vector<double> z = rolling_fisher_z(data.u1(), data.u2());
  chain.states.resize(T + 1);
  chain.states[0] = z[0];
  std::copy(z.begin(), z.end(), chain.states.begin() + 1);
  chain.params.mu = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(T);
  chain.params.phi = 0.9;
  chain.params.sigma = 0.1;
  std::vector<double> tau(T);
  states_to_tau(chain.states, tau);
  std::size_t best = 0;
  double best_ll = kNegInf;
  for (std::size_t m = 0; m < data.families().size(); ++m) {
    const double l = data.sum_log_density(m, tau);
    if (l > best_ll) {
      best_ll = l;
      best = m;
    }
  }
  chain.family = data.families()[best];
  return chain;
}

StaticChainState init_static_chain(const PairData& data, std::uint64_t seed, double adapt_target) {
  if (data.size() < 2) throw std::invalid_argument("static sampler needs at least two observations");
  StaticChainState chain;
  chain.rng = Rng(seed);
  chain.adapt_target = adapt_target;
  const double tau = empirical_kendall_tau(data.u1(), data.u2());
  chain.s = std::atanh(std::clamp(tau, -kInitTauBound, kInitTauBound));
  std::size_t best = 0;
  double best_ll = kNegInf;
  for (std::size_t m = 0; m < data.families().size(); ++m) {
    const double l = data.sum_log_density(m, std::tanh(chain.s));
    if (l > best_ll) {
      best_ll = l;
      best = m;
    }
  }
  chain.family = data.families()[best];
  return chain;
}

double dynamic_loglik(const DynamicChainState& chain, const PairData& data) {
  check_chain_data(chain, data);
  Scratch& w = scratch(data.size());
  return loglik_states(data, family_position(data, chain.family), chain.states, w.tau);
}

double static_loglik(const StaticChainState& chain, const PairData& data) {
  return data.sum_log_density(family_position(data, chain.family), std::tanh(chain.s));
}

void update_family(DynamicChainState& chain, const PairData& data) {
  check_chain_data(chain, data);
  family_step(chain, data, scratch(data.size()));
}

void update_states_ess(DynamicChainState& chain, const PairData& data) {
  check_chain_data(chain, data);
  Scratch& w = scratch(data.size());
  const std::size_t fi = family_position(data, chain.family);
  ess_step(chain, data, fi, loglik_states(data, fi, chain.states, w.tau), w);
}

void update_hyper_interweaved(DynamicChainState& chain, const PairData& data,
                              const HyperUpdateMask& mask) {
  check_chain_data(chain, data);
  Scratch& w = scratch(data.size());
  const std::size_t fi = family_position(data, chain.family);
  hyper_step(chain, data, fi, loglik_states(data, fi, chain.states, w.tau), mask, w);
}

void dynamic_sweep(DynamicChainState& chain, const PairData& data, const HyperUpdateMask& mask) {
  check_chain_data(chain, data);
  Scratch& w = scratch(data.size());
  double ll = family_step(chain, data, w);
  const std::size_t fi = family_position(data, chain.family);
  ll = ess_step(chain, data, fi, ll, w);
  hyper_step(chain, data, fi, ll, mask, w);
  ++chain.sweeps;
}

void static_sweep(StaticChainState& chain, const PairData& data) {
  const std::size_t M = data.families().size();
  const double tau = std::tanh(chain.s);
  std::size_t fi = 0;
  double ll = 0.0;
  if (M == 1) {
    ll = data.sum_log_density(0, tau);
  } else {
    std::vector<double> lls(M);
    for (std::size_t m = 0; m < M; ++m) {
      const double l = data.sum_log_density(m, tau);
      lls[m] = std::isnan(l) ? kNegInf : l;
    }
    fi = sample_index(normalize_log_weights(lls), chain.rng);
    ll = lls[fi];
  }
  chain.family = data.families()[fi];
  const double s_q = chain.s + chain.scale.scale() * chain.rng.normal();
  double l_q = data.sum_log_density(fi, std::tanh(s_q));
  if (std::isnan(l_q)) l_q = kNegInf;
  if (mh_accept(chain.scale, l_q + log_static_prior(s_q) - ll - log_static_prior(chain.s), chain.rng,
                chain.adapt_target))
    chain.s = s_q;
  ++chain.sweeps;
}

void resume_k_steps(DynamicChainState& chain, const PairData& data, int k, BivariateDraws& out,
                    bool with_loglik) {
  if (k < 1) throw std::invalid_argument("resume_k_steps: k must be >= 1");
  for (int i = 0; i < k; ++i) dynamic_sweep(chain, data);
  out.append(chain, data, with_loglik);
}

void resume_k_steps(StaticChainState& chain, const PairData& data, int k, BivariateDraws& out,
                    bool with_loglik) {
  if (k < 1) throw std::invalid_argument("resume_k_steps: k must be >= 1");
  for (int i = 0; i < k; ++i) static_sweep(chain, data);
  out.append(chain, data, with_loglik);
}

BivariateDraws run_dynamic_sampler(const PairData& data, const SamplerConfig& config) {
  config.validate();
  DynamicChainState chain = init_dynamic_chain(data, config.seed, config.adapt_target);
  return run_dynamic_sampler(data, config, chain);
}

BivariateDraws run_dynamic_sampler(const PairData& data, const SamplerConfig& config,
                                   DynamicChainState& chain) {
  config.validate();
  if (data.families() != config.families)
    throw std::invalid_argument("run_dynamic_sampler: data prepared for a different family set");
  BivariateDraws draws(SamplerKind::Dynamic, data.size(), config.families);
  draws.reserve(config.R);
  for (int r = 0; r < config.R; ++r) resume_k_steps(chain, data, config.k, draws);
  return draws;
}

BivariateDraws run_static_sampler(const PairData& data, const SamplerConfig& config) {
  config.validate();
  StaticChainState chain = init_static_chain(data, config.seed, config.adapt_target);
  return run_static_sampler(data, config, chain);
}

BivariateDraws run_static_sampler(const PairData& data, const SamplerConfig& config,
                                  StaticChainState& chain) {
  config.validate();
  if (data.families() != config.families)
    throw std::invalid_argument("run_static_sampler: data prepared for a different family set");
  BivariateDraws draws(SamplerKind::Static, data.size(), config.families);
  draws.reserve(config.R);
  for (int r = 0; r < config.R; ++r) resume_k_steps(chain, data, config.k, draws);
  return draws;
}

}  // namespace dynvine
