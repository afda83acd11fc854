#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dynvine/rng.hpp"

namespace dynvine {

/// Hyperparameters of s_t = mu + phi (s_{t-1} - mu) + sigma eta_t.
struct Ar1Params {
  double mu = 0.0;
  double phi = 0.0;
  double sigma = 1.0;

  bool valid() const;
  friend bool operator==(const Ar1Params&, const Ar1Params&) = default;
};

/// States s_0..s_T. Observation t (1-based) is driven by s_t; s_0 is the
/// stationary initial state.
using StateTrajectory = std::vector<double>;

/// Stationary initial term log N(s_0 | mu, sigma^2 / (1 - phi^2)).
double log_prior_initial(double s0, const Ar1Params& p);
/// Transition term log N(s_t | mu + phi (s_{t-1} - mu), sigma^2).
double log_prior_transition(double prev, double cur, const Ar1Params& p);
double log_prior_states(std::span<const double> states, const Ar1Params& p);

// Hyperprior: mu ~ N(0, 100), (phi + 1)/2 ~ Beta(5, 1.5), sigma^2 ~ Gamma(1/2, rate 1/2).
// Each function returns the log density of the stated variable, Jacobians included.
double log_prior_mu(double mu);
double log_prior_phi(double phi);
/// Density of sigma implied by the Gamma prior on sigma^2 (a half-normal).
double log_prior_sigma(double sigma);
/// log p(mu) + log p(phi) + log p(sigma); -inf outside the support.
double log_prior_hyper(const Ar1Params& p);
/// Density of atanh(phi) and of log(sigma), used by the random-walk updates.
double log_prior_atanh_phi(double eta);
double log_prior_log_sigma(double ell);

Ar1Params sample_prior_hyper(Rng& rng);
StateTrajectory sample_prior_trajectory(const Ar1Params& p, std::size_t T, Rng& rng);
/// Fills out[0..] with an AR(1) path of the given parameters.
void sample_prior_trajectory(const Ar1Params& p, std::span<double> out, Rng& rng);

/// Stationary density of tau = tanh(s) when s ~ N(mu, sigma^2 / (1 - phi^2)).
double stationary_tau_density(double tau, const Ar1Params& p);

/// Sufficient statistics of a path x_0..x_T for evaluating the AR(1) log
/// density in O(1) for any parameter value.
struct Ar1SuffStats {
  double n = 0.0;  // number of transitions T
  double x0 = 0.0;
  double s_cur = 0.0, s_prev = 0.0;    // sums of x_1..x_T and x_0..x_{T-1}
  double q_cur = 0.0, q_prev = 0.0;    // sums of squares
  double cross = 0.0;                  // sum of x_t x_{t-1}

  static Ar1SuffStats from(std::span<const double> x);
  double log_density(const Ar1Params& p) const;
};

}  // namespace dynvine
