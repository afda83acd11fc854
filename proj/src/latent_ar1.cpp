#include "dynvine/latent_ar1.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include "dynvine/special.hpp"

namespace dynvine {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLogBetaNorm = std::lgamma(6.5) - std::lgamma(5.0) - std::lgamma(1.5);
const double kLog2Pi = std::log(2.0 * std::numbers::pi);
}  // namespace

bool Ar1Params::valid() const {
  return std::isfinite(mu) && std::abs(phi) < 1.0 && sigma > 0.0 && std::isfinite(sigma);
}

double log_prior_initial(double s0, const Ar1Params& p) {
  return normal_log_pdf(s0, p.mu, p.sigma * p.sigma / (1.0 - p.phi * p.phi));
}

double log_prior_transition(double prev, double cur, const Ar1Params& p) {
  return normal_log_pdf(cur, p.mu + p.phi * (prev - p.mu), p.sigma * p.sigma);
}

double log_prior_states(std::span<const double> states, const Ar1Params& p) {
  if (states.empty()) throw std::invalid_argument("state trajectory must contain s_0");
  double lp = log_prior_initial(states[0], p);
  for (std::size_t t = 1; t < states.size(); ++t) lp += log_prior_transition(states[t - 1], states[t], p);
  return lp;
}

double log_prior_mu(double mu) { return normal_log_pdf(mu, 0.0, 100.0); }

double log_prior_phi(double phi) {
  if (!(std::abs(phi) < 1.0)) return kNegInf;
  const double x = 0.5 * (phi + 1.0);
  return kLogBetaNorm + 4.0 * std::log(x) + 0.5 * std::log1p(-x) - std::numbers::ln2;
}

double log_prior_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) return kNegInf;
  // Gamma(1/2, 1/2) on sigma^2 times the Jacobian 2 sigma
  return 0.5 * std::log(2.0 / std::numbers::pi) - 0.5 * sigma * sigma;
}

double log_prior_hyper(const Ar1Params& p) {
  return log_prior_mu(p.mu) + log_prior_phi(p.phi) + log_prior_sigma(p.sigma);
}

double log_prior_atanh_phi(double eta) {
  const double phi = std::tanh(eta);
  // d phi / d eta = 1 - tanh^2 = 4 e^{-2|eta|} / (1 + e^{-2|eta|})^2
  const double a = std::abs(eta);
  const double log_jac = std::log(4.0) - 2.0 * a - 2.0 * std::log1p(std::exp(-2.0 * a));
  if (std::abs(phi) >= 1.0) return kNegInf;
  return log_prior_phi(phi) + log_jac;
}

double log_prior_log_sigma(double ell) { return log_prior_sigma(std::exp(ell)) + ell; }

Ar1Params sample_prior_hyper(Rng& rng) {
  std::gamma_distribution<double> ga(5.0, 1.0), gb(1.5, 1.0);
  const double a = ga(rng.engine()), b = gb(rng.engine());
  Ar1Params p;
  p.mu = rng.normal(0.0, 10.0);
  p.phi = 2.0 * a / (a + b) - 1.0;
  p.sigma = std::abs(rng.normal());
  return p;
}

void sample_prior_trajectory(const Ar1Params& p, std::span<double> out, Rng& rng) {
  if (out.empty()) return;
  out[0] = p.mu + p.sigma / std::sqrt(1.0 - p.phi * p.phi) * rng.normal();
  for (std::size_t t = 1; t < out.size(); ++t)
    out[t] = p.mu + p.phi * (out[t - 1] - p.mu) + p.sigma * rng.normal();
}

StateTrajectory sample_prior_trajectory(const Ar1Params& p, std::size_t T, Rng& rng) {
  StateTrajectory s(T + 1);
  sample_prior_trajectory(p, s, rng);
  return s;
}

double stationary_tau_density(double tau, const Ar1Params& p) {
  if (!(std::abs(tau) < 1.0)) throw std::domain_error("stationary_tau_density requires |tau| < 1");
  const double z = std::atanh(tau);
  const double var = p.sigma * p.sigma / (1.0 - p.phi * p.phi);
  return std::exp(normal_log_pdf(z, p.mu, var)) / (1.0 - tau * tau);
}

Ar1SuffStats Ar1SuffStats::from(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("state trajectory must contain s_0");
  Ar1SuffStats st;
  st.n = static_cast<double>(x.size() - 1);
  st.x0 = x[0];
  for (std::size_t t = 1; t < x.size(); ++t) {
    const double a = x[t], b = x[t - 1];
    st.s_cur += a;
    st.s_prev += b;
    st.q_cur += a * a;
    st.q_prev += b * b;
    st.cross += a * b;
  }
  return st;
}

double Ar1SuffStats::log_density(const Ar1Params& p) const {
  const double mu = p.mu, phi = p.phi, s2 = p.sigma * p.sigma;
  const double nmu2 = n * mu * mu;
  const double yy = q_cur - 2.0 * mu * s_cur + nmu2;
  const double zz = q_prev - 2.0 * mu * s_prev + nmu2;
  const double yz = cross - mu * (s_cur + s_prev) + nmu2;
  const double rss = yy - 2.0 * phi * yz + phi * phi * zz;
  return log_prior_initial(x0, p) - 0.5 * n * (kLog2Pi + std::log(s2)) - 0.5 * rss / s2;
}

}  // namespace dynvine
