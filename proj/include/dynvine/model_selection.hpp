#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dynvine/bivariate_samplers.hpp"

namespace dynvine {

enum class DependenceType { Zero, Static, Dynamic };

std::string to_string(DependenceType type);
DependenceType parse_dependence_type(std::string_view name);

struct WaicResult {
  std::vector<double> pointwise;  // waic_t
  double total = 0.0;
  double lppd = 0.0;     // sum over t of log mean_r exp(loglik[r][t])
  double penalty = 0.0;  // sum over t of the sample variance of loglik[., t]
};

/// WAIC from a row-major rows x cols matrix of pointwise log-likelihoods
/// (rows = draws, cols = observations):
/// waic_t = -2 (log mean_r exp(l_rt) - var_r(l_rt)), var with divisor rows - 1.
WaicResult estimate_waic(std::span<const double> loglik, std::size_t rows, std::size_t cols);
/// WAIC of the draws with index >= burnin.
WaicResult estimate_waic(const BivariateDraws& draws, std::size_t burnin);
/// WAIC of the independence copula: zero at every observation.
WaicResult zero_waic(std::size_t T);

struct WaicComparison {
  double diff = 0.0;  // sum_t (a_t - b_t)
  double se = 0.0;    // sqrt(T * sample variance of a_t - b_t)
};
WaicComparison waic_diff_se(const WaicResult& a, const WaicResult& b);

/// Complexity ladder Zero -> Static -> Dynamic. A step up is taken only when
/// the richer model's WAIC is strictly smaller and at least kappa standard
/// errors below the current choice. An infinite kappa always yields Zero.
DependenceType select_dependence(const WaicResult& waic_dyn, const WaicResult& waic_stat,
                                 double kappa = 2.0);

}  // namespace dynvine
