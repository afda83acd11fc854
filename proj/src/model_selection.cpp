#include "dynvine/model_selection.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dynvine {

std::string to_string(DependenceType type) {
  switch (type) {
    case DependenceType::Zero:
      return "zero";
    case DependenceType::Static:
      return "static";
    case DependenceType::Dynamic:
      return "dynamic";
  }
  return "?";
}

DependenceType parse_dependence_type(std::string_view name) {
  if (name == "zero") return DependenceType::Zero;
  if (name == "static") return DependenceType::Static;
  if (name == "dynamic") return DependenceType::Dynamic;
  throw std::invalid_argument("unknown dependence type '" + std::string(name) + "'");
}

WaicResult estimate_waic(std::span<const double> loglik, std::size_t rows, std::size_t cols) {
  if (rows < 2) throw std::invalid_argument("estimate_waic: need at least two draws");
  if (loglik.size() != rows * cols) throw std::invalid_argument("estimate_waic: matrix size mismatch");
  WaicResult res;
  res.pointwise.resize(cols);
  const double n = static_cast<double>(rows);
  for (std::size_t t = 0; t < cols; ++t) {
    double mx = -std::numeric_limits<double>::infinity();
    double mean = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      const double v = loglik[r * cols + t];
      if (v > mx) mx = v;
      mean += v;
    }
    if (!std::isfinite(mx))
      throw std::domain_error("estimate_waic: observation " + std::to_string(t) +
                              " has no finite log-likelihood draw");
    mean /= n;
    double se = 0.0, ss = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      const double v = loglik[r * cols + t];
      se += std::exp(v - mx);
      ss += (v - mean) * (v - mean);
    }
    const double lme = mx + std::log(se / n);
    const double var = ss / (n - 1.0);
    res.pointwise[t] = -2.0 * (lme - var);
    res.lppd += lme;
    res.penalty += var;
    res.total += res.pointwise[t];
  }
  return res;
}

WaicResult estimate_waic(const BivariateDraws& draws, std::size_t burnin) {
  if (draws.size() > 0 && draws.loglik().empty())
    throw std::logic_error("estimate_waic: draws carry no log-likelihood matrix");
  if (burnin >= draws.size()) throw std::invalid_argument("estimate_waic: burn-in removes every draw");
  const std::size_t T = draws.T();
  const std::size_t rows = draws.size() - burnin;
  return estimate_waic(std::span<const double>(draws.loglik().data() + burnin * T, rows * T), rows, T);
}

WaicResult zero_waic(std::size_t T) {
  WaicResult res;
  res.pointwise.assign(T, 0.0);
  return res;
}

WaicComparison waic_diff_se(const WaicResult& a, const WaicResult& b) {
  const std::size_t T = a.pointwise.size();
  if (b.pointwise.size() != T) throw std::invalid_argument("waic_diff_se: length mismatch");
  if (T < 2) throw std::invalid_argument("waic_diff_se: need at least two observations");
  double mean = 0.0;
  for (std::size_t t = 0; t < T; ++t) mean += a.pointwise[t] - b.pointwise[t];
  const double diff = mean;
  mean /= static_cast<double>(T);
  double ss = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const double d = a.pointwise[t] - b.pointwise[t] - mean;
    ss += d * d;
  }
  const double var = ss / static_cast<double>(T - 1);
  return {diff, std::sqrt(static_cast<double>(T) * var)};
}

DependenceType select_dependence(const WaicResult& waic_dyn, const WaicResult& waic_stat,
                                 double kappa) {
  if (waic_dyn.pointwise.size() != waic_stat.pointwise.size())
    throw std::invalid_argument("select_dependence: length mismatch");
  if (!(kappa >= 0.0)) throw std::invalid_argument("select_dependence: kappa must be >= 0");
  if (std::isinf(kappa)) return DependenceType::Zero;
  auto improves = [kappa](const WaicResult& richer, const WaicResult& current) {
    const WaicComparison c = waic_diff_se(richer, current);
    return c.diff < 0.0 && c.diff <= -kappa * c.se;
  };
  const WaicResult zero = zero_waic(waic_dyn.pointwise.size());
  DependenceType choice = DependenceType::Zero;
  const WaicResult* current = &zero;
  if (improves(waic_stat, *current)) {
    choice = DependenceType::Static;
    current = &waic_stat;
  }
  if (improves(waic_dyn, *current)) choice = DependenceType::Dynamic;
  return choice;
}

}  // namespace dynvine
