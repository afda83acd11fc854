#include "dynvine/special.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/erf.hpp>

namespace dynvine {

namespace {
using FastPolicy = boost::math::policies::policy<boost::math::policies::promote_double<false>,
                                                 boost::math::policies::promote_float<false>>;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p, FastPolicy{});
}

double normal_log_pdf(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + d * d / variance);
}

double student_t_cdf(double x, double nu) {
  boost::math::students_t_distribution<double, FastPolicy> dist(nu);
  return boost::math::cdf(dist, x);
}

double student_t_quantile(double p, double nu) {
  // closed forms for the df values used most often
  if (nu == 2.0) {
    return (2.0 * p - 1.0) / std::sqrt(2.0 * p * (1.0 - p));
  }
  if (nu == 1.0) {
    return std::tan(std::numbers::pi * (p - 0.5));
  }
  if (nu == 4.0) {
    const double alpha = 4.0 * p * (1.0 - p);
    const double sa = std::sqrt(alpha);
    const double q = std::cos(std::acos(sa) / 3.0) / sa;
    return std::copysign(2.0 * std::sqrt(q - 1.0), p - 0.5);
  }
  boost::math::students_t_distribution<double, FastPolicy> dist(nu);
  return boost::math::quantile(dist, p);
}

}  // namespace dynvine
