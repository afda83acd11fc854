#pragma once

namespace dynvine {

double normal_cdf(double x);
double normal_quantile(double p);
double normal_log_pdf(double x, double mean, double variance);

double student_t_cdf(double x, double nu);
double student_t_quantile(double p, double nu);

}  // namespace dynvine
