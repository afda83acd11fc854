#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "doctest.h"
#include "dynvine/families.hpp"
#include "dynvine/kendall.hpp"
#include "dynvine/rng.hpp"
#include "../support/oracles.hpp"

using namespace dynvine;

namespace {

const FamilySet kAll = {FamilyId::independence(), FamilyId::gaussian(), FamilyId::student_t(4),
                        FamilyId::student_t(2), FamilyId::eclayton(), FamilyId::egumbel()};

}  // namespace

TEST_CASE("Fisher's Z transform") {
  CHECK(fisher_z(0.0) == 0.0);
  CHECK(fisher_z(0.4620) == doctest::Approx(0.5).epsilon(2e-4));
  CHECK(fisher_z_inv(0.5) == doctest::Approx(std::tanh(0.5)).epsilon(1e-15));
  CHECK(fisher_z_inv(0.5) == doctest::Approx(0.4621).epsilon(1e-4));
  CHECK(fisher_z_inv(40.0) <= 1.0);
  for (double tau = -kTauMax; tau <= kTauMax; tau += 0.0137)
    CHECK(std::abs(fisher_z_inv(fisher_z(tau)) - tau) < 1e-12);
  CHECK(std::abs(fisher_z_inv(fisher_z(kTauMax)) - kTauMax) < 1e-12);
  CHECK_THROWS_AS(fisher_z(1.0), std::domain_error);
  CHECK_THROWS_AS(fisher_z(-1.5), std::domain_error);
}

TEST_CASE("parameter and Kendall's tau maps") {
  CHECK(param_to_tau(FamilyId::egumbel(), 2.0) == doctest::Approx(0.5));
  CHECK(param_to_tau(FamilyId::gaussian(), 0.5) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(param_to_tau(FamilyId::independence(), 0.0) == 0.0);
  CHECK(tau_to_param(FamilyId::gaussian(), 1.0 / 3.0).theta == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(tau_to_param(FamilyId::egumbel(), 0.5).theta == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(tau_to_param(FamilyId::eclayton(), 0.5).theta == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(tau_to_param(FamilyId::eclayton(), -0.5).theta == doctest::Approx(-2.0).epsilon(1e-14));

  for (FamilyId f : kAll) {
    if (f.kind == FamilyKind::Independence) continue;
    for (double tau = -0.999; tau < 1.0; tau += 0.0111) {
      const double back = param_to_tau(f, tau_to_param(f, tau).theta);
      CHECK(std::abs(back - clamp_tau(f, tau)) < 1e-10);
    }
  }
  // Archimedean families: tau = 0 maps to the positive orientation at tau_min
  CHECK(tau_to_param(FamilyId::eclayton(), 0.0).theta > 0.0);
  CHECK(param_to_tau(FamilyId::egumbel(), tau_to_param(FamilyId::egumbel(), 0.0).theta) ==
        doctest::Approx(kTauMinArchimedean));
  CHECK_THROWS_AS(param_to_tau(FamilyId::gaussian(), 1.0), std::domain_error);
  CHECK_THROWS_AS(param_to_tau(FamilyId::egumbel(), 0.5), std::domain_error);
  CHECK_THROWS_AS(param_to_tau(FamilyId::eclayton(), 0.0), std::domain_error);
  CHECK_THROWS_AS(tau_to_param(FamilyId::gaussian(), 1.2), std::domain_error);
}

TEST_CASE("family identifiers and sets") {
  for (FamilyId f : kAll) CHECK(FamilyId::parse(f.name()) == f);
  CHECK(FamilyId::parse("studentt(df=2)") == FamilyId::student_t(2));
  CHECK(FamilyId::parse("t8") == FamilyId::student_t(8));
  CHECK(FamilyId::parse(" Gumbel ") == FamilyId::egumbel());
  CHECK_THROWS_AS(FamilyId::parse("frank"), std::invalid_argument);
  CHECK_THROWS_AS(FamilyId::parse("t0"), std::invalid_argument);
  const FamilySet s = parse_family_list("indep,gaussian,t4,eclayton,egumbel");
  CHECK(s == default_family_set());
  CHECK(format_family_list(s) == "indep,gaussian,t4,eclayton,egumbel");
  CHECK_THROWS_AS(parse_family_list("gaussian,gaussian"), std::invalid_argument);
  CHECK_THROWS_AS(parse_family_list(""), std::invalid_argument);
}

TEST_CASE("log density point values") {
  CHECK(log_density(FamilyId::independence(), 0.2, 0.9, 0.0) == 0.0);
  CHECK(log_density(FamilyId::gaussian(), 0.5, 0.5, 0.5) ==
        doctest::Approx(-0.5 * std::log(1.0 - 0.25)).epsilon(1e-12));
  CHECK(log_density(FamilyId::gaussian(), 0.5, 0.5, 0.5) == doctest::Approx(0.1438).epsilon(1e-3));
  // Clayton closed form c = (1+t)(uv)^(-1-t)(u^-t + v^-t - 1)^(-2-1/t)
  const double t = 2.0, u = 0.3, v = 0.7;
  const double ref = std::log((1 + t) * std::pow(u * v, -1 - t) *
                              std::pow(std::pow(u, -t) + std::pow(v, -t) - 1, -2 - 1 / t));
  CHECK(log_density(FamilyId::eclayton(), u, v, t) == doctest::Approx(ref).epsilon(1e-12));
  // rotated density is the base density at (1 - u1, u2)
  CHECK(log_density(FamilyId::eclayton(), u, v, -t) ==
        doctest::Approx(log_density(FamilyId::eclayton(), 1 - u, v, t)).epsilon(1e-12));
  CHECK_THROWS_AS(log_density(FamilyId::gaussian(), 0.3, 0.3, 1.0), std::domain_error);
}

TEST_CASE("densities integrate to one") {
  for (FamilyId f : kAll) {
    if (f.kind == FamilyKind::Independence) continue;
    for (double tau : {-0.7, -0.3, 0.3, 0.7}) {
      const double theta = tau_to_param(f, tau).theta;
      CAPTURE(f.name());
      CAPTURE(tau);
      CHECK(std::abs(oracle::density_grid_integral(f, theta, 601) - 1.0) < 1e-3);
    }
  }
}

TEST_CASE("h-functions match partial derivatives of C") {
  Rng rng(11);
  for (FamilyId f : {FamilyId::gaussian(), FamilyId::student_t(4), FamilyId::eclayton(),
                     FamilyId::egumbel(), FamilyId::independence()}) {
    for (double tau : {-0.6, 0.4}) {
      const double theta = tau_to_param(f, tau).theta;
      const int n = f.is_archimedean() ? 60 : 12;
      double worst = 0.0;
      for (int i = 0; i < n; ++i) {
        const double u1 = 0.02 + 0.96 * rng.uniform(), u2 = 0.02 + 0.96 * rng.uniform();
        worst = std::max(worst, std::abs(h_forward(f, u1, u2, theta) -
                                         oracle::h_finite_difference(f, u1, u2, theta, true)));
        worst = std::max(worst, std::abs(h_backward(f, u1, u2, theta) -
                                         oracle::h_finite_difference(f, u1, u2, theta, false)));
      }
      CAPTURE(f.name());
      CAPTURE(tau);
      CHECK(worst < 1e-4);
    }
  }
  CHECK(h_forward(FamilyId::independence(), 0.3, 0.8, 0.0) == 0.3);
  CHECK(h_forward(FamilyId::gaussian(), 0.3, 0.8, 0.0) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("h-functions are monotone in the first argument") {
  for (FamilyId f : kAll) {
    for (double tau : {-0.8, -0.2, 0.2, 0.8}) {
      const double theta = tau_to_param(f, tau).theta;
      for (double u2 : {0.01, 0.3, 0.77, 0.999}) {
        double prev_f = 0.0, prev_b = 0.0;
        for (double u1 = 0.001; u1 < 1.0; u1 += 0.01) {
          const double hf = h_forward(f, u1, u2, theta);
          const double hb = h_backward(f, u2, u1, theta);
          CHECK(hf >= prev_f);
          CHECK(hb >= prev_b);
          CHECK(hf > 0.0);
          CHECK(hf < 1.0);
          prev_f = hf;
          prev_b = hb;
        }
      }
    }
  }
}

TEST_CASE("inverse h-functions") {
  CHECK(h_forward_inverse(FamilyId::independence(), 0.37, 0.2, 0.0) == 0.37);
  Rng rng(5);
  for (FamilyId f : kAll) {
    for (double tau : {-0.9, -0.6, -0.1, 0.0, 0.1, 0.6, 0.9}) {
      const double theta = tau_to_param(f, tau).theta;
      double worst_arg = 0.0, worst_p = 0.0;
      for (int i = 0; i < 100; ++i) {
        const double u2 = rng.uniform_open(), p = rng.uniform_open();
        const double xf = h_forward_inverse(f, p, u2, theta);
        const double xb = h_backward_inverse(f, u2, p, theta);
        worst_p = std::max(worst_p, std::abs(h_forward(f, xf, u2, theta) - p));
        worst_p = std::max(worst_p, std::abs(h_backward(f, u2, xb, theta) - p));
        worst_arg = std::max(worst_arg, std::abs(h_forward_inverse(f, h_forward(f, xf, u2, theta), u2, theta) - xf));
        worst_arg = std::max(worst_arg, std::abs(h_backward_inverse(f, u2, h_backward(f, u2, xb, theta), theta) - xb));
      }
      CAPTURE(f.name());
      CAPTURE(tau);
      CHECK(worst_arg < 1e-6);
      CHECK(worst_p < 1e-8);
    }
  }
  // uniformly drawn arguments for eGumbel at tau 0.6
  const double theta = tau_to_param(FamilyId::egumbel(), 0.6).theta;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double u1 = rng.uniform_open(), u2 = rng.uniform_open();
    const double h = h_forward(FamilyId::egumbel(), u1, u2, theta);
    worst = std::max(worst, std::abs(h_forward_inverse(FamilyId::egumbel(), h, u2, theta) - u1));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("PairData agrees with the scalar kernels") {
  Rng rng(3);
  std::vector<double> u1(200), u2(200), tau(200);
  for (int t = 0; t < 200; ++t) {
    u1[t] = rng.uniform();
    u2[t] = rng.uniform();
    tau[t] = 1.9 * rng.uniform() - 0.95;
  }
  u1[0] = 0.0;
  u2[1] = 1.0;
  tau[2] = 0.0;
  tau[3] = 1.0;
  PairData pd(u1, u2, kAll);
  for (std::size_t fi = 0; fi < kAll.size(); ++fi) {
    double sum = 0.0;
    for (int t = 0; t < 200; ++t) {
      const double ref = log_density_tau(kAll[fi], u1[t], u2[t], tau[t]);
      CHECK(pd.log_density(fi, t, tau[t]) == doctest::Approx(ref).epsilon(1e-12));
      sum += pd.log_density(fi, t, tau[t]);
    }
    CHECK(pd.sum_log_density(fi, tau) == doctest::Approx(sum).epsilon(1e-12));
    std::vector<double> pw(200);
    pd.pointwise_log_density(fi, 0.3, pw);
    CHECK(pw[17] == doctest::Approx(log_density_tau(kAll[fi], u1[17], u2[17], 0.3)).epsilon(1e-12));
  }
  std::vector<double> bad = {0.5, 1.5};
  CHECK_THROWS_AS(PairData(bad, bad, kAll), std::invalid_argument);
}

TEST_CASE("maximum-likelihood tau agrees across families on Student t data") {
  // data from t4 at tau 0.5; each family's ML estimate of tau lands near 0.5
  const FamilyId truth = FamilyId::student_t(4);
  const double theta = tau_to_param(truth, 0.5).theta;
  Rng rng(2024);
  const int n = 3000;
  std::vector<double> u1(n), u2(n);
  for (int t = 0; t < n; ++t) {
    u2[t] = rng.uniform_open();
    u1[t] = h_forward_inverse(truth, rng.uniform_open(), u2[t], theta);
  }
  const FamilySet fams = {FamilyId::gaussian(), FamilyId::student_t(4), FamilyId::egumbel(),
                          FamilyId::eclayton()};
  PairData pd(u1, u2, fams);
  for (std::size_t fi = 0; fi < fams.size(); ++fi) {
    auto negll = [&](double tau) { return -pd.sum_log_density(fi, tau); };
    const auto res = boost::math::tools::brent_find_minima(negll, 0.01, 0.95, 40);
    const double tol = fams[fi].kind == FamilyKind::EClayton ? 0.15 : 0.1;
    CAPTURE(fams[fi].name());
    CHECK(std::abs(res.first - 0.5) < tol);
  }
}

TEST_CASE("sampled Kendall's tau matches the tau map") {
  Rng rng(2024);
  const int n = 100000;
  std::vector<double> u1(n), u2(n);
  for (FamilyId f : kAll) {
    if (f.kind == FamilyKind::Independence) continue;
    for (double tau0 : {-0.6, -0.2, 0.2, 0.6}) {
      for (int i = 0; i < n; ++i) {
        u2[i] = rng.uniform_open();
        u1[i] = h_forward_inverse_tau(f, rng.uniform_open(), u2[i], tau0);
      }
      INFO(f.name() << " tau " << tau0);
      CHECK(std::abs(empirical_kendall_tau(u1, u2) - tau0) < 0.01);
    }
  }
}
