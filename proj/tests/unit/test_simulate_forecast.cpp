#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "dynvine/kendall.hpp"
#include "dynvine/simulate_forecast.hpp"
#include "dynvine/special.hpp"
#include "../support/stats.hpp"
#include "../support/vine_oracles.hpp"

using namespace dynvine;

namespace {

RVineStructure pair_structure() {
  RVineStructure s(2);
  s.add_tree({VineEdge{1, 1, 2, {}, 1, 2}});
  return s;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const double mx = stats::mean(x), my = stats::mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// A d = 2 fit with one dynamic edge whose draws all carry the same
// hyperparameters, so every posterior mode equals them.
VineFitResult frozen_dynamic_fit(FamilyId family, Ar1Params p, std::size_t T) {
  VineFitResult f;
  f.structure = pair_structure();
  f.T = T;
  f.config.sampler.burnin = 0;
  EdgeFit e;
  e.edge = f.structure.edge(1, 0);
  e.type = DependenceType::Dynamic;
  e.draws = BivariateDraws(SamplerKind::Dynamic, T, FamilySet{family});
  const std::vector<double> state(T + 1, p.mu);
  for (int r = 0; r < 3; ++r) e.draws.append_raw(0, state, p);
  f.edges = {{e}};
  return f;
}

// Mode of the one-step predictive density of the state after the first n
// observations, by dense quadrature over a wide grid and a golden-section
// search on the continuous mixture.
double predictive_mode_oracle(FamilyId family, Ar1Params p, const std::vector<double>& ua,
                              const std::vector<double>& ub, std::size_t n) {
  const int G = 1601;
  const double sd0 = p.sigma / std::sqrt(1.0 - p.phi * p.phi);
  const double lo = p.mu - 10.0 * sd0, h = 20.0 * sd0 / (G - 1);
  std::vector<double> x(G), w(G);
  for (int k = 0; k < G; ++k) {
    x[k] = lo + h * k;
    w[k] = std::exp(-0.5 * std::pow((x[k] - p.mu) / sd0, 2));
  }
  auto kernel = [&](double to, double from) {
    return std::exp(-0.5 * std::pow((to - p.mu - p.phi * (from - p.mu)) / p.sigma, 2));
  };
  std::vector<double> post = w;
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0) {
      std::vector<double> pred(G, 0.0);
      for (int j = 0; j < G; ++j)
        for (int k = 0; k < G; ++k) pred[j] += post[k] * kernel(x[j], x[k]);
      post = pred;
    }
    double z = 0.0;
    for (int k = 0; k < G; ++k) {
      post[k] *= std::exp(log_density_tau(family, ua[t], ub[t], clamp_tau(family, std::tanh(x[k]))));
      z += post[k];
    }
    for (double& v : post) v /= z;
  }
  auto density = [&](double s) {
    if (n == 0) return std::exp(-0.5 * std::pow((s - p.mu) / sd0, 2));
    double v = 0.0;
    for (int k = 0; k < G; ++k) v += post[k] * kernel(s, x[k]);
    return v;
  };
  int best = 0;
  for (int j = 1; j < G; ++j)
    if (density(x[j]) > density(x[best])) best = j;
  double a = x[best] - h, b = x[best] + h;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 80; ++it) {
    const double c = b - g * (b - a), d = a + g * (b - a);
    (density(c) > density(d) ? b : a) = density(c) > density(d) ? d : c;
  }
  return 0.5 * (a + b);
}

}  // namespace

TEST_CASE("simulation from simple models") {
  Rng rng(3);
  SUBCASE("all-zero model gives independent uniforms") {
    const RVineStructure s = oracle::random_structure(4, rng, StructureClass::General);
    const VinePath m = VinePath::independent(s);
    const std::size_t n = 4000;
    const DataMatrix U = simulate(m, n, 1, rng).front();
    for (int i = 0; i < 4; ++i) {
      CHECK(stats::ks_one_sample_p(U.column(i), [](double u) { return u; }) > 0.001);
      for (int j = i + 1; j < 4; ++j) CHECK(std::abs(empirical_kendall_tau(U.column(i), U.column(j))) < 3.0 / std::sqrt(n));
    }
  }
  SUBCASE("single Gaussian edge") {
    VinePath m = VinePath::independent(pair_structure());
    m.edges[0][0] = {FamilyId::gaussian(), {param_to_tau(FamilyId::gaussian(), 0.5)}};
    const DataMatrix U = simulate(m, 20000, 1, rng).front();
    CHECK(empirical_kendall_tau(U.column(0), U.column(1)) == doctest::Approx(1.0 / 3.0).epsilon(0.015 * 3.0));
  }
  SUBCASE("same seed, same draws") {
    const GenerativeSpec spec = six_dim_example_spec();
    Rng a(7), b(7);
    CHECK(simulate(spec, 50, 2, a) == simulate(spec, 50, 2, b));
  }
}

TEST_CASE("inverse Rosenblatt on a three-dimensional Gaussian vine") {
  // D-vine 1-2-3 with rho12, rho23 and partial correlation rho13;2
  const double r12 = 0.6, r23 = -0.4, p13 = 0.5;
  const double r13 = p13 * std::sqrt((1 - r12 * r12) * (1 - r23 * r23)) + r12 * r23;
  RVineStructure s(3);
  s.add_tree({VineEdge{1, 1, 2, {}, 1, 2}, VineEdge{1, 2, 3, {}, 2, 3}});
  s.add_tree({VineEdge{2, 1, 3, {2}, 0, 1}});
  VinePath m = VinePath::independent(s);
  const FamilyId g = FamilyId::gaussian();
  m.edges[0][0] = {g, {param_to_tau(g, r12)}};
  m.edges[0][1] = {g, {param_to_tau(g, r23)}};
  m.edges[1][0] = {g, {param_to_tau(g, p13)}};
  Rng rng(11);
  const std::size_t n = 100000;
  const DataMatrix U = simulate(m, n, 1, rng).front();
  std::vector<std::vector<double>> x(3, std::vector<double>(n));
  for (int j = 0; j < 3; ++j)
    for (std::size_t t = 0; t < n; ++t) x[j][t] = normal_quantile(U(t, j));
  CHECK(std::abs(pearson(x[0], x[1]) - r12) < 0.02);
  CHECK(std::abs(pearson(x[1], x[2]) - r23) < 0.02);
  CHECK(std::abs(pearson(x[0], x[2]) - r13) < 0.02);
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(stats::mean(x[j])) < 0.02);
    CHECK(std::abs(stats::variance(x[j]) - 1.0) < 0.02);
  }
}

TEST_CASE("inverse Rosenblatt on random structures reproduces tree-1 margins") {
  Rng rng(19);
  const FamilySet fams = {FamilyId::gaussian(), FamilyId::student_t(4), FamilyId::eclayton(), FamilyId::egumbel()};
  for (int rep = 0; rep < 12; ++rep) {
    const int d = 3 + rep % 4;
    const RVineStructure s = oracle::random_structure(d, rng, StructureClass::General);
    VinePath m = VinePath::independent(s);
    for (auto& tree : m.edges)
      for (PairPath& p : tree) {
        p.family = fams[rng.next_u64() % fams.size()];
        p.tau = {(rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.2 + 0.5 * rng.uniform())};
      }
    const std::size_t n = 20000;
    const DataMatrix U = simulate(m, n, 1, rng).front();
    for (int j = 0; j < d; ++j) CHECK(stats::ks_one_sample_p(U.column(j), [](double u) { return u; }) > 1e-4);
    for (std::size_t i = 0; i < s.tree(1).size(); ++i) {
      const VineEdge& e = s.edge(1, i);
      INFO("rep " << rep << " edge " << e.label() << " " << m.edges[0][i].family.name());
      CHECK(std::abs(empirical_kendall_tau(U.column(e.a - 1), U.column(e.b - 1)) - m.edges[0][i].tau[0]) < 0.02);
    }
  }
}

TEST_CASE("cross-sectional Kendall's tau") {
  Rng rng(5);
  SUBCASE("comonotone replicates") {
    std::vector<DataMatrix> reps(10, DataMatrix(3, 2));
    for (std::size_t r = 0; r < reps.size(); ++r)
      for (std::size_t t = 0; t < 3; ++t) reps[r](t, 0) = reps[r](t, 1) = (r + 0.5) / 10.0;
    for (double tau : cross_sectional_tau(reps, 1, 2)) CHECK(tau == 1.0);
    CHECK_THROWS(cross_sectional_tau(std::vector<DataMatrix>(1, DataMatrix(3, 2)), 1, 2));
  }
  SUBCASE("independence") {
    const VinePath m = VinePath::independent(pair_structure());
    const std::size_t n = 400;
    const auto reps = simulate(m, 200, n, rng);
    const auto tau = cross_sectional_tau(reps, 1, 2);
    const auto inside = std::count_if(tau.begin(), tau.end(), [&](double x) { return std::abs(x) < 2.5 / std::sqrt(n); });
    CHECK(inside >= 0.95 * tau.size());
  }
  SUBCASE("constant Gaussian pair") {
    VinePath m = VinePath::independent(pair_structure());
    m.edges[0][0] = {FamilyId::gaussian(), {1.0 / 3.0}};
    const auto tau = cross_sectional_tau(simulate(m, 100, 300, rng), 1, 2);
    CHECK(stats::mean(tau) == doctest::Approx(1.0 / 3.0).epsilon(0.01 * 3.0));
  }
  SUBCASE("six-dimensional spec: tree-1 dynamic edges track their tau paths") {
    const GenerativeSpec spec = six_dim_example_spec();
    const std::size_t T = 300;
    const VinePath path = spec.realize(T, rng);
    const auto reps = simulate(path, T, 500, rng);
    int dynamic_edges = 0;
    for (std::size_t i = 0; i < spec.edges[0].size(); ++i) {
      if (spec.edges[0][i].type != DependenceType::Dynamic) continue;
      ++dynamic_edges;
      const VineEdge& e = spec.structure.edge(1, i);
      const auto tau = cross_sectional_tau(reps, e.a, e.b);
      INFO("edge " << e.label());
      CHECK(pearson(tau, path.edges[0][i].tau) > 0.8);
    }
    CHECK(dynamic_edges == 3);
  }
}

TEST_CASE("generative spec from matrices") {
  const GenerativeSpec spec = six_dim_example_spec();
  CHECK(spec.structure == six_dim_example_structure());
  auto find = [&](int level, int a, int b, std::vector<int> D) -> const EdgeSpec& {
    const int i = spec.structure.find_edge(level, a, b, D);
    REQUIRE(i >= 0);
    return spec.edges[level - 1][i];
  };
  const EdgeSpec& e36 = find(1, 3, 6, {});
  CHECK(e36.type == DependenceType::Dynamic);
  CHECK(e36.family == FamilyId::gaussian());
  CHECK(e36.params == Ar1Params{0.9, 0.95, 0.10});
  const EdgeSpec& e12 = find(1, 1, 2, {});
  CHECK(e12.family == FamilyId::student_t(4));
  CHECK(e12.params == Ar1Params{0.6, 0.98, 0.03});
  CHECK(find(1, 4, 6, {}).family == FamilyId::eclayton());
  CHECK(find(1, 2, 6, {}).type == DependenceType::Static);
  CHECK(find(1, 2, 6, {}).s == 0.8);
  CHECK(find(1, 5, 6, {}).family == FamilyId::gaussian());
  CHECK(find(1, 5, 6, {}).s == 1.0);
  CHECK(find(2, 3, 5, {6}).params == Ar1Params{0.3, 0.98, 0.05});
  CHECK(find(2, 1, 6, {2}).params == Ar1Params{0.4, 0.90, 0.10});
  CHECK(find(2, 1, 6, {2}).family == FamilyId::student_t(4));
  CHECK(find(2, 4, 5, {6}).family == FamilyId::egumbel());
  CHECK(find(2, 4, 5, {6}).s == 0.3);
  CHECK(find(2, 2, 5, {6}).type == DependenceType::Zero);
  CHECK(find(3, 1, 5, {2, 6}).family == FamilyId::eclayton());
  CHECK(find(3, 1, 5, {2, 6}).s == 0.3);
  CHECK(find(3, 3, 4, {5, 6}).type == DependenceType::Zero);
  for (int l = 4; l <= 5; ++l)
    for (const EdgeSpec& e : spec.edges[l - 1]) CHECK(e.type == DependenceType::Zero);

  // matrices round trip (in the to_matrix layout)
  const SpecMatrices m = spec_to_matrices(spec);
  CHECK(spec_from_matrices(m) == spec);

  SpecMatrices bad = m;
  bad.phi[5 * 6 + 0] = 1.5;
  bad.family[5 * 6 + 0] = "gaussian";
  bad.sigma[5 * 6 + 0] = 0.1;
  CHECK_THROWS_AS(spec_from_matrices(bad), std::invalid_argument);
}

TEST_CASE("copula plps bookkeeping") {
  Rng rng(8);
  const GenerativeSpec spec = six_dim_example_spec();
  const VinePath path = spec.realize(260, rng);
  const DataMatrix all = simulate(path, 260, 1, rng).front();
  const DataMatrix train = all.slice_rows(0, 200), test = all.slice_rows(200, 60);
  FitConfig cfg;
  cfg.sampler.R = 40;
  cfg.sampler.k = 2;
  cfg.sampler.burnin = 10;
  cfg.threads = 1;
  cfg.fixed_structure = spec.structure;

  SUBCASE("all-zero fit scores zero") {
    FitConfig z = cfg;
    z.se_multiplier = std::numeric_limits<double>::infinity();
    const VineFitResult f = fit(train, z);
    for (const auto& tree : f.edges)
      for (const EdgeFit& e : tree) CHECK(e.type == DependenceType::Zero);
    CHECK(loglik_at_point_estimates(f, train) == 0.0);
    const PlpsResult p = copula_plps(f, train, test);
    for (double x : p.per_step) CHECK(x == 0.0);
  }
  SUBCASE("additivity and determinism") {
    const VineFitResult f = fit(train, cfg);
    ForecastConfig fc;
    SUBCASE("grid filter") { fc.update = StateUpdate::Filter; }
    SUBCASE("slice sweeps") { fc.update = StateUpdate::Ess; }
    const PlpsResult p = copula_plps(f, train, test, fc);
    REQUIRE(p.per_step.size() == 60);
    double cum = 0.0;
    for (std::size_t h = 0; h < 60; ++h) {
      double s = 0.0;
      for (const auto& tree : p.per_edge)
        for (const auto& e : tree) s += e[h];
      CHECK(p.per_step[h] == s);
      cum += s;
      CHECK(p.cumulative[h] == cum);
    }
    const PlpsResult q = copula_plps(f, train, test, fc);
    CHECK(p.per_step == q.per_step);
    CHECK(p.cumulative.back() > 0.0);
    CHECK_THROWS(copula_plps(f, test, test));
  }
}

TEST_CASE("forecast state filter matches a quadrature oracle") {
  struct Case {
    FamilyId family;
    Ar1Params p;
  };
  for (const Case& c : {Case{FamilyId::gaussian(), {0.5, 0.9, 0.2}}, Case{FamilyId::eclayton(), {-0.4, 0.8, 0.3}},
                        Case{FamilyId::student_t(4), {0.7, 0.97, 0.08}}}) {
    CAPTURE(c.family.name());
    Rng rng(41);
    const std::size_t T = 25, H = 8;
    std::vector<double> tau(T + H);
    double s = c.p.mu;
    for (double& v : tau) {
      s = c.p.mu + c.p.phi * (s - c.p.mu) + c.p.sigma * rng.normal();
      v = std::tanh(s);
    }
    VinePath m = VinePath::independent(pair_structure());
    m.edges[0][0] = {c.family, tau};
    const DataMatrix all = simulate(m, T + H, 1, rng).front();
    std::vector<double> ua(T + H), ub(T + H);
    for (std::size_t t = 0; t < T + H; ++t) {
      ua[t] = all(t, 0);
      ub[t] = all(t, 1);
    }
    const VineFitResult f = frozen_dynamic_fit(c.family, c.p, T);
    const PlpsResult r = copula_plps(f, all.slice_rows(0, T), all.slice_rows(T, H));
    for (std::size_t h = 0; h < H; ++h) {
      const double mode = predictive_mode_oracle(c.family, c.p, ua, ub, T + h);
      const double expected = log_density_tau(c.family, ua[T + h], ub[T + h], clamp_tau(c.family, std::tanh(mode)));
      CHECK(std::abs(r.per_step[h] - expected) < 2e-4);
    }
  }
  CHECK(parse_state_update(to_string(StateUpdate::Ess)) == StateUpdate::Ess);
  CHECK(parse_state_update(to_string(StateUpdate::Filter)) == StateUpdate::Filter);
  CHECK_THROWS_AS(parse_state_update("kalman"), std::invalid_argument);
}

TEST_CASE("filtered dynamic forecasts beat the stationary-mean tau") {
  const Ar1Params p{0.5, 0.97, 0.12};
  for (std::uint64_t seed : {1, 2, 3}) {
    Rng rng(seed);
    const std::size_t T = 500, H = 300;
    const GenerativeSpec spec{pair_structure(), {{EdgeSpec{DependenceType::Dynamic, FamilyId::gaussian(), p}}}};
    const VinePath m = spec.realize(T + H, rng);
    const DataMatrix all = simulate(m, T + H, 1, rng).front();
    const PlpsResult r = copula_plps(frozen_dynamic_fit(FamilyId::gaussian(), p, T), all.slice_rows(0, T),
                                     all.slice_rows(T, H));
    double flat = 0.0;
    for (std::size_t t = T; t < T + H; ++t) flat += log_density_tau(FamilyId::gaussian(), all(t, 0), all(t, 1), std::tanh(p.mu));
    CHECK(r.cumulative.back() > flat);
  }
}

TEST_CASE("static fit beats independence in predictive score on static data") {
  Rng rng(12);
  RVineStructure s(3);
  s.add_tree({VineEdge{1, 1, 2, {}, 1, 2}, VineEdge{1, 2, 3, {}, 2, 3}});
  s.add_tree({VineEdge{2, 1, 3, {2}, 0, 1}});
  VinePath m = VinePath::independent(s);
  m.edges[0][0] = {FamilyId::gaussian(), {0.5}};
  m.edges[0][1] = {FamilyId::gaussian(), {0.3}};
  m.edges[1][0] = {FamilyId::gaussian(), {0.2}};
  int wins = 0;
  for (int rep = 0; rep < 3; ++rep) {
    const DataMatrix all = simulate(m, 400, 1, rng).front();
    FitConfig cfg;
    cfg.sampler.R = 60;
    cfg.sampler.k = 2;
    cfg.sampler.burnin = 10;
    cfg.sampler.seed = 100 + rep;
    cfg.allow_dynamic = false;
    const VineFitResult f = fit(all.slice_rows(0, 300), cfg);
    const PlpsResult p = copula_plps(f, all.slice_rows(0, 300), all.slice_rows(300, 100));
    if (p.cumulative.back() > 0.0) ++wins;
  }
  CHECK(wins == 3);
}
