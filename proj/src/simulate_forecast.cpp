#include "dynvine/simulate_forecast.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>

#include "dynvine/kendall.hpp"

namespace dynvine {

namespace {

constexpr std::uint64_t kForecastTag = 0x464F5245;  // "FORE"

std::vector<int> sorted_list(std::uint32_t mask) {
  std::vector<int> v;
  for (int x = 1; x <= 32; ++x)
    if (mask & (1u << (x - 1))) v.push_back(x);
  return v;
}

double padded_kde_mode(std::span<const double> v, double lo_limit, double hi_limit) {
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  if (*mn == *mx) return *mn;
  const double pad = 0.25 * (*mx - *mn);
  return kde_mode(v, std::max(lo_limit, *mn - pad), std::min(hi_limit, *mx + pad));
}

// Predictive density of an AR(1) state on an equally spaced grid, updated by
// the log-density of one pair copula with a fixed family.
class StateGridFilter {
 public:
  StateGridFilter(FamilyId family, const Ar1Params& p) : family_(family), p_(p) {
    const double s_max = std::atanh(1.0 - 1e-6);
    const double sd0 = p.sigma / std::sqrt(1.0 - p.phi * p.phi);
    const double lo = std::max(-s_max, std::min(p.mu, s_max) - 7.0 * sd0);
    const double hi = std::min(s_max, std::max(p.mu, -s_max) + 7.0 * sd0);
    const double want = std::ceil((hi - lo) / (p.sigma / 10.0)) + 1.0;
    const auto n = static_cast<std::size_t>(std::clamp(std::isfinite(want) ? want : 0.0, 401.0, 8001.0));
    step_ = (hi - lo) / static_cast<double>(n - 1);
    grid_.resize(n);
    theta_.resize(n);
    pred_.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      grid_[j] = lo + step_ * static_cast<double>(j);
      theta_[j] = tau_to_param(family, clamp_tau(family, std::tanh(grid_[j]))).theta;
      const double z = (grid_[j] - p.mu) / sd0;
      pred_[j] = std::exp(-0.5 * z * z);
    }
    normalize(pred_);
  }

  /// Mode of the current predictive density, refined by a parabola through
  /// the log density at the largest grid value and its neighbours.
  double mode() const {
    const auto j = static_cast<std::size_t>(std::max_element(pred_.begin(), pred_.end()) - pred_.begin());
    if (j == 0 || j + 1 == pred_.size() || !(pred_[j - 1] > 0.0) || !(pred_[j + 1] > 0.0)) return grid_[j];
    const double a = std::log(pred_[j - 1]), b = std::log(pred_[j]), c = std::log(pred_[j + 1]);
    const double den = a - 2.0 * b + c;
    return den < 0.0 ? grid_[j] + 0.5 * step_ * (a - c) / den : grid_[j];
  }

  /// Conditions on one observation and moves to the next time point.
  void observe(double ua, double ub) {
    const std::size_t n = grid_.size();
    std::vector<double> ll(n);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      ll[j] = pred_[j] > 0.0 ? log_density(family_, ua, ub, theta_[j]) : -std::numeric_limits<double>::infinity();
      if (std::isnan(ll[j])) ll[j] = -std::numeric_limits<double>::infinity();
      mx = std::max(mx, ll[j]);
    }
    std::vector<double> post(n, 0.0);
    if (std::isfinite(mx)) {
      for (std::size_t j = 0; j < n; ++j) post[j] = pred_[j] * std::exp(ll[j] - mx);
      normalize(post);
    } else {
      post = pred_;
    }
    std::fill(pred_.begin(), pred_.end(), 0.0);
    const double reach = 6.0 * p_.sigma;
    for (std::size_t k = 0; k < n; ++k) {
      if (post[k] < 1e-300) continue;
      const double c = p_.mu + p_.phi * (grid_[k] - p_.mu);
      const auto first = index_at(c - reach, true), last = index_at(c + reach, false);
      if (first > last) {
        pred_[nearest(c)] += post[k];
        continue;
      }
      double total = 0.0;
      for (std::size_t j = first; j <= last; ++j) {
        const double z = (grid_[j] - c) / p_.sigma;
        total += std::exp(-0.5 * z * z);
      }
      if (!(total > 0.0)) continue;
      for (std::size_t j = first; j <= last; ++j) {
        const double z = (grid_[j] - c) / p_.sigma;
        pred_[j] += post[k] * std::exp(-0.5 * z * z) / total;
      }
    }
    normalize(pred_);
  }

 private:
  // Smallest (up) or largest (!up) grid index inside [x, ...] or [..., x], clamped to the grid.
  std::size_t index_at(double x, bool up) const {
    const double r = (x - grid_.front()) / step_;
    const double v = up ? std::ceil(r) : std::floor(r);
    return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(grid_.size() - 1)));
  }
  std::size_t nearest(double x) const {
    const double r = std::round((x - grid_.front()) / step_);
    return static_cast<std::size_t>(std::clamp(r, 0.0, static_cast<double>(grid_.size() - 1)));
  }
  static void normalize(std::vector<double>& v) {
    const double z = std::accumulate(v.begin(), v.end(), 0.0);
    if (z > 0.0)
      for (double& x : v) x /= z;
  }

  FamilyId family_;
  Ar1Params p_;
  double step_ = 0.0;
  std::vector<double> grid_, theta_, pred_;
};

}  // namespace

std::string to_string(StateUpdate u) { return u == StateUpdate::Filter ? "filter" : "ess"; }

StateUpdate parse_state_update(std::string_view name) {
  if (name == "filter") return StateUpdate::Filter;
  if (name == "ess") return StateUpdate::Ess;
  throw std::invalid_argument("unknown state update '" + std::string(name) + "' (expected filter or ess)");
}

void GenerativeSpec::check() const {
  if (!structure.complete()) throw std::invalid_argument("GenerativeSpec: structure is incomplete");
  if (static_cast<int>(edges.size()) != structure.levels())
    throw std::invalid_argument("GenerativeSpec: parameter trees do not match the structure");
  for (int l = 1; l <= structure.levels(); ++l) {
    if (edges[l - 1].size() != structure.tree(l).size())
      throw std::invalid_argument("GenerativeSpec: wrong number of edges in tree " + std::to_string(l));
    for (std::size_t i = 0; i < edges[l - 1].size(); ++i) {
      const EdgeSpec& e = edges[l - 1][i];
      const std::string where = " (edge " + structure.edge(l, i).label() + ")";
      if (e.type == DependenceType::Dynamic && e.tau_path.empty() && !e.params.valid())
        throw std::invalid_argument("GenerativeSpec: invalid AR(1) parameters" + where);
      if (e.type != DependenceType::Zero && e.family == FamilyId::independence())
        throw std::invalid_argument("GenerativeSpec: a dependent edge needs a non-independence family" + where);
    }
  }
}

VinePath GenerativeSpec::realize(std::size_t T, Rng& rng) const {
  check();
  VinePath m = VinePath::independent(structure);
  StateTrajectory s(T + 1);
  for (std::size_t l = 0; l < edges.size(); ++l)
    for (std::size_t i = 0; i < edges[l].size(); ++i) {
      const EdgeSpec& e = edges[l][i];
      PairPath& p = m.edges[l][i];
      if (e.type == DependenceType::Zero) continue;
      p.family = e.family;
      if (!e.tau_path.empty()) {
        p.tau = e.tau_path;
      } else if (e.type == DependenceType::Static) {
        p.tau = {std::tanh(e.s)};
      } else {
        sample_prior_trajectory(e.params, s, rng);
        p.tau.resize(T);
        for (std::size_t t = 0; t < T; ++t) p.tau[t] = std::tanh(s[t + 1]);
      }
    }
  return m;
}

GenerativeSpec spec_from_matrices(const SpecMatrices& m) {
  const int d = m.d;
  const std::size_t n = static_cast<std::size_t>(d) * d;
  if (d < 2) throw std::invalid_argument("spec: dimension must be at least 2");
  if (m.structure.size() != n || m.family.size() != n || m.mu.size() != n || m.phi.size() != n ||
      m.sigma.size() != n)
    throw std::invalid_argument("spec: every matrix must be " + std::to_string(d) + " x " + std::to_string(d));
  GenerativeSpec spec;
  spec.structure = from_matrix(m.structure, d);
  for (int l = 1; l < d; ++l) spec.edges.emplace_back(spec.structure.tree(l).size());
  for (int j = 0; j < d - 1; ++j)
    for (int i = j + 1; i < d; ++i) {
      const std::size_t c = static_cast<std::size_t>(i) * d + j;
      const int v = m.structure[j * d + j], y = m.structure[c];
      std::vector<int> D;
      for (int r = i + 1; r < d; ++r) D.push_back(m.structure[static_cast<std::size_t>(r) * d + j]);
      std::sort(D.begin(), D.end());
      const int level = d - i;
      const int idx = spec.structure.find_edge(level, std::min(v, y), std::max(v, y), D);
      if (idx < 0) throw std::logic_error("spec: edge of cell (" + std::to_string(i + 1) + ", " + std::to_string(j + 1) + ") not found");
      EdgeSpec& e = spec.edges[level - 1][idx];
      try {
        e.family = FamilyId::parse(m.family[c]);
      } catch (const std::exception& ex) {
        throw std::invalid_argument("spec: family in row " + std::to_string(i + 1) + ", column " +
                                    std::to_string(j + 1) + ": " + ex.what());
      }
      if (e.family == FamilyId::independence()) {
        e.type = DependenceType::Zero;
      } else if (m.phi[c] == 0.0 && m.sigma[c] == 0.0) {
        e.type = DependenceType::Static;
        e.s = m.mu[c];
      } else {
        e.type = DependenceType::Dynamic;
        e.params = {m.mu[c], m.phi[c], m.sigma[c]};
        if (!e.params.valid())
          throw std::invalid_argument("spec: invalid AR(1) parameters in row " + std::to_string(i + 1) +
                                      ", column " + std::to_string(j + 1));
      }
    }
  spec.check();
  return spec;
}

SpecMatrices spec_to_matrices(const GenerativeSpec& spec) {
  spec.check();
  SpecMatrices m;
  const int d = m.d = spec.structure.dim();
  const std::size_t n = static_cast<std::size_t>(d) * d;
  m.structure = to_matrix(spec.structure);
  m.family.assign(n, "");
  m.mu.assign(n, 0.0);
  m.phi.assign(n, 0.0);
  m.sigma.assign(n, 0.0);
  const auto cells = matrix_cells(spec.structure);
  for (std::size_t l = 0; l < spec.edges.size(); ++l)
    for (std::size_t i = 0; i < spec.edges[l].size(); ++i) {
      const EdgeSpec& e = spec.edges[l][i];
      if (!e.tau_path.empty()) throw std::invalid_argument("spec_to_matrices: fixed tau paths cannot be written as matrices");
      const std::size_t c = static_cast<std::size_t>(cells[l][i].row) * d + cells[l][i].col;
      m.family[c] = e.type == DependenceType::Zero ? "indep" : e.family.name();
      if (e.type == DependenceType::Static) {
        m.mu[c] = e.s;
      } else if (e.type == DependenceType::Dynamic) {
        m.mu[c] = e.params.mu;
        m.phi[c] = e.params.phi;
        m.sigma[c] = e.params.sigma;
      }
    }
  return m;
}

GenerativeSpec six_dim_example_spec() {
  SpecMatrices m;
  m.d = 6;
  // clang-format off
  m.structure = {
    3, 0, 0, 0, 0, 0,
    1, 1, 0, 0, 0, 0,
    2, 4, 4, 0, 0, 0,
    4, 5, 2, 2, 0, 0,
    5, 6, 5, 5, 5, 0,
    6, 2, 6, 6, 6, 6,
  };
  m.family = {
    "",         "",         "",         "",        "",         "",
    "indep",    "",         "",         "",        "",         "",
    "indep",    "indep",    "",         "",        "",         "",
    "indep",    "eclayton", "indep",    "",        "",         "",
    "gaussian", "t4",       "egumbel",  "indep",   "",         "",
    "gaussian", "t4",       "eclayton", "egumbel", "gaussian", "",
  };
  m.mu = {
    0,   0,   0,   0,   0,   0,
    0.0, 0,   0,   0,   0,   0,
    0.0, 0.0, 0,   0,   0,   0,
    0.0, 0.3, 0.0, 0,   0,   0,
    0.3, 0.4, 0.3, 0.0, 0,   0,
    0.9, 0.6, 0.8, 0.8, 1.0, 0,
  };
  m.phi = {
    0,    0,    0,    0,    0,    0,
    0.00, 0,    0,    0,    0,    0,
    0.00, 0.00, 0,    0,    0,    0,
    0.00, 0.00, 0.00, 0,    0,    0,
    0.98, 0.90, 0.00, 0.00, 0,    0,
    0.95, 0.98, 0.90, 0.00, 0.00, 0,
  };
  m.sigma = {
    0,    0,    0,    0,    0,    0,
    0.00, 0,    0,    0,    0,    0,
    0.00, 0.00, 0,    0,    0,    0,
    0.00, 0.00, 0.00, 0,    0,    0,
    0.05, 0.10, 0.00, 0.00, 0,    0,
    0.10, 0.03, 0.05, 0.00, 0.00, 0,
  };
  // clang-format on
  for (int i = 0; i < m.d; ++i)
    for (int j = i; j < m.d; ++j) m.family[i * m.d + j] = "indep";
  return spec_from_matrices(m);
}

RosenblattPlan::RosenblattPlan(const RVineStructure& s) : d_(s.dim()) {
  if (!s.complete()) throw std::invalid_argument("RosenblattPlan: structure is incomplete");
  if (d_ > 32) throw std::invalid_argument("RosenblattPlan: at most 32 variables are supported");
  const std::vector<int> M = to_matrix(s);
  auto at = [&](int i, int j) { return M[static_cast<std::size_t>(i) * d_ + j]; };
  std::map<std::pair<int, std::uint32_t>, int> slots;
  auto new_slot = [&](int var, std::uint32_t mask) {
    const int id = n_slots_++;
    slots[{var, mask}] = id;
    return id;
  };
  auto bit = [](int v) { return 1u << (v - 1); };

  // u_{y|D} for an already sampled y, built from lower trees when missing.
  std::function<int(int, std::uint32_t)> ensure = [&](int y, std::uint32_t D) -> int {
    if (auto it = slots.find({y, D}); it != slots.end()) return it->second;
    const int level = std::popcount(D);
    const auto& tree = s.tree(level);
    for (std::size_t i = 0; i < tree.size(); ++i) {
      const VineEdge& e = tree[i];
      if (e.a != y && e.b != y) continue;
      const int z = e.a == y ? e.b : e.a;
      if (!(D & bit(z))) continue;
      std::uint32_t cond = 0;
      for (int c : e.conditioning) cond |= bit(c);
      if (cond != (D & ~bit(z))) continue;
      const int main = ensure(y, cond);
      const int other = ensure(z, cond);
      const int out = new_slot(y, D);
      ops_.push_back({Op::Forward, level, static_cast<int>(i), e.a == y, out, main, other});
      return out;
    }
    throw std::logic_error("RosenblattPlan: no edge yields u_" + std::to_string(y) + "|" +
                           std::to_string(D));
  };

  result_slot_.assign(d_, -1);
  for (int j = d_ - 1; j >= 0; --j) {
    const int v = at(j, j);
    std::uint32_t S = 0;
    for (int i = j + 1; i < d_; ++i) S |= bit(at(i, j));
    order_.push_back(v);
    uniform_slot_.push_back(new_slot(v, S));
    for (int i = j + 1; i < d_; ++i) {
      const int y = at(i, j);
      std::uint32_t D = 0;
      for (int r = i + 1; r < d_; ++r) D |= bit(at(r, j));
      const int level = d_ - i;
      const int idx = s.find_edge(level, std::min(v, y), std::max(v, y), sorted_list(D));
      if (idx < 0) throw std::logic_error("RosenblattPlan: matrix edge not found");
      const int other = ensure(y, D);
      const int main = slots.at({v, D | bit(y)});
      const int out = new_slot(v, D);
      ops_.push_back({Op::Inverse, level, idx, v < y, out, main, other});
    }
    result_slot_[v - 1] = slots.at({v, 0u});
  }
}

void RosenblattPlan::apply(const std::vector<std::vector<CopulaParam>>& thetas, std::span<const double> w,
                           std::span<double> u) const {
  std::vector<double> slot(n_slots_);
  for (int k = 0; k < d_; ++k) slot[uniform_slot_[k]] = w[k];
  for (const Op& op : ops_) {
    const CopulaParam& p = thetas[op.level - 1][op.index];
    const double m = slot[op.in_main], o = slot[op.in_other];
    if (op.kind == Op::Inverse) {
      slot[op.out] = op.first_is_a ? h_forward_inverse(p.family, m, o, p.theta)
                                   : h_backward_inverse(p.family, o, m, p.theta);
    } else {
      slot[op.out] = op.first_is_a ? h_forward(p.family, m, o, p.theta) : h_backward(p.family, o, m, p.theta);
    }
  }
  for (int v = 0; v < d_; ++v) u[v] = slot[result_slot_[v]];
}

std::vector<DataMatrix> simulate(const VinePath& model, std::size_t T, std::size_t n_reps, Rng& rng) {
  model.check(T);
  const int d = model.structure.dim();
  const RosenblattPlan plan(model.structure);
  std::vector<DataMatrix> out(n_reps, DataMatrix(T, d));
  std::vector<std::vector<CopulaParam>> thetas(model.edges.size());
  std::vector<double> w(d), u(d);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t l = 0; l < model.edges.size(); ++l) {
      thetas[l].resize(model.edges[l].size());
      for (std::size_t i = 0; i < model.edges[l].size(); ++i) {
        const PairPath& p = model.edges[l][i];
        thetas[l][i] = tau_to_param(p.family, clamp_tau(p.family, p.tau_at(t)));
      }
    }
    for (std::size_t r = 0; r < n_reps; ++r) {
      for (double& x : w) x = rng.uniform_open();
      plan.apply(thetas, w, u);
      for (int v = 0; v < d; ++v) out[r](t, v) = u[v];
    }
  }
  return out;
}

std::vector<DataMatrix> simulate(const GenerativeSpec& spec, std::size_t T, std::size_t n_reps, Rng& rng) {
  std::vector<DataMatrix> out;
  out.reserve(n_reps);
  for (std::size_t r = 0; r < n_reps; ++r) {
    const VinePath path = spec.realize(T, rng);
    out.push_back(std::move(simulate(path, T, 1, rng).front()));
  }
  return out;
}

std::vector<double> cross_sectional_tau(const std::vector<DataMatrix>& samples, int i, int j) {
  if (samples.size() < 2) throw std::invalid_argument("cross_sectional_tau: need at least two replicates");
  const std::size_t T = samples[0].rows();
  const int d = static_cast<int>(samples[0].cols());
  if (i < 1 || j < 1 || i > d || j > d || i == j) throw std::invalid_argument("cross_sectional_tau: bad variable pair");
  std::vector<double> x(samples.size()), y(samples.size()), tau(T);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t r = 0; r < samples.size(); ++r) {
      if (samples[r].rows() != T) throw std::invalid_argument("cross_sectional_tau: replicates differ in length");
      x[r] = samples[r](t, i - 1);
      y[r] = samples[r](t, j - 1);
    }
    tau[t] = empirical_kendall_tau(x, y);
  }
  return tau;
}

PlpsResult copula_plps(const VineFitResult& fit, const DataMatrix& train, const DataMatrix& test,
                       const ForecastConfig& config) {
  const int d = fit.structure.dim();
  if (train.rows() != fit.T) throw std::invalid_argument("copula_plps: training data length differs from the fit");
  if (static_cast<int>(train.cols()) != d || static_cast<int>(test.cols()) != d)
    throw std::invalid_argument("copula_plps: column count differs from the fit's dimension");
  if (config.update_sweeps < 0) throw std::invalid_argument("copula_plps: update_sweeps must be non-negative");
  const auto burnin = static_cast<std::size_t>(fit.config.sampler.burnin);
  const VinePath pe = point_estimates(fit);
  const auto history = vine_evaluate(pe, train);
  const std::size_t H = test.rows();

  struct DynEdge {
    FamilyId family;
    Ar1Params params;
    DynamicChainState chain;
    std::optional<StateGridFilter> filter;
    std::vector<double> ua, ub;
  };
  std::vector<std::vector<std::optional<DynEdge>>> dyn(fit.edges.size());
  for (std::size_t l = 0; l < fit.edges.size(); ++l) {
    dyn[l].resize(fit.edges[l].size());
    for (std::size_t i = 0; i < fit.edges[l].size(); ++i) {
      const EdgeFit& ef = fit.edges[l][i];
      if (ef.type != DependenceType::Dynamic) continue;
      const BivariateDraws& dr = ef.draws;
      DynEdge de;
      de.family = pe.edges[l][i].family;
      const std::span<const double> mu(dr.mu().data() + burnin, dr.size() - burnin);
      const std::span<const double> phi(dr.phi().data() + burnin, dr.size() - burnin);
      const std::span<const double> sigma(dr.sigma().data() + burnin, dr.size() - burnin);
      de.params = {padded_kde_mode(mu, -1e300, 1e300), padded_kde_mode(phi, -1.0 + 1e-9, 1.0 - 1e-9),
                   padded_kde_mode(sigma, 1e-12, 1e300)};
      const EdgeSeries& past = history[l][i];
      if (config.update == StateUpdate::Filter) {
        de.filter.emplace(de.family, de.params);
        for (std::size_t t = 0; t < fit.T; ++t) de.filter->observe(past.ua[t], past.ub[t]);
        dyn[l][i] = std::move(de);
        continue;
      }
      std::vector<double> s0(dr.size() - burnin);
      for (std::size_t r = burnin; r < dr.size(); ++r) s0[r - burnin] = dr.state_row(r)[0];
      DynamicChainState& c = de.chain;
      c.params = de.params;
      c.family = de.family;
      c.rng = Rng(derive_seed(config.seed, {kForecastTag, ef.seed}));
      c.states.resize(fit.T + 1);
      c.states[0] = padded_kde_mode(s0, -1e300, 1e300);
      for (std::size_t t = 0; t < fit.T; ++t) c.states[t + 1] = std::atanh(clamp_tau(de.family, pe.edges[l][i].tau_at(t)));
      de.ua = past.ua;
      de.ub = past.ub;
      dyn[l][i] = std::move(de);
    }
  }

  PlpsResult res;
  res.per_step.assign(H, 0.0);
  res.cumulative.assign(H, 0.0);
  res.per_edge.resize(fit.edges.size());
  for (std::size_t l = 0; l < fit.edges.size(); ++l)
    res.per_edge[l].assign(fit.edges[l].size(), std::vector<double>(H, 0.0));

  std::vector<std::array<double, 2>> prev, next;
  for (std::size_t h = 0; h < H; ++h) {
    for (int l = 1; l <= fit.structure.levels(); ++l) {
      const auto& tree = fit.structure.tree(l);
      next.assign(tree.size(), {});
      for (std::size_t i = 0; i < tree.size(); ++i) {
        const EdgeInputs in = edge_inputs(fit.structure, l, i);
        auto input = [&](const NodeSide& ns) {
          return ns.side < 0 ? clip_unit(test(h, ns.node)) : prev[ns.node][ns.side];
        };
        const double ua = input(in.a), ub = input(in.b);
        FamilyId fam = pe.edges[l - 1][i].family;
        double tau = pe.edges[l - 1][i].tau_at(0);
        if (auto& de = dyn[l - 1][i]; de && de->filter) {
          tau = std::tanh(de->filter->mode());
          de->filter->observe(ua, ub);
        } else if (de) {
          DynamicChainState& c = de->chain;
          double s_last = c.states.back();
          if (config.update_sweeps > 0) {
            const PairData data(de->ua, de->ub, FamilySet{de->family});
            double acc = 0.0;
            for (int k = 0; k < config.update_sweeps; ++k) {
              update_states_ess(c, data);
              acc += c.states.back();
            }
            s_last = acc / config.update_sweeps;
          }
          const double s_pred = de->params.mu + de->params.phi * (s_last - de->params.mu);
          tau = std::tanh(s_pred);
          de->ua.push_back(ua);
          de->ub.push_back(ub);
          c.states.push_back(s_pred);
        }
        const CopulaParam cp = tau_to_param(fam, clamp_tau(fam, tau));
        res.per_edge[l - 1][i][h] = log_density(fam, ua, ub, cp.theta);
        next[i] = {h_forward(fam, ua, ub, cp.theta), h_backward(fam, ua, ub, cp.theta)};
      }
      prev.swap(next);
    }
    double total = 0.0;
    for (const auto& tree : res.per_edge)
      for (const auto& e : tree) total += e[h];
    res.per_step[h] = total;
    res.cumulative[h] = (h ? res.cumulative[h - 1] : 0.0) + total;
  }
  return res;
}

}  // namespace dynvine
