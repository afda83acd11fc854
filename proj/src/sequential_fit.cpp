#include "dynvine/sequential_fit.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>

#include "dynvine/kendall.hpp"
#include "dynvine/rng.hpp"

namespace dynvine {

namespace {

constexpr std::uint64_t kEdgeTag = 0x45444745;  // "EDGE"
constexpr std::uint64_t kOrderTag = 0x4F524445;  // "ORDE"

using SeriesPtr = std::shared_ptr<const PseudoSeries>;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Runs fn(i) for i in order on up to `threads` workers. The first exception
/// is rethrown after all workers stop.
void run_tasks(const std::vector<std::size_t>& order, unsigned threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t n = order.size();
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(threads, 1u), n));
  if (workers <= 1) {
    for (std::size_t i : order) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= n) return;
      try {
        fn(order[j]);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::vector<std::size_t> task_order(std::size_t n, const FitConfig& cfg, int level) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (cfg.edge_order_seed) {
    Rng rng(derive_seed(*cfg.edge_order_seed, {kOrderTag, static_cast<std::uint64_t>(level)}));
    std::shuffle(order.begin(), order.end(), rng.engine());
  }
  return order;
}

unsigned worker_count(const FitConfig& cfg) {
  if (!cfg.parallel_edges) return 1;
  return cfg.threads ? cfg.threads : default_thread_count();
}

void check_unit_data(const DataMatrix& U, std::string_view what) {
  for (std::size_t t = 0; t < U.rows(); ++t)
    for (std::size_t j = 0; j < U.cols(); ++j) {
      const double u = U(t, j);
      if (!std::isfinite(u) || u < 0.0 || u > 1.0)
      {
        std::ostringstream msg;
        msg << what << ": value " << u << " at row " << t + 1 << ", column " << j + 1 << " is not in [0, 1]";
        throw std::invalid_argument(msg.str());
      }
    }
}

std::size_t boundary_count(const DataMatrix& U) {
  std::size_t n = 0;
  for (double u : U.data())
    if (u <= kUnitClip || u >= 1.0 - kUnitClip) ++n;
  return n;
}

struct EdgeTaskResult {
  EdgeFit fit;
  SeriesPtr out_a, out_b;
};

EdgeTaskResult fit_edge(const VineEdge& edge, const SeriesPtr& ua, const SeriesPtr& ub, std::span<const double> mode_a,
                        std::span<const double> mode_b, const FitConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const SamplerConfig& sc = cfg.sampler;
  EdgeTaskResult res;
  EdgeFit& ef = res.fit;
  ef.edge = edge;
  ef.seed = edge_seed(sc.seed, edge);

  const std::size_t T = ua->T;
  const bool constant = ua->rows == 1 && ub->rows == 1;
  const PairData init_data(mode_a, mode_b, sc.families);

  std::optional<DynamicChainState> dyn;
  BivariateDraws dyn_draws(SamplerKind::Dynamic, T, sc.families);
  if (cfg.allow_dynamic) {
    dyn = init_dynamic_chain(init_data, derive_seed(ef.seed, {1}), sc.adapt_target);
    dyn_draws.reserve(sc.R);
  }
  StaticChainState stat = init_static_chain(init_data, derive_seed(ef.seed, {2}), sc.adapt_target);
  BivariateDraws stat_draws(SamplerKind::Static, T, sc.families);
  stat_draws.reserve(sc.R);

  for (int r = 0; r < sc.R; ++r) {
    std::optional<PairData> burst;
    if (!constant) burst.emplace(ua->row(r), ub->row(r), sc.families);
    const PairData& data = constant ? init_data : *burst;
    if (dyn) resume_k_steps(*dyn, data, sc.k, dyn_draws);
    resume_k_steps(stat, data, sc.k, stat_draws);
  }
  ef.sweeps_static = stat.sweeps;
  ef.sweeps_dynamic = dyn ? dyn->sweeps : 0;

  ef.waic_stat = estimate_waic(stat_draws, sc.burnin);
  if (dyn) {
    ef.waic_dyn = estimate_waic(dyn_draws, sc.burnin);
    ef.type = select_dependence(*ef.waic_dyn, *ef.waic_stat, cfg.se_multiplier);
  } else {
    const WaicResult zero = zero_waic(T);
    const WaicComparison c = waic_diff_se(*ef.waic_stat, zero);
    const bool upgrade = std::isinf(cfg.se_multiplier) ? false : (c.diff < 0.0 && c.diff <= -cfg.se_multiplier * c.se);
    ef.type = upgrade ? DependenceType::Static : DependenceType::Zero;
  }
  if (ef.type == DependenceType::Dynamic)
    ef.draws = std::move(dyn_draws);
  else if (ef.type == DependenceType::Static)
    ef.draws = std::move(stat_draws);
  if (!cfg.keep_loglik) ef.draws.drop_loglik();
  ef.seconds = seconds_since(t0);
  return res;
}

VineFitResult fit_impl(std::vector<SeriesPtr> level1, std::size_t T, const FitConfig& cfg,
                       const std::vector<std::vector<double>>* raw_columns) {
  const int d = static_cast<int>(level1.size());
  cfg.validate(d);
  const int L = cfg.truncation_level.value_or(d - 1);
  const unsigned workers = worker_count(cfg);
  const auto burnin = static_cast<std::size_t>(cfg.sampler.burnin);

  VineFitResult result;
  result.config = cfg;
  result.T = T;
  result.structure = RVineStructure(d);
  if (T < 50) result.warnings.push_back("only " + std::to_string(T) + " observations; at least 50 are advised");

  std::vector<std::array<SeriesPtr, 2>> nodes(d);
  for (int j = 0; j < d; ++j) nodes[j][0] = level1[j];

  for (int level = 1; level <= d - 1; ++level) {
    const auto t_level = std::chrono::steady_clock::now();
    auto series_of = [&](const NodeSide& ns) -> const SeriesPtr& {
      return nodes[ns.node][ns.side < 0 ? 0 : ns.side];
    };
    const bool active = level <= L;

    // Posterior-mode pseudo data of every node series that may be needed.
    std::map<const PseudoSeries*, std::vector<double>> modes;
    if (active) {
      std::vector<const PseudoSeries*> todo;
      for (const auto& n : nodes)
        for (const auto& sp : n)
          if (sp && sp->rows > 1 && !modes.count(sp.get())) {
            modes[sp.get()];
            todo.push_back(sp.get());
          }
      std::vector<std::size_t> idx(todo.size());
      std::iota(idx.begin(), idx.end(), 0);
      run_tasks(idx, workers, [&](std::size_t i) { modes.at(todo[i]) = posterior_mode_pseudo(*todo[i], burnin); });
    }
    auto mode_of = [&](const SeriesPtr& sp) -> std::span<const double> {
      return sp->rows > 1 ? std::span<const double>(modes.at(sp.get())) : sp->row(0);
    };

    std::vector<VineEdge> tree_edges;
    if (cfg.fixed_structure) {
      tree_edges = cfg.fixed_structure->tree(level);
    } else {
      const std::vector<VineEdge> cand = allowed_edges(result.structure, level);
      std::vector<double> w(cand.size(), 0.0);
      if (active) {
        for (std::size_t c = 0; c < cand.size(); ++c) {
          const EdgeInputs in = edge_inputs(result.structure, cand[c]);
          if (level == 1 && raw_columns) {
            w[c] = std::abs(empirical_kendall_tau((*raw_columns)[in.a.node], (*raw_columns)[in.b.node]));
          } else {
            w[c] = std::abs(empirical_kendall_tau(mode_of(series_of(in.a)), mode_of(series_of(in.b))));
          }
        }
      }
      const std::size_t n_nodes = level == 1 ? static_cast<std::size_t>(d) : result.structure.tree(level - 1).size();
      tree_edges = select_tree(cand, w, n_nodes, cfg.structure_class, level);
    }
    result.structure.add_tree(tree_edges);
    const auto& tree = result.structure.tree(level);

    std::vector<EdgeTaskResult> out(tree.size());
    if (active) {
      run_tasks(task_order(tree.size(), cfg, level), workers, [&](std::size_t i) {
        const EdgeInputs in = edge_inputs(result.structure, level, i);
        const SeriesPtr& a = series_of(in.a);
        const SeriesPtr& b = series_of(in.b);
        EdgeTaskResult r = fit_edge(tree[i], a, b, mode_of(a), mode_of(b), cfg);
        if (level < L) {
          if (r.fit.type == DependenceType::Zero) {
            r.out_a = a;
            r.out_b = b;
          } else {
            auto [pa, pb] = propagate_pseudo(r.fit, *a, *b);
            r.out_a = std::make_shared<const PseudoSeries>(std::move(pa));
            r.out_b = std::make_shared<const PseudoSeries>(std::move(pb));
          }
        }
        out[i] = std::move(r);
      });
    } else {
      for (std::size_t i = 0; i < tree.size(); ++i) {
        out[i].fit.edge = tree[i];
        out[i].fit.seed = edge_seed(cfg.sampler.seed, tree[i]);
      }
    }

    std::vector<std::array<SeriesPtr, 2>> next(tree.size());
    result.edges.emplace_back();
    for (std::size_t i = 0; i < tree.size(); ++i) {
      next[i] = {out[i].out_a, out[i].out_b};
      result.edges.back().push_back(std::move(out[i].fit));
    }
    nodes = std::move(next);
    result.tree_seconds.push_back(seconds_since(t_level));
  }
  return result;
}

}  // namespace

void FitConfig::validate(int d) const {
  sampler.validate();
  if (d < 2) throw std::invalid_argument("fit: need at least two variables");
  if (truncation_level && (*truncation_level < 1 || *truncation_level > d - 1))
    throw std::invalid_argument("fit: truncation level must be in [1, " + std::to_string(d - 1) + "]");
  if (!(se_multiplier >= 0.0)) throw std::invalid_argument("fit: the SE multiplier must be non-negative");
  if (fixed_structure) {
    if (fixed_structure->dim() != d || !fixed_structure->complete())
      throw std::invalid_argument("fit: the fixed structure must be a complete vine on " + std::to_string(d) +
                                  " variables");
    const ValidationReport rep = dynvine::validate(*fixed_structure);
    if (!rep) throw std::invalid_argument("fit: invalid fixed structure: " + rep.message);
  }
}

unsigned default_thread_count() {
  if (const char* env = std::getenv("DYNVINE_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return static_cast<unsigned>(n);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

PseudoSeries PseudoSeries::constant(std::span<const double> u) {
  PseudoSeries s;
  s.rows = 1;
  s.T = u.size();
  s.values.assign(u.begin(), u.end());
  return s;
}

std::uint64_t edge_seed(std::uint64_t master, const VineEdge& e) {
  std::uint64_t h = 0x9A7B1C3D5E6F7081ULL;
  for (int v : e.conditioning) h = splitmix64(h ^ static_cast<std::uint64_t>(v));
  return derive_seed(master, {kEdgeTag, static_cast<std::uint64_t>(e.tree), static_cast<std::uint64_t>(e.a),
                              static_cast<std::uint64_t>(e.b), h});
}

VineFitResult fit(const DataMatrix& U, const FitConfig& config) {
  check_unit_data(U, "fit");
  const std::size_t T = U.rows();
  std::vector<std::vector<double>> cols(U.cols());
  std::vector<SeriesPtr> level1;
  for (std::size_t j = 0; j < U.cols(); ++j) {
    cols[j] = U.column(j);
    std::vector<double> clipped = cols[j];
    for (double& u : clipped) u = clip_unit(u);
    level1.push_back(std::make_shared<const PseudoSeries>(PseudoSeries::constant(clipped)));
  }
  VineFitResult res = fit_impl(std::move(level1), T, config, &cols);
  const std::size_t nb = boundary_count(U);
  if (U.data().size() > 0 && nb * 100 > U.data().size())
    res.warnings.push_back(std::to_string(nb) + " of " + std::to_string(U.data().size()) +
                           " values lie at the clipping bounds");
  return res;
}

VineFitResult fit_from_pseudo_collection(std::span<const DataMatrix> U, const FitConfig& config) {
  if (U.size() != static_cast<std::size_t>(config.sampler.R))
    throw std::invalid_argument("fit_from_pseudo_collection: got " + std::to_string(U.size()) +
                                " data sets but R = " + std::to_string(config.sampler.R));
  const std::size_t T = U[0].rows(), d = U[0].cols();
  std::size_t nb = 0;
  for (std::size_t r = 0; r < U.size(); ++r) {
    if (U[r].rows() != T || U[r].cols() != d)
      throw std::invalid_argument("fit_from_pseudo_collection: data set " + std::to_string(r + 1) +
                                  " has a different shape");
    check_unit_data(U[r], "fit_from_pseudo_collection: data set " + std::to_string(r + 1));
    nb += boundary_count(U[r]);
  }
  std::vector<SeriesPtr> level1;
  for (std::size_t j = 0; j < d; ++j) {
    PseudoSeries s;
    s.rows = U.size();
    s.T = T;
    s.values.resize(s.rows * T);
    for (std::size_t r = 0; r < U.size(); ++r)
      for (std::size_t t = 0; t < T; ++t) s.values[r * T + t] = clip_unit(U[r](t, j));
    level1.push_back(std::make_shared<const PseudoSeries>(std::move(s)));
  }
  VineFitResult res = fit_impl(std::move(level1), T, config, nullptr);
  const std::size_t total = U.size() * T * d;
  if (nb * 100 > total)
    res.warnings.push_back(std::to_string(nb) + " of " + std::to_string(total) + " values lie at the clipping bounds");
  return res;
}

std::pair<PseudoSeries, PseudoSeries> propagate_pseudo(const EdgeFit& fit, const PseudoSeries& ua,
                                                       const PseudoSeries& ub) {
  if (ua.T != ub.T) throw std::invalid_argument("propagate_pseudo: series lengths differ");
  if (fit.type == DependenceType::Zero) return {ua, ub};
  const BivariateDraws& dr = fit.draws;
  const std::size_t R = dr.size(), T = ua.T;
  if (dr.T() != T) throw std::invalid_argument("propagate_pseudo: draws and data lengths differ");
  for (const PseudoSeries* s : {&ua, &ub})
    if (s->rows != 1 && s->rows != R)
      throw std::invalid_argument("propagate_pseudo: series has " + std::to_string(s->rows) + " rows, draws " +
                                  std::to_string(R));
  PseudoSeries oa{R, T, std::vector<double>(R * T)}, ob{R, T, std::vector<double>(R * T)};
  for (std::size_t r = 0; r < R; ++r) {
    const FamilyId fam = dr.family(r);
    const auto a = ua.row(r), b = ub.row(r);
    double* pa = oa.values.data() + r * T;
    double* pb = ob.values.data() + r * T;
    double theta = 0.0;
    if (dr.kind() == SamplerKind::Static) theta = tau_to_param(fam, clamp_tau(fam, dr.tau(r, 0))).theta;
    for (std::size_t t = 0; t < T; ++t) {
      if (dr.kind() == SamplerKind::Dynamic) theta = tau_to_param(fam, clamp_tau(fam, dr.tau(r, t))).theta;
      pa[t] = h_forward(fam, a[t], b[t], theta);
      pb[t] = h_backward(fam, a[t], b[t], theta);
    }
  }
  return {std::move(oa), std::move(ob)};
}

double kde_mode(std::span<const double> values, double lo, double hi, int grid) {
  const std::size_t n = values.size();
  if (n == 0) throw std::invalid_argument("kde_mode: no values");
  if (!(hi > lo) || grid < 2) throw std::invalid_argument("kde_mode: bad grid");
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  if (*mn == *mx) return *mn;

  const double dn = static_cast<double>(n);
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / dn;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (dn - 1.0));
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double p) {
    const double pos = p * (dn - 1.0);
    const auto i = static_cast<std::size_t>(pos);
    const double f = pos - static_cast<double>(i);
    return i + 1 < n ? sorted[i] * (1.0 - f) + sorted[i + 1] * f : sorted[i];
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  const double step = (hi - lo) / grid;
  // Floor at a quarter grid step so a tight cluster still produces a smooth peak.
  const double h = std::max(0.9 * spread * std::pow(dn, -0.2), 0.25 * step);

  std::vector<double> dens(grid, 0.0);
  const double reach = 6.0 * h;
  for (double v : sorted) {
    const int g0 = std::max(0, static_cast<int>(std::floor((v - reach - lo) / step - 0.5)));
    const int g1 = std::min(grid - 1, static_cast<int>(std::ceil((v + reach - lo) / step - 0.5)));
    for (int g = g0; g <= g1; ++g) {
      const double x = lo + (g + 0.5) * step;
      const double z = (x - v) / h;
      dens[g] += std::exp(-0.5 * z * z);
    }
  }
  const auto best = std::max_element(dens.begin(), dens.end()) - dens.begin();
  return lo + (static_cast<double>(best) + 0.5) * step;
}

std::vector<double> posterior_mode_pseudo(const PseudoSeries& u, std::size_t burnin) {
  if (u.rows == 1) return {u.values.begin(), u.values.end()};
  if (u.rows < burnin + 2) throw std::invalid_argument("posterior_mode_pseudo: fewer than two rows after burn-in");
  std::vector<double> out(u.T), col(u.rows - burnin);
  for (std::size_t t = 0; t < u.T; ++t) {
    for (std::size_t r = burnin; r < u.rows; ++r) col[r - burnin] = u.values[r * u.T + t];
    out[t] = kde_mode(col);
  }
  return out;
}

FamilyId family_mode(const BivariateDraws& draws, std::size_t burnin) {
  if (draws.size() <= burnin) throw std::invalid_argument("family_mode: no draws after burn-in");
  std::vector<std::size_t> count(draws.families().size(), 0);
  for (std::size_t r = burnin; r < draws.size(); ++r) ++count[draws.family_index(r)];
  return draws.families()[std::max_element(count.begin(), count.end()) - count.begin()];
}

VinePath point_estimates(const VineFitResult& fit) {
  VinePath m = VinePath::independent(fit.structure);
  const auto burnin = static_cast<std::size_t>(fit.config.sampler.burnin);
  for (std::size_t l = 0; l < fit.edges.size(); ++l)
    for (std::size_t i = 0; i < fit.edges[l].size(); ++i) {
      const EdgeFit& ef = fit.edges[l][i];
      if (ef.type == DependenceType::Zero) continue;
      const BivariateDraws& dr = ef.draws;
      PairPath& p = m.edges[l][i];
      p.family = family_mode(dr, burnin);
      const std::size_t T = ef.type == DependenceType::Dynamic ? dr.T() : 1;
      p.tau.assign(T, 0.0);
      std::vector<double> col(dr.size() - burnin);
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t r = burnin; r < dr.size(); ++r) col[r - burnin] = dr.tau(r, t);
        p.tau[t] = kde_mode(col, -1.0, 1.0);
      }
    }
  return m;
}

double loglik_at_point_estimates(const VineFitResult& fit, const DataMatrix& U) {
  const std::vector<double> ll = vine_log_density(point_estimates(fit), U);
  return std::accumulate(ll.begin(), ll.end(), 0.0);
}

}  // namespace dynvine
