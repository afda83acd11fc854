#include "dynvine/vine_model.hpp"

#include <array>
#include <stdexcept>
#include <string>

namespace dynvine {

VinePath VinePath::independent(const RVineStructure& structure) {
  VinePath m;
  m.structure = structure;
  for (const auto& tree : structure.trees()) m.edges.emplace_back(tree.size());
  return m;
}

void VinePath::check(std::size_t T) const {
  if (static_cast<int>(edges.size()) != structure.levels())
    throw std::invalid_argument("VinePath: expected " + std::to_string(structure.levels()) + " trees of parameters");
  for (int l = 1; l <= structure.levels(); ++l) {
    if (edges[l - 1].size() != structure.tree(l).size())
      throw std::invalid_argument("VinePath: wrong number of edges in tree " + std::to_string(l));
    for (std::size_t i = 0; i < edges[l - 1].size(); ++i) {
      const auto& p = edges[l - 1][i];
      if (p.tau.empty() || (T > 0 && p.tau.size() != 1 && p.tau.size() != T))
        throw std::invalid_argument("VinePath: tau path of edge " + structure.edge(l, i).label() +
                                    " has length " + std::to_string(p.tau.size()));
    }
  }
}

std::vector<std::vector<EdgeSeries>> vine_evaluate(const VinePath& model, const DataMatrix& U) {
  const std::size_t T = U.rows();
  const int d = model.structure.dim();
  if (static_cast<int>(U.cols()) != d) throw std::invalid_argument("vine_evaluate: column count differs from dimension");
  model.check(T);

  std::vector<std::vector<EdgeSeries>> out(model.structure.levels());
  // outputs[node][side][t] of the previous tree; tree 1 reads columns of U.
  std::vector<std::array<std::vector<double>, 2>> prev, next;
  std::vector<std::vector<double>> cols(d);
  for (int j = 0; j < d; ++j) {
    cols[j] = U.column(j);
    for (double& u : cols[j]) u = clip_unit(u);
  }
  auto input = [&](const NodeSide& ns) -> const std::vector<double>& {
    return ns.side < 0 ? cols[ns.node] : prev[ns.node][ns.side];
  };

  for (int l = 1; l <= model.structure.levels(); ++l) {
    const auto& tree = model.structure.tree(l);
    const bool need_outputs = l < model.structure.levels();
    next.assign(need_outputs ? tree.size() : 0, {});
    out[l - 1].resize(tree.size());
    for (std::size_t i = 0; i < tree.size(); ++i) {
      const PairPath& p = model.edges[l - 1][i];
      const EdgeInputs in = edge_inputs(model.structure, l, i);
      EdgeSeries& es = out[l - 1][i];
      es.ua = input(in.a);
      es.ub = input(in.b);
      es.log_density.resize(T);
      if (need_outputs) {
        next[i][0].resize(T);
        next[i][1].resize(T);
      }
      for (std::size_t t = 0; t < T; ++t) {
        const CopulaParam cp = tau_to_param(p.family, clamp_tau(p.family, p.tau_at(t)));
        es.log_density[t] = log_density(p.family, es.ua[t], es.ub[t], cp.theta);
        if (need_outputs) {
          next[i][0][t] = h_forward(p.family, es.ua[t], es.ub[t], cp.theta);
          next[i][1][t] = h_backward(p.family, es.ua[t], es.ub[t], cp.theta);
        }
      }
    }
    prev.swap(next);
  }
  return out;
}

std::vector<std::vector<std::vector<double>>> vine_edge_log_density(const VinePath& model, const DataMatrix& U) {
  auto ev = vine_evaluate(model, U);
  std::vector<std::vector<std::vector<double>>> out(ev.size());
  for (std::size_t l = 0; l < ev.size(); ++l)
    for (auto& e : ev[l]) out[l].push_back(std::move(e.log_density));
  return out;
}

std::vector<double> vine_log_density(const VinePath& model, const DataMatrix& U) {
  const auto per_edge = vine_edge_log_density(model, U);
  std::vector<double> total(U.rows(), 0.0);
  for (const auto& tree : per_edge)
    for (const auto& e : tree)
      for (std::size_t t = 0; t < total.size(); ++t) total[t] += e[t];
  return total;
}

}  // namespace dynvine
