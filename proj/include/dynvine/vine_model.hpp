#pragma once

#include <cstddef>
#include <vector>

#include "dynvine/families.hpp"
#include "dynvine/matrix.hpp"
#include "dynvine/vine_structure.hpp"

namespace dynvine {

/// A pair copula with a known Kendall's tau path. A path of length one is
/// constant over time.
struct PairPath {
  FamilyId family = FamilyId::independence();
  std::vector<double> tau{0.0};

  double tau_at(std::size_t t) const { return tau.size() == 1 ? tau[0] : tau[t]; }
};

/// A vine copula whose pair copulas have fixed tau paths, indexed
/// [level - 1][edge index] like the structure.
struct VinePath {
  RVineStructure structure;
  std::vector<std::vector<PairPath>> edges;

  /// Independence everywhere.
  static VinePath independent(const RVineStructure& structure);
  /// Throws std::invalid_argument if the edge grid does not match the
  /// structure or a path length is neither 1 nor T (T = 0 skips the check).
  void check(std::size_t T = 0) const;
};

/// Pseudo-observations entering an edge and its log density, per row.
struct EdgeSeries {
  std::vector<double> ua, ub, log_density;
};
/// Level-wise evaluation of the vine on the rows of U, indexed [level - 1][edge].
std::vector<std::vector<EdgeSeries>> vine_evaluate(const VinePath& model, const DataMatrix& U);

/// log c(u_{t,a|D}, u_{t,b|D}) of every edge at every row of U, written
/// [level - 1][edge][t]. Rows of U are time points; U has d columns.
std::vector<std::vector<std::vector<double>>> vine_edge_log_density(const VinePath& model, const DataMatrix& U);

/// Sum over edges of the log density, per row.
std::vector<double> vine_log_density(const VinePath& model, const DataMatrix& U);

}  // namespace dynvine
