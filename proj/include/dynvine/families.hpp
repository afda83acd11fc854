#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dynvine {

enum class FamilyKind { Independence, Gaussian, StudentT, EClayton, EGumbel };

/// A single-parameter pair-copula family. Student t carries a fixed degrees of
/// freedom; it is never estimated.
///
/// EClayton and EGumbel cover negative Kendall's tau by switching orientation:
/// for tau < 0 the 90-degree rotated copula C(u1, u2) = u2 - C0(1 - u1, u2) is
/// used, with the base parameter taken from |tau|. On the native parameter
/// scale a negative theta denotes the rotated orientation.
struct FamilyId {
  FamilyKind kind = FamilyKind::Independence;
  int df = 0;

  static constexpr FamilyId independence() { return {FamilyKind::Independence, 0}; }
  static constexpr FamilyId gaussian() { return {FamilyKind::Gaussian, 0}; }
  static constexpr FamilyId student_t(int df) { return {FamilyKind::StudentT, df}; }
  static constexpr FamilyId eclayton() { return {FamilyKind::EClayton, 0}; }
  static constexpr FamilyId egumbel() { return {FamilyKind::EGumbel, 0}; }

  bool is_archimedean() const {
    return kind == FamilyKind::EClayton || kind == FamilyKind::EGumbel;
  }
  bool is_elliptical() const {
    return kind == FamilyKind::Gaussian || kind == FamilyKind::StudentT;
  }

  /// Canonical short name: indep, gaussian, t<df>, eclayton, egumbel.
  std::string name() const;
  static FamilyId parse(std::string_view name);

  friend bool operator==(const FamilyId&, const FamilyId&) = default;
};

using FamilySet = std::vector<FamilyId>;

/// Throws std::invalid_argument unless the set is non-empty, duplicate-free and
/// every Student t member has df >= 1.
void validate_family_set(std::span<const FamilyId> families);
/// Parses a comma separated list such as "indep,gaussian,t4,eclayton,egumbel".
FamilySet parse_family_list(std::string_view list);
std::string format_family_list(std::span<const FamilyId> families);

/// Candidate set of the bivariate studies.
FamilySet default_family_set();
/// Candidate set with three Student t members, used for vine studies.
FamilySet extended_family_set();

inline constexpr double kTauMax = 1.0 - 1e-6;
inline constexpr double kTauMinArchimedean = 1e-4;
inline constexpr double kUnitClip = 1e-10;

/// Clips u to [kUnitClip, 1 - kUnitClip].
double clip_unit(double u);

double fisher_z(double tau);
double fisher_z_inv(double z);

/// Clamps tau to the representable range of the family: |tau| <= kTauMax and,
/// for the Archimedean families, |tau| >= kTauMinArchimedean (sign kept, 0 maps
/// to the positive orientation).
double clamp_tau(FamilyId family, double tau);

struct CopulaParam {
  FamilyId family;
  double theta = 0.0;
};

/// Kendall's tau implied by a native parameter (g_m).
double param_to_tau(FamilyId family, double theta);
/// Native parameter for a Kendall's tau (inverse of g_m), after clamp_tau.
CopulaParam tau_to_param(FamilyId family, double tau);

double log_density(FamilyId family, double u1, double u2, double theta);
/// dC(u1, u2)/du2, the conditional distribution of U1 given U2 = u2.
double h_forward(FamilyId family, double u1, double u2, double theta);
/// dC(u1, u2)/du1, the conditional distribution of U2 given U1 = u1.
double h_backward(FamilyId family, double u1, double u2, double theta);
/// Solves h_forward(x, u2) = p for x.
double h_forward_inverse(FamilyId family, double p, double u2, double theta);
/// Solves h_backward(u1, x) = p for x.
double h_backward_inverse(FamilyId family, double u1, double p, double theta);

/// Convenience wrappers taking Kendall's tau instead of the native parameter.
double log_density_tau(FamilyId family, double u1, double u2, double tau);
double h_forward_tau(FamilyId family, double u1, double u2, double tau);
double h_backward_tau(FamilyId family, double u1, double u2, double tau);
double h_forward_inverse_tau(FamilyId family, double p, double u2, double tau);
double h_backward_inverse_tau(FamilyId family, double u1, double p, double tau);

/// A bivariate sample prepared for repeated likelihood evaluation over a fixed
/// candidate family set. Quantile transforms and logarithms that do not depend
/// on the copula parameter are computed once at construction.
class PairData {
 public:
  PairData() = default;
  PairData(std::span<const double> u1, std::span<const double> u2,
           std::span<const FamilyId> families);

  std::size_t size() const { return n_; }
  const FamilySet& families() const { return families_; }
  /// Clipped input columns.
  std::span<const double> u1() const { return u1_; }
  std::span<const double> u2() const { return u2_; }
  /// Position of a family in families(), or -1.
  int index_of(FamilyId f) const;

  double log_density(std::size_t family_index, std::size_t t, double tau) const;
  /// Sum over t of log c(u_t; tau[t]); tau has one entry per observation.
  double sum_log_density(std::size_t family_index, std::span<const double> tau) const;
  /// Sum over t of log c(u_t; tau) for a constant tau.
  double sum_log_density(std::size_t family_index, double tau) const;
  void pointwise_log_density(std::size_t family_index, std::span<const double> tau,
                             std::span<double> out) const;
  void pointwise_log_density(std::size_t family_index, double tau, std::span<double> out) const;

 private:
  struct Block {
    FamilyId family;
    double nu = 0.0;
    double log_norm = 0.0;
    // elliptical: squared sum, cross product, marginal correction
    std::vector<double> sq, cross, marg;
    // archimedean: log u1, log(1 - u1), log u2 and, for Gumbel, -log and log(-log)
    std::vector<double> a, ac, b;
    std::vector<double> x, xc, y, lx, lxc, ly;
  };
  // rho for elliptical families, the base parameter and orientation otherwise
  struct KernelParam {
    double value = 0.0;
    bool positive = true;
  };
  static KernelParam kernel_param(const Block& blk, double tau);
  static double eval(const Block& blk, std::size_t t, KernelParam p);
  static double eval(const Block& blk, std::size_t t, double tau) {
    return eval(blk, t, kernel_param(blk, tau));
  }

  std::size_t n_ = 0;
  FamilySet families_;
  std::vector<double> u1_, u2_;
  std::vector<Block> blocks_;
};

}  // namespace dynvine
