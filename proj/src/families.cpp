#include "dynvine/families.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "dynvine/special.hpp"

namespace dynvine {

namespace {

constexpr double kHalfPi = 0.5 * std::numbers::pi;

// log(exp(e1) + exp(e2) - 1) for e1, e2 >= 0
double log_clayton_sum(double e1, double e2) {
  const double m = std::max(e1, e2);
  if (m < 1.0) return std::log1p(std::expm1(e1) + std::expm1(e2));
  return m + std::log(std::exp(e1 - m) + std::exp(e2 - m) - std::exp(-m));
}

double log_add_exp(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

double gaussian_kernel(double sq, double cross, double rho) {
  const double r2 = rho * rho;
  const double om = 1.0 - r2;
  return -0.5 * std::log(om) - (r2 * sq - 2.0 * rho * cross) / (2.0 * om);
}

double student_kernel(double nu, double log_norm, double sq, double cross, double marg,
                      double rho) {
  const double om = 1.0 - rho * rho;
  return log_norm - 0.5 * std::log(om) -
         0.5 * (nu + 2.0) * std::log1p((sq - 2.0 * rho * cross) / (nu * om)) + marg;
}

// a = log u1, b = log u2, theta > 0
double clayton_kernel(double a, double b, double theta) {
  const double ls = log_clayton_sum(-theta * a, -theta * b);
  return std::log1p(theta) - (1.0 + theta) * (a + b) - (2.0 + 1.0 / theta) * ls;
}

// x = -log u1, y = -log u2, lx = log x, ly = log y, theta >= 1
double gumbel_kernel(double x, double y, double lx, double ly, double theta) {
  const double log_s = log_add_exp(theta * lx, theta * ly);
  const double a = std::exp(log_s / theta);
  return -a + x + y + (theta - 1.0) * (lx + ly) + (1.0 / theta - 2.0) * log_s +
         std::log(a + theta - 1.0);
}

double student_log_norm(double nu) {
  return std::lgamma(0.5 * (nu + 2.0)) + std::lgamma(0.5 * nu) - 2.0 * std::lgamma(0.5 * (nu + 1.0));
}

double student_marg(double nu, double x1, double x2) {
  return 0.5 * (nu + 1.0) * (std::log1p(x1 * x1 / nu) + std::log1p(x2 * x2 / nu));
}

double elliptical_quantile(FamilyId f, double u) {
  return f.kind == FamilyKind::Gaussian ? normal_quantile(u)
                                        : student_t_quantile(u, static_cast<double>(f.df));
}

void require_domain(bool ok, const char* what) {
  if (!ok) throw std::domain_error(what);
}

void check_theta(FamilyId f, double theta) {
  switch (f.kind) {
    case FamilyKind::Independence:
      return;
    case FamilyKind::Gaussian:
    case FamilyKind::StudentT:
      require_domain(std::isfinite(theta) && std::abs(theta) < 1.0,
                     "elliptical copula parameter must lie in (-1, 1)");
      return;
    case FamilyKind::EClayton:
      require_domain(std::isfinite(theta) && theta != 0.0, "eClayton parameter must be non-zero");
      return;
    case FamilyKind::EGumbel:
      require_domain(std::isfinite(theta) && std::abs(theta) >= 1.0,
                     "eGumbel parameter must satisfy |theta| >= 1");
      return;
  }
}

// Positive-orientation Archimedean h-function dC/du2 and its density.
double archimedean_h(FamilyKind kind, double u1, double u2, double theta) {
  if (kind == FamilyKind::EClayton) {
    const double a = std::log(u1), b = std::log(u2);
    const double ls = log_clayton_sum(-theta * a, -theta * b);
    return std::exp((-theta - 1.0) * b - (1.0 / theta + 1.0) * ls);
  }
  const double x = -std::log(u1), y = -std::log(u2);
  const double lx = std::log(x), ly = std::log(y);
  const double log_s = log_add_exp(theta * lx, theta * ly);
  const double a = std::exp(log_s / theta);
  return std::exp(-a + y + (theta - 1.0) * ly + (1.0 / theta - 1.0) * log_s);
}

double archimedean_log_density(FamilyKind kind, double u1, double u2, double theta) {
  if (kind == FamilyKind::EClayton) return clayton_kernel(std::log(u1), std::log(u2), theta);
  const double x = -std::log(u1), y = -std::log(u2);
  return gumbel_kernel(x, y, std::log(x), std::log(y), theta);
}

// Solves archimedean_h(x, v) = p on the clipped unit interval: bisection keeps a
// monotone bracket, Newton steps (derivative = density) are taken when they stay
// inside it.
double archimedean_h_inverse(FamilyKind kind, double p, double v, double theta) {
  double lo = kUnitClip, hi = 1.0 - kUnitClip;
  if (archimedean_h(kind, lo, v, theta) - p >= 0.0) return lo;
  if (archimedean_h(kind, hi, v, theta) - p <= 0.0) return hi;
  double x = std::clamp(p, lo, hi);
  for (int it = 0; it < 200; ++it) {
    const double f = archimedean_h(kind, x, v, theta) - p;
    if (std::abs(f) <= 1e-13) return x;
    if (f < 0.0)
      lo = x;
    else
      hi = x;
    if (hi - lo <= 1e-15 * std::max(1.0, hi)) return 0.5 * (lo + hi);
    const double dens = std::exp(archimedean_log_density(kind, x, v, theta));
    double next = x - f / dens;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-16) return next;
    x = next;
  }
  throw std::runtime_error("h-function inversion did not converge");
}

double elliptical_rho(double tau) { return std::sin(kHalfPi * tau); }

}  // namespace

std::string FamilyId::name() const {
  switch (kind) {
    case FamilyKind::Independence:
      return "indep";
    case FamilyKind::Gaussian:
      return "gaussian";
    case FamilyKind::StudentT:
      return "t" + std::to_string(df);
    case FamilyKind::EClayton:
      return "eclayton";
    case FamilyKind::EGumbel:
      return "egumbel";
  }
  return "?";
}

FamilyId FamilyId::parse(std::string_view name) {
  std::string s;
  for (char c : name)
    if (!std::isspace(static_cast<unsigned char>(c)))
      s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (s == "indep" || s == "independence" || s == "i") return independence();
  if (s == "gaussian" || s == "gauss" || s == "normal" || s == "n") return gaussian();
  if (s == "eclayton" || s == "clayton") return eclayton();
  if (s == "egumbel" || s == "gumbel") return egumbel();
  std::string digits;
  if (s.size() > 1 && s[0] == 't')
    digits = s.substr(1);
  else if (s.rfind("studentt", 0) == 0)
    digits = s.substr(8);
  if (!digits.empty() && digits.front() == '(') {
    digits = digits.substr(1);
    if (!digits.empty() && digits.back() == ')') digits.pop_back();
    if (digits.rfind("df=", 0) == 0) digits = digits.substr(3);
  }
  if (!digits.empty() && std::all_of(digits.begin(), digits.end(),
                                     [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    const int df = std::stoi(digits);
    if (df >= 1) return student_t(df);
  }
  throw std::invalid_argument("unknown copula family '" + std::string(name) + "'");
}

void validate_family_set(std::span<const FamilyId> families) {
  if (families.empty()) throw std::invalid_argument("family set must not be empty");
  for (std::size_t i = 0; i < families.size(); ++i) {
    if (families[i].kind == FamilyKind::StudentT && families[i].df < 1)
      throw std::invalid_argument("Student t degrees of freedom must be >= 1");
    for (std::size_t j = 0; j < i; ++j)
      if (families[i] == families[j])
        throw std::invalid_argument("duplicate family '" + families[i].name() + "' in family set");
  }
}

FamilySet parse_family_list(std::string_view list) {
  FamilySet out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t comma = list.find(',', start);
    const std::string_view item =
        list.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    if (!item.empty()) out.push_back(FamilyId::parse(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  validate_family_set(out);
  return out;
}

std::string format_family_list(std::span<const FamilyId> families) {
  std::ostringstream os;
  for (std::size_t i = 0; i < families.size(); ++i) os << (i ? "," : "") << families[i].name();
  return os.str();
}

FamilySet default_family_set() {
  return {FamilyId::independence(), FamilyId::gaussian(), FamilyId::student_t(4),
          FamilyId::eclayton(), FamilyId::egumbel()};
}

FamilySet extended_family_set() {
  return {FamilyId::independence(), FamilyId::gaussian(), FamilyId::student_t(2),
          FamilyId::student_t(4),   FamilyId::student_t(8), FamilyId::egumbel(),
          FamilyId::eclayton()};
}

double clip_unit(double u) { return std::clamp(u, kUnitClip, 1.0 - kUnitClip); }

double fisher_z(double tau) {
  require_domain(std::abs(tau) < 1.0, "Fisher's Z requires |tau| < 1");
  return 0.5 * std::log((1.0 + tau) / (1.0 - tau));
}

double fisher_z_inv(double z) { return std::tanh(z); }

double clamp_tau(FamilyId family, double tau) {
  double a = std::min(std::abs(tau), kTauMax);
  if (family.is_archimedean()) a = std::max(a, kTauMinArchimedean);
  return tau < 0.0 ? -a : a;
}

double param_to_tau(FamilyId family, double theta) {
  check_theta(family, theta);
  switch (family.kind) {
    case FamilyKind::Independence:
      return 0.0;
    case FamilyKind::Gaussian:
    case FamilyKind::StudentT:
      return std::asin(theta) / kHalfPi;
    case FamilyKind::EClayton: {
      const double a = std::abs(theta);
      return std::copysign(a / (a + 2.0), theta);
    }
    case FamilyKind::EGumbel:
      return std::copysign(1.0 - 1.0 / std::abs(theta), theta);
  }
  return 0.0;
}

CopulaParam tau_to_param(FamilyId family, double tau) {
  require_domain(std::abs(tau) <= 1.0, "Kendall's tau must lie in (-1, 1)");
  const double tc = clamp_tau(family, tau);
  const double a = std::abs(tc);
  switch (family.kind) {
    case FamilyKind::Independence:
      return {family, 0.0};
    case FamilyKind::Gaussian:
    case FamilyKind::StudentT:
      return {family, elliptical_rho(tc)};
    case FamilyKind::EClayton:
      return {family, std::copysign(2.0 * a / (1.0 - a), tc)};
    case FamilyKind::EGumbel:
      return {family, std::copysign(1.0 / (1.0 - a), tc)};
  }
  return {family, 0.0};
}

double log_density(FamilyId family, double u1, double u2, double theta) {
  check_theta(family, theta);
  u1 = clip_unit(u1);
  u2 = clip_unit(u2);
  switch (family.kind) {
    case FamilyKind::Independence:
      return 0.0;
    case FamilyKind::Gaussian: {
      const double x1 = normal_quantile(u1), x2 = normal_quantile(u2);
      return gaussian_kernel(x1 * x1 + x2 * x2, x1 * x2, theta);
    }
    case FamilyKind::StudentT: {
      const double nu = family.df;
      const double x1 = student_t_quantile(u1, nu), x2 = student_t_quantile(u2, nu);
      return student_kernel(nu, student_log_norm(nu), x1 * x1 + x2 * x2, x1 * x2,
                            student_marg(nu, x1, x2), theta);
    }
    case FamilyKind::EClayton: {
      const double v1 = theta > 0.0 ? u1 : 1.0 - u1;
      return clayton_kernel(std::log(v1), std::log(u2), std::abs(theta));
    }
    case FamilyKind::EGumbel: {
      const double v1 = theta > 0.0 ? u1 : 1.0 - u1;
      const double x = -std::log(v1), y = -std::log(u2);
      return gumbel_kernel(x, y, std::log(x), std::log(y), std::abs(theta));
    }
  }
  return 0.0;
}

double h_forward(FamilyId family, double u1, double u2, double theta) {
  check_theta(family, theta);
  u1 = clip_unit(u1);
  u2 = clip_unit(u2);
  double h = u1;
  switch (family.kind) {
    case FamilyKind::Independence:
      break;
    case FamilyKind::Gaussian: {
      const double x1 = normal_quantile(u1), x2 = normal_quantile(u2);
      h = normal_cdf((x1 - theta * x2) / std::sqrt(1.0 - theta * theta));
      break;
    }
    case FamilyKind::StudentT: {
      const double nu = family.df;
      const double x1 = student_t_quantile(u1, nu), x2 = student_t_quantile(u2, nu);
      const double scale = std::sqrt((nu + x2 * x2) * (1.0 - theta * theta) / (nu + 1.0));
      h = student_t_cdf((x1 - theta * x2) / scale, nu + 1.0);
      break;
    }
    case FamilyKind::EClayton:
    case FamilyKind::EGumbel:
      h = theta > 0.0 ? archimedean_h(family.kind, u1, u2, theta)
                      : 1.0 - archimedean_h(family.kind, 1.0 - u1, u2, -theta);
      break;
  }
  return clip_unit(h);
}

double h_backward(FamilyId family, double u1, double u2, double theta) {
  if (family.is_archimedean() && theta < 0.0) {
    check_theta(family, theta);
    u1 = clip_unit(u1);
    u2 = clip_unit(u2);
    // d/du1 [u2 - C0(1 - u1, u2)] = h0(u2 | 1 - u1) for an exchangeable C0
    return clip_unit(archimedean_h(family.kind, u2, 1.0 - u1, -theta));
  }
  return h_forward(family, u2, u1, theta);
}

double h_forward_inverse(FamilyId family, double p, double u2, double theta) {
  check_theta(family, theta);
  p = clip_unit(p);
  u2 = clip_unit(u2);
  switch (family.kind) {
    case FamilyKind::Independence:
      return p;
    case FamilyKind::Gaussian: {
      const double x2 = normal_quantile(u2);
      return clip_unit(
          normal_cdf(normal_quantile(p) * std::sqrt(1.0 - theta * theta) + theta * x2));
    }
    case FamilyKind::StudentT: {
      const double nu = family.df;
      const double x2 = student_t_quantile(u2, nu);
      const double scale = std::sqrt((nu + x2 * x2) * (1.0 - theta * theta) / (nu + 1.0));
      return clip_unit(student_t_cdf(student_t_quantile(p, nu + 1.0) * scale + theta * x2, nu));
    }
    case FamilyKind::EClayton:
    case FamilyKind::EGumbel:
      if (theta > 0.0) return archimedean_h_inverse(family.kind, p, u2, theta);
      return clip_unit(1.0 - archimedean_h_inverse(family.kind, 1.0 - p, u2, -theta));
  }
  return p;
}

double h_backward_inverse(FamilyId family, double u1, double p, double theta) {
  if (family.is_archimedean() && theta < 0.0) {
    check_theta(family, theta);
    return archimedean_h_inverse(family.kind, clip_unit(p), clip_unit(1.0 - clip_unit(u1)),
                                 -theta);
  }
  return h_forward_inverse(family, p, u1, theta);
}

double log_density_tau(FamilyId family, double u1, double u2, double tau) {
  return log_density(family, u1, u2, tau_to_param(family, tau).theta);
}
double h_forward_tau(FamilyId family, double u1, double u2, double tau) {
  return h_forward(family, u1, u2, tau_to_param(family, tau).theta);
}
double h_backward_tau(FamilyId family, double u1, double u2, double tau) {
  return h_backward(family, u1, u2, tau_to_param(family, tau).theta);
}
double h_forward_inverse_tau(FamilyId family, double p, double u2, double tau) {
  return h_forward_inverse(family, p, u2, tau_to_param(family, tau).theta);
}
double h_backward_inverse_tau(FamilyId family, double u1, double p, double tau) {
  return h_backward_inverse(family, u1, p, tau_to_param(family, tau).theta);
}

// ---------------------------------------------------------------------------
// PairData

PairData::PairData(std::span<const double> u1, std::span<const double> u2,
                   std::span<const FamilyId> families)
    : n_(u1.size()), families_(families.begin(), families.end()) {
  if (u1.size() != u2.size()) throw std::invalid_argument("PairData: column length mismatch");
  validate_family_set(families_);
  std::vector<double>& c1 = u1_;
  std::vector<double>& c2 = u2_;
  c1.resize(n_);
  c2.resize(n_);
  for (std::size_t t = 0; t < n_; ++t) {
    if (!(u1[t] >= 0.0 && u1[t] <= 1.0 && u2[t] >= 0.0 && u2[t] <= 1.0))
      throw std::invalid_argument("PairData: observation outside [0, 1] at index " +
                                  std::to_string(t));
    c1[t] = clip_unit(u1[t]);
    c2[t] = clip_unit(u2[t]);
  }
  blocks_.reserve(families_.size());
  for (const FamilyId& f : families_) {
    Block blk;
    blk.family = f;
    switch (f.kind) {
      case FamilyKind::Independence:
        break;
      case FamilyKind::Gaussian:
      case FamilyKind::StudentT: {
        blk.nu = f.df;
        blk.sq.resize(n_);
        blk.cross.resize(n_);
        if (f.kind == FamilyKind::StudentT) {
          blk.marg.resize(n_);
          blk.log_norm = student_log_norm(blk.nu);
        }
        for (std::size_t t = 0; t < n_; ++t) {
          const double x1 = elliptical_quantile(f, c1[t]);
          const double x2 = elliptical_quantile(f, c2[t]);
          blk.sq[t] = x1 * x1 + x2 * x2;
          blk.cross[t] = x1 * x2;
          if (f.kind == FamilyKind::StudentT) blk.marg[t] = student_marg(blk.nu, x1, x2);
        }
        break;
      }
      case FamilyKind::EClayton:
        blk.a.resize(n_);
        blk.ac.resize(n_);
        blk.b.resize(n_);
        for (std::size_t t = 0; t < n_; ++t) {
          blk.a[t] = std::log(c1[t]);
          blk.ac[t] = std::log(1.0 - c1[t]);
          blk.b[t] = std::log(c2[t]);
        }
        break;
      case FamilyKind::EGumbel:
        blk.x.resize(n_);
        blk.xc.resize(n_);
        blk.y.resize(n_);
        blk.lx.resize(n_);
        blk.lxc.resize(n_);
        blk.ly.resize(n_);
        for (std::size_t t = 0; t < n_; ++t) {
          blk.x[t] = -std::log(c1[t]);
          blk.xc[t] = -std::log(1.0 - c1[t]);
          blk.y[t] = -std::log(c2[t]);
          blk.lx[t] = std::log(blk.x[t]);
          blk.lxc[t] = std::log(blk.xc[t]);
          blk.ly[t] = std::log(blk.y[t]);
        }
        break;
    }
    blocks_.push_back(std::move(blk));
  }
}

PairData::KernelParam PairData::kernel_param(const Block& blk, double tau) {
  const double tc = clamp_tau(blk.family, tau);
  const double a = std::abs(tc);
  switch (blk.family.kind) {
    case FamilyKind::Independence:
      return {};
    case FamilyKind::Gaussian:
    case FamilyKind::StudentT:
      return {elliptical_rho(tc), true};
    case FamilyKind::EClayton:
      return {2.0 * a / (1.0 - a), tc > 0.0};
    case FamilyKind::EGumbel:
      return {1.0 / (1.0 - a), tc > 0.0};
  }
  return {};
}

double PairData::eval(const Block& blk, std::size_t t, KernelParam p) {
  switch (blk.family.kind) {
    case FamilyKind::Independence:
      return 0.0;
    case FamilyKind::Gaussian:
      return gaussian_kernel(blk.sq[t], blk.cross[t], p.value);
    case FamilyKind::StudentT:
      return student_kernel(blk.nu, blk.log_norm, blk.sq[t], blk.cross[t], blk.marg[t], p.value);
    case FamilyKind::EClayton:
      return clayton_kernel(p.positive ? blk.a[t] : blk.ac[t], blk.b[t], p.value);
    case FamilyKind::EGumbel:
      return p.positive ? gumbel_kernel(blk.x[t], blk.y[t], blk.lx[t], blk.ly[t], p.value)
                        : gumbel_kernel(blk.xc[t], blk.y[t], blk.lxc[t], blk.ly[t], p.value);
  }
  return 0.0;
}

int PairData::index_of(FamilyId f) const {
  for (std::size_t i = 0; i < families_.size(); ++i)
    if (families_[i] == f) return static_cast<int>(i);
  return -1;
}

double PairData::log_density(std::size_t family_index, std::size_t t, double tau) const {
  return eval(blocks_.at(family_index), t, tau);
}

double PairData::sum_log_density(std::size_t family_index, std::span<const double> tau) const {
  const Block& blk = blocks_[family_index];
  if (blk.family.kind == FamilyKind::Independence) return 0.0;
  double s = 0.0;
  for (std::size_t t = 0; t < n_; ++t) s += eval(blk, t, tau[t]);
  return s;
}

double PairData::sum_log_density(std::size_t family_index, double tau) const {
  const Block& blk = blocks_[family_index];
  if (blk.family.kind == FamilyKind::Independence) return 0.0;
  const KernelParam p = kernel_param(blk, tau);
  double s = 0.0;
  for (std::size_t t = 0; t < n_; ++t) s += eval(blk, t, p);
  return s;
}

void PairData::pointwise_log_density(std::size_t family_index, std::span<const double> tau,
                                     std::span<double> out) const {
  const Block& blk = blocks_[family_index];
  for (std::size_t t = 0; t < n_; ++t) out[t] = eval(blk, t, tau[t]);
}

void PairData::pointwise_log_density(std::size_t family_index, double tau,
                                     std::span<double> out) const {
  const Block& blk = blocks_[family_index];
  const KernelParam p = kernel_param(blk, tau);
  for (std::size_t t = 0; t < n_; ++t) out[t] = eval(blk, t, p);
}

}  // namespace dynvine
