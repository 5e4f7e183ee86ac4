#pragma once

#include "torus_schrodinger/grid_ops.hpp"
#include "torus_schrodinger/torus_grid.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace ts {

/// Modulus of weak semiconvexity kappa(r) <= 0 on (0, D], D = L sqrt(d).
///
/// The perturbed variant is base(r) - 4M/r. Its product s kappa(s) is split
/// into a regular part and the constant -4M so that quadrature only ever
/// sees smooth integrands.
class Modulus {
 public:
  enum class Kind { kConstant, kTrigonometric, kPerturbed, kTabulated };

  static Modulus constant(double alpha, double side, int dim);
  /// sigma_i are sorted descending on construction.
  static Modulus trigonometric(std::vector<double> sigmas, double side, int dim);
  static Modulus perturbed(const Modulus& base, double M);
  /// Piecewise-linear kappa through (r_k, kappa_k); nodes must start at 0 and reach D.
  static Modulus tabulated(std::vector<double> r, std::vector<double> kappa, double side, int dim);

  Kind kind() const { return kind_; }
  double side() const { return side_; }
  int dim() const { return dim_; }
  double domain_end() const { return side_ * std::sqrt(static_cast<double>(dim_)); }
  double alpha() const { return alpha_; }
  const std::vector<double>& sigmas() const { return sigmas_; }
  /// Total perturbation M (0 unless perturbed).
  double perturbation() const { return perturbation_; }
  const Modulus* base() const { return base_.get(); }

  /// kappa(r); -inf at r = 0 for a perturbed modulus with M > 0.
  double operator()(double r) const;
  /// s kappa(s) without the -4M contribution of the perturbation.
  double regular_s_kappa(double s) const;
  /// s kappa(s) including every term; finite at s = 0.
  double s_kappa(double s) const { return regular_s_kappa(s) - 4.0 * perturbation_; }

 private:
  Kind kind_ = Kind::kConstant;
  double side_ = 1.0;
  int dim_ = 1;
  double alpha_ = 0.0;
  std::vector<double> sigmas_;
  double perturbation_ = 0.0;
  double own_m_ = 0.0;
  std::shared_ptr<const Modulus> base_;
  std::vector<double> tab_r_, tab_kappa_;
};

/// The concave distortion f and constants (C, lambda) attached to a modulus,
/// tabulated on a uniform grid over [0, D].
struct RateTriplet {
  Modulus modulus;
  Vec<double> r, phi, Phi, g, f;
  double C = 0.0;
  double lambda = 0.0;
  /// int_0^D Phi / phi, i.e. 1 / lambda.
  double inv_lambda = 0.0;

  double domain_end() const { return r[r.size() - 1]; }
  /// f at arbitrary r in [0, D] by cubic Hermite interpolation (f' = phi g).
  double operator()(double x) const;
  /// f'(r) = phi(r) g(r) at node k.
  double fprime(Index k) const { return phi[k] * g[k]; }
  /// g'(r) = -(Phi / phi) / (2 int_0^D Phi / phi).
  double gprime(Index k) const { return -(Phi[k] / phi[k]) / (2.0 * inv_lambda); }
  /// f'' = (r kappa / 4) phi g + phi g'.
  double fsecond(Index k) const;
};

inline constexpr Index kDefaultQuadNodes = 1024;

RateTriplet rate_triplet(const Modulus& kappa, Index quad_nodes = kDefaultQuadNodes);

/// Cumulative integral of samples y on a uniform grid of spacing h. Even
/// nodes follow composite Simpson; odd nodes add a third-order half-interval
/// rule, so every entry is O(h^4) accurate for smooth y.
Vec<double> cumulative_simpson(const Vec<double>& y, double h);

/// f-Lipschitz norm sup |u(x) - u(y)| / f(delta(x, y)).
double f_lip_norm(const GridFn& u, const RateTriplet& fb);

/// Node-wise margins of the properties a rate triplet must satisfy; every
/// margin is >= 0 (up to the stated slack) when the property holds.
struct TripletCheck {
  double lower = 0.0;          // min f - C r
  double upper = 0.0;          // min r - f
  double slope_lower = 0.0;    // min f' - C
  double slope_upper = 0.0;    // min 1 - f'
  double differential = 0.0;   // min -(lambda/2) f - (f'' - (kappa/4) r f')
  double concavity = 0.0;      // min over k of slope_k - slope_{k+1}
  bool pass = false;
};

inline constexpr double kTripletSlack = 1e-12;
inline constexpr double kDifferentialSlack = 1e-8;

TripletCheck check_triplet(const RateTriplet& t);

/// M = max(|U_mu|_f, |U_nu|_f) / (1 - exp(-lambda pi^2 T)).
double perturbation_M(const GridFn& U_mu, const GridFn& U_nu, const RateTriplet& fV, double T);

/// Exact rate for the Brownian modulus perturbed by M: M^2 / (e^{DM} - 1 - MD).
double brownian_perturbed_rate(double M, double D);

/// Closed-form bounds for an alpha-semiconvex potential.
struct ExplicitBounds {
  double eta_D = 1.0;
  /// (|alpha|/4)/(eta_D - 1), or its limit 2/D^2 at alpha = 0.
  double rate_lower = 0.0;
  /// rate_lower * exp(-M D) with M formed from rate_lower; a lower bound on lambda-bar.
  double perturbed_rate_lower = 0.0;
  double log_gamma_bound = 0.0;
  /// Bound on the prefactor with the printed sqrt(L) pi denominator.
  double cS_bound_printed = 0.0;
  /// Same bound with the verified 1/(2 C-bar) prefactor.
  double cS_bound_verified = 0.0;
  /// Brownian displays (alpha = 0): two successive upper bounds on log gamma_0.
  double log_gamma0_bound = 0.0;
  double log_gamma0_bound_coarse = 0.0;
};

ExplicitBounds explicit_bounds(double alpha, double side, int dim, double T, double max_f_norm);

struct SmallTAsymptotics {
  double D_mu_nu = 0.0;
  double log_gamma0 = 0.0;
  double cS = 0.0;
};

SmallTAsymptotics smallT_asymptotics(double side, int dim, double T, double max_f0_norm);

/// Every constant that enters the convergence statement.
struct RateBundle {
  double T = 0.0;
  RateTriplet fV;      // triplet of the base modulus
  double M = 0.0;
  double norm_U_mu = 0.0;
  double norm_U_nu = 0.0;
  RateTriplet fbar;    // triplet of the perturbed modulus
  double gamma = 0.0;
  double cS_printed = 0.0;   // 1 / (C-bar sqrt(L) pi)
  double cS_verified = 0.0;  // 1 / (2 C-bar)
  double D = 0.0;
  std::optional<ExplicitBounds> bounds;     // for constant moduli
  std::optional<SmallTAsymptotics> asymptotics;
  /// Closed form lambda-bar in the Brownian case.
  std::optional<double> brownian_lambda_bar;

  double lambda_V() const { return fV.lambda; }
  double C_V() const { return fV.C; }
  double lambda_bar() const { return fbar.lambda; }
  double C_bar() const { return fbar.C; }
};

RateBundle rate_constants(const Modulus& kappa, const GridFn& U_mu, const GridFn& U_nu, double T,
                              Index quad_nodes = kDefaultQuadNodes);

}  // namespace ts
