#include "torus_schrodinger/rate_calculus.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <sstream>

namespace ts {

namespace {

void check_geometry(double side, int dim) {
  if (!(side > 0.0) || !std::isfinite(side)) throw Error("modulus needs L > 0");
  if (dim < 1 || dim > kMaxDim) throw Error("modulus needs d in [1, 3]");
}

}  // namespace

Modulus Modulus::constant(double alpha, double side, int dim) {
  check_geometry(side, dim);
  if (alpha > 0.0) throw Error("semiconvexity constant alpha must be <= 0 (a positive alpha is impossible on the torus)");
  if (!std::isfinite(alpha)) throw Error("semiconvexity constant must be finite");
  Modulus m;
  m.kind_ = Kind::kConstant;
  m.side_ = side;
  m.dim_ = dim;
  m.alpha_ = alpha;
  return m;
}

Modulus Modulus::trigonometric(std::vector<double> sigmas, double side, int dim) {
  check_geometry(side, dim);
  if (sigmas.size() != static_cast<std::size_t>(dim)) throw Error("trigonometric modulus needs one sigma per axis");
  for (double s : sigmas) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw Error("trigonometric modulus needs finite sigma_i >= 0");
  }
  std::sort(sigmas.begin(), sigmas.end(), std::greater<>());
  Modulus m;
  m.kind_ = Kind::kTrigonometric;
  m.side_ = side;
  m.dim_ = dim;
  m.sigmas_ = std::move(sigmas);
  return m;
}

Modulus Modulus::perturbed(const Modulus& base, double M) {
  if (!(M >= 0.0) || !std::isfinite(M)) throw Error("perturbation M must be finite and >= 0");
  Modulus m;
  m.kind_ = Kind::kPerturbed;
  m.side_ = base.side_;
  m.dim_ = base.dim_;
  m.alpha_ = base.alpha_;
  m.sigmas_ = base.sigmas_;
  m.own_m_ = M;
  m.perturbation_ = base.perturbation_ + M;
  m.base_ = std::make_shared<const Modulus>(base);
  return m;
}

Modulus Modulus::tabulated(std::vector<double> r, std::vector<double> kappa, double side, int dim) {
  check_geometry(side, dim);
  if (r.size() != kappa.size() || r.size() < 2) throw Error("tabulated modulus needs >= 2 matching nodes");
  if (r.front() != 0.0) throw Error("tabulated modulus nodes must start at 0");
  for (std::size_t i = 1; i < r.size(); ++i) {
    if (!(r[i] > r[i - 1])) throw Error("tabulated modulus nodes must be strictly increasing");
  }
  const double D = side * std::sqrt(static_cast<double>(dim));
  if (r.back() < D * (1.0 - 1e-12)) throw Error("tabulated modulus nodes must reach D = L sqrt(d)");
  for (double k : kappa) {
    if (!std::isfinite(k) || k > 0.0) throw Error("tabulated modulus values must be finite and <= 0");
  }
  Modulus m;
  m.kind_ = Kind::kTabulated;
  m.side_ = side;
  m.dim_ = dim;
  m.tab_r_ = std::move(r);
  m.tab_kappa_ = std::move(kappa);
  return m;
}

double Modulus::operator()(double r) const {
  switch (kind_) {
    case Kind::kConstant:
      return alpha_;
    case Kind::kTrigonometric:
      if (r <= 0.0) return -sigmas_.front() / side_;
      return regular_s_kappa(r) / r;
    case Kind::kPerturbed:
      if (r <= 0.0) return own_m_ > 0.0 ? -std::numeric_limits<double>::infinity() : (*base_)(0.0);
      return (*base_)(r) - 4.0 * own_m_ / r;
    case Kind::kTabulated: {
      if (r <= tab_r_.front()) return tab_kappa_.front();
      if (r >= tab_r_.back()) return tab_kappa_.back();
      const auto it = std::upper_bound(tab_r_.begin(), tab_r_.end(), r);
      const std::size_t j = static_cast<std::size_t>(it - tab_r_.begin());
      const double w = (r - tab_r_[j - 1]) / (tab_r_[j] - tab_r_[j - 1]);
      return (1.0 - w) * tab_kappa_[j - 1] + w * tab_kappa_[j];
    }
  }
  return 0.0;
}

double Modulus::regular_s_kappa(double s) const {
  switch (kind_) {
    case Kind::kConstant:
      return alpha_ * s;
    case Kind::kTrigonometric: {
      if (s <= 0.0) return 0.0;
      const double q = (s / side_) * (s / side_);
      double acc = 0.0;
      for (std::size_t i = 0; i < sigmas_.size(); ++i) {
        const double part = std::clamp(q - static_cast<double>(i), 0.0, 1.0);
        acc += sigmas_[i] * part;
      }
      return -side_ / s * acc;
    }
    case Kind::kPerturbed:
      return base_->regular_s_kappa(s);
    case Kind::kTabulated:
      return s * (*this)(s);
  }
  return 0.0;
}

Vec<double> cumulative_simpson(const Vec<double>& y, double h) {
  const Index n = y.size();
  if (n < 3) throw Error("cumulative quadrature needs at least 3 nodes");
  Vec<double> I(n);
  I[0] = 0.0;
  for (Index j = 0; j + 1 < n; ++j) {
    if (j % 2 == 0 && j + 2 < n) {
      I[j + 1] = I[j] + h / 12.0 * (5.0 * y[j] + 8.0 * y[j + 1] - y[j + 2]);
      I[j + 2] = I[j] + h / 3.0 * (y[j] + 4.0 * y[j + 1] + y[j + 2]);
      ++j;
    } else {
      // trailing interval: mirrored half-interval rule
      I[j + 1] = I[j] + h / 12.0 * (-y[j - 1] + 8.0 * y[j] + 5.0 * y[j + 1]);
    }
  }
  return I;
}

RateTriplet rate_triplet(const Modulus& kappa, Index quad_nodes) {
  if (quad_nodes < 256) throw Error("rate quadrature needs at least 256 nodes");
  const double D = kappa.domain_end();
  const double h = D / static_cast<double>(quad_nodes - 1);
  RateTriplet t;
  t.modulus = kappa;
  t.r = Vec<double>::LinSpaced(quad_nodes, 0.0, D);
  t.r[quad_nodes - 1] = D;

  Vec<double> sk(quad_nodes);
  for (Index k = 0; k < quad_nodes; ++k) sk[k] = kappa.regular_s_kappa(t.r[k]);
  const Vec<double> A = cumulative_simpson(sk, h);
  const double M = kappa.perturbation();
  t.phi = (0.25 * A.array() - M * t.r.array()).exp().matrix();
  t.Phi = cumulative_simpson(t.phi, h);
  const Vec<double> ratio = t.Phi.cwiseQuotient(t.phi);
  const Vec<double> Iratio = cumulative_simpson(ratio, h);
  t.inv_lambda = Iratio[quad_nodes - 1];
  t.g = (1.0 - Iratio.array() / (2.0 * t.inv_lambda)).matrix();
  t.f = cumulative_simpson(t.phi.cwiseProduct(t.g), h);
  t.C = 0.5 * t.phi[quad_nodes - 1];
  t.lambda = 1.0 / t.inv_lambda;

  if (!t.phi.allFinite() || !t.Phi.allFinite() || !t.g.allFinite() || !t.f.allFinite() ||
      !std::isfinite(t.lambda) || !std::isfinite(t.C) || !(t.lambda > 0.0) || !(t.C > 0.0)) {
    throw Error("rate quadrature produced a non-finite value");
  }
  return t;
}

double RateTriplet::fsecond(Index k) const {
  return 0.25 * modulus.s_kappa(r[k]) * phi[k] * g[k] + phi[k] * gprime(k);
}

double RateTriplet::operator()(double x) const {
  const Index n = r.size();
  const double D = r[n - 1];
  if (x <= 0.0) return 0.0;
  if (x >= D) return f[n - 1] + fprime(n - 1) * (x - D);
  const double h = D / static_cast<double>(n - 1);
  Index k = static_cast<Index>(x / h);
  if (k >= n - 1) k = n - 2;
  const double s = (x - r[k]) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  return h00 * f[k] + h10 * h * fprime(k) + h01 * f[k + 1] + h11 * h * fprime(k + 1);
}

double f_lip_norm(const GridFn& u, const RateTriplet& fb) {
  return distorted_lip_norm(u, [&fb](double d) { return fb(d); });
}

TripletCheck check_triplet(const RateTriplet& t) {
  TripletCheck c;
  const Index n = t.r.size();
  c.lower = c.upper = c.slope_lower = c.slope_upper = c.differential = c.concavity =
      std::numeric_limits<double>::infinity();
  const double h = t.r[1] - t.r[0];
  for (Index k = 0; k < n; ++k) {
    const double fp = t.fprime(k);
    c.lower = std::min(c.lower, t.f[k] - t.C * t.r[k]);
    c.upper = std::min(c.upper, t.r[k] - t.f[k]);
    c.slope_lower = std::min(c.slope_lower, fp - t.C);
    c.slope_upper = std::min(c.slope_upper, 1.0 - fp);
    const double lhs = t.fsecond(k) - 0.25 * t.modulus.s_kappa(t.r[k]) * fp;
    c.differential = std::min(c.differential, -0.5 * t.lambda * t.f[k] - lhs);
    if (k + 2 < n) {
      const double s0 = (t.f[k + 1] - t.f[k]) / h;
      const double s1 = (t.f[k + 2] - t.f[k + 1]) / h;
      c.concavity = std::min(c.concavity, s0 - s1);
    }
  }
  c.pass = c.lower >= -kTripletSlack && c.upper >= -kTripletSlack && c.slope_lower >= -kTripletSlack &&
           c.slope_upper >= -kTripletSlack && c.differential >= -kDifferentialSlack &&
           c.concavity >= -kTripletSlack;
  return c;
}

double perturbation_M(const GridFn& U_mu, const GridFn& U_nu, const RateTriplet& fV, double T) {
  if (!(T > 0.0)) throw Error("perturbation M needs T > 0");
  const double a = f_lip_norm(U_mu, fV);
  const double b = f_lip_norm(U_nu, fV);
  return std::max(a, b) / -std::expm1(-fV.lambda * std::numbers::pi * std::numbers::pi * T);
}

double brownian_perturbed_rate(double M, double D) {
  if (M == 0.0) return 2.0 / (D * D);
  const double x = D * M;
  // e^x - 1 - x, accurate for small x
  const double denom = x < 1e-3 ? x * x / 2.0 * (1.0 + x / 3.0 + x * x / 12.0) : std::expm1(x) - x;
  return M * M / denom;
}

ExplicitBounds explicit_bounds(double alpha, double side, int dim, double T, double max_f_norm) {
  if (alpha > 0.0) throw Error("explicit bounds need alpha <= 0");
  ExplicitBounds b;
  const double pi2 = std::numbers::pi * std::numbers::pi;
  const double D2 = side * side * dim;
  const double D = std::sqrt(D2);
  const double a = std::abs(alpha);
  b.eta_D = std::exp(D2 * a / 8.0);
  b.rate_lower = a > 0.0 ? (a / 4.0) / std::expm1(D2 * a / 8.0) : 2.0 / D2;
  const double M_up = max_f_norm / -std::expm1(-b.rate_lower * pi2 * T);
  b.perturbed_rate_lower = b.rate_lower * std::exp(-D * M_up);
  b.log_gamma_bound = -pi2 * T * b.perturbed_rate_lower;
  b.cS_bound_printed = 2.0 * b.eta_D / (std::sqrt(side) * std::numbers::pi) * std::exp(D * M_up);
  b.cS_bound_verified = b.eta_D * std::exp(D * M_up);

  const double M0 = max_f_norm / -std::expm1(-2.0 * pi2 * T / D2);
  b.log_gamma0_bound = -pi2 * T * M0 * M0 * std::exp(-D * M0);
  b.log_gamma0_bound_coarse = -D2 * D2 * max_f_norm * max_f_norm / (4.0 * pi2 * T) * std::exp(-D * M0);
  return b;
}

SmallTAsymptotics smallT_asymptotics(double side, int dim, double T, double max_f0_norm) {
  SmallTAsymptotics s;
  const double pi2 = std::numbers::pi * std::numbers::pi;
  const double D = side * std::sqrt(static_cast<double>(dim));
  s.D_mu_nu = max_f0_norm / (2.0 * pi2);
  const double e = s.D_mu_nu * D * D * D / T;
  s.log_gamma0 = -pi2 * s.D_mu_nu * s.D_mu_nu * std::pow(D, 4) / T * std::exp(-e);
  s.cS = std::exp(e);
  return s;
}

RateBundle rate_constants(const Modulus& kappa, const GridFn& U_mu, const GridFn& U_nu, double T,
                              Index quad_nodes) {
  if (!(T > 0.0)) throw Error("theorem constants need T > 0");
  RateBundle b;
  b.T = T;
  b.D = kappa.domain_end();
  b.fV = rate_triplet(kappa, quad_nodes);
  b.norm_U_mu = f_lip_norm(U_mu, b.fV);
  b.norm_U_nu = f_lip_norm(U_nu, b.fV);
  const double pi2 = std::numbers::pi * std::numbers::pi;
  b.M = std::max(b.norm_U_mu, b.norm_U_nu) / -std::expm1(-b.fV.lambda * pi2 * T);
  b.fbar = rate_triplet(Modulus::perturbed(kappa, b.M), quad_nodes);
  b.gamma = std::exp(-b.fbar.lambda * pi2 * T);
  b.cS_printed = 1.0 / (b.fbar.C * std::sqrt(kappa.side()) * std::numbers::pi);
  b.cS_verified = 1.0 / (2.0 * b.fbar.C);

  if (kappa.kind() == Modulus::Kind::kConstant) {
    b.bounds = explicit_bounds(kappa.alpha(), kappa.side(), kappa.dim(), T, std::max(b.norm_U_mu, b.norm_U_nu));
    if (kappa.alpha() == 0.0) b.brownian_lambda_bar = brownian_perturbed_rate(b.M, b.D);
  }
  const RateTriplet f0 = kappa.kind() == Modulus::Kind::kConstant && kappa.alpha() == 0.0
                             ? b.fV
                             : rate_triplet(Modulus::constant(0.0, kappa.side(), kappa.dim()), quad_nodes);
  const double n0 = std::max(f_lip_norm(U_mu, f0), f_lip_norm(U_nu, f0));
  b.asymptotics = smallT_asymptotics(kappa.side(), kappa.dim(), T, n0);
  return b;
}

}  // namespace ts
