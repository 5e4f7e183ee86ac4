#pragma once

#include "torus_schrodinger/markov_kernel.hpp"
#include "torus_schrodinger/rate_calculus.hpp"

#include <limits>
#include <optional>
#include <ostream>
#include <vector>

namespace ts {

/// Marginals mu = exp(-U_mu) m and nu = exp(-U_nu) m. The stored potentials
/// are shifted on construction so that both weight vectors sum to 1 exactly
/// in the sense log(mu / m) = -U_mu node by node.
struct MarginalPair {
  GridFn U_mu, U_nu;
  Vec<double> mu_weights, nu_weights;
};

MarginalPair make_marginals(const GridFn& U_mu, const GridFn& U_nu, const Vec<double>& m_weights);

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Diagnostics of one Sinkhorn iterate. Reference-dependent fields stay NaN
/// when no reference is supplied; phi fields are NaN at n = 0.
struct IterationRecord {
  int n = 0;
  double sup_err_phi = kNaN;   // sup |phi_normalized - phi*|
  double sup_err_psi = kNaN;
  double grad_err_phi = kNaN;  // sup |grad phi - grad phi*|
  double grad_err_psi = kNaN;
  double flip_err_phi = kNaN;  // |phi - phi*| in the perturbed f-norm
  double flip_err_psi = kNaN;
  double lip_psi = kNaN;       // Lipschitz norm of psi
  double flip_phi = kNaN;      // phi in the base f-norm
  double flip_psi = kNaN;
  double kl_cost = kNaN;       // KL(pi^{n,n} | R)
  double half_step_tv = kNaN;  // TV(first marginal of pi^{n,n-1}, mu)
  double psi_change = kNaN;    // sup |psi^n - psi^{n-1}|
};

struct SinkhornState {
  int n = 0;
  GridFn phi, psi;
  std::vector<IterationRecord> history;
};

struct ReferencePotentials {
  GridFn phi_star, psi_star;
  double residual = 0.0;
  double shift = 0.0;
  int iterations = 0;
};

struct RunOptions {
  int max_iter = 500;
  double tol = 1e-12;
  /// Optional diagnostics; all pointers must outlive the call.
  const ReferencePotentials* reference = nullptr;
  const RateTriplet* fV = nullptr;
  const RateTriplet* fbar = nullptr;
};

struct RunResult {
  SinkhornState state;
  bool converged = false;
  double final_change = kNaN;
};

/// One full update: phi <- U_mu + log P e^{-psi}, then psi <- U_nu + log P e^{-phi}.
void sinkhorn_step(SinkhornState& state, const MarkovKernel& K, const MarginalPair& marginals);

RunResult run(const MarkovKernel& K, const MarginalPair& marginals, const GridFn& psi0, const RunOptions& opts = {});

/// Runs to tol 1e-13 or a rounding plateau, then normalizes symmetrically.
ReferencePotentials reference_potentials(const MarkovKernel& K, const MarginalPair& marginals,
                                         int max_iter = 10000);

/// Constant c with (phi + c, psi - c) symmetrically normalized.
double symmetric_shift(const GridFn& phi, const GridFn& psi, const MarginalPair& marginals);
std::pair<GridFn, GridFn> symmetric_normalize(const GridFn& phi, const GridFn& psi, const MarginalPair& marginals);

/// Iterates shifted to carry the reference integrals against mu and nu.
std::pair<GridFn, GridFn> normalize_iterates(const GridFn& phi, const GridFn& psi, const ReferencePotentials& ref,
                                             const MarginalPair& marginals);

/// max of the two Schroedinger-system defects.
double schrodinger_residual(const GridFn& phi, const GridFn& psi, const MarkovKernel& K,
                            const MarginalPair& marginals);

/// pi(x, y) = m(x) K(x, y) exp(-phi(x) - psi(y)), unnormalized.
Eigen::MatrixXd plan(const GridFn& phi, const GridFn& psi, const MarkovKernel& K);

Vec<double> first_marginal(const GridFn& phi, const GridFn& psi, const MarkovKernel& K);
Vec<double> second_marginal(const GridFn& phi, const GridFn& psi, const MarkovKernel& K);

double total_variation(const Vec<double>& p, const Vec<double>& q);

/// sum p log(p / q) with 0 log 0 = 0; throws when p charges a node where q = 0.
double kl_divergence(const Vec<double>& p, const Vec<double>& q);
double entropic_cost(const Eigen::MatrixXd& pi, const Eigen::MatrixXd& R);

/// KL(pi^{phi,psi} | R) evaluated through the marginals, without the plan matrix.
double plan_kl(const GridFn& phi, const GridFn& psi, const MarkovKernel& K);

/// Frozen CSV layout: n, sup_err_phi, sup_err_psi, grad_err_phi, grad_err_psi,
/// flip_err_psi, lip_psi, kl_cost.
void write_history_csv(std::ostream& os, const std::vector<IterationRecord>& history);

}  // namespace ts
