#include "torus_schrodinger/sinkhorn.hpp"

#include "torus_schrodinger/grid_ops.hpp"
#include "torus_schrodinger/io.hpp"

#include <cfloat>

namespace ts {

namespace {

void require_same_grid(const MarkovKernel& K, const MarginalPair& m) {
  if (!(K.grid == m.U_mu.grid) || !(K.grid == m.U_nu.grid)) {
    throw Error("kernel and marginals must share one grid");
  }
}

GridFn add(const GridFn& a, const GridFn& b) { return GridFn(a.grid, a.values + b.values); }
GridFn negate(const GridFn& a) { return GridFn(a.grid, -a.values); }
GridFn shifted(const GridFn& a, double c) { return GridFn(a.grid, (a.values.array() + c).matrix()); }

/// sup over nodes of the Euclidean norm of grad a - grad b.
double grad_sup_diff(const GridFn& a, const GridFn& b) {
  const auto ga = gradient(a);
  const auto gb = gradient(b);
  Vec<double> sq = Vec<double>::Zero(a.size());
  for (std::size_t k = 0; k < ga.size(); ++k) sq += (ga[k].values - gb[k].values).cwiseAbs2();
  return std::sqrt(sq.maxCoeff());
}

double sup_diff(const GridFn& a, const GridFn& b) { return (a.values - b.values).cwiseAbs().maxCoeff(); }

/// log of sum_x w(x) K(x, y) exp(-phi(x)) for every y (column direction).
Vec<double> log_column_mass(const GridFn& phi, const MarkovKernel& K) {
  const Vec<double> a = K.m_weights.array().log().matrix() - phi.values;
  const double amax = a.maxCoeff();
  const Vec<double> w = (a.array() - amax).exp().matrix();
  const Vec<double> s = K.K.transpose() * w;
  return (s.array().log() + amax).matrix();
}

void fill_diagnostics(IterationRecord& rec, const SinkhornState& st, const MarkovKernel& K,
                      const MarginalPair& marginals, const RunOptions& opts) {
  const bool have_phi = st.n > 0;
  rec.lip_psi = lip_norm(st.psi);
  if (opts.fV != nullptr) {
    rec.flip_psi = f_lip_norm(st.psi, *opts.fV);
    if (have_phi) rec.flip_phi = f_lip_norm(st.phi, *opts.fV);
  }
  if (have_phi) rec.kl_cost = plan_kl(st.phi, st.psi, K);
  if (opts.reference == nullptr) return;
  const ReferencePotentials& ref = *opts.reference;
  if (have_phi) {
    const auto [phi_d, psi_d] = normalize_iterates(st.phi, st.psi, ref, marginals);
    rec.sup_err_phi = sup_diff(phi_d, ref.phi_star);
    rec.grad_err_phi = grad_sup_diff(st.phi, ref.phi_star);
    if (opts.fbar != nullptr) rec.flip_err_phi = f_lip_norm(add(st.phi, negate(ref.phi_star)), *opts.fbar);
  }
  const double psi_shift = marginals.nu_weights.dot(st.psi.values) - marginals.nu_weights.dot(ref.psi_star.values);
  rec.sup_err_psi = sup_diff(shifted(st.psi, -psi_shift), ref.psi_star);
  rec.grad_err_psi = grad_sup_diff(st.psi, ref.psi_star);
  if (opts.fbar != nullptr) rec.flip_err_psi = f_lip_norm(add(st.psi, negate(ref.psi_star)), *opts.fbar);
}

}  // namespace

MarginalPair make_marginals(const GridFn& U_mu, const GridFn& U_nu, const Vec<double>& m_weights) {
  if (!(U_mu.grid == U_nu.grid) || U_mu.size() != m_weights.size()) {
    throw Error("marginal potentials and stationary weights must share one grid");
  }
  auto center = [&m_weights](const GridFn& U, Vec<double>& w) {
    const Vec<double> a = m_weights.array().log().matrix() - U.values;
    const double amax = a.maxCoeff();
    const double lse = amax + std::log((a.array() - amax).exp().sum());
    GridFn out = shifted(U, lse);
    w = (m_weights.array().log() - out.values.array()).exp().matrix();
    return out;
  };
  MarginalPair p;
  p.U_mu = center(U_mu, p.mu_weights);
  p.U_nu = center(U_nu, p.nu_weights);
  return p;
}

void sinkhorn_step(SinkhornState& state, const MarkovKernel& K, const MarginalPair& marginals) {
  require_same_grid(K, marginals);
  state.phi = add(marginals.U_mu, apply_log(K, negate(state.psi)));
  state.psi = add(marginals.U_nu, apply_log(K, negate(state.phi)));
  ++state.n;
}

RunResult run(const MarkovKernel& K, const MarginalPair& marginals, const GridFn& psi0, const RunOptions& opts) {
  require_same_grid(K, marginals);
  if (!(opts.tol > 0.0)) throw Error("Sinkhorn tolerance must be positive");
  if (opts.max_iter < 1) throw Error("Sinkhorn max_iter must be >= 1");
  RunResult res;
  SinkhornState& st = res.state;
  st.n = 0;
  st.psi = psi0;
  st.phi = GridFn::constant(psi0.grid, 0.0);
  {
    IterationRecord rec;
    fill_diagnostics(rec, st, K, marginals, opts);
    st.history.push_back(rec);
  }
  for (int it = 0; it < opts.max_iter; ++it) {
    const GridFn psi_prev = st.psi;
    st.phi = add(marginals.U_mu, apply_log(K, negate(st.psi)));
    IterationRecord rec;
    rec.half_step_tv = total_variation(first_marginal(st.phi, psi_prev, K), marginals.mu_weights);
    st.psi = add(marginals.U_nu, apply_log(K, negate(st.phi)));
    ++st.n;
    rec.n = st.n;
    rec.psi_change = sup_diff(st.psi, psi_prev);
    fill_diagnostics(rec, st, K, marginals, opts);
    st.history.push_back(rec);
    res.final_change = rec.psi_change;
    if (rec.psi_change < opts.tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

ReferencePotentials reference_potentials(const MarkovKernel& K, const MarginalPair& marginals, int max_iter) {
  require_same_grid(K, marginals);
  SinkhornState st;
  st.psi = GridFn::constant(K.grid, 0.0);
  st.phi = st.psi;
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  for (int it = 0; it < max_iter; ++it) {
    const GridFn prev = st.psi;
    sinkhorn_step(st, K, marginals);
    const double change = sup_diff(st.psi, prev);
    const double scale = 1.0 + st.psi.values.cwiseAbs().maxCoeff() + st.phi.values.cwiseAbs().maxCoeff();
    if (change < 1e-13 || change <= 10.0 * DBL_EPSILON * scale) break;
    if (change < best) {
      best = change;
      stale = 0;
    } else if (++stale >= 20) {
      break;  // rounding plateau
    }
  }
  ReferencePotentials ref;
  ref.iterations = st.n;
  ref.shift = symmetric_shift(st.phi, st.psi, marginals);
  ref.phi_star = shifted(st.phi, ref.shift);
  ref.psi_star = shifted(st.psi, -ref.shift);
  ref.residual = schrodinger_residual(ref.phi_star, ref.psi_star, K, marginals);
  return ref;
}

double symmetric_shift(const GridFn& phi, const GridFn& psi, const MarginalPair& marginals) {
  const double a = marginals.mu_weights.dot(phi.values) - marginals.mu_weights.dot(marginals.U_mu.values);
  const double b = marginals.nu_weights.dot(psi.values) - marginals.nu_weights.dot(marginals.U_nu.values);
  return 0.5 * (b - a);
}

std::pair<GridFn, GridFn> symmetric_normalize(const GridFn& phi, const GridFn& psi, const MarginalPair& marginals) {
  const double c = symmetric_shift(phi, psi, marginals);
  return {shifted(phi, c), shifted(psi, -c)};
}

std::pair<GridFn, GridFn> normalize_iterates(const GridFn& phi, const GridFn& psi, const ReferencePotentials& ref,
                                             const MarginalPair& marginals) {
  const double a = marginals.mu_weights.dot(phi.values) - marginals.mu_weights.dot(ref.phi_star.values);
  const double b = marginals.nu_weights.dot(psi.values) - marginals.nu_weights.dot(ref.psi_star.values);
  return {shifted(phi, -a), shifted(psi, -b)};
}

double schrodinger_residual(const GridFn& phi, const GridFn& psi, const MarkovKernel& K,
                            const MarginalPair& marginals) {
  const GridFn r1 = add(marginals.U_mu, apply_log(K, negate(psi)));
  const GridFn r2 = add(marginals.U_nu, apply_log(K, negate(phi)));
  return std::max(sup_diff(phi, r1), sup_diff(psi, r2));
}

Eigen::MatrixXd plan(const GridFn& phi, const GridFn& psi, const MarkovKernel& K) {
  const Index m = K.size();
  Eigen::MatrixXd P(m, m);
  for (Index x = 0; x < m; ++x) {
    const double ax = std::log(K.m_weights[x]) - phi.values[x];
    for (Index y = 0; y < m; ++y) {
      const double k = K.K(x, y);
      P(x, y) = k > 0.0 ? std::exp(ax + std::log(k) - psi.values[y]) : 0.0;
    }
  }
  return P;
}

Vec<double> first_marginal(const GridFn& phi, const GridFn& psi, const MarkovKernel& K) {
  const GridFn lp = apply_log(K, negate(psi));
  return (K.m_weights.array().log() - phi.values.array() + lp.values.array()).exp().matrix();
}

Vec<double> second_marginal(const GridFn& phi, const GridFn& psi, const MarkovKernel& K) {
  return (log_column_mass(phi, K).array() - psi.values.array()).exp().matrix();
}

double total_variation(const Vec<double>& p, const Vec<double>& q) {
  if (p.size() != q.size()) throw Error("total variation needs equal-length weight vectors");
  return 0.5 * (p - q).cwiseAbs().sum();
}

double kl_divergence(const Vec<double>& p, const Vec<double>& q) {
  if (p.size() != q.size()) throw Error("KL divergence needs equal-length weight vectors");
  double acc = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || q[i] < 0.0) throw Error("KL divergence needs nonnegative weights");
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) throw Error("KL divergence: p is not absolutely continuous with respect to q");
    acc += p[i] * std::log(p[i] / q[i]);
  }
  return acc;
}

double entropic_cost(const Eigen::MatrixXd& pi, const Eigen::MatrixXd& R) {
  const Eigen::Map<const Vec<double>> p(pi.data(), pi.size());
  const Eigen::Map<const Vec<double>> q(R.data(), R.size());
  return kl_divergence(p, q);
}

double plan_kl(const GridFn& phi, const GridFn& psi, const MarkovKernel& K) {
  // log(pi / R) = -phi(x) - psi(y), so KL = -<phi, a> - <psi, b> over the marginals a, b
  const Vec<double> a = first_marginal(phi, psi, K);
  const Vec<double> b = second_marginal(phi, psi, K);
  return -phi.values.dot(a) - psi.values.dot(b);
}

void write_history_csv(std::ostream& os, const std::vector<IterationRecord>& history) {
  os << "n,sup_err_phi,sup_err_psi,grad_err_phi,grad_err_psi,flip_err_psi,lip_psi,kl_cost\r\n";
  for (const auto& r : history) {
    os << r.n << ',' << format_number(r.sup_err_phi) << ',' << format_number(r.sup_err_psi) << ','
       << format_number(r.grad_err_phi) << ',' << format_number(r.grad_err_psi) << ','
       << format_number(r.flip_err_psi) << ',' << format_number(r.lip_psi) << ',' << format_number(r.kl_cost)
       << "\r\n";
  }
}

}  // namespace ts
