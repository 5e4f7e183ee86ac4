#include "torus_schrodinger/sinkhorn.hpp"

#include <gtest/gtest.h>

#include <sstream>

namespace {

using ts::Grid;
using ts::GridFn;
using ts::Point;
using ts::PotentialSpec;

constexpr double kPi = std::numbers::pi;

GridFn sample1(const Grid& g, double (*fn)(double)) {
  return ts::sample(g, [fn](const Point<double>& x) { return fn(x[0]); });
}

double U_mu_fn(double x) { return 0.127 * std::sin(2 * kPi * x + 0.3); }
double U_nu_fn(double x) { return 0.08 * std::cos(2 * kPi * x) + 0.03 * std::sin(4 * kPi * x + 1.0); }

struct Instance {
  Grid grid;
  ts::MarkovKernel K;
  ts::MarginalPair marginals;
};

Instance make(Eigen::Index N, double T, const PotentialSpec& V = PotentialSpec::zero()) {
  Grid g(1, 1.0, N);
  auto K = ts::kernel_general(g, V, T);
  auto mp = ts::make_marginals(sample1(g, U_mu_fn), sample1(g, U_nu_fn), K.m_weights);
  return {g, std::move(K), std::move(mp)};
}

TEST(Marginals, Recentered) {
  const auto in = make(16, 0.5, PotentialSpec::trigonometric({{1.0, 0.0, 0.0}}, 1.0));
  EXPECT_NEAR(in.marginals.mu_weights.sum(), 1.0, 1e-15);
  EXPECT_NEAR(in.marginals.nu_weights.sum(), 1.0, 1e-15);
  const ts::Vec<double> r = (in.marginals.mu_weights.cwiseQuotient(in.K.m_weights)).array().log().matrix();
  EXPECT_LT((r + in.marginals.U_mu.values).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Sinkhorn, TrivialMarginalsStayAtZero) {
  Grid g(1, 1.0, 16);
  const auto K = ts::kernel_general(g, PotentialSpec::zero(), 0.5);
  const auto z = GridFn::constant(g, 0.0);
  const auto mp = ts::make_marginals(z, z, K.m_weights);
  const auto res = ts::run(K, mp, z);
  EXPECT_TRUE(res.converged);
  EXPECT_EQ(res.state.n, 1);
  EXPECT_LT(res.state.phi.values.cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT(res.state.psi.values.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Sinkhorn, MatchesMatrixScalingOracle) {
  const auto in = make(4, 0.05, PotentialSpec::trigonometric({{1.0, 0.5, 0.2}}, 1.0));
  const Eigen::Index m = 4;
  // alternating row and column scalings of R
  Eigen::MatrixXd P = in.K.m_weights.asDiagonal() * in.K.K;
  ts::SinkhornState st;
  st.psi = GridFn::constant(in.grid, 0.0);
  for (int n = 0; n < 6; ++n) {
    for (Eigen::Index x = 0; x < m; ++x) P.row(x) *= in.marginals.mu_weights[x] / P.row(x).sum();
    const ts::Vec<double> half_step = P.rowwise().sum();
    for (Eigen::Index y = 0; y < m; ++y) P.col(y) *= in.marginals.nu_weights[y] / P.col(y).sum();
    const GridFn psi_prev = st.psi;
    ts::sinkhorn_step(st, in.K, in.marginals);
    const Eigen::MatrixXd Q = ts::plan(st.phi, st.psi, in.K);
    EXPECT_LT((P - Q).cwiseAbs().maxCoeff(), 1e-14) << "n = " << n;
    const auto first = ts::first_marginal(st.phi, psi_prev, in.K);
    EXPECT_LT((first - half_step).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Sinkhorn, BenchmarkConvergesAndHalfStepsAreExact) {
  const auto in = make(128, 0.5);
  const auto res = ts::run(in.K, in.marginals, GridFn::constant(in.grid, 0.0));
  EXPECT_TRUE(res.converged);
  EXPECT_LE(res.state.n, 50);
  for (size_t k = 1; k < res.state.history.size(); ++k) EXPECT_LE(res.state.history[k].half_step_tv, 1e-12);
}

TEST(Sinkhorn, FixedPointAndUniqueness) {
  const auto in = make(64, 0.1, PotentialSpec::trigonometric({{1.0, 0.0, 0.0}}, 1.0));
  const auto ref = ts::reference_potentials(in.K, in.marginals);
  EXPECT_LE(ref.residual, 1e-10);

  ts::SinkhornState st;
  st.phi = ref.phi_star;
  st.psi = ref.psi_star;
  ts::sinkhorn_step(st, in.K, in.marginals);
  EXPECT_LE((st.phi.values - ref.phi_star.values).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((st.psi.values - ref.psi_star.values).cwiseAbs().maxCoeff(), 1e-10);

  const GridFn psi0 = sample1(in.grid, [](double x) { return 2.0 * std::cos(2 * kPi * x) + 5.0; });
  ts::RunOptions opts;
  opts.tol = 1e-13;
  opts.max_iter = 2000;
  const auto res = ts::run(in.K, in.marginals, psi0, opts);
  const auto [a, b] = ts::symmetric_normalize(res.state.phi, res.state.psi, in.marginals);
  EXPECT_LE((a.values - ref.phi_star.values).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE((b.values - ref.psi_star.values).cwiseAbs().maxCoeff(), 1e-9);

  // the plan carries both marginals at convergence
  EXPECT_LE(ts::total_variation(ts::first_marginal(ref.phi_star, ref.psi_star, in.K), in.marginals.mu_weights), 1e-10);
  EXPECT_LE(ts::total_variation(ts::second_marginal(ref.phi_star, ref.psi_star, in.K), in.marginals.nu_weights), 1e-10);
}

TEST(Sinkhorn, GaugeEquivariance) {
  const auto in = make(32, 0.2);
  const GridFn psi = sample1(in.grid, [](double x) { return std::sin(2 * kPi * x); });
  const GridFn psi_c(in.grid, (psi.values.array() - 1.75).matrix());
  const GridFn phi = ts::GridFn(in.grid, in.marginals.U_mu.values + ts::apply_log(in.K, GridFn(in.grid, -psi.values)).values);
  const GridFn phi_c = ts::GridFn(in.grid, in.marginals.U_mu.values + ts::apply_log(in.K, GridFn(in.grid, -psi_c.values)).values);
  EXPECT_LT((phi_c.values - phi.values - ts::Vec<double>::Constant(32, 1.75)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((ts::plan(phi, psi, in.K) - ts::plan(phi_c, psi_c, in.K)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Normalization, SymmetricShift) {
  const auto in = make(32, 0.2);
  const auto ref = ts::reference_potentials(in.K, in.marginals);
  EXPECT_NEAR(ts::symmetric_shift(ref.phi_star, ref.psi_star, in.marginals), 0.0, 1e-12);
  const GridFn a(in.grid, (ref.phi_star.values.array() + 5.0).matrix());
  const GridFn b(in.grid, (ref.psi_star.values.array() - 5.0).matrix());
  EXPECT_NEAR(ts::symmetric_shift(a, b, in.marginals), -5.0, 1e-12);

  const GridFn p = sample1(in.grid, [](double x) { return std::cos(2 * kPi * x) + 3.0; });
  const GridFn q = sample1(in.grid, [](double x) { return x * x; });
  const auto [pn, qn] = ts::symmetric_normalize(p, q, in.marginals);
  const auto& mp = in.marginals;
  const double lhs = mp.mu_weights.dot(pn.values) - mp.mu_weights.dot(mp.U_mu.values);
  const double rhs = mp.nu_weights.dot(qn.values) - mp.nu_weights.dot(mp.U_nu.values);
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(Normalization, Iterates) {
  const auto in = make(32, 0.2);
  const auto ref = ts::reference_potentials(in.K, in.marginals);
  const GridFn a(in.grid, (ref.phi_star.values.array() + 3.0).matrix());
  const auto [pd, qd] = ts::normalize_iterates(a, ref.psi_star, ref, in.marginals);
  EXPECT_LT((pd.values - ref.phi_star.values).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((qd.values - ref.psi_star.values).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Plan, ReferenceCoupling) {
  const auto in = make(16, 0.3, PotentialSpec::trigonometric({{1.0, 0.0, 0.0}}, 1.0));
  const auto z = GridFn::constant(in.grid, 0.0);
  const Eigen::MatrixXd P = ts::plan(z, z, in.K);
  EXPECT_NEAR(P.sum(), 1.0, 1e-14);
  EXPECT_LT((P.rowwise().sum() - in.K.m_weights).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((P.colwise().sum().transpose() - in.K.m_weights).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Divergence, Examples) {
  ts::Vec<double> p(2), q(2);
  p << 1.0, 0.0;
  q << 0.5, 0.5;
  EXPECT_NEAR(ts::kl_divergence(p, q), std::log(2.0), 1e-15);
  EXPECT_EQ(ts::kl_divergence(q, q), 0.0);
  EXPECT_THROW(ts::kl_divergence(q, p), ts::Error);
}

TEST(Divergence, PlanKlMatchesMatrixEvaluation) {
  const auto in = make(16, 0.3);
  const auto res = ts::run(in.K, in.marginals, GridFn::constant(in.grid, 0.0));
  const auto& st = res.state;
  const Eigen::MatrixXd P = ts::plan(st.phi, st.psi, in.K);
  const Eigen::MatrixXd R = ts::plan(GridFn::constant(in.grid, 0.0), GridFn::constant(in.grid, 0.0), in.K);
  EXPECT_NEAR(ts::plan_kl(st.phi, st.psi, in.K), ts::entropic_cost(P, R), 1e-13);
}

TEST(History, CsvLayout) {
  std::vector<ts::IterationRecord> h(2);
  h[1].n = 1;
  h[1].sup_err_psi = 0.25;
  std::ostringstream os;
  ts::write_history_csv(os, h);
  const std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find("\r\n")), "n,sup_err_phi,sup_err_psi,grad_err_phi,grad_err_psi,flip_err_psi,lip_psi,kl_cost");
  EXPECT_NE(s.find("1,nan,0.25,"), std::string::npos);
}

}  // namespace
