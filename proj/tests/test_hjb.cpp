#include "torus_schrodinger/hjb.hpp"
#include "torus_schrodinger/sinkhorn.hpp"

#include <gtest/gtest.h>

namespace {

using ts::Grid;
using ts::GridFn;
using ts::Point;
using ts::PotentialSpec;

constexpr double kPi = std::numbers::pi;

GridFn sine(const Grid& g, double amp = 1.0) {
  return ts::sample(g, [amp](const Point<double>& x) { return amp * std::sin(2 * kPi * x[0]); });
}

Point<double> pt(double x) {
  Point<double> p(1);
  p[0] = x;
  return p;
}

struct Problem {
  Grid grid{1, 1.0, 64};
  PotentialSpec V;
  std::shared_ptr<ts::KernelFamily> family;
  ts::KernelFactory factory;

  explicit Problem(PotentialSpec v = PotentialSpec::zero(), Eigen::Index N = 64) : grid(1, 1.0, N), V(std::move(v)) {
    family = std::make_shared<ts::KernelFamily>(grid, V);
    factory = [f = family](double s) { return f->at(s); };
  }
};

TEST(Evolve, ConstantsAndTerminalCondition) {
  Problem s;
  const auto nodes = ts::uniform_time_nodes(0.5, 9);
  const auto ev = ts::evolve(GridFn::constant(s.grid, 2.5), 0.5, nodes, s.factory);
  for (const auto& u : ev.u) EXPECT_LT((u.values.array() - 2.5).abs().maxCoeff(), 1e-13);
  const GridFn h = sine(s.grid);
  const auto ev2 = ts::evolve(h, 0.5, nodes, s.factory);
  EXPECT_EQ((ev2.u.back().values - h.values).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Evolve, GaugeAndSemigroupConsistency) {
  Problem s(PotentialSpec::trigonometric({{1.0, 0.5, 0.0}}, 1.0));
  const GridFn h = sine(s.grid, 0.7);
  const auto nodes = ts::uniform_time_nodes(0.5, 11);
  const auto ev = ts::evolve(h, 0.5, nodes, s.factory);
  const auto ev_c = ts::evolve(GridFn(s.grid, (h.values.array() + 4.0).matrix()), 0.5, nodes, s.factory);
  for (size_t k = 0; k < nodes.size(); ++k)
    EXPECT_LT((ev_c.u[k].values - ev.u[k].values).array().abs().maxCoeff() - 4.0, 1e-12);

  // evolve to s = 0.3, then treat u(0.3) as terminal data for horizon 0.3
  const std::vector<double> sub(nodes.begin(), nodes.begin() + 7);  // 0 .. 0.3
  const auto ev_s = ts::evolve(ev.u[6], 0.3, sub, s.factory);
  for (size_t k = 0; k < sub.size(); ++k) EXPECT_LT((ev_s.u[k].values - ev.u[k].values).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Contraction, BrownianSine) {
  Problem s(PotentialSpec::zero(), 128);
  const auto fb = ts::rate_triplet(ts::Modulus::constant(0.0, 1.0, 1));
  const auto ev = ts::evolve(sine(s.grid), 0.5, ts::uniform_time_nodes(0.5, 16), s.factory);
  const auto r = ts::contraction_ratio(ev, fb);
  EXPECT_DOUBLE_EQ(r.back(), 1.0);
  EXPECT_LE(r.front(), std::exp(-kPi * kPi));
  for (size_t k = 0; k < r.size(); ++k) {
    EXPECT_LE(r[k], std::exp(-2.0 * kPi * kPi * (0.5 - ev.times[k])) * (1 + 1e-6));
    if (k > 0) EXPECT_LE(r[k - 1], r[k] * (1 + 1e-12));
  }
}

TEST(Contraction, LipschitzByproductBound) {
  Problem s(PotentialSpec::trigonometric({{1.0, 0.0, 0.0}}, 1.0), 64);
  const auto kappa = ts::Modulus::trigonometric({1.0}, 1.0, 1);
  const auto fv = ts::rate_triplet(kappa);
  const GridFn h = ts::sample(s.grid, [](const Point<double>& x) {
    return 0.3 * std::sin(2 * kPi * x[0] + 1) + 0.1 * std::cos(6 * kPi * x[0]);
  });
  const auto ev = ts::evolve(h, 0.5, ts::uniform_time_nodes(0.5, 16), s.factory);
  const double hn = ts::f_lip_norm(h, fv);
  for (size_t k = 0; k < ev.u.size(); ++k) {
    const double bound = kPi * std::exp(-fv.lambda * kPi * kPi * (0.5 - ev.times[k])) * hn;
    EXPECT_LE(ts::lip_norm(ev.u[k], ts::LipMethod::kAllPairs), bound);
  }
}

TEST(DifferenceEvolution, GaugeAndContraction) {
  Problem s(PotentialSpec::zero(), 64);
  const double T = 0.1;
  auto K = s.family->at(T);
  const auto mp = ts::make_marginals(sine(s.grid, 0.1), ts::sample(s.grid, [](const Point<double>& x) {
                                       return 0.05 * std::cos(2 * kPi * x[0]);
                                     }),
                                     K.m_weights);
  const auto ref = ts::reference_potentials(K, mp);
  const auto nodes = ts::uniform_time_nodes(T, 5);
  const auto zero = ts::difference_evolution(ref.psi_star, ref.psi_star, T, nodes, s.factory);
  for (const auto& u : zero.u) EXPECT_EQ(u.values.cwiseAbs().maxCoeff(), 0.0);
  const GridFn shifted(s.grid, (ref.psi_star.values.array() + 0.5).matrix());
  const auto c = ts::difference_evolution(shifted, ref.psi_star, T, nodes, s.factory);
  for (const auto& u : c.u) EXPECT_LT((u.values.array() - 0.5).abs().maxCoeff(), 1e-12);

  // D(0) equals phi^{n+1} - phi* up to a constant, and contracts in the perturbed norm
  const auto bundle = ts::rate_constants(ts::Modulus::constant(0.0, 1.0, 1), mp.U_mu, mp.U_nu, T);
  ts::SinkhornState st;
  st.psi = GridFn::constant(s.grid, 0.0);
  ts::sinkhorn_step(st, K, mp);
  const auto d = ts::difference_evolution(st.psi, ref.psi_star, T, nodes, s.factory);
  ts::SinkhornState nxt = st;
  ts::sinkhorn_step(nxt, K, mp);
  const ts::Vec<double> lhs = nxt.phi.values - ref.phi_star.values;
  const ts::Vec<double> gap = lhs + d.u.front().values;
  EXPECT_LT(gap.maxCoeff() - gap.minCoeff(), 1e-10);
  const double num = ts::f_lip_norm(d.u.front(), bundle.fbar);
  const double den = ts::f_lip_norm(GridFn(s.grid, st.psi.values - ref.psi_star.values), bundle.fbar);
  EXPECT_LE(num, std::exp(-bundle.lambda_bar() * kPi * kPi * T) * den * (1 + 1e-8));
}

TEST(SocValue, ZeroTerminalCost) {
  Problem s(PotentialSpec::zero(), 64);
  const GridFn z = GridFn::constant(s.grid, 0.0);
  const auto ev = ts::evolve(z, 0.1, ts::uniform_time_nodes(0.1, 21), s.factory);
  ts::McOptions o;
  o.n_paths = 100;
  o.dt = 0.005;
  const auto e = ts::soc_value_mc(ev, s.V, z, pt(0.3), 0.0, o);
  EXPECT_LT(std::abs(e.mean), 1e-20);
  EXPECT_LT(e.std_error, 1e-20);
}

TEST(SocValue, FeedbackAttainsTheValue) {
  Problem s(PotentialSpec::zero(), 128);
  const GridFn h = sine(s.grid);
  const double T = 0.5;
  const auto ev = ts::evolve(h, T, ts::uniform_time_nodes(T, 501), s.factory);
  ts::McOptions o;
  o.n_paths = 20000;
  o.dt = 1e-3;
  o.seed = 42;
  for (double x0 : {0.1, 0.25, 0.6}) {
    const auto e = ts::soc_value_mc(ev, s.V, h, pt(x0), 0.0, o);
    const double u = ts::interpolate(ev.u.front(), pt(x0));
    EXPECT_LE(std::abs(e.mean - u), 3 * e.std_error) << "x = " << x0 << " mc " << e.mean << " +- " << e.std_error << " u " << u;
    Point<double> q(1);
    for (double qc : {1.0}) {
      q[0] = qc;
      const auto c = ts::constant_control_mc(s.V, h, pt(x0), 0.0, T, q, o);
      EXPECT_GE(c.mean, u - 3 * c.std_error);
    }
  }
}

TEST(SocValue, Guards) {
  Problem s(PotentialSpec::zero(), 64);
  const GridFn h = sine(s.grid);
  const auto coarse = ts::evolve(h, 0.5, ts::uniform_time_nodes(0.5, 8), s.factory);
  ts::McOptions o;
  o.n_paths = 10;
  EXPECT_THROW(ts::soc_value_mc(coarse, s.V, h, pt(0.1), 0.0, o), ts::Error);
  o.dt = 0.05;
  EXPECT_THROW(ts::constant_control_mc(s.V, h, pt(0.1), 0.0, 0.5, pt(1.0), o), ts::Error);
}

TEST(SocValue, Deterministic) {
  Problem s(PotentialSpec::trigonometric({{1.0, 0.0, 0.0}}, 1.0), 64);
  const GridFn h = sine(s.grid);
  ts::McOptions o;
  o.n_paths = 500;
  o.dt = 5e-3;
  o.seed = 9;
  const auto a = ts::constant_control_mc(s.V, h, pt(0.2), 0.0, 0.2, pt(0.5), o);
  o.jobs = 3;
  const auto b = ts::constant_control_mc(s.V, h, pt(0.2), 0.0, 0.2, pt(0.5), o);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.std_error, b.std_error);
}

TEST(HjbResidual, SmallOnSmoothData) {
  Problem s(PotentialSpec::trigonometric({{1.0, -0.5, 0.0}}, 1.0), 64);
  const GridFn h = sine(s.grid, 0.5);
  const auto ev = ts::evolve(h, 0.5, ts::uniform_time_nodes(0.4, 201), s.factory);
  EXPECT_LT(ts::hjb_residual(ev, s.V), 1e-3);
}

}  // namespace
