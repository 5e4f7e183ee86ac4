#include "torus_schrodinger/grid_ops.hpp"
#include "torus_schrodinger/rate_calculus.hpp"

#include <gtest/gtest.h>

#include <random>

namespace {

using ts::Grid;
using ts::GridFn;
using ts::Point;

Point<double> pt(std::initializer_list<double> xs) {
  Point<double> p(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) p[i++] = x;
  return p;
}

GridFn random_band_limited(const Grid& g, std::mt19937_64& rng, int modes) {
  std::normal_distribution<double> n01;
  std::vector<std::array<double, 5>> c;
  for (int k = 0; k < modes; ++k) c.push_back({n01(rng), n01(rng), n01(rng), n01(rng), static_cast<double>(k + 1)});
  const double L = g.side();
  return ts::sample(g, [&](const Point<double>& x) {
    double v = 0.0;
    for (const auto& m : c) {
      for (Eigen::Index a = 0; a < x.size(); ++a) {
        const double th = 2 * std::numbers::pi * m[4] * x[a] / L;
        v += 0.3 * (m[0] * std::sin(th + m[2]) + m[1] * std::cos(th + m[3])) / m[4];
      }
    }
    return v;
  });
}

TEST(TorusGrid, RejectsBadParameters) {
  EXPECT_THROW(Grid(0, 1.0, 8), ts::Error);
  EXPECT_THROW(Grid(4, 1.0, 8), ts::Error);
  EXPECT_THROW(Grid(1, -1.0, 8), ts::Error);
  EXPECT_THROW(Grid(1, 1.0, 12), ts::Error);
  EXPECT_THROW(Grid(1, 1.0, 2), ts::Error);
}

TEST(TorusGrid, IndexingWraps) {
  Grid g(2, 1.0, 8);
  EXPECT_EQ(g.size(), 64);
  EXPECT_EQ(g.flat_index({9, -1, 0}), g.flat_index({1, 7, 0}));
  for (Eigen::Index i = 0; i < g.size(); ++i) EXPECT_EQ(g.flat_index(g.multi_index(i)), i);
}

TEST(TorusGrid, WrapExamples) {
  Grid g1(1, 1.0, 8);
  EXPECT_DOUBLE_EQ(ts::wrap(pt({0.3}), g1)[0], 0.3);
  EXPECT_DOUBLE_EQ(ts::wrap(pt({-0.25}), g1)[0], 0.75);
  Grid g2(2, 2.0, 8);
  const auto w = ts::wrap(pt({2.5, -1.0}), g2);
  EXPECT_DOUBLE_EQ(w[0], 0.5);
  EXPECT_DOUBLE_EQ(w[1], 1.0);
}

TEST(TorusGrid, DistanceExamples) {
  Grid g1(1, 1.0, 8);
  EXPECT_DOUBLE_EQ(ts::sine_distance(pt({0.3}), pt({0.3}), g1), 0.0);
  EXPECT_NEAR(ts::sine_distance(pt({0.0}), pt({0.5}), g1), 1.0, 1e-15);
  EXPECT_NEAR(ts::flat_distance(pt({0.0}), pt({0.75}), g1), 0.25, 1e-15);
  Grid g2(2, 2.0, 8);
  EXPECT_NEAR(ts::sine_distance(pt({0, 0}), pt({0.5, 0.5}), g2), 2.0, 1e-14);
}

TEST(TorusGrid, SineDistanceIsAMetricEquivalentToFlat) {
  for (int d = 1; d <= 2; ++d) {
    Grid g(d, 1.7, d == 1 ? 32 : 8);
    const Eigen::Index m = g.size();
    Eigen::MatrixXd D(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j) D(i, j) = ts::sine_distance(g.node(i), g.node(j), g);
    double dmax = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      EXPECT_EQ(D(i, i), 0.0);
      for (Eigen::Index j = 0; j < m; ++j) {
        EXPECT_NEAR(D(i, j), D(j, i), 1e-14);
        const double fd = ts::flat_distance(g.node(i), g.node(j), g);
        EXPECT_LE(2.0 * fd, D(i, j) + 1e-13);
        EXPECT_LE(D(i, j), std::numbers::pi * fd + 1e-13);
        dmax = std::max(dmax, D(i, j));
        for (Eigen::Index k = 0; k < m; ++k) EXPECT_LE(D(i, k), D(i, j) + D(j, k) + 1e-13);
      }
    }
    EXPECT_NEAR(dmax, g.diameter(), 1e-13);
  }
}

TEST(GridOps, SpectralGradientOfFourierModeIsExact) {
  Grid g(1, 1.0, 64);
  const GridFn f = ts::sample(g, [](const Point<double>& x) { return std::sin(2 * std::numbers::pi * x[0]); });
  const auto df = ts::gradient(f);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    EXPECT_NEAR(df[0][i], 2 * std::numbers::pi * std::cos(2 * std::numbers::pi * g.node(i)[0]), 1e-12);
  }
  const auto c = ts::gradient(GridFn::constant(g, 3.0));
  EXPECT_LT(c[0].values.cwiseAbs().maxCoeff(), 1e-13);
}

TEST(GridOps, CentralDifferenceIsSecondOrder) {
  std::mt19937_64 rng(7);
  Grid g1(1, 1.0, 32), g2(1, 1.0, 64);
  std::normal_distribution<double> n01;
  const double a = n01(rng), b = n01(rng);
  auto fn = [&](const Point<double>& x) {
    return a * std::sin(2 * std::numbers::pi * x[0]) + b * std::cos(6 * std::numbers::pi * x[0]);
  };
  auto err = [&](const Grid& g) {
    const GridFn f = ts::sample(g, fn);
    const auto s = ts::gradient(f, ts::GradientMethod::kSpectral);
    const auto c = ts::gradient(f, ts::GradientMethod::kCentralDifference);
    return (s[0].values - c[0].values).cwiseAbs().maxCoeff();
  };
  const double ratio = err(g1) / err(g2);
  EXPECT_NEAR(ratio, 4.0, 0.2);
}

TEST(GridOps, LipNormOfSine) {
  Grid g(1, 1.0, 256);
  const GridFn f = ts::sample(g, [](const Point<double>& x) { return std::sin(2 * std::numbers::pi * x[0]); });
  EXPECT_NEAR(ts::lip_norm(f), 2 * std::numbers::pi, 0.01 * 2 * std::numbers::pi);
  EXPECT_NEAR(ts::lip_norm(f, ts::LipMethod::kAllPairs), 2 * std::numbers::pi, 0.01 * 2 * std::numbers::pi);
  EXPECT_EQ(ts::lip_norm(GridFn::constant(g, 1.0)), 0.0);
  EXPECT_EQ(ts::sup_norm(GridFn::constant(g, 0.0)), 0.0);
}

TEST(GridOps, DistortedNormWithIdentityUsesSineDistance) {
  Grid g(2, 1.0, 8);
  std::mt19937_64 rng(3);
  const GridFn f = random_band_limited(g, rng, 2);
  double brute = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i)
    for (Eigen::Index j = 0; j < g.size(); ++j) {
      const double d = ts::sine_distance(g.node(i), g.node(j), g);
      if (d >= g.spacing() / 2) brute = std::max(brute, std::abs(f[i] - f[j]) / d);
    }
  EXPECT_NEAR(ts::distorted_lip_norm(f, [](double d) { return d; }), brute, 1e-14);
}

TEST(GridOps, FLipNormSandwich) {
  std::mt19937_64 rng(11);
  for (double L : {1.0, 2.5}) {
    Grid g(1, L, 64);
    const auto fb = ts::rate_triplet(ts::Modulus::constant(-1.0, L, 1));
    for (int k = 0; k < 5; ++k) {
      const GridFn f = random_band_limited(g, rng, 3);
      const double lip = ts::lip_norm(f, ts::LipMethod::kAllPairs);
      const double fl = ts::f_lip_norm(f, fb);
      EXPECT_LE(lip / std::numbers::pi, fl * (1 + 1e-12));
      EXPECT_LE(fl, lip / (2 * fb.C) * (1 + 1e-12));
    }
  }
}

TEST(GridOps, InterpolationReproducesNodesAndLinears) {
  Grid g(2, 1.0, 16);
  const GridFn f = ts::sample(g, [](const Point<double>& x) { return x[0] + 2 * x[1]; });
  EXPECT_NEAR(ts::interpolate(f, g.node(37)), f[37], 1e-15);
  EXPECT_NEAR(ts::interpolate(f, pt({0.1, 0.2})), 0.5, 1e-14);
  EXPECT_NEAR(ts::interpolate(f, pt({1.1, -0.8})), 0.5, 1e-14);
}

}  // namespace
