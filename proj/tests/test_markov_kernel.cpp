#include "torus_schrodinger/markov_kernel.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

namespace {

using ts::Grid;
using ts::GridFn;
using ts::Point;
using ts::PotentialSpec;

PotentialSpec trig1(double a, double b, double w = 0.0) { return PotentialSpec::trigonometric({{a, b, w}}, 1.0); }

TEST(StationaryMeasure, Examples) {
  Grid g(1, 1.0, 16);
  const auto w0 = ts::stationary_measure(g, PotentialSpec::zero());
  EXPECT_LT((w0.array() - 1.0 / 16).abs().maxCoeff(), 1e-16);
  const auto Vc = PotentialSpec::tabulated(GridFn::constant(g, 4.2));
  EXPECT_LT((ts::stationary_measure(g, Vc).array() - 1.0 / 16).abs().maxCoeff(), 1e-16);

  // V(x) = (1/8) sin(2 pi x): alpha = 1, L = 1
  const auto w = ts::stationary_measure(g, trig1(1.0, 0.0));
  double z = 0.0;
  std::vector<double> direct;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double x = g.node(i)[0];
    direct.push_back(std::exp(-2.0 * std::sin(2 * std::numbers::pi * x) / 8.0) * g.spacing());
    z += direct.back();
  }
  for (Eigen::Index i = 0; i < g.size(); ++i) EXPECT_NEAR(w[i], direct[i] / z, 1e-15);
}

TEST(HeatKernel, StochasticEigenfunctionAndMixing) {
  Grid g(1, 1.0, 32);
  const auto k = ts::heat_kernel_fft(g, 0.1);
  EXPECT_LT((k.K.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-14);
  const GridFn c = ts::sample(g, [](const Point<double>& x) { return std::cos(2 * std::numbers::pi * x[0]); });
  const ts::Vec<double> Kc = k.K * c.values;
  const double lam = std::exp(-0.1 * 4 * std::numbers::pi * std::numbers::pi / 2);
  EXPECT_LT((Kc - lam * c.values).cwiseAbs().maxCoeff(), 1e-12);

  const auto k10 = ts::heat_kernel_fft(g, 10.0);
  EXPECT_LT((k10.K.array() - 1.0 / 32).abs().maxCoeff(), 1e-8);
}

TEST(KernelGeneral, MatchesFftForBrownianMotion) {
  Grid g(1, 1.0, 32);
  const auto a = ts::heat_kernel_fft(g, 0.5);
  const auto b = ts::kernel_general(g, PotentialSpec::zero(), 0.5);
  EXPECT_LE((a.K - b.K).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(KernelGeneral, MatchesFftInTwoDimensions) {
  Grid g(2, 1.0, 8);
  const auto a = ts::heat_kernel_fft(g, 0.05);
  const auto b = ts::kernel_general(g, PotentialSpec::zero(), 0.05);
  EXPECT_LE((a.K - b.K).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(KernelGeneral, ChapmanKolmogorov) {
  Grid g(1, 1.0, 32);
  const auto V = trig1(1.0, 0.5, 0.3);
  const auto half = ts::kernel_general(g, V, 0.25);
  const auto full = ts::kernel_general(g, V, 0.5);
  EXPECT_LE((half.K * half.K - full.K).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(KernelGeneral, StochasticAndReversible) {
  Grid g(1, 1.0, 64);
  for (const auto& V : {PotentialSpec::zero(), trig1(1.0, 0.0), trig1(3.0, -2.0, 1.0)}) {
    const auto k = ts::kernel_general(g, V, 0.3);
    const auto d = ts::kernel_defects(k);
    EXPECT_LE(d.row_sum, 1e-10);
    EXPECT_LE(d.reversibility, 1e-8);
    EXPECT_GE(d.min_entry, 0.0);
  }
}

TEST(KernelGeneral, StationaryMeasureIsInvariant) {
  Grid g(1, 1.0, 32);
  const auto k = ts::kernel_general(g, trig1(2.0, 1.0), 0.2);
  const ts::Vec<double> mK = k.K.transpose() * k.m_weights;
  EXPECT_LT((mK - k.m_weights).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(KernelGeneral, CrankNicolsonNearTimeZeroIsIdentity) {
  Grid g(1, 1.0, 32);
  ts::KernelOptions opts;
  opts.method = ts::KernelMethod::kCrankNicolson;
  opts.scheme = ts::KernelScheme::kCentral2;
  const auto k = ts::kernel_general(g, trig1(1.0, 0.0), 1e-8, opts);
  const Eigen::MatrixXd off = k.K - Eigen::MatrixXd(k.K.diagonal().asDiagonal());
  EXPECT_LE(off.rowwise().sum().maxCoeff(), 1e-3);
}

TEST(KernelGeneral, CrankNicolsonAgreesWithExpm) {
  Grid g(1, 1.0, 16);
  ts::KernelOptions cn;
  cn.method = ts::KernelMethod::kCrankNicolson;
  cn.scheme = ts::KernelScheme::kCentral2;
  cn.substeps = 4096;
  ts::KernelOptions ex = cn;
  ex.method = ts::KernelMethod::kExpm;
  const auto V = trig1(1.0, 1.0);
  const auto a = ts::kernel_general(g, V, 0.1, cn);
  const auto b = ts::kernel_general(g, V, 0.1, ex);
  EXPECT_LE((a.K - b.K).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(KernelGeneral, UnderResolvedSpectralKernelIsRejected) {
  Grid g(1, 1.0, 32);
  EXPECT_THROW(ts::kernel_general(g, PotentialSpec::zero(), 1e-6), ts::Error);
}

TEST(KernelGeneral, GeneratorRowsSumToZero) {
  Grid g(1, 1.0, 16);
  for (auto s : {ts::KernelScheme::kSpectral, ts::KernelScheme::kCentral2}) {
    const Eigen::MatrixXd G = ts::generator(g, trig1(1.0, 2.0), s);
    EXPECT_LT(G.rowwise().sum().cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(ApplyLog, ConstantsPassThrough) {
  Grid g(1, 1.0, 16);
  const auto k = ts::kernel_general(g, trig1(1.0, 0.0), 0.2);
  EXPECT_LT(ts::apply_log(k, GridFn::constant(g, 0.0)).values.cwiseAbs().maxCoeff(), 1e-14);
  const auto c = ts::apply_log(k, GridFn::constant(g, 3.5));
  EXPECT_LT((c.values.array() - 3.5).abs().maxCoeff(), 1e-14);
}

TEST(ApplyLog, MatchesExtendedPrecisionOracle) {
  Grid g(1, 1.0, 16);
  const auto k = ts::kernel_general(g, trig1(1.0, -1.0), 0.2);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  ts::Vec<double> v(g.size());
  for (auto& x : v) x = u(rng);
  const GridFn gf(g, v);
  const auto out = ts::apply_log(k, gf);
  for (Eigen::Index x = 0; x < g.size(); ++x) {
    long double s = 0.0L;
    for (Eigen::Index y = 0; y < g.size(); ++y) s += static_cast<long double>(k.K(x, y)) * std::exp(static_cast<long double>(v[y]));
    EXPECT_NEAR(out[x], static_cast<double>(std::log(s)), 1e-10);
  }
  // additive constants commute with the operator
  const auto shifted = ts::apply_log(k, GridFn(g, (v.array() + 7.0).matrix()));
  EXPECT_LT((shifted.values - out.values - ts::Vec<double>::Constant(g.size(), 7.0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ApplyLog, LargeExponentsDoNotOverflow) {
  Grid g(1, 1.0, 16);
  const auto k = ts::heat_kernel_fft(g, 0.1);
  ts::Vec<double> v = ts::Vec<double>::Constant(g.size(), -700.0);
  v[3] = 700.0;
  const auto out = ts::apply_log(k, GridFn(g, v));
  EXPECT_TRUE(out.values.allFinite());
}

TEST(ApplyLog, ZeroRowThrows) {
  Grid g(1, 1.0, 4);
  ts::MarkovKernel k = ts::heat_kernel_fft(g, 0.1);
  k.K.row(1).setZero();
  EXPECT_THROW(ts::apply_log(k, GridFn::constant(g, 0.0)), ts::Error);
}

TEST(KernelCache, RoundTripAndCorruption) {
  const auto dir = std::filesystem::temp_directory_path() / "ts_kernel_cache_test";
  std::filesystem::remove_all(dir);
  Grid g(1, 1.0, 16);
  const auto V = trig1(1.0, 0.0);
  const auto a = ts::cached_kernel(g, V, 0.2, {}, dir);
  const auto b = ts::cached_kernel(g, V, 0.2, {}, dir);
  EXPECT_EQ((a.K - b.K).cwiseAbs().maxCoeff(), 0.0);

  // corrupt one payload byte
  std::filesystem::path file;
  for (const auto& e : std::filesystem::directory_iterator(dir)) file = e.path();
  ASSERT_FALSE(file.empty());
  {
    std::fstream f(file, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(100);
    f.put('\x7f');
  }
  ts::KernelCacheKey key{g, 0.2, V.hash(), 0, ts::KernelScheme::kSpectral, ts::KernelMethod::kAuto};
  EXPECT_FALSE(ts::read_kernel_cache(file, key).has_value());
  const auto c = ts::cached_kernel(g, V, 0.2, {}, dir);
  EXPECT_EQ((a.K - c.K).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_TRUE(ts::read_kernel_cache(file, key).has_value());

  // a key mismatch is never served
  ts::KernelCacheKey other = key;
  other.t = 0.3;
  EXPECT_FALSE(ts::read_kernel_cache(file, other).has_value());
  std::filesystem::remove_all(dir);
}

}  // namespace
