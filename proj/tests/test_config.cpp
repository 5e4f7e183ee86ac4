#include "torus_schrodinger/config.hpp"

#include <gtest/gtest.h>

namespace {

using ts::ExperimentConfig;

std::string error_of(const std::string& text) {
  try {
    ts::parse_config(text);
  } catch (const ts::Error& e) {
    return e.what();
  }
  return "";
}

TEST(Config, MinimalFillsDefaults) {
  const auto c = ts::parse_config("d = 1\nL = 1\nN = 64\nT = 0.5\n");
  EXPECT_EQ(c.d, 1);
  EXPECT_EQ(c.N, 64);
  EXPECT_EQ(c.solver.max_iter, 500);
  EXPECT_EQ(c.solver.tol, 1e-12);
  EXPECT_EQ(c.mc.n_paths, 10000);
  EXPECT_EQ(c.rates.quad_nodes, 1024);
  EXPECT_EQ(c.kernel.scheme, "spectral");
  EXPECT_EQ(c.potential.kind, ts::FieldConfig::Kind::kZero);
  EXPECT_EQ(c.output_dir, "out");
}

TEST(Config, CommentsBlankLinesAndSections) {
  const auto c = ts::parse_config(
      "# benchmark\n\nd = 2\nL = 2.5\nN = 16\nT = 0.1\n"
      "potential.kind = trig\npotential.terms = 1 0 0; 0.5 0.5 0.1\n"
      "mc.checkpoints = 0 0.05 0.1\nmc.seed = 18446744073709551615\nrates.modulus = trig\n");
  EXPECT_EQ(c.potential.terms.size(), 2u);
  EXPECT_EQ(c.potential.terms[1].omega, 0.1);
  EXPECT_EQ(c.mc.checkpoints.size(), 3u);
  EXPECT_EQ(c.mc.seed, 18446744073709551615ULL);
}

TEST(Config, RoundTrip) {
  ExperimentConfig c = ts::parse_config("d = 2\nL = 0.7\nN = 32\nT = 0.3\n");
  c.potential.kind = ts::FieldConfig::Kind::kTrig;
  c.potential.terms = {{0.1, 1.0 / 3.0, 2.0}, {std::acos(-1.0), 0.0, -1e-300}};
  c.mu.kind = ts::FieldConfig::Kind::kCsv;
  c.mu.csv = "data/marginals.csv";
  c.mc.checkpoints = {0.0, 0.1 + 0.15};
  c.mc.x = {0.1, 0.2};
  c.rates.alpha = -0.125;
  c.solver.tol = 3e-13;
  const std::string text = ts::emit_config(c);
  EXPECT_EQ(ts::parse_config(text), c);
  EXPECT_EQ(ts::emit_config(ts::parse_config(text)), text);
}

TEST(Config, ErrorsCarryLineNumbers) {
  EXPECT_NE(error_of("d = 1\nL = 1\nfoo.bar = 2\n").find("line 3: unknown key 'foo.bar'"), std::string::npos);
  EXPECT_NE(error_of("d = 1\nL = 1\nN = 64\n").find("line 4: missing required key 'T'"), std::string::npos);
  EXPECT_NE(error_of("d = 1\nL = 1\nN = 60\nT = 1\n").find("line 3: N must be a power of two"), std::string::npos);
  EXPECT_NE(error_of("d = 1\nL = x\n").find("line 2: expected a number"), std::string::npos);
  EXPECT_NE(error_of("d = 1\nd = 2\n").find("line 2: key 'd' repeats line 1"), std::string::npos);
  EXPECT_NE(error_of("d = 1\nL = 1\nN = 8\nT = 1\nkernel.method = magic\n").find("line 5: expected one of"),
            std::string::npos);
}

TEST(Config, PositiveAlphaRejected) {
  const std::string msg = error_of("d = 1\nL = 1\nN = 8\nT = 1\nrates.modulus = constant\nrates.alpha = 0.5\n");
  EXPECT_NE(msg.find("line 6: rates.alpha must be <= 0"), std::string::npos) << msg;
}

TEST(Config, RangeChecks) {
  const std::string base = "d = 1\nL = 1\nN = 8\nT = 1\n";
  EXPECT_FALSE(error_of(base + "mc.dt = 0.1\n").empty());
  EXPECT_FALSE(error_of(base + "mc.n_paths = 5\n").empty());
  EXPECT_FALSE(error_of(base + "mc.checkpoints = 0 2\n").empty());
  EXPECT_FALSE(error_of(base + "potential.kind = trig\n").empty());
  EXPECT_FALSE(error_of(base + "potential.kind = trig\npotential.terms = 1 0\n").empty());
  EXPECT_FALSE(error_of(base + "mc.x = 0 0\n").empty());
  EXPECT_FALSE(error_of("d = 4\nL = 1\nN = 8\nT = 1\n").empty());
  EXPECT_FALSE(error_of("d = 1\nL = -1\nN = 8\nT = 1\n").empty());
  EXPECT_FALSE(error_of("d = 1\nL = 1\nN = 8\nT = 0\n").empty());
  EXPECT_FALSE(error_of(base + "rates.modulus = trig\n").empty());
  EXPECT_FALSE(error_of(base + "potential.kind = csv\npotential.csv = v.csv\n").empty());
}

}  // namespace
