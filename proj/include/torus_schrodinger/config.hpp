#pragma once

#include "torus_schrodinger/potential.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ts {

/// Source of a potential-like field (V, U_mu, U_nu).
struct FieldConfig {
  enum class Kind { kZero, kTrig, kCsv };
  Kind kind = Kind::kZero;
  std::vector<TrigTerm> terms;  // one per axis when kind == kTrig
  std::string csv;              // path; the column is named V, U_mu or U_nu

  friend bool operator==(const FieldConfig&, const FieldConfig&) = default;
};

struct SolverConfig {
  int max_iter = 500;
  double tol = 1e-12;
  FieldConfig psi0;  // kZero or kTrig
  friend bool operator==(const SolverConfig&, const SolverConfig&) = default;
};

struct KernelConfig {
  std::string method = "auto";     // auto | expm | cn
  std::string scheme = "spectral"; // spectral | central2
  int substeps = 0;
  friend bool operator==(const KernelConfig&, const KernelConfig&) = default;
};

struct McConfig {
  std::int64_t n_paths = 10000;
  double dt = 1e-3;
  std::uint64_t seed = 1;
  std::vector<double> checkpoints;  // empty: ten equispaced times
  double coalesce_tol = 0.0;        // 0: 1e-4 L
  std::vector<double> x, y;         // coupling start points; empty: origin and (L/2, 0, ...)
  std::int64_t soc_paths = 20000;
  friend bool operator==(const McConfig&, const McConfig&) = default;
};

struct RatesConfig {
  std::int64_t quad_nodes = 1024;
  std::string modulus = "auto";  // auto | constant | trig
  double alpha = 0.0;            // constant modulus value, <= 0
  friend bool operator==(const RatesConfig&, const RatesConfig&) = default;
};

struct HjbConfig {
  int time_nodes = 16;
  std::string terminal = "psi_star";  // psi_star | sine
  friend bool operator==(const HjbConfig&, const HjbConfig&) = default;
};

/// Parameters of one experiment. See README.md for the file grammar.
struct ExperimentConfig {
  int d = 1;
  double L = 1.0;
  std::int64_t N = 128;
  double T = 0.5;
  FieldConfig potential, mu, nu;
  SolverConfig solver;
  KernelConfig kernel;
  McConfig mc;
  RatesConfig rates;
  HjbConfig hjb;
  std::string output_dir = "out";

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Parses `key = value` lines (keys d, L, N, T and section.key). Blank lines
/// and lines starting with '#' are ignored. Throws Error naming the line on
/// unknown or repeated keys, bad values and violated ranges.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Every key in a fixed order with 17 significant digits, so that
/// parse_config(emit_config(c)) == c.
std::string emit_config(const ExperimentConfig& c);

}  // namespace ts
