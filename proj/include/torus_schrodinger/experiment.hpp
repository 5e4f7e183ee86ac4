#pragma once

#include "torus_schrodinger/config.hpp"
#include "torus_schrodinger/coupling.hpp"
#include "torus_schrodinger/hjb.hpp"
#include "torus_schrodinger/markov_kernel.hpp"
#include "torus_schrodinger/rate_calculus.hpp"
#include "torus_schrodinger/sinkhorn.hpp"

#include <filesystem>
#include <memory>
#include <string>

namespace ts {

/// A config turned into grid objects.
struct Problem {
  ExperimentConfig cfg;
  Grid grid;
  PotentialSpec V;
  GridFn U_mu, U_nu, psi0;
  KernelOptions kernel;
  Modulus modulus;
};

/// Resolves CSV paths relative to base_dir. CSV tables hold one row per node
/// in flat order and a header naming the column (V, U_mu or U_nu).
Problem build_problem(const ExperimentConfig& cfg, const std::filesystem::path& base_dir = ".");

/// Reads the named column of a node table.
GridFn read_node_column(const std::filesystem::path& path, const std::string& column, const Grid& grid);

/// Everything a Sinkhorn experiment produces.
struct SolvedInstance {
  MarkovKernel K;
  MarginalPair marginals;
  RateBundle rates;
  ReferencePotentials ref;
  RunResult run;
};

SolvedInstance solve_problem(const Problem& p);

/// Least-squares slope of log(errors[n]) against n over entries above floor;
/// NaN when fewer than two entries qualify.
double fitted_log_slope(const std::vector<double>& errors, double floor);

/// Piecewise-constant-in-time kernels from one eigendecomposition.
KernelFactory kernel_factory(const Problem& p);

std::vector<double> time_nodes_with_spacing(double T, double dt);

/// Pinned benchmark: d = 1, L = 1, N = 128, T = 0.5, V = 0 and smooth
/// first-mode marginals.
ExperimentConfig benchmark_config();

}  // namespace ts
