#pragma once

#include "torus_schrodinger/markov_kernel.hpp"
#include "torus_schrodinger/rate_calculus.hpp"

#include <cstdint>
#include <functional>
#include <ostream>
#include <vector>

namespace ts {

/// Kernel of P_s for a horizon s > 0.
using KernelFactory = std::function<MarkovKernel(double)>;

/// Value function u(t) = -log P_{T-t} exp(-h) on a set of time nodes, with
/// its spectral gradient.
struct HjbEvolution {
  Grid grid;
  double T = 0.0;
  std::vector<double> times;
  std::vector<GridFn> u;
  std::vector<std::vector<GridFn>> grad;

  /// Index of the last node with time <= s (piecewise-constant lookup).
  std::size_t node_at(double s) const;
};

/// count equispaced nodes t_k = k T / (count - 1).
std::vector<double> uniform_time_nodes(double T, int count);

HjbEvolution evolve(const GridFn& h, double T, const std::vector<double>& time_nodes, const KernelFactory& kernels);

/// |u(t)|_f / |h|_f at every node; the contract is r(t) <= exp(-lambda pi^2 (T - t)).
std::vector<double> contraction_ratio(const HjbEvolution& ev, const RateTriplet& fb);

/// Evolution of the difference of the value functions started from psi_n and psi_star.
HjbEvolution difference_evolution(const GridFn& psi_n, const GridFn& psi_star, double T,
                                  const std::vector<double>& time_nodes, const KernelFactory& kernels);

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  Index n_paths = 0;
};

struct McOptions {
  Index n_paths = 20000;
  double dt = 1e-3;
  std::uint64_t seed = 1;
  int jobs = 1;
};

/// Cost (1/2) int |q|^2 ds + h(X_T) of the feedback control q = -grad u
/// from (t, x), by Euler-Maruyama with wrap. The evolution must cover [t, T]
/// with node spacing <= dt, and dt must not exceed the grid spacing.
McEstimate soc_value_mc(const HjbEvolution& ev, const PotentialSpec& V, const GridFn& h, const Point<double>& x,
                        double t, const McOptions& opts);

/// Same objective for the constant (open-loop) control q.
McEstimate constant_control_mc(const PotentialSpec& V, const GridFn& h, const Point<double>& x, double t, double T,
                               const Point<double>& q, const McOptions& opts);

/// max |du/dt + Lap u / 2 - grad V . grad u - |grad u|^2 / 2| over interior
/// time nodes (central differences in time, spectral in space).
double hjb_residual(const HjbEvolution& ev, const PotentialSpec& V);

/// Columns t, node, u, du (du = |grad u|).
void write_snapshots_csv(std::ostream& os, const HjbEvolution& ev);

}  // namespace ts
