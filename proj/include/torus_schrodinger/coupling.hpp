#pragma once

#include "torus_schrodinger/hjb.hpp"
#include "torus_schrodinger/potential.hpp"
#include "torus_schrodinger/rate_calculus.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace ts {

/// Drift of the coupled pair. Each process feels -grad V and, when `own` is
/// set, -grad u_s evaluated at its own state. When `control` is set, both
/// processes additionally feel -grad w_s evaluated at the X state.
struct DriftSpec {
  PotentialSpec V;
  const HjbEvolution* own = nullptr;
  const HjbEvolution* control = nullptr;

  /// -grad V(z) - grad u_s(z).
  Point<double> base(double s, const Point<double>& z) const;
  /// -grad w_s(x), or zero.
  Point<double> feedback(double s, const Point<double>& x) const;
};

struct PairState {
  Point<double> X, Y;
  bool coalesced = false;
};

struct StepOptions {
  /// Pairs closer than this in sine distance are merged; 0 picks 1e-4 L.
  double coalesce_tol = 0.0;
  /// Detect crossings inside a step (sign change of the separation and a
  /// Brownian-bridge test); disable to get the bare tolerance rule.
  bool bridge = true;
};

/// One Euler-Maruyama step of the reflection coupling. dB is the N(0, dt I)
/// increment of X; Y receives (I - 2 e e^T) dB with e the unit sine
/// separation. `uniform` in [0, 1) drives the bridge crossing test.
/// Returns true when the pair coalesces during this step.
bool step_pair(PairState& st, double s, double dt, const DriftSpec& drift, const Point<double>& dB, double uniform,
               const Grid& grid, const StepOptions& opts = {});

struct CouplingPath {
  double dt = 0.0;
  std::vector<double> times;
  std::vector<Point<double>> X, Y;
  std::optional<double> tau;
  std::uint64_t seed = 0;
};

CouplingPath simulate_path(const Point<double>& x, const Point<double>& y, double t, double T, double dt,
                           const DriftSpec& drift, const Grid& grid, std::uint64_t seed, std::uint64_t path = 0,
                           const StepOptions& opts = {});

struct CouplingEstimate {
  Index n_paths = 0;
  double mean = 0.0;          // mean of f(delta(X_T, Y_T))
  double std_error = 0.0;
  double coalesced_fraction = 0.0;
  double start_distance = 0.0;
  double t = 0.0, T = 0.0;
  std::vector<double> checkpoints;
  /// f(delta_s) per path (row) and checkpoint (column).
  Eigen::MatrixXd f_values;
  /// Mean of exp(lambda pi^2 s) f(delta_s) with lambda taken from the triplet.
  std::vector<double> weighted_means;
  std::vector<double> weighted_se;
};

struct CouplingOptions {
  Index n_paths = 10000;
  double dt = 1e-3;
  std::uint64_t seed = 1;
  int jobs = 1;
  std::vector<double> checkpoints;  // times in [t, T]; T is always appended
  StepOptions step;
};

CouplingEstimate contraction_estimate(const Point<double>& x, const Point<double>& y, double t, double T,
                                      const DriftSpec& drift, const RateTriplet& fb, const Grid& grid,
                                      const CouplingOptions& opts);

struct SupermartingaleReport {
  bool pass = true;
  std::vector<double> means;  // exp(lambda pi^2 s) E f(delta_s)
  /// Largest increase between consecutive checkpoints minus 2 SE of the paired difference.
  double worst_excess = 0.0;
};

SupermartingaleReport supermartingale_check(const CouplingEstimate& est, double lambda);

}  // namespace ts
