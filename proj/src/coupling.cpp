#include "torus_schrodinger/coupling.hpp"

#include "torus_schrodinger/grid_ops.hpp"
#include "torus_schrodinger/rng.hpp"

#include <algorithm>

namespace ts {

namespace {

constexpr double kPi2 = std::numbers::pi * std::numbers::pi;

Index step_count(double t, double T, double dt) {
  return std::max<Index>(1, static_cast<Index>(std::llround((T - t) / dt)));
}

}  // namespace

Point<double> DriftSpec::base(double s, const Point<double>& z) const {
  Point<double> b = -V.gradient(z);
  if (own != nullptr) b -= interpolate(own->grad[own->node_at(s)], z);
  return b;
}

Point<double> DriftSpec::feedback(double s, const Point<double>& x) const {
  if (control == nullptr) return Point<double>::Zero(x.size());
  return -interpolate(control->grad[control->node_at(s)], x);
}

bool step_pair(PairState& st, double s, double dt, const DriftSpec& drift, const Point<double>& dB, double uniform,
               const Grid& grid, const StepOptions& opts) {
  if (!(dt > 0.0)) throw Error("coupling step needs dt > 0");
  const double tol = opts.coalesce_tol > 0.0 ? opts.coalesce_tol : 1e-4 * grid.side();
  const Point<double> c = drift.feedback(s, st.X);
  const Point<double> bx = drift.base(s, st.X) + c;
  if (st.coalesced || st.X == st.Y) {
    st.X = wrap(Point<double>(st.X + bx * dt + dB), grid);
    st.Y = st.X;
    const bool fresh = !st.coalesced;
    st.coalesced = true;
    return fresh;
  }
  const Point<double> by = drift.base(s, st.Y) + c;
  const Point<double> sn = sine_separation(st.X, st.Y, grid.side());
  const Point<double> e = sn / sn.norm();
  const double proj = e.dot(dB);
  const Point<double> dBhat = dB - 2.0 * proj * e;

  const Point<double> z = periodic_difference(st.X, st.Y, grid.side());
  st.X = wrap(Point<double>(st.X + bx * dt + dB), grid);
  st.Y = wrap(Point<double>(st.Y + by * dt + dBhat), grid);

  bool hit = sine_distance(st.X, st.Y, grid) <= tol;
  if (!hit && opts.bridge) {
    // separation along e moves by <(bx - by) dt + 2 e (e.dB), e> with variance 4 dt
    const double before = e.dot(z);
    const double after = before + e.dot(Point<double>((bx - by) * dt)) + 2.0 * proj;
    if (after <= 0.0) {
      hit = true;
    } else if (before > 0.0) {
      hit = uniform < std::exp(-before * after / (2.0 * dt));
    }
  }
  if (hit) {
    st.Y = st.X;
    st.coalesced = true;
  }
  return hit;
}

CouplingPath simulate_path(const Point<double>& x, const Point<double>& y, double t, double T, double dt,
                           const DriftSpec& drift, const Grid& grid, std::uint64_t seed, std::uint64_t path,
                           const StepOptions& opts) {
  if (!(T > t)) throw Error("coupling path needs t < T");
  const Index steps = step_count(t, T, dt);
  const double h = (T - t) / static_cast<double>(steps);
  const double sq = std::sqrt(h);
  auto rng = path_rng(seed, path);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u01;
  CouplingPath p;
  p.dt = h;
  p.seed = seed;
  PairState st{wrap(x, grid), wrap(y, grid), false};
  p.times.push_back(t);
  p.X.push_back(st.X);
  p.Y.push_back(st.Y);
  if (st.X == st.Y) p.tau = t;
  for (Index k = 0; k < steps; ++k) {
    const double s = t + static_cast<double>(k) * h;
    Point<double> dB(grid.dim());
    for (int a = 0; a < grid.dim(); ++a) dB[a] = sq * n01(rng);
    const double u = u01(rng);
    if (step_pair(st, s, h, drift, dB, u, grid, opts) && !p.tau) p.tau = s + h;
    p.times.push_back(s + h);
    p.X.push_back(st.X);
    p.Y.push_back(st.Y);
  }
  return p;
}

CouplingEstimate contraction_estimate(const Point<double>& x, const Point<double>& y, double t, double T,
                                      const DriftSpec& drift, const RateTriplet& fb, const Grid& grid,
                                      const CouplingOptions& opts) {
  if (opts.n_paths < 100) throw Error("coupling estimate needs at least 100 paths");
  if (!(opts.dt > 0.0) || opts.dt > 1e-2) throw Error("coupling estimate needs 0 < dt <= 1e-2");
  if (!(T > t)) throw Error("coupling estimate needs t < T");
  const Index steps = step_count(t, T, opts.dt);
  const double h = (T - t) / static_cast<double>(steps);
  const double sq = std::sqrt(h);

  // checkpoints snapped to step indices; T always last
  std::vector<Index> ck;
  std::vector<double> ck_times;
  for (double c : opts.checkpoints) {
    if (c < t - 1e-12 || c > T + 1e-12) throw Error("coupling checkpoints must lie in [t, T]");
    ck.push_back(std::clamp<Index>(static_cast<Index>(std::llround((c - t) / h)), 0, steps));
  }
  ck.push_back(steps);
  std::sort(ck.begin(), ck.end());
  ck.erase(std::unique(ck.begin(), ck.end()), ck.end());
  for (Index k : ck) ck_times.push_back(t + static_cast<double>(k) * h);

  CouplingEstimate est;
  est.n_paths = opts.n_paths;
  est.t = t;
  est.T = T;
  est.checkpoints = ck_times;
  est.start_distance = sine_distance(wrap(x, grid), wrap(y, grid), grid);
  est.f_values = Eigen::MatrixXd::Zero(opts.n_paths, static_cast<Index>(ck.size()));
  std::vector<char> coalesced(static_cast<std::size_t>(opts.n_paths), 0);

  parallel_for(static_cast<std::size_t>(opts.n_paths), opts.jobs, [&](std::size_t p) {
    auto rng = path_rng(opts.seed, p);
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> u01;
    PairState st{wrap(x, grid), wrap(y, grid), false};
    std::size_t next = 0;
    const Index row = static_cast<Index>(p);
    for (Index k = 0; k <= steps; ++k) {
      while (next < ck.size() && ck[next] == k) {
        est.f_values(row, static_cast<Index>(next)) = st.coalesced ? 0.0 : fb(sine_distance(st.X, st.Y, grid));
        ++next;
      }
      if (k == steps) break;
      Point<double> dB(grid.dim());
      for (int a = 0; a < grid.dim(); ++a) dB[a] = sq * n01(rng);
      const double u = u01(rng);
      step_pair(st, t + static_cast<double>(k) * h, h, drift, dB, u, grid, opts.step);
    }
    coalesced[p] = st.coalesced || st.X == st.Y;
  });

  const Index last = static_cast<Index>(ck.size()) - 1;
  const double n = static_cast<double>(opts.n_paths);
  const Vec<double> fT = est.f_values.col(last);
  est.mean = fT.sum() / n;
  est.std_error = std::sqrt((fT.array() - est.mean).square().sum() / (n - 1.0) / n);
  est.coalesced_fraction = static_cast<double>(std::count(coalesced.begin(), coalesced.end(), 1)) / n;
  for (Index k = 0; k <= last; ++k) {
    const double w = std::exp(fb.lambda * kPi2 * (ck_times[static_cast<std::size_t>(k)] - t));
    const Vec<double> col = w * est.f_values.col(k);
    const double m = col.sum() / n;
    est.weighted_means.push_back(m);
    est.weighted_se.push_back(std::sqrt((col.array() - m).square().sum() / (n - 1.0) / n));
  }
  return est;
}

SupermartingaleReport supermartingale_check(const CouplingEstimate& est, double lambda) {
  SupermartingaleReport r;
  const Index k_count = est.f_values.cols();
  const double n = static_cast<double>(est.f_values.rows());
  if (k_count < 2) throw Error("supermartingale check needs at least two checkpoints");
  Eigen::MatrixXd w = est.f_values;
  for (Index k = 0; k < k_count; ++k) {
    w.col(k) *= std::exp(lambda * kPi2 * (est.checkpoints[static_cast<std::size_t>(k)] - est.t));
    r.means.push_back(w.col(k).sum() / n);
  }
  r.worst_excess = -std::numeric_limits<double>::infinity();
  for (Index k = 0; k + 1 < k_count; ++k) {
    const Vec<double> diff = w.col(k + 1) - w.col(k);
    const double m = diff.sum() / n;
    const double se = std::sqrt((diff.array() - m).square().sum() / (n - 1.0) / n);
    const double excess = m - 2.0 * se;
    r.worst_excess = std::max(r.worst_excess, excess);
    if (excess > 0.0) r.pass = false;
  }
  return r;
}

}  // namespace ts
