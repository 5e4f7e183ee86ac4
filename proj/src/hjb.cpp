#include "torus_schrodinger/hjb.hpp"

#include "torus_schrodinger/grid_ops.hpp"
#include "torus_schrodinger/io.hpp"
#include "torus_schrodinger/rng.hpp"

#include <algorithm>
#include <sstream>

namespace ts {

namespace {

McEstimate summarize(const std::vector<double>& costs) {
  McEstimate e;
  e.n_paths = static_cast<Index>(costs.size());
  double s = 0.0;
  for (double c : costs) s += c;
  e.mean = s / static_cast<double>(costs.size());
  double v = 0.0;
  for (double c : costs) v += (c - e.mean) * (c - e.mean);
  const double n = static_cast<double>(costs.size());
  e.std_error = costs.size() > 1 ? std::sqrt(v / (n - 1.0) / n) : 0.0;
  return e;
}

void check_mc(const Grid& grid, const McOptions& opts) {
  if (opts.n_paths < 2) throw Error("Monte Carlo needs at least 2 paths");
  if (!(opts.dt > 0.0)) throw Error("Monte Carlo time step must be positive");
  if (opts.dt > grid.spacing()) {
    std::ostringstream os;
    os << "Monte Carlo time step " << opts.dt << " exceeds the grid spacing " << grid.spacing();
    throw Error(os.str());
  }
}

Index step_count(double t, double T, double dt) {
  return std::max<Index>(1, static_cast<Index>(std::llround((T - t) / dt)));
}

}  // namespace

std::size_t HjbEvolution::node_at(double s) const {
  const auto it = std::upper_bound(times.begin(), times.end(), s + 1e-12 * std::max(1.0, T));
  if (it == times.begin()) return 0;
  return static_cast<std::size_t>(it - times.begin()) - 1;
}

std::vector<double> uniform_time_nodes(double T, int count) {
  if (count < 2) throw Error("need at least two time nodes");
  std::vector<double> t(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) t[static_cast<std::size_t>(k)] = T * k / (count - 1);
  t.back() = T;
  return t;
}

HjbEvolution evolve(const GridFn& h, double T, const std::vector<double>& time_nodes, const KernelFactory& kernels) {
  if (!(T > 0.0)) throw Error("HJB horizon must be positive");
  if (time_nodes.empty()) throw Error("HJB evolution needs time nodes");
  for (std::size_t k = 0; k < time_nodes.size(); ++k) {
    if (time_nodes[k] < 0.0 || time_nodes[k] > T) throw Error("HJB time nodes must lie in [0, T]");
    if (k > 0 && !(time_nodes[k] > time_nodes[k - 1])) throw Error("HJB time nodes must be increasing");
  }
  HjbEvolution ev;
  ev.grid = h.grid;
  ev.T = T;
  ev.times = time_nodes;
  const GridFn minus_h(h.grid, -h.values);
  for (double t : time_nodes) {
    GridFn u = h;
    if (t < T) {
      const MarkovKernel K = kernels(T - t);
      if (!(K.grid == h.grid)) throw Error("kernel factory returned a kernel on another grid");
      u = GridFn(h.grid, -apply_log(K, minus_h).values);
    }
    ev.grad.push_back(gradient(u));
    ev.u.push_back(std::move(u));
  }
  return ev;
}

std::vector<double> contraction_ratio(const HjbEvolution& ev, const RateTriplet& fb) {
  const double hn = f_lip_norm(ev.u.back(), fb);
  if (ev.times.back() != ev.T) throw Error("contraction ratio needs the terminal node t = T");
  if (!(hn > 0.0)) throw Error("contraction ratio needs a terminal function with positive f-norm");
  std::vector<double> r;
  for (const auto& u : ev.u) r.push_back(f_lip_norm(u, fb) / hn);
  return r;
}

HjbEvolution difference_evolution(const GridFn& psi_n, const GridFn& psi_star, double T,
                                  const std::vector<double>& time_nodes, const KernelFactory& kernels) {
  if (!(psi_n.grid == psi_star.grid)) throw Error("difference evolution needs one grid");
  const HjbEvolution a = evolve(psi_n, T, time_nodes, kernels);
  const HjbEvolution b = evolve(psi_star, T, time_nodes, kernels);
  HjbEvolution d = a;
  for (std::size_t k = 0; k < a.u.size(); ++k) {
    d.u[k] = GridFn(a.grid, a.u[k].values - b.u[k].values);
    for (std::size_t c = 0; c < a.grad[k].size(); ++c)
      d.grad[k][c] = GridFn(a.grid, a.grad[k][c].values - b.grad[k][c].values);
  }
  return d;
}

McEstimate soc_value_mc(const HjbEvolution& ev, const PotentialSpec& V, const GridFn& h, const Point<double>& x,
                        double t, const McOptions& opts) {
  check_mc(ev.grid, opts);
  if (t < ev.times.front() - 1e-12 || t >= ev.T) throw Error("start time must lie in the evolution's window");
  for (std::size_t k = 1; k < ev.times.size(); ++k) {
    if (ev.times[k] > t && ev.times[k] - ev.times[k - 1] > opts.dt * (1.0 + 1e-9)) {
      throw Error("the evolution's time grid is coarser than the Monte Carlo step");
    }
  }
  const Index steps = step_count(t, ev.T, opts.dt);
  const double dt = (ev.T - t) / static_cast<double>(steps);
  const double sq = std::sqrt(dt);
  const int d = ev.grid.dim();
  std::vector<double> costs(static_cast<std::size_t>(opts.n_paths));
  parallel_for(costs.size(), opts.jobs, [&](std::size_t p) {
    auto rng = path_rng(opts.seed, p);
    std::normal_distribution<double> n01;
    Point<double> X = wrap(x, ev.grid);
    double running = 0.0;
    for (Index k = 0; k < steps; ++k) {
      const double s = t + static_cast<double>(k) * dt;
      const auto& g = ev.grad[ev.node_at(s)];
      const Point<double> q = -interpolate(g, X);
      running += 0.5 * q.squaredNorm() * dt;
      Point<double> dB(d);
      for (int a = 0; a < d; ++a) dB[a] = sq * n01(rng);
      X = wrap(Point<double>(X + (q - V.gradient(X)) * dt + dB), ev.grid);
    }
    costs[p] = running + interpolate(h, X);
  });
  return summarize(costs);
}

McEstimate constant_control_mc(const PotentialSpec& V, const GridFn& h, const Point<double>& x, double t, double T,
                               const Point<double>& q, const McOptions& opts) {
  check_mc(h.grid, opts);
  if (!(T > t)) throw Error("constant-control objective needs t < T");
  const Index steps = step_count(t, T, opts.dt);
  const double dt = (T - t) / static_cast<double>(steps);
  const double sq = std::sqrt(dt);
  const int d = h.grid.dim();
  std::vector<double> costs(static_cast<std::size_t>(opts.n_paths));
  parallel_for(costs.size(), opts.jobs, [&](std::size_t p) {
    auto rng = path_rng(opts.seed, p);
    std::normal_distribution<double> n01;
    Point<double> X = wrap(x, h.grid);
    for (Index k = 0; k < steps; ++k) {
      Point<double> dB(d);
      for (int a = 0; a < d; ++a) dB[a] = sq * n01(rng);
      X = wrap(Point<double>(X + (q - V.gradient(X)) * dt + dB), h.grid);
    }
    costs[p] = 0.5 * q.squaredNorm() * (T - t) + interpolate(h, X);
  });
  return summarize(costs);
}

double hjb_residual(const HjbEvolution& ev, const PotentialSpec& V) {
  if (ev.times.size() < 3) throw Error("HJB residual needs at least three time nodes");
  const Grid& g = ev.grid;
  std::vector<Point<double>> gradV;
  for (Index i = 0; i < g.size(); ++i) gradV.push_back(V.gradient(g.node(i)));
  double worst = 0.0;
  for (std::size_t k = 1; k + 1 < ev.times.size(); ++k) {
    const double t0 = ev.times[k - 1], t1 = ev.times[k], t2 = ev.times[k + 1];
    // three-point derivative on a possibly nonuniform grid
    const double a = -(t2 - t1) / ((t1 - t0) * (t2 - t0));
    const double c = (t1 - t0) / ((t2 - t1) * (t2 - t0));
    const double b = -a - c;
    const Vec<double> dudt = a * ev.u[k - 1].values + b * ev.u[k].values + c * ev.u[k + 1].values;
    const GridFn lap = laplacian(ev.u[k]);
    for (Index i = 0; i < g.size(); ++i) {
      double drift = 0.0, grad2 = 0.0;
      for (std::size_t ax = 0; ax < ev.grad[k].size(); ++ax) {
        const double gi = ev.grad[k][ax][i];
        drift += gradV[static_cast<std::size_t>(i)][static_cast<Index>(ax)] * gi;
        grad2 += gi * gi;
      }
      worst = std::max(worst, std::abs(dudt[i] + 0.5 * lap[i] - drift - 0.5 * grad2));
    }
  }
  return worst;
}

void write_snapshots_csv(std::ostream& os, const HjbEvolution& ev) {
  os << "t,node,u,du\r\n";
  for (std::size_t k = 0; k < ev.times.size(); ++k) {
    for (Index i = 0; i < ev.grid.size(); ++i) {
      double g2 = 0.0;
      for (const auto& c : ev.grad[k]) g2 += c[i] * c[i];
      os << format_number(ev.times[k]) << ',' << i << ',' << format_number(ev.u[k][i]) << ','
         << format_number(std::sqrt(g2)) << "\r\n";
    }
  }
}

}  // namespace ts
