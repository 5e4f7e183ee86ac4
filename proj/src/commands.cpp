#include "torus_schrodinger/commands.hpp"

#include "torus_schrodinger/acceptance.hpp"
#include "torus_schrodinger/experiment.hpp"
#include "torus_schrodinger/grid_ops.hpp"
#include "torus_schrodinger/io.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

#ifndef TS_VERSION
#define TS_VERSION "unknown"
#endif

namespace ts {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

constexpr double kPi = std::numbers::pi;
constexpr double kPi2 = kPi * kPi;

struct Session {
  ExperimentConfig cfg;
  fs::path base_dir;
  fs::path out;
  std::string command;
  CommandOptions opts;

  Json header() const {
    Json j;
    j["command"] = command;
    j["version"] = TS_VERSION;
    j["seed"] = cfg.mc.seed;
    j["config"] = emit_config(cfg);
    return j;
  }

  std::ofstream open(const std::string& name) const {
    std::ofstream f(out / name, std::ios::binary);
    if (!f) throw Error("cannot write " + (out / name).string());
    return f;
  }

  void write_json(const std::string& name, const Json& j) const { open(name) << j.dump(2) << "\n"; }
};

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

int finish(const Session& s, Json j, bool pass, std::ostream& log, const std::string& file) {
  j["pass"] = pass;
  s.write_json(file, j);
  log << s.command << ": " << (pass ? "all contracts pass" : "a contract FAILED") << " (" << (s.out / file).string()
      << ")\n";
  return pass ? 0 : 1;
}

void write_potentials_csv(const Session& s, const Grid& g, const GridFn& phi, const GridFn& psi) {
  auto f = s.open("potentials.csv");
  f << "node";
  for (int a = 0; a < g.dim(); ++a) f << ",x" << a;
  f << ",phi_star,psi_star\r\n";
  for (Index i = 0; i < g.size(); ++i) {
    f << i;
    const Point<double> x = g.node(i);
    for (int a = 0; a < g.dim(); ++a) f << ',' << format_number(x[a]);
    f << ',' << format_number(phi[i]) << ',' << format_number(psi[i]) << "\r\n";
  }
}

int cmd_solve(const Session& s, std::ostream& log) {
  const Problem p = build_problem(s.cfg, s.base_dir);
  const SolvedInstance r = solve_problem(p);
  const auto& hist = r.run.state.history;
  {
    auto f = s.open("history.csv");
    write_history_csv(f, hist);
  }
  write_potentials_csv(s, p.grid, r.ref.phi_star, r.ref.psi_star);

  std::vector<double> sup;
  double tv = 0.0;
  for (std::size_t n = 0; n < hist.size(); ++n) {
    sup.push_back(hist[n].sup_err_psi);
    if (n > 0) tv = std::max(tv, hist[n].half_step_tv);
  }
  const double slope = fitted_log_slope(sup, 1e-12);
  const double theory = -2.0 * r.rates.lambda_bar() * kPi2 * p.cfg.T;
  const double kl_star = plan_kl(r.ref.phi_star, r.ref.psi_star, r.K);
  const bool slope_ok = !std::isfinite(slope) || slope <= theory;

  Json j = s.header();
  j["iterations"] = r.run.state.n;
  j["converged"] = r.run.converged;
  j["final_change"] = number(r.run.final_change);
  j["reference_residual"] = r.ref.residual;
  j["reference_iterations"] = r.ref.iterations;
  j["final_sup_err_psi"] = number(hist.back().sup_err_psi);
  j["max_half_step_tv"] = tv;
  j["fitted_slope"] = number(slope);
  j["theoretical_slope"] = theory;
  j["lambda_V"] = r.rates.lambda_V();
  j["lambda_bar"] = r.rates.lambda_bar();
  j["gamma"] = r.rates.gamma;
  j["kl_final"] = number(hist.back().kl_cost);
  j["kl_star"] = kl_star;
  j["half_step_ok"] = tv <= 1e-12;
  j["residual_ok"] = r.ref.residual <= 1e-10;
  j["slope_ok"] = slope_ok;
  return finish(s, std::move(j), tv <= 1e-12 && r.ref.residual <= 1e-10 && slope_ok, log, "summary.json");
}

int cmd_rates(const Session& s, std::ostream& log) {
  const Problem p = build_problem(s.cfg, s.base_dir);
  const MarkovKernel K = cached_kernel(p.grid, p.V, p.cfg.T, p.kernel);
  const MarginalPair mp = make_marginals(p.U_mu, p.U_nu, K.m_weights);
  const RateBundle b = rate_constants(p.modulus, mp.U_mu, mp.U_nu, p.cfg.T, p.cfg.rates.quad_nodes);
  const TripletCheck cV = check_triplet(b.fV);
  const TripletCheck cbar = check_triplet(b.fbar);

  Json j = s.header();
  j["T"] = b.T;
  j["D"] = b.D;
  j["lambda_V"] = b.lambda_V();
  j["C_V"] = b.C_V();
  j["norm_U_mu"] = b.norm_U_mu;
  j["norm_U_nu"] = b.norm_U_nu;
  j["M"] = b.M;
  j["lambda_bar"] = b.lambda_bar();
  j["C_bar"] = b.C_bar();
  j["gamma"] = b.gamma;
  j["cS_printed"] = b.cS_printed;
  j["cS_verified"] = b.cS_verified;
  if (b.bounds) {
    j["bound_eta_D"] = b.bounds->eta_D;
    j["bound_rate_lower"] = b.bounds->rate_lower;
    j["bound_perturbed_rate_lower"] = b.bounds->perturbed_rate_lower;
    j["bound_log_gamma"] = b.bounds->log_gamma_bound;
    j["bound_cS_printed"] = b.bounds->cS_bound_printed;
    j["bound_cS_verified"] = b.bounds->cS_bound_verified;
    j["bound_log_gamma0"] = b.bounds->log_gamma0_bound;
    j["bound_log_gamma0_coarse"] = b.bounds->log_gamma0_bound_coarse;
  }
  if (b.asymptotics) {
    j["asym_D_mu_nu"] = b.asymptotics->D_mu_nu;
    j["asym_log_gamma0"] = b.asymptotics->log_gamma0;
    j["asym_cS"] = b.asymptotics->cS;
  }
  if (b.brownian_lambda_bar) j["brownian_lambda_bar"] = *b.brownian_lambda_bar;
  j["triplet_V_ok"] = cV.pass;
  j["triplet_bar_ok"] = cbar.pass;

  auto f = s.open("rates.csv");
  f << "r,f_V,f_bar\r\n";
  const int rows = 256;
  for (int k = 0; k <= rows; ++k) {
    const double r = b.D * k / rows;
    f << format_number(r) << ',' << format_number(b.fV(r)) << ',' << format_number(b.fbar(r)) << "\r\n";
  }
  return finish(s, std::move(j), cV.pass && cbar.pass, log, "rates.json");
}

int cmd_hjb_check(const Session& s, std::ostream& log) {
  const Problem p = build_problem(s.cfg, s.base_dir);
  const double T = p.cfg.T;
  GridFn h;
  RateTriplet fV;
  if (p.cfg.hjb.terminal == "psi_star") {
    const SolvedInstance r = solve_problem(p);
    h = r.ref.psi_star;
    fV = r.rates.fV;
  } else {
    const double k0 = 2.0 * kPi / p.grid.side();
    h = sample(p.grid, [k0](const Point<double>& x) { return std::sin(k0 * x[0]); });
    fV = rate_triplet(p.modulus, p.cfg.rates.quad_nodes);
  }
  const auto nodes = uniform_time_nodes(T, p.cfg.hjb.time_nodes);
  const HjbEvolution ev = evolve(h, T, nodes, kernel_factory(p));
  const auto ratio = contraction_ratio(ev, fV);
  double worst = 0.0;
  auto f = s.open("contraction.csv");
  f << "t,ratio,bound\r\n";
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const double bound = std::exp(-fV.lambda * kPi2 * (T - nodes[k]));
    worst = std::max(worst, ratio[k] / bound);
    f << format_number(nodes[k]) << ',' << format_number(ratio[k]) << ',' << format_number(bound) << "\r\n";
  }
  {
    auto snap = s.open("snapshots.csv");
    write_snapshots_csv(snap, ev);
  }
  Json j = s.header();
  j["terminal"] = p.cfg.hjb.terminal;
  j["time_nodes"] = nodes.size();
  j["lambda_V"] = fV.lambda;
  j["ratio_at_0"] = ratio.front();
  j["bound_at_0"] = std::exp(-fV.lambda * kPi2 * T);
  j["max_ratio_over_bound"] = worst;
  j["pde_residual"] = number(nodes.size() >= 3 ? hjb_residual(ev, p.V) : std::numeric_limits<double>::quiet_NaN());
  return finish(s, std::move(j), worst <= 1.0 + 1e-6, log, "hjb.json");
}

int cmd_couple(const Session& s, std::ostream& log) {
  const Problem p = build_problem(s.cfg, s.base_dir);
  const double T = p.cfg.T, L = p.grid.side();
  const int d = p.grid.dim();
  const RateTriplet fb = rate_triplet(p.modulus, p.cfg.rates.quad_nodes);
  auto point = [d](const std::vector<double>& v, double first) {
    Point<double> x = Point<double>::Zero(d);
    if (v.empty()) {
      x[0] = first;
    } else {
      for (int a = 0; a < d; ++a) x[a] = v[static_cast<std::size_t>(a)];
    }
    return x;
  };
  const Point<double> x = point(p.cfg.mc.x, 0.0);
  const Point<double> y = point(p.cfg.mc.y, L / 4);
  CouplingOptions o;
  o.n_paths = s.opts.quick ? std::min<std::int64_t>(p.cfg.mc.n_paths, 2000) : p.cfg.mc.n_paths;
  o.dt = p.cfg.mc.dt;
  o.seed = p.cfg.mc.seed;
  o.jobs = s.opts.jobs;
  o.step.coalesce_tol = p.cfg.mc.coalesce_tol;
  o.checkpoints = p.cfg.mc.checkpoints;
  if (o.checkpoints.empty()) {
    for (int k = 0; k < 10; ++k) o.checkpoints.push_back(T * k / 10.0);
  }
  const CouplingEstimate est = contraction_estimate(x, y, 0.0, T, {p.V}, fb, p.grid, o);
  const SupermartingaleReport rep = supermartingale_check(est, fb.lambda);
  const double bound = std::exp(-fb.lambda * kPi2 * T) * est.start_distance;

  auto f = s.open("checkpoints.csv");
  f << "t,weighted_mean,weighted_se\r\n";
  for (std::size_t k = 0; k < est.checkpoints.size(); ++k) {
    f << format_number(est.checkpoints[k]) << ',' << format_number(est.weighted_means[k]) << ','
      << format_number(est.weighted_se[k]) << "\r\n";
  }
  Json j = s.header();
  j["n_paths"] = est.n_paths;
  j["dt"] = o.dt;
  j["lambda"] = fb.lambda;
  j["start_distance"] = est.start_distance;
  j["mean"] = est.mean;
  j["std_error"] = est.std_error;
  j["bound"] = bound;
  j["coalesced_fraction"] = est.coalesced_fraction;
  j["contraction_ok"] = est.mean <= bound + 2.0 * est.std_error;
  j["supermartingale_ok"] = rep.pass;
  j["supermartingale_worst_excess"] = rep.worst_excess;
  return finish(s, std::move(j), est.mean <= bound + 2.0 * est.std_error && rep.pass, log, "couple.json");
}

int cmd_verify(const Session& s, std::ostream& log) {
  AcceptanceOptions a;
  a.benchmark = s.cfg;
  a.quick = s.opts.quick;
  a.seed = s.cfg.mc.seed;
  a.jobs = s.opts.jobs;
  const auto results = run_acceptance(a);
  print_table(log, results);
  bool pass = true;
  for (const auto& r : results) pass = pass && r.pass;
  Json j = s.header();
  j["quick"] = a.quick;
  j["criteria"] = acceptance_json(results);
  return finish(s, std::move(j), pass, log, "verify.json");
}

}  // namespace

int run_command(const std::string& name, const CommandOptions& opts, std::ostream& log) {
  Session s;
  s.command = name;
  s.opts = opts;
  try {
    s.cfg = load_config(opts.config_path);
    s.base_dir = fs::path(opts.config_path).parent_path();
    if (s.base_dir.empty()) s.base_dir = ".";
    if (opts.seed) s.cfg.mc.seed = *opts.seed;
    if (opts.out) s.cfg.output_dir = *opts.out;
    s.out = s.cfg.output_dir;
    fs::create_directories(s.out);
    s.open("config.txt") << emit_config(s.cfg);
  } catch (const std::exception& e) {
    log << name << ": error: " << e.what() << "\n";
    if (opts.out) {
      try {
        fs::create_directories(*opts.out);
        Json j;
        j["command"] = name;
        j["version"] = TS_VERSION;
        j["error"] = e.what();
        j["pass"] = false;
        std::ofstream(fs::path(*opts.out) / "failure.json", std::ios::binary) << j.dump(2) << "\n";
      } catch (const std::exception&) {
      }
    }
    return 2;
  }
  try {
    if (name == "solve") return cmd_solve(s, log);
    if (name == "rates") return cmd_rates(s, log);
    if (name == "hjb-check") return cmd_hjb_check(s, log);
    if (name == "couple") return cmd_couple(s, log);
    if (name == "verify") return cmd_verify(s, log);
    throw Error("unknown command " + name);
  } catch (const std::exception& e) {
    log << name << ": error: " << e.what() << "\n";
    Json j = s.header();
    j["error"] = e.what();
    j["pass"] = false;
    try {
      s.write_json("failure.json", j);
    } catch (const std::exception&) {
    }
    return 2;
  }
}

}  // namespace ts
