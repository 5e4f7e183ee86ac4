#include "torus_schrodinger/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace ts {

namespace {

GridFn field_values(const FieldConfig& f, const Grid& grid, const std::string& column,
                    const std::filesystem::path& base_dir) {
  switch (f.kind) {
    case FieldConfig::Kind::kZero: return GridFn::constant(grid, 0.0);
    case FieldConfig::Kind::kTrig: return PotentialSpec::trigonometric(f.terms, grid.side()).sample(grid);
    case FieldConfig::Kind::kCsv: {
      const std::filesystem::path path(f.csv);
      return read_node_column(path.is_absolute() ? path : base_dir / path, column, grid);
    }
  }
  throw Error("unknown field kind");
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      out.push_back(cell);
      cell.clear();
    } else if (ch != '\r') {
      cell += ch;
    }
  }
  out.push_back(cell);
  return out;
}

}  // namespace

GridFn read_node_column(const std::filesystem::path& path, const std::string& column, const Grid& grid) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open node table " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(path.string() + ": empty file");
  const auto header = split_csv(line);
  const auto it = std::find(header.begin(), header.end(), column);
  if (it == header.end()) throw Error(path.string() + ": no column named " + column);
  const std::size_t col = static_cast<std::size_t>(it - header.begin());
  Vec<double> v(grid.size());
  Index row = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw Error(path.string() + " line " + std::to_string(line_no) + ": wrong number of cells");
    }
    if (row >= grid.size()) throw Error(path.string() + ": more rows than grid nodes");
    try {
      std::size_t used = 0;
      v[row] = std::stod(cells[col], &used);
      if (used != cells[col].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(path.string() + " line " + std::to_string(line_no) + ": bad number '" + cells[col] + "'");
    }
    ++row;
  }
  if (row != grid.size()) {
    throw Error(path.string() + ": " + std::to_string(row) + " rows for " + std::to_string(grid.size()) + " nodes");
  }
  return GridFn(grid, std::move(v));
}

Problem build_problem(const ExperimentConfig& cfg, const std::filesystem::path& base_dir) {
  Problem p;
  p.cfg = cfg;
  p.grid = Grid(cfg.d, cfg.L, cfg.N);
  switch (cfg.potential.kind) {
    case FieldConfig::Kind::kZero: p.V = PotentialSpec::zero(); break;
    case FieldConfig::Kind::kTrig: p.V = PotentialSpec::trigonometric(cfg.potential.terms, cfg.L); break;
    case FieldConfig::Kind::kCsv:
      p.V = PotentialSpec::tabulated(field_values(cfg.potential, p.grid, "V", base_dir));
      break;
  }
  p.U_mu = field_values(cfg.mu, p.grid, "U_mu", base_dir);
  p.U_nu = field_values(cfg.nu, p.grid, "U_nu", base_dir);
  p.psi0 = field_values(cfg.solver.psi0, p.grid, "psi0", base_dir);

  p.kernel.method = cfg.kernel.method == "expm" ? KernelMethod::kExpm
                    : cfg.kernel.method == "cn" ? KernelMethod::kCrankNicolson
                                                : KernelMethod::kAuto;
  p.kernel.scheme = cfg.kernel.scheme == "central2" ? KernelScheme::kCentral2 : KernelScheme::kSpectral;
  p.kernel.substeps = cfg.kernel.substeps;

  std::string mod = cfg.rates.modulus;
  if (mod == "auto") mod = p.V.kind() == PotentialSpec::Kind::kTrigonometric ? "trig" : "constant";
  if (mod == "trig") {
    p.modulus = Modulus::trigonometric(p.V.sorted_sigmas(), cfg.L, cfg.d);
  } else {
    p.modulus = Modulus::constant(cfg.rates.alpha, cfg.L, cfg.d);
  }
  return p;
}

SolvedInstance solve_problem(const Problem& p) {
  SolvedInstance s;
  s.K = cached_kernel(p.grid, p.V, p.cfg.T, p.kernel);
  s.marginals = make_marginals(p.U_mu, p.U_nu, s.K.m_weights);
  s.rates = rate_constants(p.modulus, s.marginals.U_mu, s.marginals.U_nu, p.cfg.T, p.cfg.rates.quad_nodes);
  s.ref = reference_potentials(s.K, s.marginals);
  RunOptions o;
  o.max_iter = p.cfg.solver.max_iter;
  o.tol = p.cfg.solver.tol;
  o.reference = &s.ref;
  o.fV = &s.rates.fV;
  o.fbar = &s.rates.fbar;
  s.run = run(s.K, s.marginals, p.psi0, o);
  return s;
}

double fitted_log_slope(const std::vector<double>& errors, double floor) {
  double sn = 0, sy = 0, snn = 0, sny = 0, count = 0;
  for (std::size_t n = 0; n < errors.size(); ++n) {
    if (!(errors[n] > floor)) continue;
    const double x = static_cast<double>(n);
    const double y = std::log(errors[n]);
    sn += x;
    sy += y;
    snn += x * x;
    sny += x * y;
    count += 1;
  }
  if (count < 2) return std::numeric_limits<double>::quiet_NaN();
  return (count * sny - sn * sy) / (count * snn - sn * sn);
}

KernelFactory kernel_factory(const Problem& p) {
  auto family = std::make_shared<KernelFamily>(p.grid, p.V, p.kernel.scheme);
  return [family](double s) { return family->at(s); };
}

std::vector<double> time_nodes_with_spacing(double T, double dt) {
  const int count = static_cast<int>(std::ceil(T / dt - 1e-9)) + 1;
  return uniform_time_nodes(T, std::max(count, 2));
}

ExperimentConfig benchmark_config() {
  ExperimentConfig c;
  c.d = 1;
  c.L = 1.0;
  c.N = 128;
  c.T = 0.5;
  c.mu.kind = FieldConfig::Kind::kTrig;
  c.mu.terms = {{1.0, 0.0, 0.3}};
  c.nu.kind = FieldConfig::Kind::kTrig;
  c.nu.terms = {{0.3, 0.64, 1.0}};
  return c;
}

}  // namespace ts
