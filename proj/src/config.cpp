#include "torus_schrodinger/config.hpp"

#include "torus_schrodinger/io.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace ts {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct LineError {
  int line;
  [[noreturn]] void fail(const std::string& msg) const {
    throw Error("config line " + std::to_string(line) + ": " + msg);
  }
};

double to_double(const std::string& v, const LineError& at) {
  if (v == "inf" || v == "nan" || v == "-inf") at.fail("value must be finite, got '" + v + "'");
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(out)) {
    at.fail("expected a number, got '" + v + "'");
  }
  return out;
}

template <typename Int>
Int to_int(const std::string& v, const LineError& at) {
  Int out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) at.fail("expected an integer, got '" + v + "'");
  return out;
}

std::vector<double> to_list(const std::string& v, const LineError& at) {
  std::vector<double> out;
  std::istringstream is(v);
  std::string tok;
  while (is >> tok) out.push_back(to_double(tok, at));
  return out;
}

std::vector<TrigTerm> to_terms(const std::string& v, const LineError& at) {
  std::vector<TrigTerm> out;
  std::stringstream ss(v);
  std::string group;
  while (std::getline(ss, group, ';')) {
    const auto nums = to_list(group, at);
    if (nums.size() != 3) at.fail("each trig term needs 'alpha beta omega', got '" + trim(group) + "'");
    out.push_back({nums[0], nums[1], nums[2]});
  }
  if (out.empty()) at.fail("trig terms are empty");
  return out;
}

std::string choice(const std::string& v, std::initializer_list<const char*> allowed, const LineError& at) {
  std::string list;
  for (const char* a : allowed) {
    if (v == a) return v;
    list += std::string(list.empty() ? "" : "|") + a;
  }
  at.fail("expected one of " + list + ", got '" + v + "'");
}

FieldConfig::Kind field_kind(const std::string& v, const LineError& at) {
  const std::string k = choice(v, {"zero", "trig", "csv"}, at);
  if (k == "zero") return FieldConfig::Kind::kZero;
  return k == "trig" ? FieldConfig::Kind::kTrig : FieldConfig::Kind::kCsv;
}

const char* kind_name(FieldConfig::Kind k) {
  switch (k) {
    case FieldConfig::Kind::kZero: return "zero";
    case FieldConfig::Kind::kTrig: return "trig";
    case FieldConfig::Kind::kCsv: return "csv";
  }
  return "zero";
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + format_number(x);
  return s;
}

std::string join_terms(const std::vector<TrigTerm>& terms) {
  std::string s;
  for (const auto& t : terms) {
    s += (s.empty() ? "" : "; ") + format_number(t.alpha) + " " + format_number(t.beta) + " " + format_number(t.omega);
  }
  return s;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const LineError&)>;

void add_field(std::map<std::string, Setter>& keys, const std::string& sec, FieldConfig ExperimentConfig::*f) {
  keys[sec + ".kind"] = [f](auto& c, const auto& v, const auto& at) { (c.*f).kind = field_kind(v, at); };
  keys[sec + ".terms"] = [f](auto& c, const auto& v, const auto& at) { (c.*f).terms = to_terms(v, at); };
  keys[sec + ".csv"] = [f](auto& c, const auto& v, const auto&) { (c.*f).csv = v; };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> keys = [] {
    std::map<std::string, Setter> k;
    k["d"] = [](auto& c, const auto& v, const auto& at) { c.d = to_int<int>(v, at); };
    k["L"] = [](auto& c, const auto& v, const auto& at) { c.L = to_double(v, at); };
    k["N"] = [](auto& c, const auto& v, const auto& at) { c.N = to_int<std::int64_t>(v, at); };
    k["T"] = [](auto& c, const auto& v, const auto& at) { c.T = to_double(v, at); };
    add_field(k, "potential", &ExperimentConfig::potential);
    add_field(k, "mu", &ExperimentConfig::mu);
    add_field(k, "nu", &ExperimentConfig::nu);
    k["solver.max_iter"] = [](auto& c, const auto& v, const auto& at) { c.solver.max_iter = to_int<int>(v, at); };
    k["solver.tol"] = [](auto& c, const auto& v, const auto& at) { c.solver.tol = to_double(v, at); };
    k["solver.psi0"] = [](auto& c, const auto& v, const auto& at) {
      c.solver.psi0.kind = choice(v, {"zero", "trig"}, at) == "zero" ? FieldConfig::Kind::kZero
                                                                      : FieldConfig::Kind::kTrig;
    };
    k["solver.psi0_terms"] = [](auto& c, const auto& v, const auto& at) { c.solver.psi0.terms = to_terms(v, at); };
    k["kernel.method"] = [](auto& c, const auto& v, const auto& at) {
      c.kernel.method = choice(v, {"auto", "expm", "cn"}, at);
    };
    k["kernel.scheme"] = [](auto& c, const auto& v, const auto& at) {
      c.kernel.scheme = choice(v, {"spectral", "central2"}, at);
    };
    k["kernel.substeps"] = [](auto& c, const auto& v, const auto& at) { c.kernel.substeps = to_int<int>(v, at); };
    k["mc.n_paths"] = [](auto& c, const auto& v, const auto& at) { c.mc.n_paths = to_int<std::int64_t>(v, at); };
    k["mc.dt"] = [](auto& c, const auto& v, const auto& at) { c.mc.dt = to_double(v, at); };
    k["mc.seed"] = [](auto& c, const auto& v, const auto& at) { c.mc.seed = to_int<std::uint64_t>(v, at); };
    k["mc.checkpoints"] = [](auto& c, const auto& v, const auto& at) { c.mc.checkpoints = to_list(v, at); };
    k["mc.coalesce_tol"] = [](auto& c, const auto& v, const auto& at) { c.mc.coalesce_tol = to_double(v, at); };
    k["mc.x"] = [](auto& c, const auto& v, const auto& at) { c.mc.x = to_list(v, at); };
    k["mc.y"] = [](auto& c, const auto& v, const auto& at) { c.mc.y = to_list(v, at); };
    k["mc.soc_paths"] = [](auto& c, const auto& v, const auto& at) { c.mc.soc_paths = to_int<std::int64_t>(v, at); };
    k["rates.quad_nodes"] = [](auto& c, const auto& v, const auto& at) {
      c.rates.quad_nodes = to_int<std::int64_t>(v, at);
    };
    k["rates.modulus"] = [](auto& c, const auto& v, const auto& at) {
      c.rates.modulus = choice(v, {"auto", "constant", "trig"}, at);
    };
    k["rates.alpha"] = [](auto& c, const auto& v, const auto& at) { c.rates.alpha = to_double(v, at); };
    k["hjb.time_nodes"] = [](auto& c, const auto& v, const auto& at) { c.hjb.time_nodes = to_int<int>(v, at); };
    k["hjb.terminal"] = [](auto& c, const auto& v, const auto& at) {
      c.hjb.terminal = choice(v, {"psi_star", "sine"}, at);
    };
    k["output.dir"] = [](auto& c, const auto& v, const auto& at) {
      if (v.empty()) at.fail("output.dir is empty");
      c.output_dir = v;
    };
    return k;
  }();
  return keys;
}

void check_field(const FieldConfig& f, const std::string& name, int d, const LineError& at) {
  if (f.kind == FieldConfig::Kind::kTrig && static_cast<int>(f.terms.size()) != d) {
    at.fail(name + ".terms needs one 'alpha beta omega' group per axis (" + std::to_string(d) + ")");
  }
  if (f.kind == FieldConfig::Kind::kCsv && f.csv.empty()) at.fail(name + ".kind = csv needs " + name + ".csv");
}

void validate(const ExperimentConfig& c, const std::map<std::string, int>& where, int last_line) {
  auto at = [&](const std::string& key) { return LineError{where.count(key) ? where.at(key) : last_line}; };
  if (c.d < 1 || c.d > 3) at("d").fail("d must be 1, 2 or 3");
  if (!(c.L > 0.0)) at("L").fail("L must be positive");
  if (c.N < 4 || c.N > 4096 || (c.N & (c.N - 1)) != 0) at("N").fail("N must be a power of two in [4, 4096]");
  if (!(c.T > 0.0)) at("T").fail("T must be positive");
  check_field(c.potential, "potential", c.d, at("potential.terms"));
  check_field(c.mu, "mu", c.d, at("mu.terms"));
  check_field(c.nu, "nu", c.d, at("nu.terms"));
  check_field(c.solver.psi0, "solver.psi0", c.d, at("solver.psi0_terms"));
  if (c.solver.max_iter < 1) at("solver.max_iter").fail("solver.max_iter must be >= 1");
  if (!(c.solver.tol > 0.0)) at("solver.tol").fail("solver.tol must be positive");
  if (c.kernel.substeps < 0) at("kernel.substeps").fail("kernel.substeps must be >= 0 (0 picks a stable count)");
  if (c.mc.n_paths < 100) at("mc.n_paths").fail("mc.n_paths must be >= 100");
  if (c.mc.soc_paths < 100) at("mc.soc_paths").fail("mc.soc_paths must be >= 100");
  if (!(c.mc.dt > 0.0) || c.mc.dt > 1e-2) at("mc.dt").fail("mc.dt must lie in (0, 1e-2]");
  for (double s : c.mc.checkpoints) {
    if (s < 0.0 || s > c.T) at("mc.checkpoints").fail("mc.checkpoints must lie in [0, T]");
  }
  if (c.mc.coalesce_tol < 0.0) at("mc.coalesce_tol").fail("mc.coalesce_tol must be >= 0 (0 picks 1e-4 L)");
  if (!c.mc.x.empty() && static_cast<int>(c.mc.x.size()) != c.d) at("mc.x").fail("mc.x needs d coordinates");
  if (!c.mc.y.empty() && static_cast<int>(c.mc.y.size()) != c.d) at("mc.y").fail("mc.y needs d coordinates");
  if (c.rates.quad_nodes < 256) at("rates.quad_nodes").fail("rates.quad_nodes must be >= 256");
  if (c.rates.alpha > 0.0) {
    at("rates.alpha").fail("rates.alpha must be <= 0: a semiconvexity modulus is nonpositive, and a positive "
                           "constant would describe a strongly convex drift, which a periodic potential cannot have");
  }
  if (c.rates.modulus == "trig" && c.potential.kind != FieldConfig::Kind::kTrig) {
    at("rates.modulus").fail("rates.modulus = trig needs potential.kind = trig");
  }
  if (c.rates.modulus == "auto" && c.potential.kind == FieldConfig::Kind::kCsv) {
    at("rates.modulus").fail("a tabulated potential needs rates.modulus = constant with rates.alpha");
  }
  if (c.hjb.time_nodes < 2) at("hjb.time_nodes").fail("hjb.time_nodes must be >= 2");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  std::map<std::string, int> where;
  std::istringstream is(text);
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.empty() || s[0] == '#') continue;
    const LineError at{line};
    const auto eq = s.find('=');
    if (eq == std::string::npos) at.fail("expected 'key = value', got '" + s + "'");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) at.fail("unknown key '" + key + "'");
    if (where.count(key)) at.fail("key '" + key + "' repeats line " + std::to_string(where[key]));
    if (value.empty()) at.fail("key '" + key + "' has no value");
    it->second(c, value, at);
    where[key] = line;
  }
  for (const char* req : {"d", "L", "N", "T"}) {
    if (!where.count(req)) LineError{line + 1}.fail(std::string("missing required key '") + req + "'");
  }
  validate(c, where, line + 1);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string emit_config(const ExperimentConfig& c) {
  std::ostringstream os;
  auto kv = [&os](const std::string& k, const std::string& v) {
    if (!v.empty()) os << k << " = " << v << "\n";
  };
  kv("d", std::to_string(c.d));
  kv("L", format_number(c.L));
  kv("N", std::to_string(c.N));
  kv("T", format_number(c.T));
  for (auto [name, f] : {std::pair{"potential", &c.potential}, std::pair{"mu", &c.mu}, std::pair{"nu", &c.nu}}) {
    const std::string sec(name);
    kv(sec + ".kind", kind_name(f->kind));
    kv(sec + ".terms", join_terms(f->terms));
    kv(sec + ".csv", f->csv);
  }
  kv("solver.max_iter", std::to_string(c.solver.max_iter));
  kv("solver.tol", format_number(c.solver.tol));
  kv("solver.psi0", c.solver.psi0.kind == FieldConfig::Kind::kTrig ? "trig" : "zero");
  kv("solver.psi0_terms", join_terms(c.solver.psi0.terms));
  kv("kernel.method", c.kernel.method);
  kv("kernel.scheme", c.kernel.scheme);
  kv("kernel.substeps", std::to_string(c.kernel.substeps));
  kv("mc.n_paths", std::to_string(c.mc.n_paths));
  kv("mc.dt", format_number(c.mc.dt));
  kv("mc.seed", std::to_string(c.mc.seed));
  kv("mc.checkpoints", join(c.mc.checkpoints));
  kv("mc.coalesce_tol", format_number(c.mc.coalesce_tol));
  kv("mc.x", join(c.mc.x));
  kv("mc.y", join(c.mc.y));
  kv("mc.soc_paths", std::to_string(c.mc.soc_paths));
  kv("rates.quad_nodes", std::to_string(c.rates.quad_nodes));
  kv("rates.modulus", c.rates.modulus);
  kv("rates.alpha", format_number(c.rates.alpha));
  kv("hjb.time_nodes", std::to_string(c.hjb.time_nodes));
  kv("hjb.terminal", c.hjb.terminal);
  kv("output.dir", c.output_dir);
  return os.str();
}

}  // namespace ts
