#include "torus_schrodinger/potential.hpp"

#include "torus_schrodinger/grid_ops.hpp"

#include <algorithm>
#include <cstring>
#include <functional>

namespace ts {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

template <typename T>
void fnv_value(std::uint64_t& h, T v) {
  fnv_bytes(h, &v, sizeof(v));
}

}  // namespace

PotentialSpec PotentialSpec::trigonometric(std::vector<TrigTerm> terms, double side) {
  if (terms.empty() || terms.size() > static_cast<std::size_t>(kMaxDim)) {
    throw Error("trigonometric potential needs one term per axis (1 to 3 axes)");
  }
  if (!(side > 0.0) || !std::isfinite(side)) throw Error("trigonometric potential needs L > 0");
  for (const auto& t : terms) {
    if (!std::isfinite(t.alpha) || !std::isfinite(t.beta) || !std::isfinite(t.omega)) {
      throw Error("trigonometric potential coefficients must be finite");
    }
  }
  PotentialSpec p;
  p.kind_ = Kind::kTrigonometric;
  p.terms_ = std::move(terms);
  p.side_ = side;
  return p;
}

PotentialSpec PotentialSpec::tabulated(const GridFn& values) {
  if (!values.values.allFinite()) throw Error("tabulated potential must be finite everywhere");
  PotentialSpec p;
  p.kind_ = Kind::kTabulated;
  p.side_ = values.grid.side();
  p.table_ = std::make_shared<const GridFn>(values);
  p.table_grad_ = std::make_shared<const std::vector<GridFn>>(ts::gradient(values));
  return p;
}

double PotentialSpec::value(const Point<double>& x) const {
  switch (kind_) {
    case Kind::kZero:
      return 0.0;
    case Kind::kTrigonometric: {
      if (x.size() != static_cast<Index>(terms_.size())) throw Error("potential/point dimension mismatch");
      const double k = 2.0 * std::numbers::pi / side_;
      double v = 0.0;
      for (Index a = 0; a < x.size(); ++a) {
        const auto& t = terms_[a];
        const double th = k * x[a] + t.omega;
        v += t.alpha * std::sin(th) + t.beta * std::cos(th);
      }
      return side_ / 8.0 * v;
    }
    case Kind::kTabulated:
      return interpolate(*table_, x);
  }
  return 0.0;
}

Point<double> PotentialSpec::gradient(const Point<double>& x) const {
  switch (kind_) {
    case Kind::kZero:
      return Point<double>::Zero(x.size());
    case Kind::kTrigonometric: {
      if (x.size() != static_cast<Index>(terms_.size())) throw Error("potential/point dimension mismatch");
      const double k = 2.0 * std::numbers::pi / side_;
      Point<double> g(x.size());
      for (Index a = 0; a < x.size(); ++a) {
        const auto& t = terms_[a];
        const double th = k * x[a] + t.omega;
        // d/dx of (L/8)(alpha sin + beta cos) = (pi/4)(alpha cos - beta sin)
        g[a] = std::numbers::pi / 4.0 * (t.alpha * std::cos(th) - t.beta * std::sin(th));
      }
      return g;
    }
    case Kind::kTabulated:
      return interpolate(*table_grad_, x);
  }
  return Point<double>::Zero(x.size());
}

GridFn PotentialSpec::sample(const Grid& grid) const {
  switch (kind_) {
    case Kind::kZero:
      return GridFn::constant(grid, 0.0);
    case Kind::kTrigonometric:
      if (grid.dim() != static_cast<int>(terms_.size())) throw Error("potential/grid dimension mismatch");
      if (grid.side() != side_) throw Error("potential/grid side length mismatch");
      return ts::sample(grid, [this](const Point<double>& x) { return value(x); });
    case Kind::kTabulated:
      if (!(table_->grid == grid)) {
        return ts::sample(grid, [this](const Point<double>& x) { return value(x); });
      }
      return *table_;
  }
  return GridFn::constant(grid, 0.0);
}

std::vector<double> PotentialSpec::sorted_sigmas() const {
  std::vector<double> s;
  for (const auto& t : terms_) s.push_back(t.sigma());
  std::sort(s.begin(), s.end(), std::greater<>());
  return s;
}

std::uint64_t PotentialSpec::hash() const {
  std::uint64_t h = kFnvOffset;
  fnv_value(h, static_cast<int>(kind_));
  switch (kind_) {
    case Kind::kZero:
      break;
    case Kind::kTrigonometric:
      fnv_value(h, side_);
      for (const auto& t : terms_) {
        fnv_value(h, t.alpha);
        fnv_value(h, t.beta);
        fnv_value(h, t.omega);
      }
      break;
    case Kind::kTabulated:
      fnv_value(h, table_->grid.dim());
      fnv_value(h, table_->grid.side());
      fnv_value(h, table_->grid.points_per_axis());
      fnv_bytes(h, table_->values.data(), sizeof(double) * static_cast<std::size_t>(table_->values.size()));
      break;
  }
  return h;
}

}  // namespace ts
