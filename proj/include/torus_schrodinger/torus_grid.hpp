#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

namespace ts {

/// Raised on contract violations (bad inputs, under-resolved discretizations).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxDim = 3;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// A point of R^d, d <= 3; stack allocated.
template <typename Scalar>
using Point = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

using Index = Eigen::Index;
using MultiIndex = std::array<Index, kMaxDim>;

/// Uniform periodic grid on the flat torus [0, L)^d with N nodes per axis.
///
/// Nodes are x_i = i L / N per axis and are stored in row-major order (the
/// last axis varies fastest). Node indices wrap, so i and i + N name the
/// same node.
template <typename Scalar>
class TorusGrid {
 public:
  TorusGrid() = default;

  TorusGrid(int dim, Scalar side, Index points_per_axis)
      : dim_(dim), side_(side), n_(points_per_axis) {
    if (dim < 1 || dim > kMaxDim) {
      throw Error("torus dimension must be in [1, 3], got " + std::to_string(dim));
    }
    if (!(side > Scalar(0)) || !std::isfinite(static_cast<double>(side))) {
      throw Error("torus side length must be positive and finite");
    }
    if (points_per_axis < 4 || (points_per_axis & (points_per_axis - 1)) != 0) {
      throw Error("points per axis must be a power of two >= 4, got " +
                  std::to_string(points_per_axis));
    }
    size_ = 1;
    for (int a = 0; a < dim; ++a) size_ *= n_;
  }

  int dim() const { return dim_; }
  Scalar side() const { return side_; }
  Index points_per_axis() const { return n_; }
  Index size() const { return size_; }
  Scalar spacing() const { return side_ / static_cast<Scalar>(n_); }
  /// Quadrature weight h^d carried by every node.
  Scalar weight() const {
    Scalar w(1);
    for (int a = 0; a < dim_; ++a) w *= spacing();
    return w;
  }
  /// Sine-distance diameter L sqrt(d).
  Scalar diameter() const { return side_ * std::sqrt(static_cast<Scalar>(dim_)); }

  MultiIndex multi_index(Index flat) const {
    MultiIndex idx{0, 0, 0};
    for (int a = dim_ - 1; a >= 0; --a) {
      idx[a] = flat % n_;
      flat /= n_;
    }
    return idx;
  }

  Index flat_index(const MultiIndex& idx) const {
    Index flat = 0;
    for (int a = 0; a < dim_; ++a) {
      Index i = idx[a] % n_;
      if (i < 0) i += n_;
      flat = flat * n_ + i;
    }
    return flat;
  }

  Point<Scalar> node(Index flat) const {
    const MultiIndex idx = multi_index(flat);
    Point<Scalar> x(dim_);
    for (int a = 0; a < dim_; ++a) x[a] = static_cast<Scalar>(idx[a]) * spacing();
    return x;
  }

  /// Flat index of the node offset (i - j) mod N, axis by axis.
  Index offset_index(Index i, Index j) const {
    const MultiIndex a = multi_index(i);
    const MultiIndex b = multi_index(j);
    MultiIndex o{0, 0, 0};
    for (int k = 0; k < dim_; ++k) o[k] = a[k] - b[k];
    return flat_index(o);
  }

  friend bool operator==(const TorusGrid& a, const TorusGrid& b) {
    return a.dim_ == b.dim_ && a.side_ == b.side_ && a.n_ == b.n_;
  }

 private:
  int dim_ = 1;
  Scalar side_ = Scalar(1);
  Index n_ = 4;
  Index size_ = 4;
};

using Grid = TorusGrid<double>;

/// Real function sampled at every node of a grid.
template <typename Scalar>
struct GridFunction {
  TorusGrid<Scalar> grid;
  Vec<Scalar> values;

  GridFunction() = default;
  GridFunction(TorusGrid<Scalar> g, Vec<Scalar> v) : grid(std::move(g)), values(std::move(v)) {
    if (values.size() != grid.size()) {
      throw Error("grid function has " + std::to_string(values.size()) + " values for " +
                  std::to_string(grid.size()) + " nodes");
    }
    if (!values.allFinite()) throw Error("grid function values must be finite");
  }

  static GridFunction constant(const TorusGrid<Scalar>& g, Scalar c) {
    return GridFunction(g, Vec<Scalar>::Constant(g.size(), c));
  }

  Index size() const { return values.size(); }
  Scalar operator[](Index i) const { return values[i]; }
};

using GridFn = GridFunction<double>;

/// Samples fn(x) at every node.
template <typename Scalar, typename Fn>
GridFunction<Scalar> sample(const TorusGrid<Scalar>& grid, Fn&& fn) {
  Vec<Scalar> v(grid.size());
  for (Index i = 0; i < grid.size(); ++i) v[i] = fn(grid.node(i));
  return GridFunction<Scalar>(grid, std::move(v));
}

/// Reduces every coordinate to [0, L).
template <typename Scalar>
Point<Scalar> wrap(const Point<Scalar>& x, const TorusGrid<Scalar>& grid) {
  const Scalar L = grid.side();
  Point<Scalar> out(x.size());
  for (Index a = 0; a < x.size(); ++a) {
    Scalar r = std::fmod(x[a], L);
    if (r < Scalar(0)) r += L;
    if (r >= L) r -= L;
    out[a] = r;
  }
  return out;
}

/// Representative of x - y with every component in [-L/2, L/2), i.e. with
/// (pi/L)(x - y) in [-pi/2, pi/2).
template <typename Scalar>
Point<Scalar> periodic_difference(const Point<Scalar>& x, const Point<Scalar>& y, Scalar L) {
  Point<Scalar> d(x.size());
  for (Index a = 0; a < x.size(); ++a) {
    Scalar r = std::fmod(x[a] - y[a], L);
    if (r < -L / 2) r += L;
    if (r >= L / 2) r -= L;
    d[a] = r;
  }
  return d;
}

/// Componentwise sin((pi/L)(x - y)) using the [-pi/2, pi/2) representative.
template <typename Scalar>
Point<Scalar> sine_separation(const Point<Scalar>& x, const Point<Scalar>& y, Scalar L) {
  Point<Scalar> s = periodic_difference(x, y, L);
  const Scalar k = std::numbers::pi_v<Scalar> / L;
  for (Index a = 0; a < s.size(); ++a) s[a] = std::sin(k * s[a]);
  return s;
}

/// Sine distance L * ||sin((pi/L)(x - y))||.
template <typename Scalar>
Scalar sine_distance(const Point<Scalar>& x, const Point<Scalar>& y, const TorusGrid<Scalar>& grid) {
  return grid.side() * sine_separation(x, y, grid.side()).norm();
}

/// Geodesic distance of the flat torus.
template <typename Scalar>
Scalar flat_distance(const Point<Scalar>& x, const Point<Scalar>& y, const TorusGrid<Scalar>& grid) {
  return periodic_difference(x, y, grid.side()).norm();
}

/// Sine distance from node 0 to every node; indexable by offset_index.
template <typename Scalar>
Vec<Scalar> sine_distance_table(const TorusGrid<Scalar>& grid) {
  Vec<Scalar> t(grid.size());
  const Point<Scalar> origin = Point<Scalar>::Zero(grid.dim());
  for (Index i = 0; i < grid.size(); ++i) t[i] = sine_distance(grid.node(i), origin, grid);
  return t;
}

template <typename Scalar>
Vec<Scalar> flat_distance_table(const TorusGrid<Scalar>& grid) {
  Vec<Scalar> t(grid.size());
  const Point<Scalar> origin = Point<Scalar>::Zero(grid.dim());
  for (Index i = 0; i < grid.size(); ++i) t[i] = flat_distance(grid.node(i), origin, grid);
  return t;
}

}  // namespace ts
