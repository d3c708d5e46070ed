#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "hjpatch/errors.hpp"

namespace hjpatch {

using MultiIndex = std::vector<std::size_t>;

// Kernels use fixed-size stack buffers; grids beyond these caps are rejected
// at construction.
inline constexpr std::size_t kMaxDims = 8;

// Axis-aligned Cartesian grid over a state-space box. Nodes sit at
// lo + i * spacing per dimension, with the first node on lo and the last on
// hi. Immutable after construction; safe to share across threads.
class Grid {
 public:
  Grid(std::vector<double> lo, std::vector<double> hi,
       std::vector<std::size_t> shape);

  std::size_t dims() const { return lo_.size(); }
  std::size_t cell_count() const { return cell_count_; }

  const std::vector<double>& lo() const { return lo_; }
  const std::vector<double>& hi() const { return hi_; }
  const std::vector<std::size_t>& shape() const { return shape_; }
  const std::vector<double>& spacing() const { return spacing_; }
  // Row-major strides; stride of the last dimension is 1.
  const std::vector<std::size_t>& strides() const { return strides_; }

  double min_spacing() const;
  double max_spacing() const;

  std::size_t flatten(std::span<const std::size_t> idx) const;
  void unflatten(std::size_t flat, std::span<std::size_t> out) const;
  MultiIndex unflatten(std::size_t flat) const;

  void state_of(std::span<const std::size_t> idx, std::span<double> out) const;
  std::vector<double> state_of(std::span<const std::size_t> idx) const;
  std::vector<double> state_of_flat(std::size_t flat) const;

  // Nearest-node index; exact at node coordinates.
  MultiIndex index_of(std::span<const double> state) const;

  bool contains(std::span<const double> state, double rel_tol = 1e-12) const;
  // Clamps state into the box in place; returns true if anything moved.
  bool clamp(std::span<double> state) const;

  bool in_range(std::span<const std::size_t> idx) const;

  // Row-major odometer increment; returns false after wrapping past the last
  // node. Pairing it with a flat counter walks indices in flatten() order.
  bool advance(std::span<std::size_t> idx) const {
    for (std::size_t i = idx.size(); i-- > 0;) {
      if (++idx[i] < shape_[i]) return true;
      idx[i] = 0;
    }
    return false;
  }

  bool operator==(const Grid& other) const {
    return lo_ == other.lo_ && hi_ == other.hi_ && shape_ == other.shape_;
  }

 private:
  std::vector<double> lo_, hi_, spacing_;
  std::vector<std::size_t> shape_, strides_;
  std::size_t cell_count_ = 0;
};

using GridPtr = std::shared_ptr<const Grid>;

GridPtr make_grid(std::vector<double> lo, std::vector<double> hi,
                  std::vector<std::size_t> shape);

// One double per grid node, row-major. Value semantics; a copy is an
// independent field on the same shared grid.
class ScalarField {
 public:
  explicit ScalarField(GridPtr grid, double fill = 0.0);
  ScalarField(GridPtr grid, std::vector<double> values);

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  double& operator[](std::size_t flat) { return values_[flat]; }
  double operator[](std::size_t flat) const { return values_[flat]; }

  double& at(std::span<const std::size_t> idx) {
    return values_[grid_->flatten(idx)];
  }
  double at(std::span<const std::size_t> idx) const {
    return values_[grid_->flatten(idx)];
  }

  std::size_t size() const { return values_.size(); }

  // Throws NonFiniteValue naming the first offending index.
  void check_finite(const char* context) const;

 private:
  GridPtr grid_;
  std::vector<double> values_;
};

// Axis-aligned cross of per-axis offsets 1..radius, clipped to the grid,
// excluding idx itself. These are exactly the cells that enter a 1-D
// finite-difference stencil of order `radius` in each dimension.
std::vector<MultiIndex> neighbors(const Grid& g, std::span<const std::size_t> idx,
                                  std::size_t radius);

// Flat-index variant used by the solvers; fn is called once per neighbor.
template <typename Fn>
void for_each_axis_neighbor(const Grid& g, std::span<const std::size_t> idx,
                            std::size_t radius, Fn&& fn) {
  const auto& shape = g.shape();
  const auto& strides = g.strides();
  std::size_t flat = g.flatten(idx);
  for (std::size_t d = 0; d < shape.size(); ++d) {
    for (std::size_t r = 1; r <= radius; ++r) {
      if (idx[d] >= r) fn(flat - r * strides[d]);
      if (idx[d] + r < shape[d]) fn(flat + r * strides[d]);
    }
  }
}

// Multilinear interpolation of the 2^n surrounding node values; exact at
// nodes and for affine fields. Strict version throws OutOfDomain.
double interpolate(const ScalarField& f, std::span<const double> x);

struct ClampedSample {
  double value;
  bool clamped;
};
ClampedSample interpolate_clamped(const ScalarField& f,
                                  std::span<const double> x);

// Central-difference node gradients (one-sided on faces), multilinearly
// blended to x. Exact for affine fields.
std::vector<double> interpolate_gradient(const ScalarField& f,
                                         std::span<const double> x);
std::vector<double> interpolate_gradient_clamped(const ScalarField& f,
                                                 std::span<const double> x);

}  // namespace hjpatch
