#include "hjpatch/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hjpatch {

namespace {

std::string index_to_string(std::span<const std::size_t> idx) {
  std::ostringstream ss;
  ss << "(";
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i) ss << ", ";
    ss << idx[i];
  }
  ss << ")";
  return ss.str();
}

}  // namespace

Grid::Grid(std::vector<double> lo, std::vector<double> hi,
           std::vector<std::size_t> shape)
    : lo_(std::move(lo)), hi_(std::move(hi)), shape_(std::move(shape)) {
  if (lo_.size() != hi_.size() || lo_.size() != shape_.size()) {
    std::ostringstream ss;
    ss << "grid bounds/shape lengths differ: lo has " << lo_.size()
       << ", hi has " << hi_.size() << ", shape has " << shape_.size();
    throw DimensionMismatch(ss.str());
  }
  if (lo_.empty()) throw DimensionMismatch("grid must have at least one dimension");
  if (lo_.size() > kMaxDims) {
    std::ostringstream ss;
    ss << "grid has " << lo_.size() << " dimensions; kernels support at most "
       << kMaxDims;
    throw CapacityExceeded(ss.str());
  }
  spacing_.resize(lo_.size());
  for (std::size_t i = 0; i < lo_.size(); ++i) {
    if (!(lo_[i] < hi_[i])) {
      std::ostringstream ss;
      ss << "axis " << i << " is degenerate: lo=" << lo_[i] << " hi=" << hi_[i];
      throw DegenerateAxis(ss.str());
    }
    if (shape_[i] < 3) {
      std::ostringstream ss;
      ss << "axis " << i << " has " << shape_[i]
         << " cells; finite differences need at least 3";
      throw DegenerateAxis(ss.str());
    }
    spacing_[i] = (hi_[i] - lo_[i]) / static_cast<double>(shape_[i] - 1);
  }
  // Checked product: cell count and byte size must fit in size_t.
  std::size_t count = 1;
  for (std::size_t n : shape_) {
    if (count > std::numeric_limits<std::size_t>::max() / n) {
      throw CapacityExceeded("grid cell count overflows addressable memory");
    }
    count *= n;
  }
  if (count > std::numeric_limits<std::size_t>::max() / sizeof(double)) {
    throw CapacityExceeded("grid field byte size overflows addressable memory");
  }
  cell_count_ = count;

  strides_.assign(shape_.size(), 1);
  for (std::size_t i = shape_.size(); i-- > 1;) {
    strides_[i - 1] = strides_[i] * shape_[i];
  }
}

double Grid::min_spacing() const {
  return *std::min_element(spacing_.begin(), spacing_.end());
}

double Grid::max_spacing() const {
  return *std::max_element(spacing_.begin(), spacing_.end());
}

std::size_t Grid::flatten(std::span<const std::size_t> idx) const {
  if (idx.size() != dims()) {
    throw DimensionMismatch("multi-index length does not match grid dimension");
  }
  std::size_t flat = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= shape_[i]) {
      throw IndexOutOfRange("index " + index_to_string(idx) +
                            " outside grid shape");
    }
    flat += idx[i] * strides_[i];
  }
  return flat;
}

void Grid::unflatten(std::size_t flat, std::span<std::size_t> out) const {
  for (std::size_t i = 0; i < dims(); ++i) {
    out[i] = flat / strides_[i];
    flat -= out[i] * strides_[i];
  }
}

MultiIndex Grid::unflatten(std::size_t flat) const {
  MultiIndex idx(dims());
  unflatten(flat, idx);
  return idx;
}

void Grid::state_of(std::span<const std::size_t> idx,
                    std::span<double> out) const {
  for (std::size_t i = 0; i < dims(); ++i) {
    out[i] = lo_[i] + static_cast<double>(idx[i]) * spacing_[i];
  }
}

std::vector<double> Grid::state_of(std::span<const std::size_t> idx) const {
  if (!in_range(idx)) {
    throw IndexOutOfRange("index " + index_to_string(idx) + " outside grid shape");
  }
  std::vector<double> x(dims());
  state_of(idx, x);
  return x;
}

std::vector<double> Grid::state_of_flat(std::size_t flat) const {
  if (flat >= cell_count_) throw IndexOutOfRange("flat index outside grid");
  MultiIndex idx(dims());
  unflatten(flat, idx);
  std::vector<double> x(dims());
  state_of(idx, x);
  return x;
}

MultiIndex Grid::index_of(std::span<const double> state) const {
  if (state.size() != dims()) {
    throw DimensionMismatch("state length does not match grid dimension");
  }
  MultiIndex idx(dims());
  for (std::size_t i = 0; i < dims(); ++i) {
    double t = (state[i] - lo_[i]) / spacing_[i];
    long long j = std::llround(t);
    j = std::clamp(j, 0LL, static_cast<long long>(shape_[i] - 1));
    idx[i] = static_cast<std::size_t>(j);
  }
  return idx;
}

bool Grid::contains(std::span<const double> state, double rel_tol) const {
  if (state.size() != dims()) {
    throw DimensionMismatch("state length does not match grid dimension");
  }
  for (std::size_t i = 0; i < dims(); ++i) {
    double slack = rel_tol * (hi_[i] - lo_[i]);
    if (state[i] < lo_[i] - slack || state[i] > hi_[i] + slack) return false;
  }
  return true;
}

bool Grid::clamp(std::span<double> state) const {
  bool moved = false;
  for (std::size_t i = 0; i < dims(); ++i) {
    double c = std::clamp(state[i], lo_[i], hi_[i]);
    if (c != state[i]) {
      state[i] = c;
      moved = true;
    }
  }
  return moved;
}

bool Grid::in_range(std::span<const std::size_t> idx) const {
  if (idx.size() != dims()) return false;
  for (std::size_t i = 0; i < dims(); ++i) {
    if (idx[i] >= shape_[i]) return false;
  }
  return true;
}

GridPtr make_grid(std::vector<double> lo, std::vector<double> hi,
                  std::vector<std::size_t> shape) {
  return std::make_shared<Grid>(std::move(lo), std::move(hi), std::move(shape));
}

ScalarField::ScalarField(GridPtr grid, double fill)
    : grid_(std::move(grid)), values_(grid_->cell_count(), fill) {}

ScalarField::ScalarField(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_->cell_count()) {
    std::ostringstream ss;
    ss << "field has " << values_.size() << " values for a grid of "
       << grid_->cell_count() << " cells";
    throw ShapeMismatch(ss.str());
  }
}

void ScalarField::check_finite(const char* context) const {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      std::ostringstream ss;
      ss << context << ": non-finite value " << values_[i] << " at index "
         << index_to_string(grid_->unflatten(i));
      throw NonFiniteValue(ss.str());
    }
  }
}

std::vector<MultiIndex> neighbors(const Grid& g,
                                  std::span<const std::size_t> idx,
                                  std::size_t radius) {
  if (!g.in_range(idx)) {
    throw IndexOutOfRange("index " + index_to_string(idx) + " outside grid shape");
  }
  if (radius == 0) throw IndexOutOfRange("neighbor radius must be >= 1");
  std::vector<MultiIndex> out;
  out.reserve(2 * radius * g.dims());
  for (std::size_t d = 0; d < g.dims(); ++d) {
    for (std::size_t r = 1; r <= radius; ++r) {
      if (idx[d] >= r) {
        MultiIndex n(idx.begin(), idx.end());
        n[d] -= r;
        out.push_back(std::move(n));
      }
      if (idx[d] + r < g.shape()[d]) {
        MultiIndex n(idx.begin(), idx.end());
        n[d] += r;
        out.push_back(std::move(n));
      }
    }
  }
  return out;
}

namespace {

struct InterpLocation {
  // Per dimension: lower node index and fractional offset in [0, 1].
  std::size_t base[kMaxDims];
  double frac[kMaxDims];
};

InterpLocation locate(const Grid& g, std::span<const double> x) {
  InterpLocation loc;
  for (std::size_t i = 0; i < g.dims(); ++i) {
    double t = (x[i] - g.lo()[i]) / g.spacing()[i];
    double max_t = static_cast<double>(g.shape()[i] - 1);
    t = std::clamp(t, 0.0, max_t);
    std::size_t b = static_cast<std::size_t>(t);
    if (b >= g.shape()[i] - 1) b = g.shape()[i] - 2;
    loc.base[i] = b;
    loc.frac[i] = t - static_cast<double>(b);
  }
  return loc;
}

void require_inside(const Grid& g, std::span<const double> x) {
  if (!g.contains(x)) {
    std::ostringstream ss;
    ss << "query point (";
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (i) ss << ", ";
      ss << x[i];
    }
    ss << ") outside grid box";
    throw OutOfDomain(ss.str());
  }
}

double interpolate_at(const ScalarField& f, const InterpLocation& loc) {
  const Grid& g = f.grid();
  const std::size_t n = g.dims();
  const std::size_t corners = std::size_t{1} << n;
  double acc = 0.0;
  for (std::size_t c = 0; c < corners; ++c) {
    double w = 1.0;
    std::size_t flat = 0;
    for (std::size_t i = 0; i < n; ++i) {
      bool high = (c >> i) & 1u;
      w *= high ? loc.frac[i] : 1.0 - loc.frac[i];
      flat += (loc.base[i] + (high ? 1 : 0)) * g.strides()[i];
    }
    acc += w * f[flat];
  }
  return acc;
}

// Node gradient along dimension d: central difference in the interior,
// one-sided difference on the faces.
double node_gradient(const ScalarField& f, std::size_t flat, std::size_t coord,
                     std::size_t d) {
  const Grid& g = f.grid();
  const std::size_t stride = g.strides()[d];
  const std::size_t count = g.shape()[d];
  const double h = g.spacing()[d];
  if (coord == 0) return (f[flat + stride] - f[flat]) / h;
  if (coord == count - 1) return (f[flat] - f[flat - stride]) / h;
  return (f[flat + stride] - f[flat - stride]) / (2.0 * h);
}

std::vector<double> gradient_at(const ScalarField& f, const InterpLocation& loc) {
  const Grid& g = f.grid();
  const std::size_t n = g.dims();
  const std::size_t corners = std::size_t{1} << n;
  std::vector<double> grad(n, 0.0);
  for (std::size_t c = 0; c < corners; ++c) {
    double w = 1.0;
    std::size_t flat = 0;
    std::size_t coord[kMaxDims];
    for (std::size_t i = 0; i < n; ++i) {
      bool high = (c >> i) & 1u;
      w *= high ? loc.frac[i] : 1.0 - loc.frac[i];
      coord[i] = loc.base[i] + (high ? 1 : 0);
      flat += coord[i] * g.strides()[i];
    }
    for (std::size_t d = 0; d < n; ++d) {
      grad[d] += w * node_gradient(f, flat, coord[d], d);
    }
  }
  return grad;
}

}  // namespace

double interpolate(const ScalarField& f, std::span<const double> x) {
  require_inside(f.grid(), x);
  return interpolate_at(f, locate(f.grid(), x));
}

ClampedSample interpolate_clamped(const ScalarField& f,
                                  std::span<const double> x) {
  const Grid& g = f.grid();
  if (x.size() != g.dims()) {
    throw DimensionMismatch("state length does not match grid dimension");
  }
  bool clamped = !g.contains(x, 0.0);
  return {interpolate_at(f, locate(g, x)), clamped};
}

std::vector<double> interpolate_gradient(const ScalarField& f,
                                         std::span<const double> x) {
  require_inside(f.grid(), x);
  return gradient_at(f, locate(f.grid(), x));
}

std::vector<double> interpolate_gradient_clamped(const ScalarField& f,
                                                 std::span<const double> x) {
  if (x.size() != f.grid().dims()) {
    throw DimensionMismatch("state length does not match grid dimension");
  }
  return gradient_at(f, locate(f.grid(), x));
}

}  // namespace hjpatch
