#pragma once

#include <array>
#include <vector>

#include "hjpatch/grid.hpp"

namespace hjpatch {

struct Segment2D {
  std::array<double, 2> a, b;
};

// Marching squares on a 2-D field: linear edge interpolation of the given
// level, ambiguous (saddle) cells resolved by the cell-center average.
// Segments are oriented arbitrarily and emitted in cell scan order.
std::vector<Segment2D> marching_squares(const ScalarField& f,
                                        double level = 0.0);

// Chains shared-endpoint segments into polylines (closed loops where the
// ends meet). Endpoint matching uses a tolerance scaled by the grid spacing.
std::vector<std::vector<std::array<double, 2>>> chain_polylines(
    const std::vector<Segment2D>& segments, double match_tol);

}  // namespace hjpatch
