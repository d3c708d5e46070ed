#include "hjpatch/contours.hpp"

#include <cmath>
#include <map>
#include <utility>

namespace hjpatch {

namespace {

std::array<double, 2> edge_point(double xa, double ya, double va, double xb,
                                 double yb, double vb, double level) {
  const double t = (level - va) / (vb - va);
  return {xa + t * (xb - xa), ya + t * (yb - ya)};
}

}  // namespace

std::vector<Segment2D> marching_squares(const ScalarField& f, double level) {
  const Grid& g = f.grid();
  if (g.dims() != 2)
    throw DimensionMismatch("marching_squares: field must be 2-D");
  const std::size_t n0 = g.shape()[0], n1 = g.shape()[1];
  const double lo0 = g.lo()[0], lo1 = g.lo()[1];
  const double h0 = g.spacing()[0], h1 = g.spacing()[1];
  std::span<const double> v = f.values();

  std::vector<Segment2D> segments;
  for (std::size_t i = 0; i + 1 < n0; ++i) {
    for (std::size_t j = 0; j + 1 < n1; ++j) {
      const double v00 = v[i * n1 + j];
      const double v10 = v[(i + 1) * n1 + j];
      const double v11 = v[(i + 1) * n1 + j + 1];
      const double v01 = v[i * n1 + j + 1];
      const unsigned code = (v00 >= level ? 1u : 0u) |
                            (v10 >= level ? 2u : 0u) |
                            (v11 >= level ? 4u : 0u) |
                            (v01 >= level ? 8u : 0u);
      if (code == 0 || code == 15) continue;
      const double x0 = lo0 + static_cast<double>(i) * h0;
      const double x1 = x0 + h0;
      const double y0 = lo1 + static_cast<double>(j) * h1;
      const double y1 = y0 + h1;
      // Edge crossings, present only when the adjacent corners straddle the
      // level: bottom 00-10, right 10-11, top 11-01, left 01-00.
      auto bottom = [&] { return edge_point(x0, y0, v00, x1, y0, v10, level); };
      auto right = [&] { return edge_point(x1, y0, v10, x1, y1, v11, level); };
      auto top = [&] { return edge_point(x1, y1, v11, x0, y1, v01, level); };
      auto left = [&] { return edge_point(x0, y1, v01, x0, y0, v00, level); };
      switch (code) {
        case 1:
          segments.push_back({left(), bottom()});
          break;
        case 2:
          segments.push_back({bottom(), right()});
          break;
        case 3:
          segments.push_back({left(), right()});
          break;
        case 4:
          segments.push_back({right(), top()});
          break;
        case 5: {
          const double center = 0.25 * (v00 + v10 + v11 + v01);
          if (center >= level) {
            segments.push_back({bottom(), right()});
            segments.push_back({top(), left()});
          } else {
            segments.push_back({left(), bottom()});
            segments.push_back({right(), top()});
          }
          break;
        }
        case 6:
          segments.push_back({bottom(), top()});
          break;
        case 7:
          segments.push_back({left(), top()});
          break;
        case 8:
          segments.push_back({top(), left()});
          break;
        case 9:
          segments.push_back({bottom(), top()});
          break;
        case 10: {
          const double center = 0.25 * (v00 + v10 + v11 + v01);
          if (center >= level) {
            segments.push_back({bottom(), left()});
            segments.push_back({right(), top()});
          } else {
            segments.push_back({bottom(), right()});
            segments.push_back({top(), left()});
          }
          break;
        }
        case 11:
          segments.push_back({right(), top()});
          break;
        case 12:
          segments.push_back({right(), left()});
          break;
        case 13:
          segments.push_back({bottom(), right()});
          break;
        case 14:
          segments.push_back({left(), bottom()});
          break;
        default:
          break;
      }
    }
  }
  return segments;
}

std::vector<std::vector<std::array<double, 2>>> chain_polylines(
    const std::vector<Segment2D>& segments, double match_tol) {
  if (!(match_tol > 0.0))
    throw ConfigError("chain_polylines: match_tol must be positive");
  using Key = std::pair<long long, long long>;
  auto key_of = [match_tol](const std::array<double, 2>& p) {
    return Key{static_cast<long long>(std::llround(p[0] / match_tol)),
               static_cast<long long>(std::llround(p[1] / match_tol))};
  };
  // endpoint key -> (segment index, which end)
  std::multimap<Key, std::pair<std::size_t, int>> ends;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    ends.insert({key_of(segments[s].a), {s, 0}});
    ends.insert({key_of(segments[s].b), {s, 1}});
  }
  std::vector<bool> used(segments.size(), false);
  std::vector<std::vector<std::array<double, 2>>> polylines;

  auto next_segment = [&](const std::array<double, 2>& tip, std::size_t& seg,
                          int& end) {
    auto range = ends.equal_range(key_of(tip));
    for (auto it = range.first; it != range.second; ++it) {
      if (!used[it->second.first]) {
        seg = it->second.first;
        end = it->second.second;
        return true;
      }
    }
    return false;
  };

  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (used[s]) continue;
    used[s] = true;
    std::vector<std::array<double, 2>> line{segments[s].a, segments[s].b};
    // Grow forward from the b end, then backward from the a end.
    for (int dir = 0; dir < 2; ++dir) {
      while (true) {
        const std::array<double, 2>& tip = dir == 0 ? line.back() : line.front();
        std::size_t seg = 0;
        int end = 0;
        if (!next_segment(tip, seg, end)) break;
        used[seg] = true;
        const std::array<double, 2>& far =
            end == 0 ? segments[seg].b : segments[seg].a;
        if (dir == 0) {
          line.push_back(far);
        } else {
          line.insert(line.begin(), far);
        }
      }
    }
    polylines.push_back(std::move(line));
  }
  return polylines;
}

}  // namespace hjpatch
