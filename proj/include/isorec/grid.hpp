#pragma once

#include <cstddef>
#include <vector>

#include "isorec/errors.hpp"

namespace isorec {

/// Rectangular query grid: the Cartesian product of per-dimension sorted
/// coordinate vectors. Points are flattened row-major (last dim fastest).
struct QueryGrid {
  std::vector<std::vector<double>> axes;

  std::size_t dim() const { return axes.size(); }

  std::size_t size() const {
    if (axes.empty()) return 0;
    std::size_t s = 1;
    for (const auto& a : axes) s *= a.size();
    return s;
  }

  std::vector<std::size_t> strides() const {
    std::vector<std::size_t> st(axes.size(), 1);
    for (std::size_t j = axes.size(); j-- > 1;)
      st[j - 1] = st[j] * axes[j].size();
    return st;
  }

  std::vector<std::size_t> unflatten(std::size_t flat) const {
    std::vector<std::size_t> idx(axes.size());
    for (std::size_t j = axes.size(); j-- > 0;) {
      idx[j] = flat % axes[j].size();
      flat /= axes[j].size();
    }
    return idx;
  }

  std::vector<double> point(std::size_t flat) const {
    const auto idx = unflatten(flat);
    std::vector<double> p(axes.size());
    for (std::size_t j = 0; j < axes.size(); ++j) p[j] = axes[j][idx[j]];
    return p;
  }
};

inline QueryGrid equispaced_grid(const std::vector<double>& lo,
                                 const std::vector<double>& hi,
                                 std::size_t points_per_dim) {
  if (points_per_dim < 2) throw UserError("grid needs at least 2 points per dim");
  QueryGrid g;
  g.axes.resize(lo.size());
  for (std::size_t j = 0; j < lo.size(); ++j) {
    g.axes[j].resize(points_per_dim);
    for (std::size_t i = 0; i < points_per_dim; ++i)
      g.axes[j][i] = lo[j] + (hi[j] - lo[j]) * static_cast<double>(i) /
                                 static_cast<double>(points_per_dim - 1);
  }
  return g;
}

}  // namespace isorec
